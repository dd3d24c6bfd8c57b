"""Brute-force latent sampling: class coverage tables and attack seed points.

Draw random latents, classify their generations, and tabulate how many
classes were hit at all / with confidence above 0.5 / above 0.9 at each
budget checkpoint. The best-confidence latent per class is kept as a starting
point for attacks that have no target image.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Vector, clamp_to_bounds, make_rng
from .errors import ContractViolation, TargetNotFound
from .oracles import ClassifierOracle, GeneratorOracle, QueryLedger

CONF_THRESHOLDS = (0.5, 0.9)


@dataclass
class ClassCoverageTable:
    num_classes: int
    query_budgets: list[int]
    count_any: list[int] = field(default_factory=list)
    count_gt50: list[int] = field(default_factory=list)
    count_gt90: list[int] = field(default_factory=list)

    def rows(self) -> list[tuple[int, int, int, int]]:
        return list(zip(self.query_budgets, self.count_any, self.count_gt50, self.count_gt90))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["budget", "count_any", "count_gt50", "count_gt90"])
            w.writerows(self.rows())


@dataclass
class TargetBank:
    """Per-class best-found (latent, confidence) from brute-force sampling."""

    entries: dict[int, tuple[Vector, float]] = field(default_factory=dict)

    def store(self, label: int, latent: Vector, confidence: float) -> None:
        # strict > keeps the earliest sample on confidence ties, for determinism
        if label not in self.entries or confidence > self.entries[label][1]:
            self.entries[label] = (np.array(latent, copy=True), float(confidence))

    def save(self, path) -> None:
        obj = {
            str(k): {"latent": v[0].tolist(), "confidence": v[1]}
            for k, v in sorted(self.entries.items())
        }
        with open(path, "w") as f:
            json.dump(obj, f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "TargetBank":
        with open(path) as f:
            obj = json.load(f)
        bank = cls()
        for k, v in obj.items():
            bank.entries[int(k)] = (np.array(v["latent"]), float(v["confidence"]))
        return bank


def brute_force_sample(
    g: GeneratorOracle,
    c: ClassifierOracle,
    budgets: list[int],
    sampler: str = "uniform_box",
    seed: int = 0,
    ledger: Optional[QueryLedger] = None,
) -> tuple[ClassCoverageTable, TargetBank]:
    """Cumulatively sample latents up to the largest budget.

    ``sampler`` is either uniform over the latent box or a Gaussian centered
    in the box (clipped back into it); the true latent prior of a real
    generator is unknown, so the choice is explicit. Deterministic per seed.
    """
    if list(budgets) != sorted(budgets):
        raise ContractViolation("budgets must be sorted ascending")
    if sampler not in ("uniform_box", "gaussian"):
        raise ContractViolation(f"unknown sampler {sampler!r}")
    rng = make_rng(seed)
    ledger = ledger if ledger is not None else QueryLedger()
    b = g.latent_bounds
    center = 0.5 * (b.low + b.high)
    scale = 0.25 * (b.high - b.low)

    best_conf = np.full(c.num_classes, -np.inf)
    bank = TargetBank()
    table = ClassCoverageTable(num_classes=c.num_classes, query_budgets=list(budgets))

    drawn = 0
    for budget in budgets:
        while drawn < budget:
            if sampler == "uniform_box":
                w = rng.uniform(b.low, b.high, size=g.latent_dim)
            else:
                w = clamp_to_bounds(center + scale * rng.standard_normal(g.latent_dim), b)
            ledger.charge_generate()
            x = g.generate(w)
            ledger.charge_classify()
            label, conf = c.classify(x)
            conf = 1.0 if conf is None else conf
            if conf > best_conf[label]:
                best_conf[label] = conf
                bank.store(label, w, conf)
            drawn += 1
        found = best_conf > -np.inf
        table.count_any.append(int(found.sum()))
        table.count_gt50.append(int((best_conf > CONF_THRESHOLDS[0]).sum()))
        table.count_gt90.append(int((best_conf > CONF_THRESHOLDS[1]).sum()))
    return table, bank


def seed_attack_from_bank(bank: TargetBank, target: int) -> Vector:
    """Stored latent for ``target``; callers must re-verify the decision."""
    if target not in bank.entries:
        raise TargetNotFound(f"no latent stored for class {target}")
    return bank.entries[target][0]
