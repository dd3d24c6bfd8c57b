"""Similarity metrics and the budget-sweep experiment harness.

One 20,000-query (or max-of-grid) run per cell is checkpointed at every grid
point, so a single run serves all budgets; engine determinism makes the
checkpointed metrics identical to fresh truncated runs.
"""

from __future__ import annotations

import csv
import dataclasses
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import UNIT_BOX, Vector, l2_distance, make_rng
from .engine import AttackConfig
from .errors import ContractViolation
from .latent import LatentAttackJob, LatentNormalizer, latent_attack, image_space_attack
from .oracles import EmbeddingOracle
from .synthetic import SyntheticSuite

DEFAULT_GRID = (500, 1000, 3000, 5000, 10000, 20000)
METHODS = ("latent", "image")


def cosine_similarity(e1: Vector, e2: Vector) -> float:
    """(e1 . e2) / (||e1|| ||e2||), in [-1, 1]."""
    if e1.shape != e2.shape:
        raise ContractViolation("embedding dims differ")
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0.0 or n2 == 0.0:
        raise ContractViolation("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(e1, e2) / (n1 * n2), -1.0, 1.0))


class RandomProjectionEmbedder(EmbeddingOracle):
    """Seeded random orthonormal projection of images to a low dimension.

    A deterministic, weight-free similarity embedding that approximately
    preserves l2 geometry. Stands in where a learned perceptual embedding
    would be plugged in over the remote bridge.
    """

    def __init__(self, input_dim: int, embed_dim: int = 128, seed: int = 0,
                 center: float = 0.5):
        if embed_dim > input_dim:
            raise ContractViolation("embed_dim must not exceed input_dim")
        rng = make_rng(seed)
        g = rng.standard_normal((input_dim, embed_dim))
        q, r = np.linalg.qr(g)
        self.projection = q * np.sign(np.diag(r))
        self.input_dim = input_dim
        self.embed_dim = embed_dim
        self.center = center  # mid-gray; keeps cosine from saturating on the DC offset
        self.name = f"randproj-{embed_dim}"

    def embed(self, x: Vector) -> Vector:
        return self.projection.T @ (x - self.center)


def default_embedder(image_dim: int) -> "RandomProjectionEmbedder":
    """The standard similarity embedder, capped to the image dimension."""
    return RandomProjectionEmbedder(image_dim, embed_dim=min(128, image_dim), seed=0)


@dataclass
class SweepRow:
    method: str
    pair: int
    seed: int
    budget: int
    ok: bool
    latent_l2: Optional[float] = None
    image_l2: Optional[float] = None
    embed_cosine: Optional[float] = None
    lpips: Optional[float] = None  # filled only by remote embedders; absent otherwise
    error: str = ""


@dataclass
class SweepReport:
    grid: list[int]
    rows: list[SweepRow] = field(default_factory=list)

    def aggregate(self, method: str, budget: int, metric: str) -> dict[str, float]:
        vals = [
            getattr(r, metric)
            for r in self.rows
            if r.ok and r.method == method and r.budget == budget and getattr(r, metric) is not None
        ]
        if not vals:
            return {"mean": float("nan"), "median": float("nan"), "n": 0}
        return {"mean": statistics.fmean(vals), "median": statistics.median(vals), "n": len(vals)}

    def write_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None else repr(v)

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["method", "pair", "seed", "budget", "ok",
                 "latent_l2", "image_l2", "embed_cosine", "lpips", "error"]
            )
            for r in self.rows:
                w.writerow(
                    [r.method, r.pair, r.seed, r.budget, int(r.ok),
                     fmt(r.latent_l2), fmt(r.image_l2), fmt(r.embed_cosine),
                     fmt(r.lpips), r.error]
                )

    @classmethod
    def read_csv(cls, path, grid: Optional[Sequence[int]] = None) -> "SweepReport":
        def parse(s):
            return None if s == "" else float(s)

        rows = []
        with open(path, newline="") as f:
            for rec in csv.DictReader(f):
                rows.append(
                    SweepRow(
                        method=rec["method"],
                        pair=int(rec["pair"]),
                        seed=int(rec["seed"]),
                        budget=int(rec["budget"]),
                        ok=bool(int(rec["ok"])),
                        latent_l2=parse(rec["latent_l2"]),
                        image_l2=parse(rec["image_l2"]),
                        embed_cosine=parse(rec["embed_cosine"]),
                        lpips=parse(rec["lpips"]),
                        error=rec["error"],
                    )
                )
        budgets = sorted({r.budget for r in rows}) if grid is None else list(grid)
        return cls(grid=budgets, rows=rows)


def make_pairs(
    suite: SyntheticSuite, n_pairs: int, seed: int = 0
) -> list[tuple[Vector, Vector, int]]:
    """Draw (x_src, x_trg, y_trg) pairs from the suite's labeled samples."""
    rng = make_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        src_class, trg_class = rng.choice(suite.num_classes, size=2, replace=False)
        i = int(rng.choice(suite.samples_of_class(int(src_class))))
        j = int(rng.choice(suite.samples_of_class(int(trg_class))))
        pairs.append((suite.sample_image(i), suite.sample_image(j), int(trg_class)))
    return pairs


def run_sweep(
    suite: SyntheticSuite,
    pairs: Sequence[tuple[Vector, Vector, int]],
    grid: Sequence[int] = DEFAULT_GRID,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    methods: Sequence[str] = METHODS,
    embedder: Optional[EmbeddingOracle] = None,
    base_cfg: Optional[AttackConfig] = None,
) -> SweepReport:
    """Run every (pair, seed, method) cell once and checkpoint at the grid.

    Per-pair failures are recorded in the report rows, never abort the sweep.
    """
    grid = sorted(grid)
    if embedder is None:
        embedder = default_embedder(suite.image_dim)
    report = SweepReport(grid=list(grid))
    normalizer = LatentNormalizer.calibrate(suite.generator, suite.encoder, seed=0)

    for p_idx, (x_src, x_trg, y_trg) in enumerate(pairs):
        e_src = embedder.embed(x_src)
        for seed in seeds:
            for method in methods:
                if base_cfg is not None:
                    cfg = dataclasses.replace(
                        base_cfg, max_queries=max(grid), bounds=UNIT_BOX,
                        seed=seed, checkpoints=tuple(grid),
                    )
                else:
                    cfg = AttackConfig(
                        max_queries=max(grid), bounds=UNIT_BOX,
                        seed=seed, checkpoints=tuple(grid),
                    )
                try:
                    if method == "latent":
                        job = LatentAttackJob(
                            x_src=x_src, x_trg=x_trg, target_label=y_trg, cfg=cfg,
                            classifier=suite.classifier, generator=suite.generator,
                            encoder=suite.encoder, normalizer=normalizer,
                        )
                        result = latent_attack(job)
                        w_src_raw = normalizer.denormalize(result.w_src)
                        for cp in result.trace.checkpoints:
                            w = normalizer.denormalize(cp.point)
                            x = suite.generator.generate(w)
                            report.rows.append(
                                SweepRow(
                                    method=method, pair=p_idx, seed=seed, budget=cp.budget,
                                    ok=True,
                                    latent_l2=l2_distance(w, w_src_raw),
                                    image_l2=l2_distance(x, x_src),
                                    embed_cosine=cosine_similarity(embedder.embed(x), e_src),
                                )
                            )
                    elif method == "image":
                        _, trace, _ = image_space_attack(
                            x_src, x_trg, y_trg, suite.classifier, cfg
                        )
                        for cp in trace.checkpoints:
                            report.rows.append(
                                SweepRow(
                                    method=method, pair=p_idx, seed=seed, budget=cp.budget,
                                    ok=True,
                                    image_l2=l2_distance(cp.point, x_src),
                                    embed_cosine=cosine_similarity(
                                        embedder.embed(cp.point), e_src
                                    ),
                                )
                            )
                    else:
                        raise ContractViolation(f"unknown method {method!r}")
                except Exception as exc:  # per-cell failures must not abort the sweep
                    for budget in grid:
                        report.rows.append(
                            SweepRow(method=method, pair=p_idx, seed=seed, budget=budget,
                                     ok=False, error=f"{type(exc).__name__}: {exc}")
                        )
    return report
