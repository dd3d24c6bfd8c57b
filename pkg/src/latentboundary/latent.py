"""Latent-space attack orchestration.

Encode the source and target images, normalize their latents into the unit
box, run the boundary-attack engine on the latent coordinates through the
generator, then decode the adversarial latent back to an image. The
image-space baseline runs the same engine directly on image coordinates.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import UNIT_BOX, BoundsBox, Vector, clamp_to_bounds, l2_distance, make_rng
from .engine import AttackConfig, AttackTrace, run_attack
from .errors import ContractViolation, EncodingInvalid
from .oracles import (
    ClassifierOracle,
    DecisionFn,
    EmbeddingOracle,
    EncoderOracle,
    GeneratorOracle,
    QueryLedger,
    decide,
    decide_latent,
)

CALIBRATION_SAMPLES = 1000


@dataclass(frozen=True)
class LatentNormalizer:
    """Invertible per-coordinate affine map of raw latents onto [0, 1].

    Calibrated from min/max statistics of a fixed, seeded sample of encoder
    outputs. Coordinates with degenerate spread get a unit span so the map
    stays invertible.
    """

    low: np.ndarray
    high: np.ndarray

    def normalize(self, w: Vector) -> Vector:
        return (w - self.low) / (self.high - self.low)

    def denormalize(self, z: Vector) -> Vector:
        return self.low + z * (self.high - self.low)

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LatentNormalizer":
        return cls(low=np.array(d["low"]), high=np.array(d["high"]))

    @classmethod
    def identity(cls, dim: int) -> "LatentNormalizer":
        return cls(low=np.zeros(dim), high=np.ones(dim))

    @classmethod
    def calibrate(
        cls,
        generator: GeneratorOracle,
        encoder: EncoderOracle,
        n: int = CALIBRATION_SAMPLES,
        seed: int = 0,
    ) -> "LatentNormalizer":
        rng = make_rng(seed)
        b = generator.latent_bounds
        lo = np.full(generator.latent_dim, np.inf)
        hi = np.full(generator.latent_dim, -np.inf)
        for _ in range(n):
            w = rng.uniform(b.low, b.high, size=generator.latent_dim)
            w_enc = encoder.encode(generator.generate(w))
            lo = np.minimum(lo, w_enc)
            hi = np.maximum(hi, w_enc)
        degenerate = hi - lo < 1e-12
        hi = np.where(degenerate, lo + 1.0, hi)
        return cls(low=lo, high=hi)


class NormalizedGenerator(GeneratorOracle):
    """Generator view whose latent coordinates are the normalized [0, 1] box."""

    def __init__(self, inner: GeneratorOracle, normalizer: LatentNormalizer):
        self.inner = inner
        self.normalizer = normalizer
        self.latent_dim = inner.latent_dim
        self.image_dim = inner.image_dim
        self.latent_bounds = UNIT_BOX
        self.concurrent = inner.concurrent

    def generate(self, z: Vector) -> Vector:
        return self.inner.generate(self.normalizer.denormalize(z))


@dataclass
class LatentAttackJob:
    x_src: Vector
    x_trg: Vector
    target_label: int
    cfg: AttackConfig
    classifier: ClassifierOracle
    generator: GeneratorOracle
    encoder: EncoderOracle
    normalizer: Optional[LatentNormalizer] = None
    embedder: Optional[EmbeddingOracle] = None


@dataclass
class LatentAttackResult:
    w_adv: Vector  # raw (denormalized) adversarial latent
    x_adv: Vector
    trace: AttackTrace
    final_latent_dist: float  # l2(w_adv, w_src) in raw latent coordinates
    final_image_dist: float  # l2(x_adv, x_src)
    similarity_scores: dict[str, float]
    attack_ledger: QueryLedger = None
    pre_attack_ledger: QueryLedger = None
    w_src: Vector = None
    w_trg: Vector = None
    normalizer: LatentNormalizer = None


def encode_pair(
    encoder: EncoderOracle,
    generator: GeneratorOracle,
    classifier: ClassifierOracle,
    x_src: Vector,
    x_trg: Vector,
    target_label: int,
    normalizer: LatentNormalizer,
    pre_ledger: QueryLedger,
) -> tuple[Vector, Vector]:
    """Encode both images to normalized latents and verify the target encoding.

    The validity condition is that the target latent still generates into the
    target class; without it the attack has no adversarial starting point.
    Verification queries are charged to ``pre_ledger``, never to the attack
    budget.
    """
    # Only the starting iterate must live in the attack box; the source latent
    # is a distance target and clamping it would skew the objective.
    w_src = normalizer.normalize(encoder.encode(x_src))
    w_trg = clamp_to_bounds(normalizer.normalize(encoder.encode(x_trg)), UNIT_BOX)

    d = DecisionFn(target_label=target_label, mode="targeted")
    gview = NormalizedGenerator(generator, normalizer)
    if not decide_latent(d, classifier, gview, pre_ledger, w_trg):
        raise EncodingInvalid(
            f"G(encode(x_trg)) is not classified as target {target_label}; cannot start"
        )
    return w_src, w_trg


def latent_attack(job: LatentAttackJob) -> LatentAttackResult:
    """Run the full latent-space attack for one (x_src, x_trg, target) job."""
    pre_ledger = QueryLedger()
    d = DecisionFn(target_label=job.target_label, mode="targeted")

    # Job invariant, checked before any attack query is charged.
    if not decide(d, job.classifier, pre_ledger, job.x_trg):
        raise ContractViolation("x_trg is not classified as the target label")
    if decide(d, job.classifier, pre_ledger, job.x_src):
        raise ContractViolation("x_src already classifies as the target; nothing to attack")

    normalizer = job.normalizer or LatentNormalizer.calibrate(
        job.generator, job.encoder, seed=job.cfg.seed
    )
    w_src, w_trg = encode_pair(
        job.encoder, job.generator, job.classifier,
        job.x_src, job.x_trg, job.target_label, normalizer, pre_ledger,
    )
    if l2_distance(w_src, w_trg) == 0.0:
        raise ContractViolation("source and target encode to the same latent")

    gview = NormalizedGenerator(job.generator, normalizer)
    ledger = QueryLedger(budget=job.cfg.max_queries)

    def decision(z: Vector) -> bool:
        return decide_latent(d, job.classifier, gview, ledger, z)

    # the latent attack always runs in the normalized unit box
    cfg = dataclasses.replace(job.cfg, bounds=UNIT_BOX)
    z_adv, trace = run_attack(decision, w_trg, w_src, cfg, ledger)

    w_adv = normalizer.denormalize(z_adv)
    x_adv = job.generator.generate(w_adv)
    scores: dict[str, float] = {}
    if job.embedder is not None:
        from .metrics import cosine_similarity

        scores[job.embedder.name] = cosine_similarity(
            job.embedder.embed(x_adv), job.embedder.embed(job.x_src)
        )
    return LatentAttackResult(
        w_adv=w_adv,
        x_adv=x_adv,
        trace=trace,
        final_latent_dist=l2_distance(w_adv, normalizer.denormalize(w_src)),
        final_image_dist=l2_distance(x_adv, job.x_src),
        similarity_scores=scores,
        attack_ledger=ledger,
        pre_attack_ledger=pre_ledger,
        w_src=w_src,
        w_trg=w_trg,
        normalizer=normalizer,
    )


def image_space_attack(
    x_src: Vector,
    x_trg: Vector,
    target_label: int,
    classifier: ClassifierOracle,
    cfg: AttackConfig,
) -> tuple[Vector, AttackTrace, QueryLedger]:
    """Baseline: run the engine directly on image coordinates."""
    d = DecisionFn(target_label=target_label, mode="targeted")
    ledger = QueryLedger(budget=cfg.max_queries)

    def decision(x: Vector) -> bool:
        return decide(d, classifier, ledger, x)

    x_adv, trace = run_attack(decision, x_trg, x_src, cfg, ledger)
    return x_adv, trace, ledger


def run_manifest(
    cfg: AttackConfig,
    normalizer: Optional[LatentNormalizer],
    oracle_id: str,
    metrics: dict,
    method: str,
) -> dict:
    """Everything needed to replay a run bit-exactly."""
    return {
        "method": method,
        "config": {
            "max_queries": cfg.max_queries,
            "seed": cfg.seed,
            "theta_bin": cfg.theta_bin,
            "b0": cfg.b0,
            "delta_scale": cfg.delta_scale,
            "k_max": cfg.k_max,
            "bounds": [cfg.bounds.low, cfg.bounds.high],
            "checkpoints": list(cfg.checkpoints),
        },
        "normalizer": normalizer.to_dict() if normalizer is not None else None,
        "oracle_id": oracle_id,
        "metrics": metrics,
    }


def write_json(path, obj: dict) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")
