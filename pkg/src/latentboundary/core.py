"""Vector primitives, distance metrics, and seedable randomness.

All vectors are flat 1-D float64 numpy arrays. Oracle wire formats may carry
32-bit values; they are widened to 64-bit on receipt so the engine's binary
searches keep headroom below the boundary tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionMismatch

Vector = np.ndarray


def as_vector(data) -> Vector:
    """Validate and convert ``data`` into a flat float64 vector."""
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ContractViolation(f"vector must be 1-D and non-empty, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("vector contains non-finite coordinates")
    return v


@dataclass(frozen=True)
class BoundsBox:
    """Coordinate-wise box constraint [low, high]."""

    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ContractViolation(f"bounds require low < high, got [{self.low}, {self.high}]")

    @property
    def span(self) -> float:
        return self.high - self.low

    def contains(self, v: Vector, atol: float = 0.0) -> bool:
        return bool(np.all(v >= self.low - atol) and np.all(v <= self.high + atol))


UNIT_BOX = BoundsBox(0.0, 1.0)


def _check_dims(a: Vector, b: Vector) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def l2_distance(a: Vector, b: Vector) -> float:
    """Euclidean distance between two equal-dimension vectors."""
    _check_dims(a, b)
    return float(np.linalg.norm(a - b))


def mse(a: Vector, b: Vector) -> float:
    """Mean squared error between two equal-dimension vectors."""
    _check_dims(a, b)
    d = a - b
    return float(np.dot(d, d) / a.size)


def clamp_to_bounds(v: Vector, bounds: BoundsBox) -> Vector:
    """Project ``v`` coordinate-wise into the box. Idempotent."""
    return np.clip(v, bounds.low, bounds.high)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based seedable stream; never global state.

    With a fixed seed, any sequence of draws is bit-reproducible across runs.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_unit_sphere(dim: int, rng: np.random.Generator) -> Vector:
    """Draw a vector uniformly from the unit sphere in ``dim`` dimensions."""
    if dim < 1:
        raise ContractViolation("sphere sampling requires dim >= 1")
    while True:
        g = rng.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm > 0.0:  # zero draw has probability 0 but guard anyway
            return g / norm
