"""Black-box oracle interfaces and the exact query ledger.

Everything downstream of this module talks to the classifier, generator,
encoder, and embedder only through these interfaces. Only classifier queries
are charged against the attack budget: generator and encoder calls are
attacker-local and free.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BoundsBox, Vector
from .errors import BudgetExhausted, ContractViolation, DimensionMismatch


class ClassifierOracle:
    """Hard-label classifier endpoint.

    ``classify`` must be deterministic: identical input vector implies the
    identical label. Confidence, when present, refers to the returned top-1
    label; the attack engine never reads it (hard-label threat model), but the
    brute-force sampler does.
    """

    num_classes: int
    input_dim: int
    concurrent: bool = False

    def classify(self, x: Vector) -> tuple[int, Optional[float]]:
        raise NotImplementedError

    def classify_batch(self, xs: Sequence[Vector]) -> list[tuple[int, Optional[float]]]:
        """Classify many inputs; results in input order."""
        return [self.classify(x) for x in xs]


class GeneratorOracle:
    """Deterministic latent -> image map with a declared latent box."""

    latent_dim: int
    image_dim: int
    latent_bounds: BoundsBox
    concurrent: bool = False

    def generate(self, w: Vector) -> Vector:
        raise NotImplementedError


class EncoderOracle:
    """Image -> latent map; outputs must land inside the latent box after normalization."""

    concurrent: bool = False

    def encode(self, x: Vector) -> Vector:
        raise NotImplementedError


class EmbeddingOracle:
    """Deterministic image -> embedding map used by similarity metrics."""

    name: str
    embed_dim: int

    def embed(self, x: Vector) -> Vector:
        raise NotImplementedError


@dataclass
class FnClassifier(ClassifierOracle):
    """Classifier backed by a plain function, for tests and adapters."""

    fn: Callable[[Vector], tuple[int, Optional[float]]]
    num_classes: int = 2
    input_dim: int = 1
    concurrent: bool = False

    def classify(self, x: Vector) -> tuple[int, Optional[float]]:
        return self.fn(x)


class QueryLedger:
    """Exact, monotone counter of oracle invocations.

    ``classify_count`` equals exactly the number of classify invocations since
    the last reset; it never exceeds ``budget`` when a budget is set. Updates
    are atomic so concurrent probes cannot lose counts.
    """

    def __init__(self, budget: Optional[int] = None):
        if budget is not None and budget < 0:
            raise ContractViolation("budget must be non-negative")
        self.budget = budget
        self.classify_count = 0
        self.generate_count = 0
        self._lock = threading.Lock()
        self._on_classify: Optional[Callable[[int], None]] = None

    def charge_classify(self) -> None:
        with self._lock:
            if self.budget is not None and self.classify_count >= self.budget:
                raise BudgetExhausted(
                    f"classify budget of {self.budget} exhausted"
                )
            self.classify_count += 1
            count = self.classify_count
        if self._on_classify is not None:
            self._on_classify(count)

    def charge_generate(self) -> None:
        with self._lock:
            self.generate_count += 1

    @property
    def remaining(self) -> Optional[int]:
        if self.budget is None:
            return None
        return self.budget - self.classify_count

    def reset(self) -> None:
        with self._lock:
            self.classify_count = 0
            self.generate_count = 0


def reset_ledger(ledger: QueryLedger) -> None:
    ledger.reset()


@dataclass(frozen=True)
class DecisionFn:
    """Success predicate of the attack in label space.

    targeted:   decision(x) is true iff classify(x) == target_label
    untargeted: decision(x) is true iff classify(x) != source_label
    """

    target_label: Optional[int] = None
    mode: str = "targeted"
    source_label: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("targeted", "untargeted"):
            raise ContractViolation(f"unknown decision mode {self.mode!r}")
        if self.mode == "targeted" and self.target_label is None:
            raise ContractViolation("targeted decision needs a target_label")
        if self.mode == "untargeted" and self.source_label is None:
            raise ContractViolation("untargeted decision needs a source_label")

    def matches(self, label: int) -> bool:
        if self.mode == "targeted":
            return label == self.target_label
        return label != self.source_label


def decide(d: DecisionFn, c: ClassifierOracle, ledger: QueryLedger, x: Vector) -> bool:
    """Evaluate the decision predicate; charges exactly one classify query."""
    if x.shape != (c.input_dim,):
        raise DimensionMismatch(f"classifier expects dim {c.input_dim}, got {x.shape}")
    ledger.charge_classify()
    label, _ = c.classify(x)
    return d.matches(label)


def decide_latent(
    d: DecisionFn,
    c: ClassifierOracle,
    g: GeneratorOracle,
    ledger: QueryLedger,
    w: Vector,
) -> bool:
    """decision(G(w)); charges one classify and one (budget-free) generate."""
    if w.shape != (g.latent_dim,):
        raise DimensionMismatch(f"generator expects latent dim {g.latent_dim}, got {w.shape}")
    if not g.latent_bounds.contains(w, atol=1e-12):
        raise ContractViolation("latent lies outside the generator's latent bounds")
    ledger.charge_generate()
    x = g.generate(w)
    return decide(d, c, ledger, x)


class CachingClassifier(ClassifierOracle):
    """Memoizing wrapper around a classifier.

    Disabled by default everywhere: caching changes query counts and would
    corrupt budget-grid comparisons. Provided for callers that explicitly
    want cheap re-classification outside a measured attack.
    """

    def __init__(self, inner: ClassifierOracle):
        self.inner = inner
        self.num_classes = inner.num_classes
        self.input_dim = inner.input_dim
        self.concurrent = False  # the cache dict is not synchronized
        self._cache: dict[bytes, tuple[int, Optional[float]]] = {}

    def classify(self, x: Vector) -> tuple[int, Optional[float]]:
        key = np.ascontiguousarray(x).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self.inner.classify(x)
            self._cache[key] = hit
        return hit


class CountingClassifier(ClassifierOracle):
    """Wrapper that independently counts classify calls (test instrumentation)."""

    def __init__(self, inner: ClassifierOracle):
        self.inner = inner
        self.num_classes = inner.num_classes
        self.input_dim = inner.input_dim
        self.concurrent = inner.concurrent
        self.calls = 0

    def classify(self, x: Vector) -> tuple[int, Optional[float]]:
        self.calls += 1
        return self.inner.classify(x)
