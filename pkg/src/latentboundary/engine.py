"""Decision-based boundary attack core for an arbitrary bounded vector space.

One iteration: bisect the segment to the source down to the decision
boundary, estimate the boundary-normal direction from hard-label probes on a
small sphere, then take the largest geometrically-halved step that stays
adversarial. Iterates are accepted only if they got strictly closer to the
source, so the recorded distance curve is monotone non-increasing and every
recorded iterate is adversarial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BoundsBox, Vector, clamp_to_bounds, l2_distance, make_rng, sample_unit_sphere
from .errors import BudgetExhausted, ContractViolation, InvalidEndpoints, StepSearchFailed
from .oracles import QueryLedger

Decision = Callable[[Vector], bool]


@dataclass(frozen=True)
class AttackConfig:
    """All engine tunables. Defaults keep desk-scale runs under seconds."""

    max_queries: int
    bounds: BoundsBox
    seed: int = 0
    theta_bin: float = 1e-3  # binary-search stop width, relative to the segment
    b0: int = 20  # initial gradient-estimate batch size
    delta_scale: float = 6.0  # probe radius coefficient (see pilot notes in tests/fixtures)
    k_max: int = 20  # step-search halvings before giving up
    distance: str = "l2"
    max_iterations: Optional[int] = None
    converge_dist: float = 0.0
    checkpoints: tuple[int, ...] = ()  # ledger readings at which to snapshot

    def __post_init__(self):
        if self.theta_bin <= 0:
            raise ContractViolation("theta_bin must be positive")
        if self.b0 < 1 or self.max_queries < 0:
            raise ContractViolation("b0 >= 1 and max_queries >= 0 required")
        if self.distance != "l2":
            raise ContractViolation(f"unsupported distance {self.distance!r}")
        if tuple(sorted(self.checkpoints)) != tuple(self.checkpoints):
            raise ContractViolation("checkpoints must be sorted ascending")


@dataclass
class IterationRecord:
    t: int
    queries: int  # cumulative ledger reading after this iteration
    dist: float  # accepted (monotone) distance to the source
    step_size: float
    batch_size: int
    binsearch_queries: int
    grad_queries: int
    step_queries: int
    point: Vector  # accepted iterate; decision(point) is true


@dataclass
class CheckpointRecord:
    budget: int  # requested ledger reading
    queries: int  # actual ledger reading when snapped (== budget unless run ended early)
    dist: float
    point: Vector


@dataclass
class AttackTrace:
    records: list[IterationRecord] = field(default_factory=list)
    checkpoints: list[CheckpointRecord] = field(default_factory=list)
    setup_queries: int = 0
    tail_queries: int = 0  # queries spent in a phase the budget cut short
    terminal_reason: str = "budget_exhausted"

    def total_phase_queries(self) -> int:
        return (
            self.setup_queries
            + self.tail_queries
            + sum(r.binsearch_queries + r.grad_queries + r.step_queries for r in self.records)
        )

    def to_dict(self) -> dict:
        return {
            "setup_queries": self.setup_queries,
            "tail_queries": self.tail_queries,
            "terminal_reason": self.terminal_reason,
            "records": [
                {
                    "t": r.t,
                    "queries": r.queries,
                    "dist": r.dist,
                    "step_size": r.step_size,
                    "batch_size": r.batch_size,
                    "binsearch_queries": r.binsearch_queries,
                    "grad_queries": r.grad_queries,
                    "step_queries": r.step_queries,
                    "point": r.point.tolist(),
                }
                for r in self.records
            ],
            "checkpoints": [
                {
                    "budget": c.budget,
                    "queries": c.queries,
                    "dist": c.dist,
                    "point": c.point.tolist(),
                }
                for c in self.checkpoints
            ],
        }


def binary_search_boundary(
    decision: Decision,
    x_adv: Vector,
    x_src: Vector,
    theta: float,
    check_endpoints: bool = True,
) -> Vector:
    """Bisect the segment [x_src, x_adv] down to an adversarial near-boundary point.

    The returned point is adversarial and lies within theta * ||x_adv - x_src||
    of the last known non-adversarial interpolant. Uses ceil(log2(1/theta))
    queries plus two endpoint checks when requested. The adversarial side keeps
    the midpoint on a positive decision, so the result is always adversarial.
    """
    if x_adv.shape != x_src.shape:
        raise ContractViolation("endpoints must share a dimension")
    if check_endpoints:
        if not decision(x_adv):
            raise InvalidEndpoints("x_adv is not adversarial")
        if decision(x_src):
            raise InvalidEndpoints("x_src is adversarial")

    lo, hi = 0.0, 1.0  # interpolation weight towards x_adv; decision true at hi
    while hi - lo > theta:
        mid = (lo + hi) / 2.0
        if decision(x_src + mid * (x_adv - x_src)):
            hi = mid
        else:
            lo = mid
    return x_src + hi * (x_adv - x_src)


def estimate_gradient_direction(
    decision: Decision,
    x_b: Vector,
    delta: float,
    batch: int,
    rng: np.random.Generator,
    bounds: BoundsBox,
) -> Vector:
    """Monte-Carlo boundary-normal estimate from hard-label sphere probes.

    v = normalize( mean_b (phi_b - phi_bar) * u_b ) with u_b uniform on the
    unit sphere and phi_b = +1 if the clamped probe is adversarial else -1.
    Consumes exactly ``batch`` classifier queries. If every probe agrees, the
    baseline-corrected mean vanishes and sign(phi) * u_1 is returned instead.
    Probes are drawn up front and reduced in probe-index order so traces stay
    reproducible regardless of how the queries are issued.
    """
    if batch < 1 or delta <= 0:
        raise ContractViolation("batch >= 1 and delta > 0 required")
    dim = x_b.size
    probes = [sample_unit_sphere(dim, rng) for _ in range(batch)]
    phis = np.empty(batch)
    for i, u in enumerate(probes):
        phis[i] = 1.0 if decision(clamp_to_bounds(x_b + delta * u, bounds)) else -1.0

    if np.all(phis == phis[0]):
        return phis[0] * probes[0]
    weights = phis - phis.mean()
    v = np.zeros(dim)
    for w, u in zip(weights, probes):
        v += w * u
    v /= batch
    norm = np.linalg.norm(v)
    if norm == 0.0:  # unreachable unless weights cancel exactly
        return phis[0] * probes[0]
    return v / norm


def geometric_step_search(
    decision: Decision,
    x_b: Vector,
    v: Vector,
    initial_step: float,
    bounds: BoundsBox,
    k_max: int = 20,
) -> tuple[Vector, float]:
    """Largest step initial_step / 2^k (k in [0, k_max]) that stays adversarial.

    Consumes k+1 classifier queries for the accepted k. A zero initial step
    returns (x_b, 0) without querying; the boundary point is adversarial
    already.
    """
    if initial_step < 0:
        raise ContractViolation("initial_step must be non-negative")
    if initial_step == 0.0:
        return x_b, 0.0
    step = initial_step
    for _ in range(k_max + 1):
        x_next = clamp_to_bounds(x_b + step * v, bounds)
        if decision(x_next):
            return x_next, step
        step /= 2.0
    raise StepSearchFailed(f"no adversarial step within {k_max} halvings")


def run_attack(
    decision: Decision,
    x_init: Vector,
    x_src: Vector,
    cfg: AttackConfig,
    ledger: QueryLedger,
) -> tuple[Vector, AttackTrace]:
    """Run the full boundary attack; deterministic given (cfg.seed, oracles).

    ``decision`` must charge ``ledger`` once per call and raise
    BudgetExhausted when the budget runs out; budget exhaustion is a normal
    termination, not an error. The returned point is adversarial whenever at
    least the endpoint checks fit in the budget; with a zero budget the
    initial point is returned unchanged.
    """
    if x_init.shape != x_src.shape:
        raise ContractViolation("x_init and x_src must share a dimension")
    rng = make_rng(cfg.seed)
    trace = AttackTrace()
    dim = x_init.size

    best = np.array(x_init, dtype=np.float64, copy=True)
    best_dist = l2_distance(best, x_src)

    pending = list(cfg.checkpoints)

    def flush_checkpoints(final: bool = False) -> None:
        # A checkpoint snaps the accepted iterate the moment the next query
        # would exceed it, which equals the result of a fresh run truncated
        # at that budget.
        while pending and (ledger.classify_count >= pending[0] or final):
            trace.checkpoints.append(
                CheckpointRecord(
                    budget=pending.pop(0),
                    queries=ledger.classify_count,
                    dist=best_dist,
                    point=best.copy(),
                )
            )

    def guarded(x: Vector) -> bool:
        flush_checkpoints()
        return decision(x)

    q_start = ledger.classify_count
    try:
        if not guarded(x_init):
            raise InvalidEndpoints("x_init is not adversarial")
        if guarded(x_src):
            raise InvalidEndpoints("x_src is adversarial; nothing to attack")
        trace.setup_queries = ledger.classify_count - q_start

        cand = best
        t = 0
        while True:
            t += 1
            if cfg.max_iterations is not None and t > cfg.max_iterations:
                trace.terminal_reason = "max_iterations"
                break

            q0 = ledger.classify_count
            x_b = binary_search_boundary(
                guarded, cand, x_src, cfg.theta_bin, check_endpoints=False
            )
            bs_q = ledger.classify_count - q0
            d_b = l2_distance(x_b, x_src)
            if d_b < best_dist:
                best, best_dist = x_b, d_b
            else:
                x_b = best  # accept-only-if-closer

            batch = math.ceil(cfg.b0 * math.sqrt(t))
            delta = cfg.delta_scale * best_dist / dim
            q1 = ledger.classify_count
            if delta > 0.0:
                v = estimate_gradient_direction(guarded, x_b, delta, batch, rng, cfg.bounds)
            else:
                v = np.zeros(dim)
            grad_q = ledger.classify_count - q1

            q2 = ledger.classify_count
            try:
                cand, step = geometric_step_search(
                    guarded, x_b, v, best_dist / math.sqrt(t), cfg.bounds, cfg.k_max
                )
            except StepSearchFailed:
                cand, step = x_b, 0.0
            step_q = ledger.classify_count - q2

            trace.records.append(
                IterationRecord(
                    t=t,
                    queries=ledger.classify_count,
                    dist=best_dist,
                    step_size=step,
                    batch_size=batch,
                    binsearch_queries=bs_q,
                    grad_queries=grad_q,
                    step_queries=step_q,
                    point=best.copy(),
                )
            )

            if best_dist <= cfg.converge_dist:
                trace.terminal_reason = "converged"
                break
    except BudgetExhausted:
        trace.terminal_reason = "budget_exhausted"

    spent = ledger.classify_count - q_start
    trace.tail_queries = spent - trace.total_phase_queries()
    flush_checkpoints(final=True)
    return best, trace
