"""
Rounding

The rounding functions f_alpha and the randomized pivot rounding driven by
them, together with exact and simulated per-step expectations.

One pivot step: pick a pivot p uniformly from the active vertices, draw a
single radius R ~ U[0, 1) and cluster p with every active u whose
f(x_pu) <= R.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel

from .exceptions import DimensionError, ModelParameterError, SizeLimitError
from .model import Clustering, EdgeSign, GraphMode, Instance, disagreement_cost
from .parallel import thread_map
from .relaxation import MetricSolution
from .triples import cost_given_pivot, lp_given_pivot

logger = structlog.get_logger(__name__)

# Regime boundary between the exponential and the step rounding function.
SMALL_ALPHA_THRESHOLD = 0.169
EXACT_EXPECTATION_CAP = 12

ArrayLike = Union[float, np.ndarray]


class RoundingVariant(str, Enum):
    SMALL_ALPHA = "small_alpha"
    LARGE_ALPHA = "large_alpha"
    BIPARTITE = "bipartite"
    TABULATED = "tabulated"


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ModelParameterError("alpha must lie in (0, 1]", alpha=alpha)


def approximation_factor(alpha: float, mode: GraphMode = GraphMode.COMPLETE) -> float:
    """3 + 2 ln(1/alpha) on complete graphs, 5 + 2 ln(1/alpha) on complete bipartite ones."""
    _check_alpha(alpha)
    base = 3.0 if mode == GraphMode.COMPLETE else 5.0
    return base + 2.0 * math.log(1.0 / alpha)


def two_weight_factor(w_plus: float, w_minus: float) -> float:
    """Factor for instances whose positive pairs all weigh w+ and negative pairs w-."""
    if w_plus <= 0 or w_minus <= 0:
        raise ModelParameterError("both weights must be positive", w_plus=w_plus, w_minus=w_minus)
    if w_plus <= w_minus:
        return 3.0
    return 3.0 + 2.0 * math.log(w_plus / w_minus)


@dataclass(frozen=True)
class RoundingFunction:
    """
    Nondecreasing f: [0, 1] -> [0, 1] with f(0) = 0 and f = 1 on [tau, 1],
    tau = 1/2 - 1/(2A). Instances are immutable and safe to share between
    threads.
    """

    variant: RoundingVariant
    alpha: float
    A: float
    table_x: Optional[np.ndarray] = None
    table_y: Optional[np.ndarray] = None
    step: Optional[float] = None

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if self.A < 3.0 - 1e-12:
            raise ModelParameterError("A must be at least 3", A=self.A)
        if self.variant == RoundingVariant.TABULATED:
            self._check_table()

    def _check_table(self) -> None:
        if self.table_x is None or self.table_y is None:
            raise ModelParameterError("a tabulated function needs its table")
        xs = np.ascontiguousarray(self.table_x, dtype=np.float64)
        ys = np.ascontiguousarray(self.table_y, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size == 0:
            raise ModelParameterError("table columns must be equally long and nonempty")
        if xs[0] != 0.0:
            raise ModelParameterError("table must start at x = 0", first=float(xs[0]))
        if ys[0] != 0.0:
            raise ModelParameterError("table must have f(0) = 0", first=float(ys[0]))
        if (np.diff(xs) <= 0).any():
            raise ModelParameterError("table x values must be strictly increasing")
        if (ys < 0).any() or (ys > 1).any():
            raise ModelParameterError("table values must lie in [0, 1]")
        if (np.diff(ys) < 0).any():
            raise ModelParameterError("table values must be nondecreasing")
        # rows at or past tau are implied by f = 1 there
        keep = xs < self.tau
        xs, ys = xs[keep], ys[keep]
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "table_x", xs)
        object.__setattr__(self, "table_y", ys)

    @classmethod
    def tabulated(
        cls,
        alpha: float,
        A: float,
        xs: Sequence[float],
        ys: Sequence[float],
        step: Optional[float] = None,
    ) -> "RoundingFunction":
        return cls(
            variant=RoundingVariant.TABULATED,
            alpha=alpha,
            A=A,
            table_x=np.asarray(xs, dtype=np.float64),
            table_y=np.asarray(ys, dtype=np.float64),
            step=step,
        )

    @property
    def tau(self) -> float:
        return 0.5 - 0.5 / self.A

    def __call__(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=np.float64)
        tau = self.tau
        if self.variant in (RoundingVariant.SMALL_ALPHA, RoundingVariant.BIPARTITE):
            y = np.where(x < tau, -np.expm1(-self.A * x), 1.0)
        elif self.variant == RoundingVariant.LARGE_ALPHA:
            middle = (1.0 - self.alpha) / 3.0
            y = np.where(x < 1.0 / self.A, 0.0, np.where(x < tau, middle, 1.0))
        else:
            idx = np.searchsorted(self.table_x, x, side="right") - 1
            below = self.table_y[np.clip(idx, 0, self.table_y.size - 1)]
            y = np.where(x < tau, below, 1.0)
        y = np.where(x <= 0.0, 0.0, y)
        return float(y) if y.ndim == 0 else y

    def breakpoints(self) -> Tuple[float, ...]:
        """Points where f may jump; certification evaluates both sides."""
        if self.variant == RoundingVariant.LARGE_ALPHA and 1.0 / self.A < self.tau:
            return (1.0 / self.A, self.tau)
        if self.variant == RoundingVariant.TABULATED:
            rises = self.table_x[1:][np.diff(self.table_y) > 0]
            return tuple(float(b) for b in rises) + (self.tau,)
        return (self.tau,)

    def left_limit(self, b: float) -> float:
        return float(self(np.nextafter(b, -np.inf)))

    def table(self, step: float) -> Tuple[np.ndarray, np.ndarray]:
        """Sample f on the grid {0, step, ..., 1} for export."""
        count = int(round(1.0 / step))
        xs = np.minimum(np.arange(count + 1) * step, 1.0)
        return xs, np.asarray(self(xs))

    def describe(self) -> dict:
        return {
            "variant": self.variant.value,
            "alpha": self.alpha,
            "A": self.A,
            "tau": self.tau,
            "step": self.step,
        }


def make_f(alpha: float, mode: GraphMode = GraphMode.COMPLETE) -> RoundingFunction:
    """
    The rounding function for ``alpha``. On complete graphs alpha <= 0.169
    (inclusive) gets the truncated exponential, larger alpha the three-step
    function; complete bipartite graphs always get the truncated exponential
    with the bipartite factor.
    """
    A = approximation_factor(alpha, mode)
    if mode == GraphMode.BIPARTITE:
        variant = RoundingVariant.BIPARTITE
    elif alpha <= SMALL_ALPHA_THRESHOLD:
        variant = RoundingVariant.SMALL_ALPHA
    else:
        variant = RoundingVariant.LARGE_ALPHA
    return RoundingFunction(variant=variant, alpha=alpha, A=A)


class PivotStep(BaseModel):
    step: int
    pivot: int
    R: float
    cluster_members: List[int]


@dataclass(frozen=True)
class PivotTrace:
    """Per-step audit trail of one rounding run."""

    seed: int
    steps: Tuple[PivotStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def to_jsonl(self) -> str:
        return "".join(step.model_dump_json() + "\n" for step in self.steps)


def _lengths(x: Union[MetricSolution, np.ndarray]) -> np.ndarray:
    lengths = x.x if isinstance(x, MetricSolution) else np.asarray(x, dtype=np.float64)
    if lengths.ndim != 2 or lengths.shape[0] != lengths.shape[1]:
        raise DimensionError("edge lengths must form a square matrix")
    return lengths


def pivot_round(
    x: Union[MetricSolution, np.ndarray], f: RoundingFunction, seed: int
) -> Tuple[Clustering, PivotTrace]:
    """
    Round LP lengths to a clustering.

    Each step draws the pivot first and then the shared radius R from a
    PCG64 stream seeded with ``seed``; the same seed reproduces the same
    partition and trace.

    Args:
        x: Metric solution or square length matrix
        f: Rounding function
        seed: Seed of the step generator

    Returns:
        Clustering labelled by step number, and the trace
    """
    lengths = _lengths(x)
    n = lengths.shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    y = np.asarray(f(lengths))

    labels = np.empty(n, dtype=np.int64)
    active = np.arange(n)
    steps: List[PivotStep] = []
    while active.size:
        position = int(rng.integers(active.size))
        radius = float(rng.random())
        pivot = int(active[position])
        joined = y[pivot, active] <= radius
        joined[position] = True
        members = active[joined]
        labels[members] = len(steps)
        steps.append(
            PivotStep(step=len(steps), pivot=pivot, R=radius, cluster_members=members.tolist())
        )
        active = active[~joined]
    return Clustering(labels), PivotTrace(seed=seed, steps=tuple(steps))


def weight_blind_pivot(inst: Instance, seed: int) -> Clustering:
    """Classical pivot ignoring weights: u joins the pivot iff the pair is positive."""
    rng = np.random.Generator(np.random.PCG64(seed))
    positive = inst.sign_matrix == EdgeSign.POSITIVE
    labels = np.empty(inst.n, dtype=np.int64)
    active = np.arange(inst.n)
    cluster = 0
    while active.size:
        position = int(rng.integers(active.size))
        joined = positive[active[position], active].copy()
        joined[position] = True
        labels[active[joined]] = cluster
        cluster += 1
        active = active[~joined]
    return Clustering(labels)


def trial_seeds(seed: int, trials: int) -> List[int]:
    """Independent per-trial seeds derived from one base seed."""
    state = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint32)
    return [int(s) for s in state]


class TrialResult(BaseModel):
    seed: int
    cost: float
    clusters: int


def rounding_trials(
    inst: Instance,
    x: Union[MetricSolution, np.ndarray],
    f: RoundingFunction,
    trials: int,
    seed: int,
    threads: Optional[int] = None,
) -> List[TrialResult]:
    """Run ``trials`` independent roundings; results follow seed order."""
    if trials < 1:
        raise ModelParameterError("at least one trial is required", trials=trials)

    def run(trial_seed: int) -> TrialResult:
        clustering, trace = pivot_round(x, f, trial_seed)
        return TrialResult(
            seed=trial_seed, cost=disagreement_cost(inst, clustering), clusters=len(trace)
        )

    results = thread_map(run, trial_seeds(seed, trials), threads)
    logger.debug("rounding_trials_finished", trials=trials, best=min(r.cost for r in results))
    return results


def _pair_arrays(inst: Instance, lengths: np.ndarray, active: np.ndarray):
    """Signs, weights and lengths of the pairs inside ``active`` (local indices)."""
    iu, iv = np.triu_indices(active.size, 1)
    u, v = active[iu], active[iv]
    return iu, iv, inst.sign_matrix[u, v], inst.weight_matrix[u, v], lengths[u, v]


def _checked_active(inst: Instance, lengths: np.ndarray, active) -> np.ndarray:
    if lengths.shape != (inst.n, inst.n):
        raise DimensionError("length matrix does not match the instance", n=inst.n)
    active = np.unique(np.asarray(list(active), dtype=np.int64))
    if active.size == 0:
        raise ModelParameterError("active set must be nonempty")
    if active[0] < 0 or active[-1] >= inst.n:
        raise DimensionError("active vertex out of range", n=inst.n)
    return active


def expected_step_cost(
    inst: Instance,
    x: Union[MetricSolution, np.ndarray],
    f: RoundingFunction,
    active: Sequence[int],
) -> Tuple[float, float]:
    """
    Exact E[ALG_t] and E[LP_t] of one step from the active set, averaging
    the per-pivot closed forms over a uniform pivot.
    """
    lengths = _lengths(x)
    active = _checked_active(inst, lengths, active)
    iu, iv, signs, weights, pair_x = _pair_arrays(inst, lengths, active)
    if iu.size == 0:
        return 0.0, 0.0
    y = np.asarray(f(lengths[np.ix_(active, active)]))
    y_u, y_v = y[:, iu], y[:, iv]
    cost = cost_given_pivot(signs, y_u, y_v)
    lp = lp_given_pivot(signs, pair_x, y_u, y_v)
    lp = np.where(signs == EdgeSign.MISSING, 0.0, lp)
    k = active.size
    return float((cost * weights).sum() / k), float((lp * weights).sum() / k)


class StepSimulation(BaseModel):
    samples: int
    alg_mean: float
    alg_se: float
    lp_mean: float
    lp_se: float
    expected_alg: float
    expected_lp: float


def simulate_step(
    inst: Instance,
    x: Union[MetricSolution, np.ndarray],
    f: RoundingFunction,
    active: Sequence[int],
    samples: int = 100_000,
    seed: int = 0,
    batch: int = 20_000,
) -> StepSimulation:
    """Monte Carlo estimate of one step's ALG_t and LP_t next to the exact values."""
    lengths = _lengths(x)
    active = _checked_active(inst, lengths, active)
    iu, iv, signs, weights, pair_x = _pair_arrays(inst, lengths, active)
    y = np.asarray(f(lengths[np.ix_(active, active)]))
    coefficient = np.where(
        signs == EdgeSign.NEGATIVE, 1.0 - pair_x, np.where(signs == EdgeSign.POSITIVE, pair_x, 0.0)
    )
    negative = signs == EdgeSign.NEGATIVE

    rng = np.random.Generator(np.random.PCG64(seed))
    alg_values, lp_values = [], []
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        pivots = rng.integers(active.size, size=size)
        radii = rng.random(size)
        joined = y[pivots] <= radii[:, None]
        joined[np.arange(size), pivots] = True
        in_u, in_v = joined[:, iu], joined[:, iv]
        bad = np.where(negative, in_u & in_v, in_u ^ in_v)
        alg_values.append(bad.astype(np.float64) @ weights)
        lp_values.append((in_u | in_v).astype(np.float64) @ (coefficient * weights))
        remaining -= size
    alg = np.concatenate(alg_values)
    lp = np.concatenate(lp_values)
    expected_alg, expected_lp = expected_step_cost(inst, lengths, f, active)
    return StepSimulation(
        samples=samples,
        alg_mean=float(alg.mean()),
        alg_se=float(alg.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
        lp_mean=float(lp.mean()),
        lp_se=float(lp.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
        expected_alg=expected_alg,
        expected_lp=expected_lp,
    )


def exact_expected_cost(
    inst: Instance, x: Union[MetricSolution, np.ndarray], f: RoundingFunction
) -> float:
    """
    Exact E[disagreement_cost(pivot_round(x, f))] by dynamic programming over
    the subsets of still-active vertices. For a fixed pivot the cluster only
    changes when R crosses one of the values f(x_pu), so R is integrated
    piecewise over those breakpoints.
    """
    lengths = _lengths(x)
    if lengths.shape != (inst.n, inst.n):
        raise DimensionError("length matrix does not match the instance", n=inst.n)
    n = inst.n
    if n > EXACT_EXPECTATION_CAP:
        raise SizeLimitError(
            "exact expectation is limited to small instances", n=n, cap=EXACT_EXPECTATION_CAP
        )
    y = np.asarray(f(lengths))
    w_positive = np.where(inst.sign_matrix == EdgeSign.POSITIVE, inst.weight_matrix, 0.0)
    w_negative = np.where(inst.sign_matrix == EdgeSign.NEGATIVE, inst.weight_matrix, 0.0)
    bits = 1 << np.arange(n)

    @lru_cache(maxsize=None)
    def remaining_cost(mask: int) -> float:
        if mask == 0:
            return 0.0
        members = np.flatnonzero(mask & bits)
        total = 0.0
        for p in members:
            radii = y[p, members]
            cuts = np.unique(np.concatenate(([0.0], radii, [1.0])))
            cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
            for low, high in zip(cuts[:-1], cuts[1:]):
                joined = radii <= low
                joined[members == p] = True
                cluster, rest = members[joined], members[~joined]
                step_cost = (
                    w_positive[np.ix_(cluster, rest)].sum()
                    + 0.5 * w_negative[np.ix_(cluster, cluster)].sum()
                )
                rest_mask = int(bits[rest].sum()) if rest.size else 0
                total += (high - low) * (step_cost + remaining_cost(rest_mask))
        return total / members.size

    return float(remaining_cost((1 << n) - 1))
