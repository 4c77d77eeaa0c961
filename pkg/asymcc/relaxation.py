"""
Metric LP Relaxation

Builds and solves

    min  sum_{uv in E+} w_uv x_uv + sum_{uv in E-} w_uv (1 - x_uv)
    s.t. x_uw <= x_uv + x_vw,  0 <= x_uv <= 1

with HiGHS through ``scipy.optimize.linprog``, either with every triangle
row materialized or by lazy separation of the most violated triangles.
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Set, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import sparse
from scipy.optimize import linprog

from .config import get_settings
from .exceptions import DimensionError, InvalidInstanceError, SolverError
from .model import EdgeSign, Instance, pair_endpoints, pair_index
from .parallel import resolve_threads, thread_map

logger = structlog.get_logger(__name__)

# Full mode stays practical up to about this many vertices.
FULL_MODE_SOFT_LIMIT = 60


class SolveMode(str, Enum):
    FULL = "full"
    LAZY = "lazy"


class SolverStats(BaseModel):
    mode: SolveMode
    iterations: int = 0
    separation_rounds: int = 0
    constraints: int = 0
    max_violation: float = 0.0


class FeasibilityReport(BaseModel):
    max_violation: float
    worst_triple: Optional[Tuple[int, int, int]] = None
    bound_violation: float = 0.0
    tau_feas: float
    passed: bool


@dataclass(frozen=True)
class MetricSolution:
    """Symmetric edge lengths in [0, 1] with zero diagonal, plus the LP value."""

    x: np.ndarray
    objective: float
    stats: SolverStats

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DimensionError("edge lengths must form a square matrix")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @classmethod
    def from_lengths(
        cls, inst: Instance, x: np.ndarray, mode: SolveMode = SolveMode.FULL
    ) -> "MetricSolution":
        """Wrap externally constructed lengths (e.g. a fractional gap solution)."""
        x = _clean(np.asarray(x, dtype=np.float64))
        report = check_metric_feasibility(x)
        stats = SolverStats(mode=mode, max_violation=max(report.max_violation, 0.0))
        return cls(x=x, objective=lp_objective(inst, x), stats=stats)


def _check_square(inst: Instance, x: np.ndarray) -> None:
    if x.shape != (inst.n, inst.n):
        raise DimensionError(
            "length matrix does not match the instance", n=inst.n, shape=list(x.shape)
        )


def _clean(x: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1], symmetrize and zero the diagonal."""
    x = np.clip(x, 0.0, 1.0)
    x = 0.5 * (x + x.T)
    np.fill_diagonal(x, 0.0)
    return x


def lp_objective(inst: Instance, x: np.ndarray) -> float:
    """LP value of lengths ``x``; missing pairs contribute nothing."""
    x = np.asarray(x, dtype=np.float64)
    _check_square(inst, x)
    rows, cols = pair_endpoints(inst.n)
    lengths = x[rows, cols]
    positive = inst.signs == EdgeSign.POSITIVE
    negative = inst.signs == EdgeSign.NEGATIVE
    return float(
        np.dot(inst.weights[positive], lengths[positive])
        + np.dot(inst.weights[negative], 1.0 - lengths[negative])
    )


def _middle_vertex_slack(x: np.ndarray, v: int) -> np.ndarray:
    """x_uw - x_uv - x_vw for fixed middle v; degenerate triples are -inf."""
    slack = x - x[:, v][:, None] - x[v, :][None, :]
    slack[v, :] = -np.inf
    slack[:, v] = -np.inf
    np.fill_diagonal(slack, -np.inf)
    return slack


def _chunks(n: int, parts: int) -> List[np.ndarray]:
    return [chunk for chunk in np.array_split(np.arange(n), max(parts, 1)) if chunk.size]


def check_metric_feasibility(
    x: np.ndarray, tau_feas: Optional[float] = None, threads: Optional[int] = None
) -> FeasibilityReport:
    """
    Exact maximum of x_uw - x_uv - x_vw over all triples of distinct vertices
    and the largest excursion outside [0, 1].
    """
    tau = get_settings().CC_TAU_FEAS if tau_feas is None else tau_feas
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    bound = float(max(0.0, -x.min(initial=0.0), x.max(initial=0.0) - 1.0))

    if n < 3:
        return FeasibilityReport(
            max_violation=0.0, bound_violation=bound, tau_feas=tau, passed=bound <= tau
        )

    def scan(chunk: np.ndarray) -> Tuple[float, Tuple[int, int, int]]:
        best, where = -np.inf, (0, 0, 0)
        for v in chunk:
            slack = _middle_vertex_slack(x, int(v))
            flat = int(np.argmax(slack))
            if slack.flat[flat] > best:
                u, w = divmod(flat, n)
                best, where = float(slack.flat[flat]), (u, int(v), w)
        return best, where

    results = thread_map(scan, _chunks(n, resolve_threads(threads)), threads)
    worst, triple = max(results, key=lambda item: item[0])
    return FeasibilityReport(
        max_violation=worst,
        worst_triple=triple,
        bound_violation=bound,
        tau_feas=tau,
        passed=worst <= tau and bound <= tau,
    )


def _objective_vector(inst: Instance) -> Tuple[np.ndarray, float]:
    """Costs per pair after normalizing to w_scale = 1, and the constant term."""
    weights = inst.weights / inst.w_scale
    c = np.zeros(inst.num_pairs)
    positive = inst.signs == EdgeSign.POSITIVE
    negative = inst.signs == EdgeSign.NEGATIVE
    c[positive] = weights[positive]
    c[negative] = -weights[negative]
    return c, float(weights[negative].sum())


def _triangle_rows(
    triples: List[Tuple[int, int, int]], num_vars: int
) -> sparse.csr_matrix:
    """One row x_long - x_a - x_b <= 0 per (long, a, b) pair-index triple."""
    k = len(triples)
    data = np.tile([1.0, -1.0, -1.0], k)
    cols = np.asarray(triples, dtype=np.int64).reshape(-1)
    rows = np.repeat(np.arange(k), 3)
    return sparse.csr_matrix((data, (rows, cols)), shape=(k, num_vars))


def _all_triangles(n: int) -> List[Tuple[int, int, int]]:
    triples = []
    for a, b, c in itertools.combinations(range(n), 3):
        ab, ac, bc = pair_index(a, b, n), pair_index(a, c, n), pair_index(b, c, n)
        triples.extend([(ab, ac, bc), (ac, ab, bc), (bc, ab, ac)])
    return triples


def _separate(
    x: np.ndarray, tau: float, limit: int, threads: Optional[int]
) -> Tuple[float, List[Tuple[int, int, int]]]:
    """Most violated triangle rows (at most ``limit``) and the maximum violation."""
    n = x.shape[0]

    def scan(chunk: np.ndarray):
        found = []
        worst = -np.inf
        for v in chunk:
            slack = _middle_vertex_slack(x, int(v))
            worst = max(worst, float(slack.max()))
            us, ws = np.nonzero(np.triu(slack > tau, 1))
            if us.size:
                found.append(np.column_stack([slack[us, ws], us, np.full(us.size, v), ws]))
        return worst, found

    worst = -np.inf
    candidates = []
    for chunk_worst, found in thread_map(scan, _chunks(n, resolve_threads(threads)), threads):
        worst = max(worst, chunk_worst)
        candidates.extend(found)
    if not candidates:
        return worst, []

    table = np.vstack(candidates)
    order = np.argsort(-table[:, 0], kind="stable")[:limit]
    rows = []
    for _, u, v, w in table[order]:
        u, v, w = int(u), int(v), int(w)
        rows.append((pair_index(u, w, n), pair_index(u, v, n), pair_index(v, w, n)))
    return worst, rows


def _linprog(c, a_ub, b_ub, tau_feas: float, tau_opt: float, stats: SolverStats):
    result = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=(0.0, 1.0),
        method="highs",
        options={
            "primal_feasibility_tolerance": max(tau_feas * 0.1, 1e-10),
            "dual_feasibility_tolerance": max(tau_opt * 0.1, 1e-10),
            "presolve": True,
        },
    )
    if result.status != 0:
        raise SolverError(f"LP solve failed: {result.message}", stats=stats)
    stats.iterations += int(getattr(result, "nit", 0) or 0)
    return result


def solve_metric_lp(
    inst: Instance,
    tau_feas: Optional[float] = None,
    tau_opt: Optional[float] = None,
    mode: SolveMode = SolveMode.LAZY,
    max_rounds: Optional[int] = None,
    separation_factor: Optional[int] = None,
    threads: Optional[int] = None,
) -> MetricSolution:
    """
    Solve the metric LP of ``inst``.

    Args:
        inst: Instance with at least two vertices
        tau_feas: Allowed triangle violation of the returned lengths
        tau_opt: Objective accuracy (absolute, at w_scale = 1)
        mode: FULL materializes all 3*C(n,3) rows; LAZY separates them
        max_rounds: Separation round cap (LAZY only)
        separation_factor: Rows added per round = factor * n
        threads: Workers for the separation scan

    Returns:
        MetricSolution with clamped, symmetric lengths

    Raises:
        SolverError: HiGHS failure or separation cap reached
    """
    settings = get_settings()
    tau_feas = settings.CC_TAU_FEAS if tau_feas is None else tau_feas
    tau_opt = settings.CC_TAU_OPT if tau_opt is None else tau_opt
    max_rounds = settings.CC_MAX_SEPARATION_ROUNDS if max_rounds is None else max_rounds
    factor = settings.CC_SEPARATION_FACTOR if separation_factor is None else separation_factor

    n = inst.n
    if n < 2:
        raise InvalidInstanceError("the metric LP needs at least two vertices", n=n)
    if inst.w_scale <= 0:
        raise InvalidInstanceError("w_scale must be positive", w_scale=inst.w_scale)

    c, _ = _objective_vector(inst)
    m = inst.num_pairs
    rows, cols = pair_endpoints(n)
    stats = SolverStats(mode=mode)

    def lengths_from(values: np.ndarray) -> np.ndarray:
        x = np.zeros((n, n))
        x[rows, cols] = values
        x[cols, rows] = values
        return _clean(x)

    if mode == SolveMode.FULL:
        if n > FULL_MODE_SOFT_LIMIT:
            logger.warning("full_mode_large_instance", n=n, limit=FULL_MODE_SOFT_LIMIT)
        triples = _all_triangles(n)
        a_ub = _triangle_rows(triples, m) if triples else None
        b_ub = np.zeros(len(triples)) if triples else None
        stats.constraints = len(triples)
        result = _linprog(c, a_ub, b_ub, tau_feas, tau_opt, stats)
        x = lengths_from(result.x)
        stats.max_violation = max(check_metric_feasibility(x, tau_feas, threads).max_violation, 0.0)
    else:
        active: List[Tuple[int, int, int]] = []
        seen: Set[Tuple[int, int, int]] = set()
        limit = factor * n
        while True:
            if stats.separation_rounds >= max_rounds:
                raise SolverError(
                    "separation did not converge within the round cap",
                    stats=stats,
                    rounds=stats.separation_rounds,
                )
            a_ub = _triangle_rows(active, m) if active else None
            b_ub = np.zeros(len(active)) if active else None
            result = _linprog(c, a_ub, b_ub, tau_feas, tau_opt, stats)
            stats.separation_rounds += 1
            x = lengths_from(result.x)
            worst, violated = _separate(x, tau_feas, limit, threads)
            stats.max_violation = max(worst, 0.0) if np.isfinite(worst) else 0.0
            fresh = [row for row in violated if row not in seen]
            logger.debug(
                "separation_round",
                round=stats.separation_rounds,
                max_violation=stats.max_violation,
                added=len(fresh),
                constraints=len(active),
            )
            if stats.max_violation <= tau_feas:
                break
            if not fresh:
                raise SolverError(
                    "separation stalled with violated triangles left",
                    stats=stats,
                    max_violation=stats.max_violation,
                )
            seen.update(fresh)
            active.extend(fresh)
        stats.constraints = len(active)

    objective = lp_objective(inst, x)
    logger.info(
        "metric_lp_solved",
        n=n,
        mode=mode.value,
        objective=objective,
        rounds=stats.separation_rounds,
        constraints=stats.constraints,
        max_violation=stats.max_violation,
    )
    return MetricSolution(x=x, objective=objective, stats=stats)
