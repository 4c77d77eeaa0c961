"""
Optimal Rounding Function

Finds, for a given alpha, the smallest factor A for which some
nondecreasing step function on a grid makes every triangle pay for itself,
by an LP feasibility test inside a binary search on A.

LP for fixed (alpha, A, h): variables y_j = f(x_j) on the grid points and
1/A below tau; y = 1 on [tau, 1]; y_0 = 0; y nondecreasing. Every grid
point is also evaluated with its left limit y_{j-1}, as the certification
sweep does for a table. For every sorted metric triangle over these points,
every signature and every extreme weight choice, sum_i w_i t_i >= 0.

The margin splits into one term per edge, so a triangle needs one row per
choice of (sign, weight) on each edge. Choices dropped below always give a
term at least as large as a kept one, for any monotone y with y = 1 past tau:

  * weight 1 on a positive edge only when x < 1/A, since t+ >= 1 - y_k >= 0
    otherwise; hence triangles with x1 >= 1/A never bind;
  * the negative sign only when x >= tau, since t- - t+ =
    (1 - y_j)(A(1 - 2x) - 1) + 2(y_k - y_j) >= 0 below tau;
  * no separate t- >= 0 rows: t- >= (1 - y_j)(A(1 - x) - 1), and past
    x = 1 - 1/A the longer endpoint already has y_k = 1;
  * triangles whose two longer sides both sit in the constant region.

The unreduced check is the re-certification by ``certify_grid``.
"""

import itertools
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy import sparse
from scipy.optimize import linprog

from .config import get_settings
from .exceptions import ModelParameterError, OptimalFError, SolverError
from .model import GraphMode
from .parallel import thread_map
from .rounding import RoundingFunction, approximation_factor
from .triples import METRIC_SLACK, CertReport, certify_grid, grid_points

logger = structlog.get_logger(__name__)

CONSTANT_ONE = -1
BRACKET_WIDENINGS = 5
RECERTIFY_EPS = 1e-6


@dataclass(frozen=True)
class _Points:
    """Evaluation points of the LP sorted by (x, y)."""

    x: np.ndarray
    var: np.ndarray
    var_x: np.ndarray


def _points(A: float, h: float) -> _Points:
    tau = 0.5 - 0.5 / A
    grid = np.unique(np.concatenate([grid_points(h), [1.0 / A, tau]]))
    var_x = grid[grid < tau]
    m = var_x.size
    var = np.where(grid < tau, np.arange(grid.size), CONSTANT_ONE)
    # left limits at each variable point and at tau (grid[m] == tau)
    left = np.arange(1, m + 1)
    xs = np.concatenate([grid, grid[left]])
    var = np.concatenate([var, left - 1])
    rank = np.where(var == CONSTANT_ONE, m, var)
    order = np.lexsort((rank, xs))
    return _Points(x=xs[order], var=var[order].astype(np.int64), var_x=var_x)


def _edge_terms(
    x_i: np.ndarray, A: float, weight: np.ndarray, negative: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """w * t as const + c_j * y_j + c_k * y_k."""
    const = np.where(negative, A * (1.0 - x_i) - 1.0, A * x_i)
    c_j = np.where(negative, -A * (1.0 - x_i), 1.0 - A * x_i)
    c_k = np.where(negative, 1.0, -1.0)
    return weight * const, weight * c_j, weight * c_k


# Per-edge choices: positive at weight alpha, positive at weight 1, negative at weight alpha.
LIGHT, HEAVY, NEGATIVE = 0, 1, 2


def _rows_for(
    i: int, pts: _Points, alpha: float, A: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """COO pieces (local row, column, value) and row constants for triangles with x1 at point i."""
    px = pts.x
    tail = np.arange(i, px.size)
    jj, kk = np.triu_indices(tail.size)
    j, k = tail[jj], tail[kk]
    keep = px[k] <= px[i] + px[j] + METRIC_SLACK
    keep &= ~((pts.var[j] == CONSTANT_ONE) & (pts.var[k] == CONSTANT_ONE))
    j, k = j[keep], k[keep]
    empty = np.empty(0)
    if j.size == 0:
        return empty, empty, empty, empty
    tri = np.column_stack([np.full(j.size, i), j, k])
    x = px[tri]
    tau = 0.5 - 0.5 / A
    short = x < 1.0 / A
    long = x >= tau

    rows, cols, vals, consts = [], [], [], []
    offset = 0
    for choice in itertools.product((LIGHT, HEAVY, NEGATIVE), repeat=3):
        choice = np.array(choice)
        heavy, negative = choice == HEAVY, choice == NEGATIVE
        valid = ~((heavy & ~short) | (negative & ~long)).any(axis=1)
        if not valid.any():
            continue
        sub = tri[valid]
        sx = x[valid]
        weight = np.broadcast_to(np.where(heavy, 1.0, alpha), sx.shape)
        signs = np.broadcast_to(negative, sx.shape)
        const = np.zeros(sub.shape[0])
        row_ids = offset + np.arange(sub.shape[0])
        for e, a, b in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
            c0, cj, ck = _edge_terms(sx[:, e], A, weight[:, e], signs[:, e])
            const += c0
            for coef, point in ((cj, sub[:, a]), (ck, sub[:, b])):
                var = pts.var[point]
                fixed = var == CONSTANT_ONE
                const += np.where(fixed, coef, 0.0)
                rows.append(row_ids[~fixed])
                cols.append(var[~fixed])
                vals.append(coef[~fixed])
        consts.append(const)
        offset += sub.shape[0]
    if not consts:
        return empty, empty, empty, empty
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(consts)


def feasibility_lp(
    alpha: float, A: float, h: float, threads: Optional[int] = None
) -> Optional[RoundingFunction]:
    """
    Solve the table LP for fixed (alpha, A, h).

    Returns:
        The pointwise-smallest feasible table as a tabulated function, or
        None when no table on this grid certifies factor A

    Raises:
        ModelParameterError: A < 3 or h outside (0, 0.05]
        SolverError: HiGHS ended with neither a solution nor infeasibility
    """
    if not 0.0 < alpha <= 1.0:
        raise ModelParameterError("alpha must lie in (0, 1]", alpha=alpha)
    if A < 3.0:
        raise ModelParameterError("A must be at least 3", A=A)
    if not 0.0 < h <= 0.05:
        raise ModelParameterError("grid step must lie in (0, 0.05]", h=h)

    pts = _points(A, h)
    m = pts.var_x.size
    starts = [int(i) for i in np.flatnonzero(pts.x < 1.0 / A)]
    pieces = thread_map(lambda i: _rows_for(i, pts, alpha, A), starts, threads)

    row_blocks, col_blocks, val_blocks, const_blocks = [], [], [], []
    offset = 0
    for rows, cols, vals, consts in pieces:
        if consts.size == 0:
            continue
        row_blocks.append(rows.astype(np.int64) + offset)
        col_blocks.append(cols.astype(np.int64))
        val_blocks.append(vals)
        const_blocks.append(consts)
        offset += consts.size

    # sum coef * y + const >= 0  <=>  -sum coef * y <= const
    blocks = []
    rhs = []
    if offset:
        blocks.append(
            sparse.coo_matrix(
                (-np.concatenate(val_blocks), (np.concatenate(row_blocks), np.concatenate(col_blocks))),
                shape=(offset, m),
            ).tocsr()
        )
        rhs.append(np.concatenate(const_blocks))
    if m > 1:
        monotone = sparse.diags([np.ones(m - 1), -np.ones(m - 1)], [0, 1], shape=(m - 1, m))
        blocks.append(monotone.tocsr())
        rhs.append(np.zeros(m - 1))

    bounds = [(0.0, 0.0)] + [(0.0, 1.0)] * (m - 1)
    result = linprog(
        np.ones(m),
        A_ub=sparse.vstack(blocks).tocsr() if blocks else None,
        b_ub=np.concatenate(rhs) if rhs else None,
        bounds=bounds,
        method="highs",
    )
    logger.debug("feasibility_lp_solved", alpha=alpha, A=A, h=h, rows=offset, variables=m, status=result.status)
    if result.status == 2:
        return None
    if result.status != 0:
        raise SolverError(f"HiGHS failed on the table LP: {result.message}", alpha=alpha, A=A)

    ys = np.maximum.accumulate(np.clip(result.x, 0.0, 1.0))
    ys[0] = 0.0
    return RoundingFunction.tabulated(alpha, A, pts.var_x, ys, step=h)


@dataclass(frozen=True)
class OptFResult:
    alpha: float
    A_opt: float
    A_thm: float
    step: float
    tol: float
    f: RoundingFunction
    certification: CertReport
    lp_solves: int

    @property
    def margin(self) -> float:
        return self.certification.min_margin

    @property
    def certified(self) -> bool:
        return self.certification.passed

    def summary(self) -> "OptFSummary":
        return OptFSummary(
            alpha=self.alpha,
            A_opt=self.A_opt,
            A_thm=self.A_thm,
            h=self.step,
            tol=self.tol,
            margin=self.margin,
            certified=self.certified,
            lp_solves=self.lp_solves,
        )


class OptFSummary(BaseModel):
    schema_version: int = 1
    config: Dict[str, Any] = Field(default_factory=dict)
    alpha: float
    A_opt: float
    A_thm: float
    h: float
    tol: float
    margin: float
    certified: bool
    lp_solves: int


def compute_a_opt(
    alpha: float,
    h: Optional[float] = None,
    tol: Optional[float] = None,
    threads: Optional[int] = None,
) -> OptFResult:
    """
    Binary search for the smallest A with a feasible table, starting from
    the bracket [3, A_thm].

    Raises:
        ModelParameterError: tol < 1e-4
        OptimalFError: no feasible A even after widening the upper bracket
    """
    settings = get_settings()
    h = settings.CC_OPTF_STEP if h is None else h
    tol = settings.CC_OPTF_TOL if tol is None else tol
    if tol < 1e-4:
        raise ModelParameterError("search tolerance must be at least 1e-4", tol=tol)

    a_thm = approximation_factor(alpha, GraphMode.COMPLETE)
    solves = 0

    def feasible(A: float) -> Optional[RoundingFunction]:
        nonlocal solves
        solves += 1
        table = feasibility_lp(alpha, A, h, threads)
        logger.info("a_opt_attempt", alpha=alpha, A=A, feasible=table is not None)
        return table

    best = feasible(3.0)
    low = high = 3.0
    if best is None:
        high = a_thm
        best = feasible(high)
        widenings = 0
        while best is None:
            if widenings == BRACKET_WIDENINGS:
                raise OptimalFError(
                    "no feasible table up to the widened bracket", alpha=alpha, high=high, h=h
                )
            widenings += 1
            low, high = high, high * 1.1
            best = feasible(high)
        while high - low > tol:
            mid = 0.5 * (low + high)
            table = feasible(mid)
            if table is None:
                low = mid
            else:
                high, best = mid, table

    report = certify_grid(
        alpha, best, rho=high, step=h, eps_cert=RECERTIFY_EPS, refine=False, threads=threads
    )
    if not report.passed:
        logger.warning(
            "a_opt_recertification_failed", alpha=alpha, A=high, margin=report.min_margin
        )
    logger.info("a_opt_found", alpha=alpha, A_opt=high, A_thm=a_thm, lp_solves=solves)
    return OptFResult(
        alpha=alpha,
        A_opt=high,
        A_thm=a_thm,
        step=h,
        tol=tol,
        f=best,
        certification=report,
        lp_solves=solves,
    )


def a_opt_table(
    alphas: List[float], h: Optional[float] = None, tol: Optional[float] = None
) -> List[OptFSummary]:
    """A_opt next to A_thm for several alphas, each search run on its own worker."""
    return [r.summary() for r in thread_map(lambda a: compute_a_opt(a, h, tol, threads=1), alphas)]
