"""
Triple Analysis

Executable form of the triangle-based charging argument: per-pivot
disagreement and LP-removal terms, the slack t_i of every edge of a triangle,
the worst case over admissible weights, and a grid sweep certifying
ALG^sigma <= rho * LP^sigma for a given rounding function.

Triangle convention: lengths x1 <= x2 <= x3, edge e_i is opposite vertex u_i
and has length x_i; when u_i is the pivot, the endpoints of e_i join the
pivot's cluster with probabilities 1 - y_j and 1 - y_k (y = f(x)).
"""

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from .config import get_settings
from .exceptions import ModelParameterError
from .model import EdgeSign, GraphMode
from .parallel import resolve_threads, thread_map

if TYPE_CHECKING:
    from .rounding import RoundingFunction

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

# Negative-edge slack above this (negative) level counts as floating noise.
NEGATIVE_SLACK_FLOOR = -1e-12
METRIC_SLACK = 1e-12
# Near-zero cells refined per signature.
REFINE_CENTRES = 3

# (i, j, k) with j < k the two indices other than i.
_OPPOSITE = ((0, 1, 2), (1, 0, 2), (2, 0, 1))


@dataclass(frozen=True)
class Signature:
    """Signs of (e1, e2, e3) of a sorted triangle."""

    signs: Tuple[EdgeSign, EdgeSign, EdgeSign]

    def __post_init__(self) -> None:
        signs = tuple(EdgeSign(int(s)) for s in self.signs)
        if len(signs) != 3:
            raise ModelParameterError("a signature has exactly three signs")
        present = sum(s != EdgeSign.MISSING for s in signs)
        if present not in (3, 2, 0):
            raise ModelParameterError(
                "a bipartite triangle holds either two edges or none",
                signature="".join(s.symbol for s in signs),
            )
        object.__setattr__(self, "signs", signs)

    @classmethod
    def parse(cls, text: str) -> "Signature":
        lookup = {"+": EdgeSign.POSITIVE, "-": EdgeSign.NEGATIVE, "o": EdgeSign.MISSING}
        try:
            return cls(tuple(lookup[ch] for ch in text))
        except KeyError as e:
            raise ModelParameterError(f"unknown sign symbol {e.args[0]!r}") from e

    @property
    def bipartite(self) -> bool:
        return EdgeSign.MISSING in self.signs

    def __str__(self) -> str:
        return "".join(s.symbol for s in self.signs)


def signatures(mode: GraphMode) -> List[Signature]:
    """Every admissible signature for the graph family, each checked directly."""
    signed = (EdgeSign.POSITIVE, EdgeSign.NEGATIVE)
    if mode == GraphMode.COMPLETE:
        return [Signature(s) for s in itertools.product(signed, repeat=3)]
    result = [Signature((EdgeSign.MISSING,) * 3)]
    for hole in range(3):
        for pair in itertools.product(signed, repeat=2):
            signs = list(pair)
            signs.insert(hole, EdgeSign.MISSING)
            result.append(Signature(tuple(signs)))
    return result


def cost_given_pivot(sign, y_u: ArrayLike, y_v: ArrayLike) -> ArrayLike:
    """
    Probability that pair (u, v) disagrees with the pivot's cluster when
    u and v stay out of it with probabilities y_u, y_v (one shared radius).
    Missing pairs count as positive.
    """
    y_u = np.asarray(y_u, dtype=np.float64)
    y_v = np.asarray(y_v, dtype=np.float64)
    negative = np.asarray(sign) == EdgeSign.NEGATIVE
    value = np.where(negative, 1.0 - np.maximum(y_u, y_v), np.abs(y_u - y_v))
    return value if value.ndim else float(value)


def lp_given_pivot(sign, x_uv: ArrayLike, y_u: ArrayLike, y_v: ArrayLike) -> ArrayLike:
    """LP mass of pair (u, v) times the probability that u or v is removed."""
    x_uv = np.asarray(x_uv, dtype=np.float64)
    removed = 1.0 - np.minimum(np.asarray(y_u, dtype=np.float64), np.asarray(y_v, dtype=np.float64))
    negative = np.asarray(sign) == EdgeSign.NEGATIVE
    value = np.where(negative, 1.0 - x_uv, x_uv) * removed
    return value if value.ndim else float(value)


def _check_lengths(x: np.ndarray) -> None:
    if (x < 0).any() or (x > 1).any():
        raise ModelParameterError("triangle lengths must lie in [0, 1]")
    if (np.diff(x, axis=-1) < 0).any():
        raise ModelParameterError("triangle lengths must be sorted ascending")
    if (x[..., 2] > x[..., 0] + x[..., 1] + METRIC_SLACK).any():
        raise ModelParameterError("triangle lengths violate x3 <= x1 + x2")


def _slacks(x: np.ndarray, y: np.ndarray, sigma: Signature, rho: float) -> np.ndarray:
    """t for every edge; x and y have shape (..., 3)."""
    t = np.empty(np.broadcast_shapes(x.shape, y.shape))
    for i, j, k in _OPPOSITE:
        sign = sigma.signs[i]
        t[..., i] = rho * lp_given_pivot(sign, x[..., i], y[..., j], y[..., k]) - cost_given_pivot(
            sign, y[..., j], y[..., k]
        )
    return t


def t_values(
    x: Sequence[float],
    sigma: Signature,
    f: "RoundingFunction",
    A: float,
    y: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Slack t_i = A * lp(e_i | u_i) - cost(e_i | u_i) of each edge.

    For a nondecreasing f this is A(1 - y_j) x_i - (y_k - y_j) on positive
    (and missing) edges and A(1 - y_j)(1 - x_i) - (1 - y_k) on negative ones.

    Args:
        x: Sorted metric lengths, shape (3,) or (N, 3)
        sigma: Signature of the triangle
        f: Rounding function producing y = f(x)
        A: Factor the slack is measured against
        y: Explicit y values (one-sided evaluations); defaults to f(x)
    """
    x = np.asarray(x, dtype=np.float64)
    _check_lengths(x)
    y = f(x) if y is None else np.asarray(y, dtype=np.float64)
    return _slacks(x, np.asarray(y, dtype=np.float64), sigma, A)


def _margins(t: np.ndarray, sigma: Signature, alpha: float) -> np.ndarray:
    """min over admissible weights of sum_i w_i t_i, for t of shape (..., 3)."""
    total = np.zeros(t.shape[:-1])
    unbounded = np.zeros(t.shape[:-1], dtype=bool)
    for i, sign in enumerate(sigma.signs):
        t_i = t[..., i]
        if sign == EdgeSign.POSITIVE:
            total += np.where(t_i < 0, 1.0, alpha) * t_i
        elif sign == EdgeSign.NEGATIVE:
            unbounded |= t_i < NEGATIVE_SLACK_FLOOR
            total += alpha * t_i
    return np.where(unbounded, -np.inf, total)


def worst_case_margin(
    x: Sequence[float],
    sigma: Signature,
    f: "RoundingFunction",
    A: float,
    alpha: float,
    y: Optional[Sequence[float]] = None,
) -> Union[float, np.ndarray]:
    """
    Smallest sum_i w_i t_i over admissible weights (w = 1 scale): positive
    edges range over [alpha, 1], negative edges over [alpha, inf), missing
    edges weigh 0. Returns -inf when a negative edge has negative slack.
    """
    t = t_values(x, sigma, f, A, y=y)
    margin = _margins(t, sigma, alpha)
    return float(margin) if margin.ndim == 0 else margin


class TriangleWitness(BaseModel):
    x1: float
    x2: float
    x3: float
    y1: float
    y2: float
    y3: float
    sigma: str


class CertReport(BaseModel):
    """Outcome of a grid certification sweep."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    schema_version: int = 1
    config: Dict[str, Any] = Field(default_factory=dict)
    alpha: float
    rho: float
    step: float
    mode: GraphMode
    variant: str
    eps_cert: float
    triangles_checked: int
    signatures_checked: int
    min_margin: float
    argmin: Optional[TriangleWitness] = None
    per_signature: Dict[str, float] = Field(default_factory=dict)
    refined: bool = False
    refined_around: List[TriangleWitness] = Field(default_factory=list)
    refined_min_margin: Optional[float] = None
    refinement_discrepancy: bool = False
    passed: bool
    limitation: str = "grid check only; no interval bounds between grid points"


def grid_points(step: float) -> np.ndarray:
    count = int(round(1.0 / step))
    grid = np.arange(count + 1, dtype=np.float64) * step
    grid = grid[grid <= 1.0 + 1e-12]
    grid[-1] = min(grid[-1], 1.0)
    if grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    return grid


def evaluation_points(
    f: "RoundingFunction", xs: Iterable[float], lo: float = 0.0, hi: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lengths with their f-values, plus the breakpoints of f inside [lo, hi]
    evaluated on both sides (the left side as (b, f(b-))). Sorted by (x, y).
    """
    xs = np.asarray(list(xs), dtype=np.float64)
    points_x = [xs]
    points_y = [np.asarray(f(xs), dtype=np.float64)]
    for b in f.breakpoints():
        if lo <= b <= hi:
            points_x.append(np.array([b, b]))
            points_y.append(np.array([float(f(b)), f.left_limit(b)]))
    px = np.concatenate(points_x)
    py = np.concatenate(points_y)
    unique = np.unique(np.column_stack([px, py]), axis=0)
    order = np.lexsort((unique[:, 1], unique[:, 0]))
    return unique[order, 0], unique[order, 1]


class _SweepResult:
    __slots__ = ("min_margin", "witness", "count", "per_signature", "near")

    def __init__(self) -> None:
        self.min_margin = math.inf
        self.witness: Optional[TriangleWitness] = None
        self.count = 0
        self.per_signature: Dict[str, float] = {}
        # smallest non-degenerate margins below the refinement level, per signature
        self.near: Dict[str, List[Tuple[float, TriangleWitness]]] = {}

    def absorb(self, other: "_SweepResult") -> None:
        self.count += other.count
        for key, value in other.per_signature.items():
            self.per_signature[key] = min(self.per_signature.get(key, math.inf), value)
        for key, cells in other.near.items():
            merged = sorted(self.near.get(key, []) + cells, key=lambda cell: cell[0])
            self.near[key] = merged[:REFINE_CENTRES]
        if other.min_margin < self.min_margin:
            self.min_margin = other.min_margin
            self.witness = other.witness

    def centres(self) -> List[TriangleWitness]:
        seen: Dict[Tuple[float, float, float], TriangleWitness] = {}
        for cells in self.near.values():
            for _, w in cells:
                seen.setdefault((w.x1, w.x2, w.x3), w)
        return list(seen.values())


def _witness(x: np.ndarray, y: np.ndarray, row: int, sigma: Signature) -> TriangleWitness:
    return TriangleWitness(
        x1=x[row, 0], x2=x[row, 1], x3=x[row, 2],
        y1=y[row, 0], y2=y[row, 1], y3=y[row, 2],
        sigma=str(sigma),
    )


def _sweep_batch(
    x: np.ndarray,
    y: np.ndarray,
    sigmas: List[Signature],
    rho: float,
    alpha: float,
    near_level: Optional[float] = None,
) -> _SweepResult:
    result = _SweepResult()
    result.count = int(x.shape[0])
    if result.count == 0:
        return result
    for sigma in sigmas:
        t = _slacks(x, y, sigma, rho)
        margins = _margins(t, sigma, alpha)
        where = int(np.argmin(margins))
        value = float(margins[where])
        result.per_signature[str(sigma)] = value
        if value < result.min_margin:
            result.min_margin = value
            result.witness = _witness(x, y, where, sigma)
        if near_level is None:
            continue
        # triangles with every slack zero have margin 0 for any f and are skipped
        close = np.flatnonzero(
            (margins < near_level) & np.isfinite(margins) & (np.abs(t).max(axis=1) > METRIC_SLACK)
        )
        if close.size:
            best = close[np.argsort(margins[close], kind="stable")[:REFINE_CENTRES]]
            result.near[str(sigma)] = [(float(margins[r]), _witness(x, y, int(r), sigma)) for r in best]
    return result


def _triangles_from(i: int, px: np.ndarray, py: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted metric triangles whose shortest side is evaluation point i."""
    tail = np.arange(i, px.size)
    jj, kk = np.triu_indices(tail.size)
    j, k = tail[jj], tail[kk]
    keep = px[k] <= px[i] + px[j] + METRIC_SLACK
    j, k = j[keep], k[keep]
    idx = np.column_stack([np.full(j.size, i), j, k])
    return px[idx], py[idx]


def _refine(
    f: "RoundingFunction",
    witness: TriangleWitness,
    step: float,
    sigmas: List[Signature],
    rho: float,
    alpha: float,
) -> _SweepResult:
    """10x finer sweep in a box of half-width ``step`` around a near-zero cell."""
    fine = step / 10.0
    offsets = np.arange(-10, 11) * fine
    windows = []
    for centre in (witness.x1, witness.x2, witness.x3):
        lo, hi = max(centre - step, 0.0), min(centre + step, 1.0)
        xs = np.clip(centre + offsets, lo, hi)
        windows.append(evaluation_points(f, xs, lo, hi))
    i1, i2, i3 = np.meshgrid(*(np.arange(w[0].size) for w in windows), indexing="ij")
    x = np.column_stack([windows[c][0][idx.ravel()] for c, idx in enumerate((i1, i2, i3))])
    y = np.column_stack([windows[c][1][idx.ravel()] for c, idx in enumerate((i1, i2, i3))])
    keep = (
        (x[:, 0] <= x[:, 1])
        & (x[:, 1] <= x[:, 2])
        & (x[:, 2] <= x[:, 0] + x[:, 1] + METRIC_SLACK)
        & (y[:, 0] <= y[:, 1])
        & (y[:, 1] <= y[:, 2])
    )
    return _sweep_batch(x[keep], y[keep], sigmas, rho, alpha)


def certify_grid(
    alpha: float,
    f: "RoundingFunction",
    rho: float,
    step: Optional[float] = None,
    mode: GraphMode = GraphMode.COMPLETE,
    eps_cert: Optional[float] = None,
    refine: bool = True,
    threads: Optional[int] = None,
) -> CertReport:
    """
    Sweep every sorted metric grid triangle and every admissible signature
    and report the smallest worst-case margin measured against ``rho``.

    Args:
        alpha: Weight-band ratio
        f: Rounding function under test
        rho: Claimed approximation factor
        step: Grid spacing in (0, 0.1]
        mode: COMPLETE (8 signatures) or BIPARTITE (13 signatures)
        eps_cert: Pass threshold; margin >= -eps_cert passes
        refine: Run the 10x refinement around the smallest non-degenerate
            margins below 10 * eps_cert
        threads: Workers for the sweep

    Returns:
        CertReport
    """
    settings = get_settings()
    step = settings.CC_GRID_STEP if step is None else step
    eps_cert = settings.CC_EPS_CERT if eps_cert is None else eps_cert
    if not 0.0 < step <= 0.1:
        raise ModelParameterError("grid step must lie in (0, 0.1]", step=step)
    if rho <= 0:
        raise ModelParameterError("rho must be positive", rho=rho)

    sigmas = signatures(mode)
    near_level = 10 * eps_cert if refine else None
    px, py = evaluation_points(f, grid_points(step))
    chunks = [c for c in np.array_split(np.arange(px.size), resolve_threads(threads) * 4) if c.size]

    def sweep(chunk: np.ndarray) -> _SweepResult:
        merged = _SweepResult()
        for i in chunk:
            x, y = _triangles_from(int(i), px, py)
            merged.absorb(_sweep_batch(x, y, sigmas, rho, alpha, near_level))
        return merged

    total = _SweepResult()
    for part in thread_map(sweep, chunks, threads):
        total.absorb(part)

    min_margin = total.min_margin
    refined = False
    refined_min: Optional[float] = None
    discrepancy = False
    centres = total.centres() if refine else []
    if centres:
        refined = True
        local = _SweepResult()
        for part in thread_map(lambda c: _refine(f, c, step, sigmas, rho, alpha), centres, threads):
            local.absorb(part)
        refined_min = local.min_margin
        if refined_min < -eps_cert <= min_margin:
            discrepancy = True
            logger.warning(
                "refinement_discrepancy",
                coarse=min_margin,
                refined=refined_min,
                witness=local.witness.model_dump() if local.witness else None,
            )
        if refined_min < min_margin:
            min_margin = refined_min
            total.witness = local.witness

    report = CertReport(
        alpha=alpha,
        rho=rho,
        step=step,
        mode=mode,
        variant=f.variant.value,
        eps_cert=eps_cert,
        triangles_checked=total.count,
        signatures_checked=total.count * len(sigmas),
        min_margin=min_margin,
        argmin=total.witness,
        per_signature=total.per_signature,
        refined=refined,
        refined_around=centres,
        refined_min_margin=refined_min,
        refinement_discrepancy=discrepancy,
        passed=min_margin >= -eps_cert,
    )
    logger.info(
        "certification_finished",
        alpha=alpha,
        rho=rho,
        step=step,
        mode=mode.value,
        triangles=report.triangles_checked,
        min_margin=report.min_margin,
        passed=report.passed,
    )
    return report


class TriangleSimulation(BaseModel):
    """Monte Carlo frequencies of one pivot step on a triangle, per edge."""

    samples: int
    disagreement: List[float]
    disagreement_se: List[float]
    removal: List[float]
    removal_se: List[float]
    expected_disagreement: List[float]
    expected_removal: List[float]


def simulate_triangle(
    x: Sequence[float],
    sigma: Signature,
    f: "RoundingFunction",
    samples: int = 1_000_000,
    seed: int = 0,
) -> TriangleSimulation:
    """
    Run one step of the pivot algorithm on a triangle ``samples`` times with
    the pivot fixed at u_i for edge e_i, and compare the empirical
    disagreement and removal frequencies of e_i with the closed forms.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_lengths(x)
    y = np.asarray(f(x), dtype=np.float64)
    rng = np.random.default_rng(seed)
    radius = rng.random(samples)

    disagreement, disagreement_se, removal, removal_se = [], [], [], []
    expected_cost, expected_removal = [], []
    for i, j, k in _OPPOSITE:
        # with u_i pivoting, u_k sits at distance x_j and u_j at distance x_k
        joins_j = y[k] <= radius
        joins_k = y[j] <= radius
        if sigma.signs[i] == EdgeSign.NEGATIVE:
            bad = joins_j & joins_k
        else:
            bad = joins_j ^ joins_k
        gone = joins_j | joins_k
        for hits, mean_out, se_out in ((bad, disagreement, disagreement_se), (gone, removal, removal_se)):
            p = float(hits.mean())
            mean_out.append(p)
            se_out.append(math.sqrt(max(p * (1 - p), 1e-300) / samples))
        expected_cost.append(float(cost_given_pivot(sigma.signs[i], y[j], y[k])))
        expected_removal.append(float(1.0 - min(y[j], y[k])))
    return TriangleSimulation(
        samples=samples,
        disagreement=disagreement,
        disagreement_se=disagreement_se,
        removal=removal,
        removal_se=removal_se,
        expected_disagreement=expected_cost,
        expected_removal=expected_removal,
    )
