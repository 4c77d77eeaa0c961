"""
Core Model

Instances, clusterings, the MinDisagree objective and validation of the
asymmetric weight regime.

Pairs are stored in a flat triangular array in ``np.triu_indices(n, 1)``
order, i.e. pair (u, v) with u < v sits at ``pair_index(u, v, n)``.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field

from .exceptions import DimensionError, InvalidInstanceError

logger = structlog.get_logger(__name__)

BAND_TOLERANCE = 1e-9


class EdgeSign(IntEnum):
    """Sign of an unordered pair."""
    NEGATIVE = -1
    MISSING = 0
    POSITIVE = 1

    @property
    def symbol(self) -> str:
        return {EdgeSign.NEGATIVE: "-", EdgeSign.MISSING: "o", EdgeSign.POSITIVE: "+"}[self]


class GraphMode(str, Enum):
    """Graph family an instance or an analysis refers to."""
    COMPLETE = "complete"
    BIPARTITE = "bipartite"


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(u: int, v: int, n: int) -> int:
    """Position of the unordered pair {u, v} in the triangular array."""
    if u == v:
        raise DimensionError("self-pairs are not stored", u=u)
    if u > v:
        u, v = v, u
    return u * n - u * (u + 1) // 2 + (v - u - 1)


@lru_cache(maxsize=64)
def pair_endpoints(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column of every stored pair, in storage order."""
    rows, cols = np.triu_indices(n, 1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def bipartite_missing_mask(n: int, left_size: int) -> np.ndarray:
    """True for the within-part pairs of a complete bipartite graph."""
    rows, cols = pair_endpoints(n)
    return (rows < left_size) == (cols < left_size)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Instance:
    """
    Complete (or complete bipartite) signed weighted graph together with its
    asymmetry profile ``(alpha, w_scale)``.
    """

    n: int
    signs: np.ndarray
    weights: np.ndarray
    alpha: float
    w_scale: float = 1.0
    left_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInstanceError("instance needs at least one vertex", n=self.n)
        signs = np.asarray(self.signs, dtype=np.int8)
        weights = np.asarray(self.weights, dtype=np.float64)
        m = num_pairs(self.n)
        if signs.shape != (m,) or weights.shape != (m,):
            raise DimensionError(
                "sign/weight arrays must hold one entry per unordered pair",
                expected=m,
                signs=signs.shape[0] if signs.ndim == 1 else -1,
                weights=weights.shape[0] if weights.ndim == 1 else -1,
            )
        if not np.isin(signs, (-1, 0, 1)).all():
            raise InvalidInstanceError("signs must be -1, 0 or +1")
        if not np.isfinite(weights).all() or (weights < 0).any():
            raise InvalidInstanceError("weights must be finite and nonnegative")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInstanceError("alpha must lie in (0, 1]", alpha=self.alpha)

        missing = signs == EdgeSign.MISSING
        if self.left_size is None:
            if missing.any():
                raise InvalidInstanceError("complete instances cannot contain missing pairs")
        else:
            if not 0 < self.left_size < self.n:
                raise InvalidInstanceError(
                    "bipartite left side must be a proper nonempty subset",
                    left_size=self.left_size,
                )
            within = bipartite_missing_mask(self.n, self.left_size)
            if not np.array_equal(missing, within):
                raise InvalidInstanceError("exactly the within-part pairs must be missing")
            if (weights[within] != 0).any():
                raise InvalidInstanceError("missing pairs must carry weight 0")

        object.__setattr__(self, "signs", _frozen(signs))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_matrices(
        cls,
        signs: np.ndarray,
        weights: np.ndarray,
        alpha: float,
        w_scale: float = 1.0,
        left_size: Optional[int] = None,
    ) -> "Instance":
        """Build from dense symmetric n x n sign and weight matrices."""
        signs = np.asarray(signs)
        weights = np.asarray(weights, dtype=np.float64)
        if signs.ndim != 2 or signs.shape[0] != signs.shape[1] or weights.shape != signs.shape:
            raise DimensionError("expected two square matrices of equal shape")
        n = signs.shape[0]
        rows, cols = pair_endpoints(n)
        return cls(
            n=n,
            signs=signs[rows, cols],
            weights=weights[rows, cols],
            alpha=alpha,
            w_scale=w_scale,
            left_size=left_size,
        )

    @property
    def mode(self) -> GraphMode:
        return GraphMode.COMPLETE if self.left_size is None else GraphMode.BIPARTITE

    @property
    def num_pairs(self) -> int:
        return num_pairs(self.n)

    def sign(self, u: int, v: int) -> EdgeSign:
        return EdgeSign(int(self.signs[pair_index(u, v, self.n)]))

    def weight(self, u: int, v: int) -> float:
        return float(self.weights[pair_index(u, v, self.n)])

    @cached_property
    def sign_matrix(self) -> np.ndarray:
        """Dense symmetric sign matrix with a zero diagonal."""
        return _frozen(self._dense(self.signs, np.int8))

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        """Dense symmetric weight matrix with a zero diagonal."""
        return _frozen(self._dense(self.weights, np.float64))

    def _dense(self, values: np.ndarray, dtype) -> np.ndarray:
        rows, cols = pair_endpoints(self.n)
        dense = np.zeros((self.n, self.n), dtype=dtype)
        dense[rows, cols] = values
        dense[cols, rows] = values
        return dense

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def __repr__(self) -> str:
        return (
            f"Instance(n={self.n}, mode={self.mode.value}, alpha={self.alpha:g}, "
            f"w_scale={self.w_scale:g})"
        )


@dataclass(frozen=True)
class Clustering:
    """A partition of ``0..n-1`` given as one label per vertex."""

    labels: np.ndarray = field()

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise DimensionError("labels must be a flat sequence")
        if (labels < 0).any():
            raise DimensionError("cluster identifiers must be nonnegative")
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_clusters(cls, clusters: Sequence[Sequence[int]], n: int) -> "Clustering":
        labels = np.full(n, -1, dtype=np.int64)
        for cid, members in enumerate(clusters):
            labels[list(members)] = cid
        if (labels < 0).any():
            raise DimensionError("clusters do not cover every vertex", n=n)
        return cls(labels)

    @classmethod
    def singletons(cls, n: int) -> "Clustering":
        return cls(np.arange(n))

    @classmethod
    def single_cluster(cls, n: int) -> "Clustering":
        return cls(np.zeros(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def clusters(self) -> List[List[int]]:
        """Members of every cluster, ordered by first appearance."""
        groups: Dict[int, List[int]] = {}
        for vertex, label in enumerate(self.labels.tolist()):
            groups.setdefault(label, []).append(vertex)
        return list(groups.values())

    def canonical(self) -> "Clustering":
        """Relabel clusters 0, 1, 2, ... by first appearance."""
        _, first, inverse = np.unique(self.labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return Clustering(order[inverse])

    def same_partition(self, other: "Clustering") -> bool:
        return np.array_equal(self.canonical().labels, other.canonical().labels)


class PairViolation(BaseModel):
    u: int
    v: int
    sign: str
    weight: float
    reason: str


class ValidationReport(BaseModel):
    """Pairs violating the weight bands; empty iff the instance is valid."""
    violations: List[PairViolation] = Field(default_factory=list)
    scale_ok: bool = True

    @property
    def valid(self) -> bool:
        return self.scale_ok and not self.violations


def validate_instance(inst: Instance, tol: float = BAND_TOLERANCE) -> ValidationReport:
    """
    Report every pair outside its band: positive weights must lie in
    [alpha*w, w], negative weights in [alpha*w, inf). Missing pairs are exempt.
    """
    if inst.w_scale <= 0:
        return ValidationReport(scale_ok=False)

    slack = tol * inst.w_scale
    lower = inst.alpha * inst.w_scale - slack
    upper = inst.w_scale + slack
    positive = inst.signs == EdgeSign.POSITIVE
    negative = inst.signs == EdgeSign.NEGATIVE

    too_light = (positive | negative) & (inst.weights < lower)
    too_heavy = positive & (inst.weights > upper)

    rows, cols = pair_endpoints(inst.n)
    violations = []
    for idx in np.flatnonzero(too_light | too_heavy):
        violations.append(
            PairViolation(
                u=int(rows[idx]),
                v=int(cols[idx]),
                sign=EdgeSign(int(inst.signs[idx])).symbol,
                weight=float(inst.weights[idx]),
                reason="below alpha*w" if too_light[idx] else "above w",
            )
        )
    if violations:
        logger.debug("instance_band_violations", count=len(violations))
    return ValidationReport(violations=violations)


def normalize(inst: Instance) -> Instance:
    """Divide all weights by ``w_scale`` so the scale becomes 1."""
    if inst.w_scale <= 0:
        raise InvalidInstanceError("w_scale must be positive", w_scale=inst.w_scale)
    if inst.w_scale == 1.0:
        return inst
    return Instance(
        n=inst.n,
        signs=inst.signs,
        weights=inst.weights / inst.w_scale,
        alpha=inst.alpha,
        w_scale=1.0,
        left_size=inst.left_size,
    )


def disagreement_cost(inst: Instance, clustering: Clustering) -> float:
    """Weight of positive pairs split across clusters plus negative pairs kept together."""
    if clustering.n != inst.n:
        raise DimensionError("label vector length differs from n", n=inst.n, labels=clustering.n)
    rows, cols = pair_endpoints(inst.n)
    together = clustering.labels[rows] == clustering.labels[cols]
    cut_positive = (inst.signs == EdgeSign.POSITIVE) & ~together
    joined_negative = (inst.signs == EdgeSign.NEGATIVE) & together
    return float(inst.weights[cut_positive].sum() + inst.weights[joined_negative].sum())
