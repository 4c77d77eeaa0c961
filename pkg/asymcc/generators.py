"""
Instance Generators

Planted ground-truth instances, integrality-gap instances on random
3-regular graphs, and random / two-weight test instances. Every generator is
a pure function of its parameters and seed.
"""

import math
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator
from scipy.sparse.csgraph import shortest_path

from .config import get_settings
from .exceptions import GraphSamplingError, ModelParameterError
from .model import Clustering, EdgeSign, Instance, bipartite_missing_mask, pair_endpoints
from .relaxation import MetricSolution, lp_objective
from .rounding import make_f, rounding_trials

logger = structlog.get_logger(__name__)


class PlantedParams(BaseModel):
    """Planted partition with noisy signs."""

    sizes: List[int] = Field(..., min_length=1)
    p_plus: float = Field(..., gt=0.0, lt=1.0)
    q_minus: float = Field(..., gt=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_signal(self) -> "PlantedParams":
        if any(size < 1 for size in self.sizes):
            raise ModelParameterError("cluster sizes must be positive", sizes=self.sizes)
        if self.p_plus + self.q_minus <= 1.0:
            raise ModelParameterError(
                "planted model requires p_plus + q_minus > 1",
                p_plus=self.p_plus,
                q_minus=self.q_minus,
            )
        return self

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def weights(self) -> Tuple[float, float]:
        """Log-likelihood weights (w+, w-)."""
        w_plus = math.log(self.p_plus / (1.0 - self.q_minus))
        w_minus = math.log(self.q_minus / (1.0 - self.p_plus))
        return w_plus, w_minus


class GapParams(BaseModel):
    n: int = Field(..., ge=4)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    bipartite: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def check_size(self) -> "GapParams":
        if self.n % 2:
            raise ModelParameterError("a 3-regular graph needs an even vertex count", n=self.n)
        if self.bipartite and self.n < 6:
            raise ModelParameterError("a 3-regular bipartite graph needs n >= 6", n=self.n)
        return self


def _regime(w_plus: float, w_minus: float) -> Tuple[float, float]:
    """(alpha, w_scale) for positive weight w+ and negative weight w-."""
    return min(w_plus, w_minus) / w_plus, w_plus


def planted_instance(params: PlantedParams) -> Tuple[Instance, Clustering]:
    """
    Sample signs from the planted model: a within-cluster pair is positive
    with probability p_plus, a cross pair negative with probability q_minus.
    Positive pairs weigh ln(p+/(1-q-)) and negative pairs ln(q-/(1-p+)).
    """
    truth = Clustering(np.repeat(np.arange(len(params.sizes)), params.sizes))
    n = params.n
    rows, cols = pair_endpoints(n)
    rng = np.random.default_rng(params.seed)
    same = truth.labels[rows] == truth.labels[cols]
    draw = rng.random(rows.size)
    positive = np.where(same, draw < params.p_plus, draw >= params.q_minus)

    w_plus, w_minus = params.weights
    alpha, w_scale = _regime(w_plus, w_minus)
    inst = Instance(
        n=n,
        signs=np.where(positive, EdgeSign.POSITIVE, EdgeSign.NEGATIVE),
        weights=np.where(positive, w_plus, w_minus),
        alpha=alpha,
        w_scale=w_scale,
    )
    logger.debug("planted_instance", n=n, w_plus=w_plus, w_minus=w_minus, alpha=alpha)
    return inst, truth


def suggested_gap_n(alpha: float) -> int:
    """Smallest even n >= 1 / (alpha^2 ln^2(1/alpha)), at least 4."""
    if not 0.0 < alpha <= 0.5:
        raise ModelParameterError("suggested size needs alpha in (0, 0.5]", alpha=alpha)
    n = math.ceil(1.0 / (alpha**2 * math.log(1.0 / alpha) ** 2))
    return max(4, n + (n % 2))


def _regular_graph(n: int, rng: np.random.Generator) -> nx.Graph:
    return nx.random_regular_graph(3, n, seed=int(rng.integers(2**32)))


def _regular_bipartite_graph(n: int, rng: np.random.Generator) -> Optional[nx.Graph]:
    """Union of three random perfect matchings between the halves; None if not simple."""
    half = n // 2
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for _ in range(3):
        for left, right in enumerate(rng.permutation(half)):
            if graph.has_edge(left, half + int(right)):
                return None
            graph.add_edge(left, half + int(right))
    return graph


def _sample_connected(params: GapParams) -> nx.Graph:
    cap = get_settings().CC_GAP_RETRY_CAP
    rng = np.random.default_rng(params.seed)
    for attempt in range(1, cap + 1):
        try:
            graph = (
                _regular_bipartite_graph(params.n, rng)
                if params.bipartite
                else _regular_graph(params.n, rng)
            )
        except nx.NetworkXError:
            graph = None
        if graph is not None and nx.is_connected(graph):
            logger.debug("gap_graph_sampled", n=params.n, attempts=attempt)
            return graph
    raise GraphSamplingError(
        "could not sample a connected simple 3-regular graph", n=params.n, attempts=cap
    )


def gap_instance(params: GapParams) -> Tuple[Instance, MetricSolution]:
    """
    Integrality-gap instance: edges of a random connected 3-regular graph are
    positive with weight 1, every other pair (every other cross pair in the
    bipartite variant) is negative with weight alpha. The fractional solution
    is x_uv = min(eps * d(u, v), 1) with eps = 2 / log_3 n and d the graph
    distance.
    """
    n = params.n
    graph = _sample_connected(params)
    adjacency = nx.to_numpy_array(graph, nodelist=range(n))
    distance = shortest_path(adjacency, method="D", unweighted=True)
    eps = 2.0 / math.log(n, 3)
    x = np.minimum(eps * distance, 1.0)
    np.fill_diagonal(x, 0.0)

    rows, cols = pair_endpoints(n)
    edge = adjacency[rows, cols] > 0
    signs = np.where(edge, EdgeSign.POSITIVE, EdgeSign.NEGATIVE)
    weights = np.where(edge, 1.0, params.alpha)
    left_size = None
    if params.bipartite:
        left_size = n // 2
        within = bipartite_missing_mask(n, left_size)
        signs = np.where(within, EdgeSign.MISSING, signs)
        weights = np.where(within, 0.0, weights)

    inst = Instance(n=n, signs=signs, weights=weights, alpha=params.alpha, left_size=left_size)
    solution = MetricSolution.from_lengths(inst, x)
    logger.info("gap_instance", n=n, eps=eps, bipartite=params.bipartite, lp=solution.objective)
    return inst, solution


def random_instance(n: int, alpha: float, positive_density: float, seed: int) -> Instance:
    """Positive weights uniform in [alpha, 1], negative weights uniform in [alpha, 2]."""
    if n < 2:
        raise ModelParameterError("random instances need n >= 2", n=n)
    if not 0.0 < alpha <= 1.0:
        raise ModelParameterError("alpha must lie in (0, 1]", alpha=alpha)
    if not 0.0 <= positive_density <= 1.0:
        raise ModelParameterError("density must lie in [0, 1]", density=positive_density)
    rng = np.random.default_rng(seed)
    m = n * (n - 1) // 2
    positive = rng.random(m) < positive_density
    weights = np.where(positive, rng.uniform(alpha, 1.0, m), rng.uniform(alpha, 2.0, m))
    return Instance(
        n=n,
        signs=np.where(positive, EdgeSign.POSITIVE, EdgeSign.NEGATIVE),
        weights=weights,
        alpha=alpha,
    )


def two_weight_instance(
    n: int, w_plus: float, w_minus: float, positive_density: float, seed: int
) -> Instance:
    """Every positive pair weighs w+ and every negative pair w-."""
    if n < 2:
        raise ModelParameterError("two-weight instances need n >= 2", n=n)
    if w_plus <= 0 or w_minus <= 0:
        raise ModelParameterError("both weights must be positive", w_plus=w_plus, w_minus=w_minus)
    if not 0.0 <= positive_density <= 1.0:
        raise ModelParameterError("density must lie in [0, 1]", density=positive_density)
    rng = np.random.default_rng(seed)
    positive = rng.random(n * (n - 1) // 2) < positive_density
    alpha, w_scale = _regime(w_plus, w_minus)
    return Instance(
        n=n,
        signs=np.where(positive, EdgeSign.POSITIVE, EdgeSign.NEGATIVE),
        weights=np.where(positive, w_plus, w_minus),
        alpha=alpha,
        w_scale=w_scale,
    )


class GapReport(BaseModel):
    n: int
    alpha: float
    trials: int
    best_integral: float
    fractional: float
    ratio: float
    positive_bound: float
    negative_bound: float


def gap_ratio(
    inst: Instance,
    x: MetricSolution,
    trials: int = 20,
    seed: int = 0,
    threads: Optional[int] = None,
) -> GapReport:
    """Best rounded cost over seeded trials against the fractional cost of ``x``."""
    f = make_f(inst.alpha, inst.mode)
    results = rounding_trials(inst, x, f, trials, seed, threads)
    best = min(r.cost for r in results)
    fractional = lp_objective(inst, x.x)
    log3n = math.log(inst.n, 3)
    return GapReport(
        n=inst.n,
        alpha=inst.alpha,
        trials=trials,
        best_integral=best,
        fractional=fractional,
        ratio=best / fractional if fractional > 0 else math.inf,
        positive_bound=3.0 * inst.n / log3n,
        negative_bound=inst.alpha * inst.n**1.5,
    )
