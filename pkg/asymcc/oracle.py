"""
Exact optimum by enumerating every set partition of a small instance.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import structlog

from .config import get_settings
from .exceptions import SizeLimitError
from .model import Clustering, EdgeSign, Instance

logger = structlog.get_logger(__name__)


def bell_number(n: int) -> int:
    """Number of set partitions of an n-element set."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[0]


@dataclass(frozen=True)
class ExactResult:
    opt_cost: float
    opt_clustering: Clustering
    partitions_enumerated: int


def exact_opt(inst: Instance, n_cap: Optional[int] = None) -> ExactResult:
    """
    Minimum disagreement cost over all partitions, enumerated as
    restricted-growth strings with the cost updated one vertex at a time.
    Ties keep the first partition in enumeration order.

    Raises:
        SizeLimitError: n > n_cap
    """
    n_cap = get_settings().CC_EXACT_CAP if n_cap is None else n_cap
    n = inst.n
    if n > n_cap:
        raise SizeLimitError("instance too large for exhaustive search", n=n, n_cap=n_cap)

    signs = inst.sign_matrix
    weights = inst.weight_matrix
    w_pos: List[List[float]] = np.where(signs == EdgeSign.POSITIVE, weights, 0.0).tolist()
    w_neg: List[List[float]] = np.where(signs == EdgeSign.NEGATIVE, weights, 0.0).tolist()
    # cost of starting a new block with v: all positive pairs to earlier vertices are cut
    cut_all = [sum(w_pos[v][:v]) for v in range(n)]

    labels = [0] * n
    best_cost = math.inf
    best_labels = list(labels)
    count = 0

    def block_sums(v: int, k: int):
        pos_in = [0.0] * k
        neg_in = [0.0] * k
        row_p, row_n = w_pos[v], w_neg[v]
        for u in range(v):
            b = labels[u]
            pos_in[b] += row_p[u]
            neg_in[b] += row_n[u]
        return pos_in, neg_in

    def extend(v: int, k: int, cost: float) -> None:
        nonlocal best_cost, best_labels, count
        pos_in, neg_in = block_sums(v, k)
        base = cut_all[v]
        if v == n - 1:
            count += k + 1
            for b in range(k + 1):
                total = cost + base - (pos_in[b] - neg_in[b] if b < k else 0.0)
                if total < best_cost:
                    labels[v] = b
                    best_cost = total
                    best_labels = list(labels)
            return
        for b in range(k):
            labels[v] = b
            extend(v + 1, k, cost + base - pos_in[b] + neg_in[b])
        labels[v] = k
        extend(v + 1, k + 1, cost + base)

    if n == 1:
        best_cost, count = 0.0, 1
    else:
        extend(1, 1, 0.0)

    logger.debug("exact_opt_finished", n=n, partitions=count, opt_cost=best_cost)
    return ExactResult(
        opt_cost=float(best_cost),
        opt_clustering=Clustering(best_labels),
        partitions_enumerated=count,
    )
