"""
Maximin Strategy

Greedy geodesic farthest-point placement: start at a given node, then
repeatedly add the node whose minimum geodesic distance to the chosen set
is largest. Ties go to the lowest index.
"""

import logging
from typing import List

import numpy as np

from core.errors import MeshError
from core.geometry import WeightedGraph, geodesic_distances
from .base_strategy import BaseStrategy, check_budget

_LOGGER = logging.getLogger(__name__)


def maximin_order(graph: WeightedGraph, budget: int, start: int) -> List[int]:
    """Nodes in the order the greedy rule picks them."""
    n = graph.node_count
    check_budget(budget, n)
    if not 0 <= start < n:
        raise MeshError(f"start node {start} outside 0..{n - 1}")

    min_dist = geodesic_distances(graph, start)
    unreachable = np.flatnonzero(~np.isfinite(min_dist))
    if unreachable.size:
        raise MeshError(f"graph is disconnected; unreachable from {start}: "
                        f"{unreachable.tolist()}")

    order = [int(start)]
    chosen = np.zeros(n, dtype=bool)
    chosen[start] = True
    while len(order) < budget:
        candidates = np.where(chosen, -np.inf, min_dist)
        nxt = int(np.argmax(candidates))
        order.append(nxt)
        chosen[nxt] = True
        min_dist = np.minimum(min_dist, geodesic_distances(graph, nxt))
    _LOGGER.debug("maximin picked %d nodes from start %d", budget, start)
    return order


def select_maximin(graph: WeightedGraph, budget: int, start: int = 0) -> np.ndarray:
    """Greedy maximin sensor set, sorted."""
    return np.sort(np.asarray(maximin_order(graph, budget, start), dtype=int))


class MaximinStrategy(BaseStrategy):
    """
    Geometry-only placement maximising the minimum geodesic spacing.
    """

    def __init__(self, graph: WeightedGraph):
        super().__init__()
        self.graph = graph

    @property
    def n_sensors(self) -> int:
        return self.graph.node_count

    def select(self, budget: int, start: int = 0, **kwargs) -> np.ndarray:
        return select_maximin(self.graph, budget, start)
