"""
Aliev-Panfilov Physics

Mean squared residual of the Aliev-Panfilov equations at collocation points
on the heart surface graph:

    r_u = du/dt - (L u)_i - k_r u (u - a)(1 - u) + u v
    r_v = dv/dt - xi(u, v) (-v - k_r u (u - a - 1))
    r_b = 0 on closed surfaces

The Laplacian at a collocation point uses the model evaluated at the
neighbouring nodes at the same time.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from core.autodiff import apply_left, square
from core.data_models import APParams
from core.errors import ConfigError, SingularityError
from core.geometry import WeightedGraph
from .base_physics import BasePhysics

_LOGGER = logging.getLogger(__name__)


@dataclass
class CollocationSet:
    """N_f (heart node index, time) pairs."""
    node_index: np.ndarray
    times: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        self.node_index = np.asarray(self.node_index, dtype=int).ravel()
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.node_index.shape != self.times.shape or self.node_index.size == 0:
            raise ConfigError("collocation needs matching, non-empty node and time arrays",
                              field='collocation')

    @property
    def size(self) -> int:
        return int(self.node_index.size)


def sample_collocation(n_nodes: int, times: np.ndarray, n_points: int,
                       seed: int) -> CollocationSet:
    """
    Uniform sample of (node, frame) pairs.

    Without replacement when enough pairs exist, with replacement otherwise.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    total = n_nodes * times.size
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=n_points, replace=n_points > total)
    flat = np.sort(flat)
    return CollocationSet(node_index=flat // times.size, times=times[flat % times.size],
                          seed=seed)


class AlievPanfilovPhysics(BasePhysics):
    """
    Aliev-Panfilov residual loss on the heart surface.

    Mean over collocation points of r_u^2 + r_v^2 + r_b^2.
    """

    def __init__(self, graph: WeightedGraph, heart_coords: np.ndarray, params: APParams,
                 collocation: CollocationSet):
        super().__init__()
        self.graph = graph
        self.heart_coords = np.asarray(heart_coords, dtype=float).reshape(-1, 3)
        self.params = params
        self.collocation = collocation
        if self.heart_coords.shape[0] != graph.node_count:
            raise ConfigError("heart coordinates and graph disagree on node count",
                              field='heart_coords')
        bad = collocation.node_index[(collocation.node_index < 0)
                                     | (collocation.node_index >= graph.node_count)]
        if bad.size:
            raise ConfigError(f"collocation node {int(bad[0])} outside the heart mesh",
                              field='collocation')
        self._build_stencil()

    def _build_stencil(self):
        """Neighbour query points and the sparse weights that combine them."""
        coll = self.collocation
        rows, nbr_nodes, weights = [], [], []
        for k, i in enumerate(coll.node_index):
            for j, d in self.graph.neighbors(int(i)):
                rows.append(k)
                nbr_nodes.append(j)
                weights.append(self.params.D / d)

        self._nbr_coords = self.heart_coords[np.asarray(nbr_nodes, dtype=int)]
        self._nbr_times = coll.times[np.asarray(rows, dtype=int)]
        m = len(nbr_nodes)
        self._nbr_weights = sp.csr_matrix(
            (np.asarray(weights, dtype=float), (np.asarray(rows, dtype=int), np.arange(m))),
            shape=(coll.size, m))
        self._degree = np.bincount(np.asarray(rows, dtype=int),
                                   weights=np.asarray(weights, dtype=float),
                                   minlength=coll.size)
        self._coll_coords = self.heart_coords[coll.node_index]

    def residuals(self, model, theta):
        """Residual nodes (r_u, r_v) at every collocation point."""
        p = self.params
        out, out_dt = model.evaluate(theta, self._coll_coords, self.collocation.times,
                                     with_dt=True)
        u, v = out[:, 0], out[:, 1]
        u_t, v_t = out_dt[:, 0], out_dt[:, 1]

        if self._nbr_times.size:
            u_nbr = model.evaluate(theta, self._nbr_coords, self._nbr_times)[0][:, 0]
            lap = apply_left(self._nbr_weights, u_nbr) - self._degree * u
        else:
            lap = 0.0

        singular = np.flatnonzero(u.value + p.mu2 == 0)
        if singular.size:
            raise SingularityError(int(self.collocation.node_index[singular[0]]))
        xi = p.e0 + p.mu1 * v / (u + p.mu2)

        r_u = u_t - lap - p.k_r * u * (u - p.a) * (1.0 - u) + u * v
        r_v = v_t - xi * (-v - p.k_r * u * (u - p.a - 1.0))
        return r_u, r_v

    def loss_node(self, model, theta):
        r_u, r_v = self.residuals(model, theta)
        # r_b vanishes identically on a closed surface
        return (square(r_u) + square(r_v)).sum() / float(self.collocation.size)
