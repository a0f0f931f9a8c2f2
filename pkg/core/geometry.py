#!/usr/bin/env python3
"""
Geometry Module

Surface meshes, edge graphs, the graph Laplacian, geodesic distances and the
synthetic heart-to-body transfer matrix.

The same WeightedGraph serves three consumers: the diffusion term of the
Aliev-Panfilov model, the maximin sensor strategy (geodesics) and the
harmonic imputation of importance scores.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import ConvexHull

from core.errors import ConfigError, MeshError

_LOGGER = logging.getLogger(__name__)


def _check_triangles(triangles: np.ndarray, node_count: int):
    """Reject out-of-range indices and degenerate triangles, naming the triangle."""
    for t_idx, tri in enumerate(triangles):
        if np.any(tri < 0) or np.any(tri >= node_count):
            raise MeshError(f"triangle {t_idx} {tuple(int(i) for i in tri)} "
                            f"references a node outside [0, {node_count})")
        if len(set(int(i) for i in tri)) != 3:
            raise MeshError(f"triangle {t_idx} {tuple(int(i) for i in tri)} is degenerate")


@dataclass
class SurfaceMesh:
    """
    Triangulated surface (heart or body).

    A mesh without triangles is allowed: it is a bare point set whose graph
    has no edges (used by the tiny oracle problems).
    """
    node_coords: np.ndarray            # (n, 3)
    triangles: np.ndarray = None       # (m, 3) node indices

    def __post_init__(self):
        self.node_coords = np.asarray(self.node_coords, dtype=float).reshape(-1, 3)
        if self.triangles is None:
            self.triangles = np.zeros((0, 3), dtype=int)
        self.triangles = np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        if self.node_count == 0:
            raise MeshError("mesh must contain at least one node")
        if not np.all(np.isfinite(self.node_coords)):
            raise MeshError("node coordinates must be finite")
        _check_triangles(self.triangles, self.node_count)

    @property
    def node_count(self) -> int:
        return int(self.node_coords.shape[0])

    def to_dict(self) -> dict:
        """Convert to the JSON mesh format (`nodes`, `triangles`)"""
        return {
            'nodes': self.node_coords.tolist(),
            'triangles': self.triangles.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SurfaceMesh':
        """Create a SurfaceMesh from the JSON mesh format"""
        if 'nodes' not in data:
            raise MeshError("mesh document has no 'nodes' field")
        return cls(node_coords=data['nodes'], triangles=data.get('triangles', []))


@dataclass
class WeightedGraph:
    """
    Undirected graph with positive edge lengths.

    `adjacency[i]` lists `(j, d_ij)` pairs. Symmetry and positivity are
    checked on construction.
    """
    adjacency: List[List[Tuple[int, float]]]
    _edges: Tuple[np.ndarray, np.ndarray, np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        lookup = {}
        for i, nbrs in enumerate(self.adjacency):
            for j, d in nbrs:
                if not (d > 0) or not np.isfinite(d):
                    raise MeshError(f"edge ({i}, {j}) has non-positive length {d}")
                if j < 0 or j >= len(self.adjacency):
                    raise MeshError(f"edge ({i}, {j}) references a missing node")
                lookup[(i, j)] = d
        for (i, j), d in lookup.items():
            back = lookup.get((j, i))
            if back is None or back != d:
                raise MeshError(f"graph is not symmetric at edge ({i}, {j})")

        rows, cols, lengths = [], [], []
        for i, nbrs in enumerate(self.adjacency):
            for j, d in nbrs:
                rows.append(i)
                cols.append(j)
                lengths.append(d)
        self._edges = (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int),
                       np.asarray(lengths, dtype=float))

    @property
    def node_count(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        """Number of undirected edges"""
        return len(self._edges[0]) // 2

    def directed_edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Both orientations of every edge as (rows, cols, lengths) arrays."""
        return self._edges

    def neighbors(self, i: int) -> List[Tuple[int, float]]:
        return self.adjacency[i]

    def length_matrix(self) -> sp.csr_matrix:
        """Sparse symmetric matrix of edge lengths."""
        rows, cols, lengths = self._edges
        n = self.node_count
        return sp.csr_matrix((lengths, (rows, cols)), shape=(n, n))

    @classmethod
    def from_edges(cls, node_count: int, edges) -> 'WeightedGraph':
        """
        Build a graph from undirected `(i, j, d)` triples.

        Args:
            node_count: Number of nodes
            edges: Iterable of (i, j, length) with each undirected edge listed once
        """
        adjacency = [[] for _ in range(node_count)]
        for i, j, d in edges:
            adjacency[int(i)].append((int(j), float(d)))
            adjacency[int(j)].append((int(i), float(d)))
        return cls(adjacency=adjacency)


@dataclass
class TransferMatrix:
    """Dense N_b x N_h operator mapping heart potentials to body potentials."""
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if self.entries.ndim != 2:
            raise ConfigError("transfer matrix must be two-dimensional", field='transfer')
        if not np.all(np.isfinite(self.entries)):
            raise ConfigError("transfer matrix entries must be finite", field='transfer')

    @property
    def n_body(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_heart(self) -> int:
        return int(self.entries.shape[1])

    def rows(self, sensors) -> 'TransferMatrix':
        """Sub-matrix restricted to the given body nodes."""
        return TransferMatrix(self.entries[np.asarray(sensors, dtype=int)])


def build_edge_graph(mesh: SurfaceMesh) -> WeightedGraph:
    """
    Build the edge graph induced by a triangulated surface.

    One graph node per mesh node, one edge per unique triangle edge, with
    the Euclidean distance between endpoints as edge length.

    Args:
        mesh: Valid surface mesh

    Returns:
        WeightedGraph over the mesh nodes
    """
    _check_triangles(mesh.triangles, mesh.node_count)

    edge_set = set()
    for tri in mesh.triangles:
        a, b, c = (int(i) for i in tri)
        for i, j in ((a, b), (b, c), (c, a)):
            edge_set.add((min(i, j), max(i, j)))

    edges = []
    for i, j in sorted(edge_set):
        d = float(np.linalg.norm(mesh.node_coords[i] - mesh.node_coords[j]))
        if d <= 0:
            raise MeshError(f"nodes {i} and {j} coincide")
        edges.append((i, j, d))

    _LOGGER.debug("edge graph: %d nodes, %d edges", mesh.node_count, len(edges))
    return WeightedGraph.from_edges(mesh.node_count, edges)


def laplacian_matrix(graph: WeightedGraph, D: float) -> sp.csr_matrix:
    """
    Sparse graph Laplacian with edge weights D / d_ij.

    (L f)_i = sum_j (D / d_ij) (f_j - f_i); L is symmetric negative semi-definite.
    """
    if not D > 0:
        raise ConfigError(f"diffusivity must be positive, got {D}", field='D')
    rows, cols, lengths = graph.directed_edges()
    n = graph.node_count
    weights = D / lengths
    off_diag = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    degree = np.asarray(off_diag.sum(axis=1)).ravel()
    return (off_diag - sp.diags(degree)).tocsr()


def graph_laplacian_apply(graph: WeightedGraph, field_values: np.ndarray, D: float) -> np.ndarray:
    """
    Apply the weighted graph Laplacian to a per-node field.

    Args:
        graph: Weighted graph
        field_values: Array of shape (n,) or (n, k)
        D: Diffusivity (> 0)

    Returns:
        L @ field_values, same shape as the input
    """
    values = np.asarray(field_values, dtype=float)
    if values.shape[0] != graph.node_count:
        raise ConfigError(f"field has {values.shape[0]} entries, graph has "
                          f"{graph.node_count} nodes", field='field')
    return laplacian_matrix(graph, D) @ values


def diffusion_stability_bound(graph: WeightedGraph, D: float) -> float:
    """Explicit Euler bound 2 / max_i sum_j D/d_ij (infinite for an edgeless graph)."""
    rows, _, lengths = graph.directed_edges()
    if len(rows) == 0:
        return float('inf')
    row_sums = np.bincount(rows, weights=D / lengths, minlength=graph.node_count)
    return 2.0 / float(row_sums.max())


def geodesic_distances(graph: WeightedGraph, source: int) -> np.ndarray:
    """
    Shortest-path distances from `source` along edge lengths.

    Unreachable nodes get +inf.
    """
    if source < 0 or source >= graph.node_count:
        raise ConfigError(f"source {source} outside [0, {graph.node_count})", field='source')
    return np.asarray(dijkstra(graph.length_matrix(), directed=False, indices=int(source)),
                      dtype=float)


def synth_transfer_matrix(heart: SurfaceMesh, body: SurfaceMesh,
                          kernel_scale: float = 1.0) -> TransferMatrix:
    """
    Inverse-distance transfer matrix with unit row sums.

    R_ij = kernel_scale / |x_b,i - x_h,j|, then each row divided by its sum.
    Stands in for the boundary-element operator: smooth and ill-conditioned.

    Args:
        heart: Heart surface (columns)
        body: Body surface (rows)
        kernel_scale: Positive kernel amplitude

    Returns:
        TransferMatrix of shape (N_b, N_h)
    """
    if not kernel_scale > 0:
        raise ConfigError(f"kernel_scale must be positive, got {kernel_scale}",
                          field='kernel_scale')
    diff = body.node_coords[:, None, :] - heart.node_coords[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    coincident = np.argwhere(dist <= 0)
    if len(coincident):
        b, h = coincident[0]
        raise MeshError(f"body node {b} coincides with heart node {h}")
    kernel = kernel_scale / dist
    return TransferMatrix(kernel / kernel.sum(axis=1, keepdims=True))


def sphere_mesh(node_count: int, radius: float = 1.0,
                center: Optional[Tuple[float, float, float]] = None) -> SurfaceMesh:
    """
    Triangulated sphere with an arbitrary number of nodes.

    Nodes lie on a Fibonacci spiral; the convex hull gives the triangles.
    Deterministic for a given node count.

    Args:
        node_count: Number of nodes (>= 4)
        radius: Sphere radius
        center: Sphere center (default origin)

    Returns:
        SurfaceMesh
    """
    if node_count < 4:
        raise ConfigError(f"a sphere mesh needs at least 4 nodes, got {node_count}",
                          field='node_count')
    if not radius > 0:
        raise ConfigError(f"radius must be positive, got {radius}", field='radius')

    k = np.arange(node_count, dtype=float) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / node_count)
    azimuth = np.pi * (1.0 + 5.0 ** 0.5) * k
    unit = np.column_stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar),
    ])
    hull = ConvexHull(unit)
    triangles = np.sort(hull.simplices, axis=1)
    triangles = triangles[np.lexsort(triangles.T[::-1])]

    offset = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    return SurfaceMesh(node_coords=unit * radius + offset, triangles=triangles)
