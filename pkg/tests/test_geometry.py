import numpy as np
import pytest

from conftest import path_graph, random_connected_graph
from core.errors import ConfigError, MeshError
from core.geometry import (SurfaceMesh, WeightedGraph, build_edge_graph,
                           diffusion_stability_bound, geodesic_distances, graph_laplacian_apply,
                           laplacian_matrix, sphere_mesh, synth_transfer_matrix)


def _square_mesh() -> SurfaceMesh:
    nodes = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    return SurfaceMesh(node_coords=nodes, triangles=[[0, 1, 2], [0, 2, 3]])


def test_edge_graph_counts_shared_edges_once():
    graph = build_edge_graph(_square_mesh())
    assert graph.node_count == 4
    assert graph.edge_count == 5
    lengths = dict(graph.neighbors(0))
    assert lengths[1] == pytest.approx(1.0)
    assert lengths[2] == pytest.approx(np.sqrt(2.0))


def test_degenerate_triangle_is_rejected():
    with pytest.raises(MeshError, match="degenerate"):
        SurfaceMesh(node_coords=np.eye(3), triangles=[[0, 1, 1]])


def test_triangle_index_out_of_range_is_rejected():
    with pytest.raises(MeshError, match="triangle 0"):
        SurfaceMesh(node_coords=np.eye(3), triangles=[[0, 1, 3]])


def test_asymmetric_graph_is_rejected():
    with pytest.raises(MeshError, match="symmetric"):
        WeightedGraph(adjacency=[[(1, 1.0)], []])


def test_laplacian_on_path_matches_hand_stencil():
    graph = path_graph(3)
    out = graph_laplacian_apply(graph, np.array([0.0, 1.0, 0.0]), D=1.0)
    np.testing.assert_allclose(out, [1.0, -2.0, 1.0])


def test_laplacian_is_symmetric_and_kills_constants():
    graph = build_edge_graph(sphere_mesh(20))
    L = laplacian_matrix(graph, D=0.3).toarray()
    np.testing.assert_allclose(L, L.T)
    np.testing.assert_allclose(L @ np.ones(20), 0.0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(L) <= 1e-10)


def test_laplacian_rejects_nonpositive_diffusivity():
    with pytest.raises(ConfigError):
        laplacian_matrix(path_graph(3), D=0.0)


def test_stability_bound_on_unit_path():
    assert diffusion_stability_bound(path_graph(3), D=1.0) == pytest.approx(1.0)
    assert diffusion_stability_bound(WeightedGraph(adjacency=[[], []]), D=1.0) == float('inf')


def test_geodesics_along_path_and_unreachable_nodes():
    np.testing.assert_allclose(geodesic_distances(path_graph(4, 0.5), 0), [0, 0.5, 1.0, 1.5])
    split = WeightedGraph.from_edges(3, [(0, 1, 1.0)])
    assert np.isinf(geodesic_distances(split, 0)[2])


def test_geodesic_source_out_of_range():
    with pytest.raises(ConfigError):
        geodesic_distances(path_graph(3), 5)


def test_transfer_matrix_rows_sum_to_one():
    heart = sphere_mesh(12, 1.0)
    body = sphere_mesh(30, 3.0)
    R = synth_transfer_matrix(heart, body, kernel_scale=2.5)
    assert R.entries.shape == (30, 12)
    np.testing.assert_allclose(R.entries.sum(axis=1), 1.0)
    assert np.all(R.entries > 0)


def test_transfer_matrix_rejects_coincident_nodes():
    heart = SurfaceMesh(node_coords=[[0.0, 0.0, 0.0]])
    body = SurfaceMesh(node_coords=[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(MeshError, match="body node 1"):
        synth_transfer_matrix(heart, body)


def test_sphere_mesh_is_a_closed_connected_surface():
    mesh = sphere_mesh(40, radius=2.0)
    np.testing.assert_allclose(np.linalg.norm(mesh.node_coords, axis=1), 2.0)
    graph = build_edge_graph(mesh)
    # Euler characteristic of a sphere
    assert mesh.node_count - graph.edge_count + len(mesh.triangles) == 2
    assert np.all(np.isfinite(geodesic_distances(graph, 0)))


def test_sphere_mesh_is_deterministic():
    a, b = sphere_mesh(25), sphere_mesh(25)
    np.testing.assert_array_equal(a.triangles, b.triangles)
    np.testing.assert_array_equal(a.node_coords, b.node_coords)


def test_mesh_dict_format():
    mesh = SurfaceMesh.from_dict(_square_mesh().to_dict())
    assert mesh.node_count == 4
    with pytest.raises(MeshError):
        SurfaceMesh.from_dict({'triangles': []})


def _bellman_ford(graph: WeightedGraph, source: int) -> np.ndarray:
    dist = np.full(graph.node_count, np.inf)
    dist[source] = 0.0
    rows, cols, lengths = graph.directed_edges()
    for _ in range(graph.node_count - 1):
        changed = False
        for i, j, d in zip(rows, cols, lengths):
            if dist[i] + d < dist[j]:
                dist[j] = dist[i] + d
                changed = True
        if not changed:
            break
    return dist


def test_geodesics_match_bellman_ford_on_random_meshes():
    rng = np.random.default_rng(13)
    for n in (12, 30, 60):
        sphere = build_edge_graph(sphere_mesh(n, float(rng.uniform(0.5, 3.0))))
        source = int(rng.integers(n))
        np.testing.assert_allclose(geodesic_distances(sphere, source),
                                   _bellman_ford(sphere, source), rtol=1e-10)
    for _ in range(10):
        n = int(rng.integers(5, 80))
        graph = random_connected_graph(n, rng)
        source = int(rng.integers(n))
        np.testing.assert_allclose(geodesic_distances(graph, source),
                                   _bellman_ford(graph, source), rtol=1e-10)
