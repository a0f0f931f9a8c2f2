"""Shared fixtures: tiny graphs, meshes and inverse problems."""

import sys
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.benchmark import build_benchmark, build_problem
from core.data_models import (BenchmarkSpec, CgConfig, ConfidenceParams, HvpConfig,
                              ImputationConfig, LossWeights, ModelSpec, RunConfig,
                              SensorWeights, TrainConfig)
from core.field_models import MlpFieldModel
from core.geometry import WeightedGraph, sphere_mesh, synth_transfer_matrix
from core.inverse_problem import InverseProblem


def path_graph(n: int, length: float = 1.0) -> WeightedGraph:
    """0 - 1 - ... - (n-1) with equal edge lengths"""
    return WeightedGraph.from_edges(n, [(i, i + 1, length) for i in range(n - 1)])


def random_connected_graph(n: int, rng: np.random.Generator,
                           extra_edges: Optional[int] = None) -> WeightedGraph:
    """Random spanning tree plus extra chords, lengths in [0.1, 2)"""
    order = rng.permutation(n)
    edges = {}
    for pos in range(1, n):
        i, j = int(order[pos]), int(order[rng.integers(pos)])
        edges[(min(i, j), max(i, j))] = float(rng.uniform(0.1, 2.0))
    for _ in range(n if extra_edges is None else extra_edges):
        i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.setdefault((min(i, j), max(i, j)), float(rng.uniform(0.1, 2.0)))
    return WeightedGraph.from_edges(n, [(i, j, d) for (i, j), d in edges.items()])


def oracle_config(oracle_y=(1.0, -1.0), weights=(2.0, 1.0), penalty: float = 0.0,
                  lambda_p: float = 0.0, mode: str = 'exact_quadratic',
                  damping: float = 0.0, lambda_d: float = 1.0) -> RunConfig:
    """Config of the one-parameter weighted quadratic problem."""
    return RunConfig(
        benchmark=BenchmarkSpec(kind='quadratic_oracle', oracle_y=list(oracle_y),
                                oracle_penalty=penalty),
        loss_weights=LossWeights(lambda_d=lambda_d, lambda_p=lambda_p),
        sensor_weights=list(weights),
        train=TrainConfig(step_size=0.05, g_tol=1e-10, max_iters=20000),
        hvp=HvpConfig(mode=mode, damping=damping),
        cg=CgConfig(rel_tol=1e-10, abs_floor=1e-14, max_iters=50),
        imputation=ImputationConfig(tau=0.0),
    )


def oracle_problem(config: RunConfig):
    data = build_benchmark(config.benchmark, config.ap_params, 0.0, seed=0)
    return build_problem(data, config)


def tiny_benchmark_config(**overrides) -> RunConfig:
    """A benchmark small enough to train in a unit test."""
    settings = dict(
        benchmark=BenchmarkSpec(heart_nodes=8, body_nodes=10, n_steps=40, frame_stride=20,
                                dt=0.05, n_collocation=16),
        noise_sigma=0.01,
        model=ModelSpec(hidden_layers=[4]),
        loss_weights=LossWeights(lambda_d=1.0, lambda_p=0.0),
        train=TrainConfig(step_size=1e-2, max_iters=30, require_certificate=False),
        hvp=HvpConfig(damping=0.1),
        cg=CgConfig(rel_tol=1e-3, max_iters=100),
        confidence=ConfidenceParams(),
        imputation=ImputationConfig(tau=0.0),
        seeds=[0, 1],
    )
    settings.update(overrides)
    return RunConfig(**settings)


@pytest.fixture
def path5():
    return path_graph(5)


@pytest.fixture
def tiny_mlp_problem():
    """Small MLP inverse problem without physics: (model, problem, weights, theta)."""
    heart = sphere_mesh(4, 1.0)
    body = sphere_mesh(6, 3.0)
    transfer = synth_transfer_matrix(heart, body)
    times = np.array([0.0, 0.5, 1.0])
    rng = np.random.default_rng(7)
    y = rng.normal(0.0, 0.3, size=(body.node_count, times.size))
    problem = InverseProblem(transfer=transfer, y=y, heart_coords=heart.node_coords,
                             times=times)
    model = MlpFieldModel.for_data([4, 3, 2], heart.node_coords, times)
    theta = model.init_params(3)
    return model, problem, SensorWeights.ones(body.node_count), theta
