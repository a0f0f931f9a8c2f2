#!/usr/bin/env python3
"""
Benchmark Module

Builds the synthetic inverse-ECG benchmark (heart and body spheres,
Aliev-Panfilov ground truth, transfer matrix, noisy body potentials,
collocation set) and the analytic quadratic oracle, and turns either into
a trainable model plus InverseProblem.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from core.data_models import (APParams, BenchmarkSpec, FieldTimeSeries, MeasurementSet,
                              RunConfig, SensorWeights)
from core.field_models import BaseFieldModel, LinearFieldModel, MlpFieldModel
from core.geometry import (SurfaceMesh, TransferMatrix, WeightedGraph, build_edge_graph,
                           sphere_mesh, synth_transfer_matrix)
from core.inverse_problem import InverseProblem
from core.simulator import add_noise, forward_observe, simulate_ap
from physics import (AlievPanfilovPhysics, CollocationSet, ParameterPenaltyPhysics,
                     sample_collocation)

_LOGGER = logging.getLogger(__name__)


@dataclass
class BenchmarkData:
    """
    One generated dataset.

    `fields` (ground truth) and `collocation` are None for the quadratic
    oracle, which has no dynamics.
    """
    kind: str
    heart: SurfaceMesh
    body: SurfaceMesh
    transfer: TransferMatrix
    times: np.ndarray
    measurements: MeasurementSet
    y_clean: np.ndarray
    fields: Optional[FieldTimeSeries] = None
    collocation: Optional[CollocationSet] = None
    seed: int = 0
    _graphs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.y_clean = np.atleast_2d(np.asarray(self.y_clean, dtype=float))

    @property
    def heart_graph(self) -> WeightedGraph:
        if 'heart' not in self._graphs:
            self._graphs['heart'] = build_edge_graph(self.heart)
        return self._graphs['heart']

    @property
    def body_graph(self) -> WeightedGraph:
        if 'body' not in self._graphs:
            self._graphs['body'] = build_edge_graph(self.body)
        return self._graphs['body']

    @property
    def n_sensors(self) -> int:
        return self.transfer.n_body


def _oracle_benchmark(spec: BenchmarkSpec, seed: int) -> BenchmarkData:
    """One heart node, len(oracle_y) body nodes, one frame, unit transfer rows."""
    n_b = len(spec.oracle_y)
    heart = SurfaceMesh(node_coords=np.zeros((1, 3)))
    body_coords = np.column_stack([spec.body_radius + np.arange(n_b, dtype=float),
                                   np.zeros(n_b), np.zeros(n_b)])
    body = SurfaceMesh(node_coords=body_coords)
    transfer = synth_transfer_matrix(heart, body, spec.kernel_scale)
    y = np.asarray(spec.oracle_y, dtype=float).reshape(n_b, 1)
    return BenchmarkData(kind=spec.kind, heart=heart, body=body, transfer=transfer,
                         times=np.zeros(1), measurements=MeasurementSet(y=y), y_clean=y,
                         seed=seed)


def build_benchmark(spec: BenchmarkSpec, ap: APParams, sigma: float, seed: int,
                    collocation_seed: Optional[int] = None) -> BenchmarkData:
    """
    Generate a benchmark dataset.

    Args:
        spec: Geometry and simulation protocol
        ap: Aliev-Panfilov parameters
        sigma: Measurement noise standard deviation
        seed: Seeds the noise realisation
        collocation_seed: Seeds the collocation sample (defaults to `seed`)

    Returns:
        BenchmarkData
    """
    if spec.kind == 'quadratic_oracle':
        return _oracle_benchmark(spec, seed)

    heart = sphere_mesh(spec.heart_nodes, spec.heart_radius)
    body = sphere_mesh(spec.body_nodes, spec.body_radius)
    transfer = synth_transfer_matrix(heart, body, spec.kernel_scale)

    data = BenchmarkData(kind=spec.kind, heart=heart, body=body, transfer=transfer,
                         times=np.zeros(1), measurements=MeasurementSet(y=np.zeros((1, 1))),
                         y_clean=np.zeros((1, 1)), seed=seed)
    fields = simulate_ap(data.heart_graph, ap, spec.stimulus_nodes, spec.dt, spec.n_steps,
                         spec.frame_stride)
    clean = forward_observe(transfer, fields)
    data.fields = fields
    data.times = fields.times
    data.y_clean = clean.y
    data.measurements = add_noise(clean, sigma, seed)
    data.collocation = sample_collocation(
        heart.node_count, fields.times, spec.n_collocation,
        seed if collocation_seed is None else collocation_seed)
    _LOGGER.info("benchmark: %d heart nodes, %d body nodes, %d frames, sigma=%g, seed=%d",
                 heart.node_count, body.node_count, fields.n_frames, sigma, seed)
    return data


def build_problem(data: BenchmarkData, config: RunConfig
                  ) -> Tuple[BaseFieldModel, InverseProblem, SensorWeights]:
    """
    Model, inverse problem and training weights for a dataset.

    Returns:
        Tuple (model, problem, sensor weights)
    """
    coords = data.heart.node_coords
    if data.kind == 'quadratic_oracle':
        model = LinearFieldModel(np.array([[1.0], [0.0]]))
        penalty = config.benchmark.oracle_penalty
        physics = ParameterPenaltyPhysics(penalty) if penalty > 0 else None
    else:
        model = MlpFieldModel.for_data(config.model.layer_sizes, coords, data.times)
        physics = AlievPanfilovPhysics(data.heart_graph, coords, config.ap_params,
                                       data.collocation)
    problem = InverseProblem(transfer=data.transfer, y=data.measurements.y,
                             heart_coords=coords, times=data.times, physics=physics,
                             y_clean=data.y_clean)
    return model, problem, config.weights()
