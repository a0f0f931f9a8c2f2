#!/usr/bin/env python3
"""
Inverse Problem Module

The weighted PINN objective

    L(theta; w) = lambda_d * sum_i w_i l_i(theta) + lambda_p * L_phy(theta)
    l_i(theta)  = sum_t (y_i(t) - [R u_hat(theta)]_i(t))^2

and the reconstruction error metric E = ||y - R u_hat(theta)||^2.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from core.autodiff import Node, Tape, apply_left, square
from core.data_models import APParams, LossWeights, SensorWeights
from core.errors import ConfigError
from core.field_models import BaseFieldModel, _as_array
from core.geometry import TransferMatrix, WeightedGraph
from physics import AlievPanfilovPhysics, BasePhysics, CollocationSet


@dataclass
class InverseProblem:
    """
    Everything the objective needs besides the model and weights.

    `sensor_ids` maps local sensor rows back to body-node ids when the
    problem was restricted to a subset. `y_clean`, when given, is the
    noise-free target available to the clean error-metric mode.
    """
    transfer: TransferMatrix
    y: np.ndarray
    heart_coords: np.ndarray
    times: np.ndarray
    physics: Optional[BasePhysics] = None
    y_clean: Optional[np.ndarray] = None
    sensor_ids: Optional[np.ndarray] = None
    _query: Tuple[np.ndarray, np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.heart_coords = np.asarray(self.heart_coords, dtype=float).reshape(-1, 3)
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if self.transfer.n_heart != self.heart_coords.shape[0]:
            raise ConfigError(f"transfer matrix has {self.transfer.n_heart} columns for "
                              f"{self.heart_coords.shape[0]} heart nodes", field='transfer')
        if self.y.shape != (self.transfer.n_body, self.times.size):
            raise ConfigError(f"measurements have shape {self.y.shape}, expected "
                              f"{(self.transfer.n_body, self.times.size)}", field='y')
        if self.y_clean is not None:
            self.y_clean = np.atleast_2d(np.asarray(self.y_clean, dtype=float))
            if self.y_clean.shape != self.y.shape:
                raise ConfigError("clean measurements differ in shape", field='y_clean')
        if self.sensor_ids is None:
            self.sensor_ids = np.arange(self.n_sensors)
        self.sensor_ids = np.asarray(self.sensor_ids, dtype=int)

        # query grid, node major: row h * N_t + t
        n_h, n_t = self.n_heart, self.n_frames
        self._query = (np.repeat(self.heart_coords, n_t, axis=0), np.tile(self.times, n_h))

    @property
    def n_sensors(self) -> int:
        return self.transfer.n_body

    @property
    def n_heart(self) -> int:
        return self.transfer.n_heart

    @property
    def n_frames(self) -> int:
        return int(self.times.size)

    @property
    def query_points(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._query

    def target(self, use_clean: bool = False) -> np.ndarray:
        if use_clean:
            if self.y_clean is None:
                raise ConfigError("clean error metric requested but no clean data attached",
                                  field='y_clean')
            return self.y_clean
        return self.y

    def restrict(self, sensors: Sequence[int]) -> 'InverseProblem':
        """Problem that observes only the given local sensor rows."""
        rows = np.asarray(sorted(int(s) for s in sensors), dtype=int)
        if rows.size == 0 or rows.min() < 0 or rows.max() >= self.n_sensors:
            raise ConfigError("sensor subset empty or out of range", field='sensors')
        return InverseProblem(
            transfer=self.transfer.rows(rows),
            y=self.y[rows],
            heart_coords=self.heart_coords,
            times=self.times,
            physics=None if self.physics is None else self.physics.restrict_sensors(rows),
            y_clean=None if self.y_clean is None else self.y_clean[rows],
            sensor_ids=self.sensor_ids[rows],
        )


def predicted_field(model: BaseFieldModel, theta: Node, problem: InverseProblem) -> Node:
    """u_hat at every heart node and frame, shape (N_h, N_t)."""
    coords, times = problem.query_points
    out, _ = model.evaluate(theta, coords, times)
    return out[:, 0].reshape(problem.n_heart, problem.n_frames)


def sensor_losses_node(model: BaseFieldModel, theta: Node, problem: InverseProblem,
                       target: Optional[np.ndarray] = None) -> Node:
    """Per-sensor losses l_i as one (N_b,) node."""
    y = problem.y if target is None else target
    predicted = apply_left(problem.transfer.entries, predicted_field(model, theta, problem))
    return square(predicted - y).sum(axis=1)


def objective_node(model: BaseFieldModel, theta: Node, problem: InverseProblem,
                   weights: SensorWeights, loss_weights: LossWeights) -> Node:
    """The weighted training objective as a scalar node."""
    if len(weights) != problem.n_sensors:
        raise ConfigError(f"{len(weights)} weights for {problem.n_sensors} sensors",
                          field='sensor_weights')
    data = (sensor_losses_node(model, theta, problem) * (loss_weights.lambda_d * weights.w)).sum()
    if problem.physics is None or loss_weights.lambda_p == 0:
        return data
    return data + loss_weights.lambda_p * problem.physics.loss_node(model, theta)


def _prepare(model: BaseFieldModel, theta) -> np.ndarray:
    values = _as_array(theta)
    model.check_params(values)
    return values


def sensor_loss(model: BaseFieldModel, theta, problem: InverseProblem, i: int) -> float:
    """
    Data loss l_i of one sensor.

    Args:
        model: Field model
        theta: Parameters
        problem: Inverse problem
        i: Sensor row

    Returns:
        sum over frames of the squared misfit at sensor i
    """
    if i < 0 or i >= problem.n_sensors:
        raise ConfigError(f"sensor {i} outside [0, {problem.n_sensors})", field='sensor')
    tape = Tape()
    losses = sensor_losses_node(model, tape.variable(_prepare(model, theta)), problem)
    return float(losses.value[i])


def sensor_losses_and_grads(model: BaseFieldModel, theta, problem: InverseProblem
                            ) -> Tuple[np.ndarray, np.ndarray]:
    """
    All per-sensor losses and their gradients from one forward pass.

    Returns:
        Tuple (losses of shape (N_b,), gradients of shape (N_b, P))
    """
    tape = Tape()
    var = tape.variable(_prepare(model, theta))
    losses = sensor_losses_node(model, var, problem)
    grads = np.vstack([tape.gradient(losses[i], var) for i in range(problem.n_sensors)])
    return losses.value.copy(), grads


def physics_loss(model: BaseFieldModel, theta, graph: WeightedGraph, p: APParams,
                 coll: CollocationSet, heart_coords: np.ndarray) -> float:
    """Aliev-Panfilov residual loss at the collocation points."""
    physics = AlievPanfilovPhysics(graph, heart_coords, p, coll)
    return physics.loss(model, _prepare(model, theta))


def total_loss(model: BaseFieldModel, theta, problem: InverseProblem,
               weights: SensorWeights, loss_weights: LossWeights) -> float:
    """lambda_d * sum_i w_i l_i + lambda_p * L_phy"""
    tape = Tape()
    var = tape.variable(_prepare(model, theta))
    return float(objective_node(model, var, problem, weights, loss_weights).value)


def loss_and_grad(model: BaseFieldModel, theta, problem: InverseProblem,
                  weights: SensorWeights, loss_weights: LossWeights) -> Tuple[float, np.ndarray]:
    """Training objective and its gradient with respect to theta."""
    tape = Tape()
    var = tape.variable(_prepare(model, theta))
    out = objective_node(model, var, problem, weights, loss_weights)
    return float(out.value), tape.gradient(out, var)


def error_metric(model: BaseFieldModel, theta, problem: InverseProblem,
                 use_clean: bool = False) -> float:
    """E = ||y - R u_hat(theta)||^2 over all body nodes and frames."""
    return error_metric_and_grad(model, theta, problem, use_clean)[0]


def error_metric_and_grad(model: BaseFieldModel, theta, problem: InverseProblem,
                          use_clean: bool = False) -> Tuple[float, np.ndarray]:
    """E and its gradient with respect to theta."""
    tape = Tape()
    var = tape.variable(_prepare(model, theta))
    out = sensor_losses_node(model, var, problem, problem.target(use_clean)).sum()
    return float(out.value), tape.gradient(out, var)


def reconstruct(model: BaseFieldModel, theta, problem: InverseProblem) -> np.ndarray:
    """Reconstructed heart potential u_hat, shape (N_h, N_t)."""
    tape = Tape()
    return predicted_field(model, tape.variable(_prepare(model, theta)), problem).value.copy()
