#!/usr/bin/env python3
"""
Field Models Module

Parametric approximators of the heart-surface fields u(x, t) and v(x, t).
All models map a flat parameter vector theta and query points
(x, y, z, t) to the two outputs (u, v).

Models differentiate themselves: reverse mode with respect to theta via
the tape in core.autodiff, forward mode with respect to t by tangent
propagation.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from core.autodiff import Node, Tape, apply_left, tanh
from core.errors import ConfigError


@dataclass
class ParamVector:
    """Flat trainable parameters theta."""
    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise ConfigError("parameter vector is empty", field='theta')
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("parameter vector has non-finite entries", field='theta')

    @property
    def length(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.length


def _as_array(theta: Union[ParamVector, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=float).ravel()


class BaseFieldModel(ABC):
    """
    Abstract base class for field models.

    Subclasses implement `evaluate`, which records the model on a tape.
    """

    @property
    @abstractmethod
    def n_params(self) -> int:
        """Number of entries in theta"""

    @abstractmethod
    def evaluate(self, theta: Node, coords: np.ndarray, times: np.ndarray,
                 with_dt: bool = False) -> Tuple[Node, Optional[Node]]:
        """
        Record the model on theta's tape.

        Args:
            theta: Parameter node
            coords: Query positions, shape (n, 3)
            times: Query times, shape (n,)
            with_dt: Also propagate the time tangent

        Returns:
            Tuple (outputs, d_outputs_dt), each of shape (n, 2); the second is
            None unless with_dt is set
        """

    @abstractmethod
    def init_params(self, seed: int) -> ParamVector:
        """Deterministic initial parameters"""

    @abstractmethod
    def to_dict(self) -> Dict:
        """Architecture header for checkpoints"""

    def check_params(self, theta: np.ndarray):
        if theta.size != self.n_params:
            raise ConfigError(f"theta has {theta.size} entries, model expects {self.n_params}",
                              field='theta')


class MlpFieldModel(BaseFieldModel):
    """
    Fully connected network: tanh on hidden layers, identity on the output.

    Inputs (x, y, z, t) are scaled to [-1, 1] with `input_bounds`, a (4, 2)
    array of per-dimension (low, high) stored alongside theta.
    Parameter layout per layer: W (n_in x n_out, row major) then b (n_out).
    """

    def __init__(self, layer_sizes: Sequence[int], input_bounds: Optional[np.ndarray] = None):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 3:
            raise ConfigError("need at least one hidden layer", field='model.layer_sizes')
        if self.layer_sizes[0] != 4 or self.layer_sizes[-1] != 2:
            raise ConfigError("input width must be 4 (x, y, z, t) and output width 2 (u, v)",
                              field='model.layer_sizes')
        if input_bounds is None:
            input_bounds = np.tile([-1.0, 1.0], (4, 1))
        bounds = np.array(input_bounds, dtype=float).reshape(4, 2)
        degenerate = bounds[:, 1] <= bounds[:, 0]
        bounds[degenerate, 1] = bounds[degenerate, 0] + 2.0
        self.input_bounds = bounds

    @classmethod
    def for_data(cls, layer_sizes: Sequence[int], coords: np.ndarray,
                 times: np.ndarray) -> 'MlpFieldModel':
        """Model whose input scaling covers the given coordinates and times."""
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        bounds = np.vstack([
            np.column_stack([coords.min(axis=0), coords.max(axis=0)]),
            [[times.min(), times.max()]],
        ])
        return cls(layer_sizes, bounds)

    @property
    def n_params(self) -> int:
        return sum((n_in + 1) * n_out
                   for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def time_scale(self) -> float:
        """d(scaled t)/dt"""
        low, high = self.input_bounds[3]
        return 2.0 / (high - low)

    def scale_inputs(self, coords: np.ndarray, times: np.ndarray) -> np.ndarray:
        raw = np.column_stack([np.asarray(coords, dtype=float).reshape(-1, 3),
                               np.asarray(times, dtype=float).ravel()])
        low, high = self.input_bounds[:, 0], self.input_bounds[:, 1]
        return 2.0 * (raw - low) / (high - low) - 1.0

    def init_params(self, seed: int) -> ParamVector:
        rng = np.random.default_rng(seed)
        chunks = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
            chunks.append(np.zeros(n_out))
        return ParamVector(np.concatenate(chunks))

    def evaluate(self, theta, coords, times, with_dt=False):
        tape = theta.tape
        x = self.scale_inputs(coords, times)
        h = tape.constant(x)
        h_dot = None
        if with_dt:
            seed = np.zeros_like(x)
            seed[:, 3] = self.time_scale
            h_dot = tape.constant(seed)

        offset = 0
        n_layers = len(self.layer_sizes) - 1
        for layer, (n_in, n_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            W = theta[offset:offset + n_in * n_out].reshape(n_in, n_out)
            offset += n_in * n_out
            b = theta[offset:offset + n_out]
            offset += n_out

            z = h @ W + b
            z_dot = h_dot @ W if with_dt else None
            if layer == n_layers - 1:
                return z, z_dot
            h = tanh(z)
            if with_dt:
                h_dot = (1.0 - h * h) * z_dot
        raise AssertionError("unreachable")

    def to_dict(self) -> Dict:
        return {
            'type': 'mlp',
            'layer_sizes': list(self.layer_sizes),
            'input_bounds': self.input_bounds.tolist(),
        }


BasisFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class LinearFieldModel(BaseFieldModel):
    """
    Outputs exactly linear in theta: out[k] = Phi(x_k, t_k) @ theta.

    `basis` is either a constant (2, P) matrix used at every query point or a
    callable returning the (n, 2, P) design tensor for a query batch.
    `basis_dt` gives the time derivative of the design tensor; without it
    the model is time independent.
    """

    def __init__(self, basis: Union[np.ndarray, BasisFn], n_params: Optional[int] = None,
                 basis_dt: Optional[BasisFn] = None):
        if callable(basis):
            if n_params is None:
                raise ConfigError("n_params is required with a callable basis", field='basis')
            self._constant = None
            self._n_params = int(n_params)
        else:
            matrix = np.atleast_2d(np.asarray(basis, dtype=float))
            if matrix.shape[0] != 2 or not np.all(np.isfinite(matrix)):
                raise ConfigError("constant basis must be a finite (2, P) matrix", field='basis')
            self._constant = matrix
            self._n_params = matrix.shape[1]
        self._basis = basis
        self._basis_dt = basis_dt

    @property
    def n_params(self) -> int:
        return self._n_params

    def design_matrix(self, coords: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Design tensor of shape (n, 2, P)."""
        n = np.asarray(times).size
        if self._constant is not None:
            return np.broadcast_to(self._constant, (n, 2, self._n_params)).copy()
        phi = np.asarray(self._basis(np.asarray(coords, dtype=float).reshape(-1, 3),
                                     np.asarray(times, dtype=float).ravel()), dtype=float)
        if phi.shape != (n, 2, self._n_params) or not np.all(np.isfinite(phi)):
            raise ConfigError(f"basis returned shape {phi.shape}, expected "
                              f"{(n, 2, self._n_params)} finite values", field='basis')
        return phi

    def design_matrix_dt(self, coords: np.ndarray, times: np.ndarray) -> np.ndarray:
        n = np.asarray(times).size
        if self._basis_dt is None:
            return np.zeros((n, 2, self._n_params))
        return np.asarray(self._basis_dt(np.asarray(coords, dtype=float).reshape(-1, 3),
                                         np.asarray(times, dtype=float).ravel()), dtype=float)

    def init_params(self, seed: int) -> ParamVector:
        return ParamVector(np.zeros(self._n_params))

    def evaluate(self, theta, coords, times, with_dt=False):
        n = np.asarray(times).size
        phi = self.design_matrix(coords, times).reshape(2 * n, self._n_params)
        out = apply_left(phi, theta).reshape(n, 2)
        if not with_dt:
            return out, None
        phi_dt = self.design_matrix_dt(coords, times).reshape(2 * n, self._n_params)
        return out, apply_left(phi_dt, theta).reshape(n, 2)

    def to_dict(self) -> Dict:
        if self._constant is None:
            raise ConfigError("only constant-basis linear models can be checkpointed",
                              field='model')
        return {'type': 'linear', 'basis': self._constant.tolist()}


def model_from_dict(data: Dict) -> BaseFieldModel:
    """Rebuild a model from its checkpoint header"""
    kind = data.get('type')
    if kind == 'mlp':
        return MlpFieldModel(data['layer_sizes'], np.asarray(data['input_bounds']))
    if kind == 'linear':
        return LinearFieldModel(np.asarray(data['basis']))
    raise ConfigError(f"unknown model type {kind!r}", field='model.type')


def _query(coords, t) -> Tuple[np.ndarray, np.ndarray, bool]:
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 1
    coords = coords.reshape(-1, 3)
    times = np.broadcast_to(np.asarray(t, dtype=float), (coords.shape[0],)).copy()
    return coords, times, single


def forward(model: BaseFieldModel, theta, coords, t) -> Tuple:
    """
    Evaluate (u, v) at one point or a batch of points.

    Args:
        model: Field model
        theta: Parameters (ParamVector or array)
        coords: Position (3,) or positions (n, 3)
        t: Time (scalar or (n,))

    Returns:
        (u, v) as floats for a single point, arrays otherwise
    """
    values = _as_array(theta)
    model.check_params(values)
    coords, times, single = _query(coords, t)
    tape = Tape()
    out, _ = model.evaluate(tape.variable(values), coords, times)
    u, v = out.value[:, 0], out.value[:, 1]
    if single:
        return float(u[0]), float(v[0])
    return u.copy(), v.copy()


def dt_forward(model: BaseFieldModel, theta, coords, t) -> Tuple:
    """Exact time derivatives (du/dt, dv/dt), same shapes as `forward`."""
    values = _as_array(theta)
    model.check_params(values)
    coords, times, single = _query(coords, t)
    tape = Tape()
    _, out_dt = model.evaluate(tape.variable(values), coords, times, with_dt=True)
    du, dv = out_dt.value[:, 0], out_dt.value[:, 1]
    if single:
        return float(du[0]), float(dv[0])
    return du.copy(), dv.copy()


def value_and_grad_params(model: BaseFieldModel, theta, coords, times,
                          objective: Callable[[Node], Node]) -> Tuple[float, np.ndarray]:
    """
    Scalar objective of the model outputs over a query batch, and its gradient.

    Args:
        model: Field model
        theta: Parameters
        coords: Query positions (n, 3)
        times: Query times (n,)
        objective: Maps the (n, 2) output node to a scalar node

    Returns:
        Tuple (objective value, gradient with respect to theta)
    """
    values = _as_array(theta)
    model.check_params(values)
    coords, times, _ = _query(coords, times)
    tape = Tape()
    var = tape.variable(values)
    out, _ = model.evaluate(var, coords, times)
    result = objective(out)
    if not isinstance(result, Node):
        return float(result), np.zeros_like(values)
    return float(result.value), tape.gradient(result, var)


def grad_params(model: BaseFieldModel, theta, coords, times,
                objective: Callable[[Node], Node]) -> np.ndarray:
    """Reverse-accumulation gradient of `objective` with respect to theta."""
    return value_and_grad_params(model, theta, coords, times, objective)[1]
