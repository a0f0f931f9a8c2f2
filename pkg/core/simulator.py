#!/usr/bin/env python3
"""
Simulator Module

Aliev-Panfilov forward model on a surface graph, observation through the
transfer matrix and measurement noise: the benchmark data factory.

Neumann condition: on a closed surface graph the discrete Laplacian
conserves flux, so no boundary term is needed. Open meshes would need a
boundary residual; `boundary_residual` is the hook and returns zeros.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from core.data_models import APParams, FieldTimeSeries, MeasurementSet
from core.errors import ConfigError, NonFiniteError, SingularityError
from core.geometry import (TransferMatrix, WeightedGraph, diffusion_stability_bound,
                           laplacian_matrix)

_LOGGER = logging.getLogger(__name__)


def coupling(u: np.ndarray, v: np.ndarray, p: APParams) -> np.ndarray:
    """xi(u, v) = e0 + mu1 v / (u + mu2), raising on the singular node."""
    denom = u + p.mu2
    singular = np.flatnonzero(denom == 0)
    if singular.size:
        raise SingularityError(int(singular[0]))
    return p.e0 + p.mu1 * v / denom


def reaction_terms(u: np.ndarray, v: np.ndarray, p: APParams) -> Tuple[np.ndarray, np.ndarray]:
    """Local (non-diffusive) parts of du/dt and dv/dt."""
    du = p.k_r * u * (u - p.a) * (1.0 - u) - u * v
    dv = coupling(u, v, p) * (-v - p.k_r * u * (u - p.a - 1.0))
    return du, dv


def boundary_residual(u: np.ndarray) -> np.ndarray:
    """No-flux residual; identically zero on closed surfaces."""
    return np.zeros_like(u)


def ap_rhs(u: np.ndarray, v: np.ndarray, graph: WeightedGraph,
           p: APParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the Aliev-Panfilov system.

    Args:
        u: Per-node potential
        v: Per-node recovery variable
        graph: Heart surface graph
        p: Model parameters

    Returns:
        Tuple (du_dt, dv_dt)
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[0] != graph.node_count or v.shape[0] != graph.node_count:
        raise ConfigError(f"state has {u.shape[0]}/{v.shape[0]} entries, graph has "
                          f"{graph.node_count} nodes", field='state')
    du, dv = reaction_terms(u, v, p)
    return laplacian_matrix(graph, p.D) @ u + du, dv


def simulate_ap(graph: WeightedGraph, p: APParams, stimulus_nodes: Sequence[int],
                dt: float, n_steps: int, frame_stride: int = 1) -> FieldTimeSeries:
    """
    Explicit Euler integration from a stimulus initial condition.

    u = 1 on the stimulus nodes and 0 elsewhere, v = 0 everywhere. Frames
    are recorded every `frame_stride` steps, starting with the initial state.

    Args:
        graph: Heart surface graph
        p: Model parameters
        stimulus_nodes: Initially excited nodes (may be empty)
        dt: Time step
        n_steps: Number of Euler steps
        frame_stride: Steps between recorded frames

    Returns:
        FieldTimeSeries with one column per recorded frame
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}", field='dt')
    if n_steps < 0 or frame_stride < 1:
        raise ConfigError("n_steps must be >= 0 and frame_stride >= 1", field='n_steps')

    bound = diffusion_stability_bound(graph, p.D)
    if dt >= bound:
        _LOGGER.warning("dt=%.4g violates the explicit stability bound %.4g", dt, bound)

    n = graph.node_count
    u = np.zeros(n)
    v = np.zeros(n)
    stimulus = np.asarray(list(stimulus_nodes), dtype=int)
    if stimulus.size and (stimulus.min() < 0 or stimulus.max() >= n):
        raise ConfigError(f"stimulus nodes outside [0, {n})", field='stimulus_nodes')
    u[stimulus] = 1.0

    lap = laplacian_matrix(graph, p.D)
    u_frames = [u.copy()]
    v_frames = [v.copy()]
    times = [0.0]

    for step in range(1, n_steps + 1):
        du, dv = reaction_terms(u, v, p)
        u, v = u + dt * (lap @ u + du), v + dt * dv
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteError("non-finite simulation state", location=f"step {step}")
        if step % frame_stride == 0:
            u_frames.append(u.copy())
            v_frames.append(v.copy())
            times.append(step * dt)

    _LOGGER.info("simulated %d steps (%d frames) on %d nodes", n_steps, len(times), n)
    return FieldTimeSeries(u=np.column_stack(u_frames), v=np.column_stack(v_frames),
                           times=np.asarray(times))


def forward_observe(R: TransferMatrix, fields: FieldTimeSeries) -> MeasurementSet:
    """
    Body-surface potentials y[:, t] = R u[:, t] for every frame (noise free).
    """
    if R.n_heart != fields.n_nodes:
        raise ConfigError(f"transfer matrix has {R.n_heart} columns, field has "
                          f"{fields.n_nodes} heart nodes", field='transfer')
    return MeasurementSet(y=R.entries @ fields.u, noise_sigma=0.0, seed=None)


def add_noise(m: MeasurementSet, sigma: float, seed: int) -> MeasurementSet:
    """
    Add i.i.d. Gaussian noise N(0, sigma^2) from a seeded generator.

    The same seed always produces the same realisation.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be nonnegative, got {sigma}", field='noise_sigma')
    if sigma == 0:
        return MeasurementSet(y=m.y.copy(), noise_sigma=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    return MeasurementSet(y=m.y + rng.normal(0.0, sigma, size=m.y.shape),
                          noise_sigma=float(sigma), seed=seed)
