"""
Hessian-vector product entry points.
"""

import numpy as np

from core.data_models import HvpConfig, LossWeights, SensorWeights
from core.errors import ConfigError
from core.inverse_problem import InverseProblem
from .base_hvp import BaseHvp
from .exact_quadratic_hvp import ExactQuadraticHvp
from .finite_difference_hvp import FiniteDifferenceHvp


def make_hvp(model, theta, problem: InverseProblem, weights: SensorWeights,
             loss_weights: LossWeights, cfg: HvpConfig) -> BaseHvp:
    """Damped operator v -> (H + mu I) v at theta for the configured mode."""
    if cfg.mode == 'exact_quadratic':
        return ExactQuadraticHvp(model, theta, problem, weights, loss_weights,
                                 damping=cfg.damping)
    return FiniteDifferenceHvp(model, theta, problem, weights, loss_weights,
                               fd_step_scale=cfg.fd_step_scale, damping=cfg.damping)


def hvp(model, theta, problem: InverseProblem, weights: SensorWeights,
        loss_weights: LossWeights, v, cfg: HvpConfig) -> np.ndarray:
    """
    One damped Hessian-vector product (H + mu I) v.

    Args:
        model: Field model
        theta: Trained parameters
        problem: Inverse problem
        weights: Sensor weights of the trained objective
        loss_weights: lambda_d / lambda_p
        v: Direction, ||v|| > 0
        cfg: HVP settings

    Returns:
        The product, same length as theta
    """
    v = np.asarray(v, dtype=float).ravel()
    if not np.linalg.norm(v) > 0:
        raise ConfigError("direction must be nonzero", field='v')
    return make_hvp(model, theta, problem, weights, loss_weights, cfg)(v)
