#!/usr/bin/env python3
"""
Trainer Module

Full-batch Adam (optionally AMSGrad) on the weighted PINN objective.
Stops once the gradient norm meets the optimality tolerance g_tol; the
returned report is the certificate the sensitivity stage relies on.
"""

import logging
from typing import Tuple

import numpy as np

from core.data_models import LossWeights, SensorWeights, TrainConfig, TrainReport
from core.errors import DivergenceError, NonFiniteError
from core.field_models import BaseFieldModel, ParamVector, _as_array
from core.inverse_problem import InverseProblem, loss_and_grad

_LOGGER = logging.getLogger(__name__)


class AdamOptimizer:
    """
    Adam with constant step size.

    With `amsgrad` the second-moment estimate never decreases, which keeps
    the effective step bounded near a minimum.
    """

    def __init__(self, n_params: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.v_max = np.zeros(n_params)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.beta2 ** self.t)
        if cfg.amsgrad:
            self.v_max = np.maximum(self.v_max, v_hat)
            v_hat = self.v_max
        return theta - cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def _evaluate(model, theta, problem, weights, loss_weights, iteration, history):
    try:
        loss, grad = loss_and_grad(model, theta, problem, weights, loss_weights)
    except NonFiniteError as exc:
        _LOGGER.error("non-finite value during training at iteration %d: %s", iteration, exc)
        raise DivergenceError(iteration, history) from exc
    if not np.isfinite(loss):
        raise DivergenceError(iteration, history + [loss])
    return loss, grad


def train(model: BaseFieldModel, theta0, problem: InverseProblem, weights: SensorWeights,
          loss_weights: LossWeights, cfg: TrainConfig) -> Tuple[ParamVector, TrainReport]:
    """
    Minimise the weighted objective from theta0.

    Args:
        model: Field model
        theta0: Finite initial parameters
        problem: Inverse problem (its physics term carries the collocation set)
        weights: Per-sensor weights
        loss_weights: lambda_d / lambda_p
        cfg: Trainer settings

    Returns:
        Tuple (last iterate, TrainReport)
    """
    theta = np.array(_as_array(theta0), dtype=float)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteError("initial parameters are not finite", location="theta0")

    history = []
    loss, grad = _evaluate(model, theta, problem, weights, loss_weights, 0, history)
    history.append(loss)
    g_tol = cfg.resolve_g_tol(loss)
    grad_norm = float(np.linalg.norm(grad))
    _LOGGER.info("training %d parameters: L0=%.6e |g0|=%.3e g_tol=%.3e",
                 model.n_params, loss, grad_norm, g_tol)

    optimizer = AdamOptimizer(theta.size, cfg)
    iterations = 0
    while grad_norm > g_tol and iterations < cfg.max_iters:
        theta = optimizer.step(theta, grad)
        iterations += 1
        loss, grad = _evaluate(model, theta, problem, weights, loss_weights, iterations, history)
        history.append(loss)
        grad_norm = float(np.linalg.norm(grad))
        if iterations % 500 == 0:
            _LOGGER.debug("iter %d: L=%.6e |g|=%.3e", iterations, loss, grad_norm)

    converged = grad_norm <= g_tol
    if converged:
        _LOGGER.info("converged after %d iterations: L=%.6e |g|=%.3e",
                     iterations, loss, grad_norm)
    else:
        _LOGGER.warning("stopped at max_iters=%d with |g|=%.3e > g_tol=%.3e",
                        cfg.max_iters, grad_norm, g_tol)

    report = TrainReport(final_loss=loss, grad_norm=grad_norm, iterations=iterations,
                         converged=converged, g_tol=g_tol, loss_history=history)
    return ParamVector(theta), report
