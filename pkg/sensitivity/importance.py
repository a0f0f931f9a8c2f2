#!/usr/bin/env python3
"""
Importance Module

Stage 1 sensor importance at a trained optimum theta*:

    (H + mu I) v_i = grad l_i(theta*)        one CG solve per sensor
    S_i = |grad E(theta*) . v_i|

The per-sensor solves are independent and may run on a thread pool;
results are stored by sensor index so the output does not depend on
completion order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from core.data_models import (CgConfig, CgReport, HvpConfig, ImportanceScores, LossWeights,
                              SensorWeights)
from core.errors import CgAbortError, OptimalityError
from core.inverse_problem import (InverseProblem, error_metric_and_grad, loss_and_grad,
                                  sensor_losses_and_grads)
from .conjugate_gradient import cg_solve
from .hvp import make_hvp

_LOGGER = logging.getLogger(__name__)


def check_optimality(model, theta, problem: InverseProblem, weights: SensorWeights,
                     loss_weights: LossWeights, g_tol: float) -> float:
    """Gradient-norm certificate; raises OptimalityError when it fails."""
    _, grad = loss_and_grad(model, theta, problem, weights, loss_weights)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm > g_tol:
        raise OptimalityError(grad_norm, g_tol)
    return grad_norm


def _solve_one(operator, rhs: np.ndarray, cg_cfg: CgConfig, sensor: int) -> CgReport:
    try:
        return cg_solve(operator, rhs, cg_cfg)
    except CgAbortError as exc:
        _LOGGER.warning("CG aborted for sensor %d: %s", sensor, exc)
        return CgReport(iterations=0, r_rel=float('nan'), converged=False,
                        solution=np.full_like(rhs, np.nan), aborted=True, message=str(exc))


def importance_scores(model, theta, problem: InverseProblem, weights: SensorWeights,
                      loss_weights: LossWeights, hvp_cfg: HvpConfig, cg_cfg: CgConfig,
                      g_tol: Optional[float] = None, threads: int = 1,
                      use_clean_error: bool = False,
                      error_grad: Optional[np.ndarray] = None) -> ImportanceScores:
    """
    Raw FOSSA importance of every sensor.

    Args:
        model: Field model
        theta: Trained parameters theta*
        problem: Inverse problem the model was trained on
        weights: Sensor weights of the trained objective
        loss_weights: lambda_d / lambda_p
        hvp_cfg: Hessian-vector product settings
        cg_cfg: CG settings
        g_tol: When given, the optimality certificate is checked first
        threads: Worker count for the per-sensor solves
        use_clean_error: Evaluate E against the attached clean measurements
        error_grad: Use this gradient of E instead of computing it

    Returns:
        ImportanceScores; aborted solves carry NaN scores and aborted reports
    """
    if g_tol is not None:
        grad_norm = check_optimality(model, theta, problem, weights, loss_weights, g_tol)
        _LOGGER.info("optimality certificate passed: |g|=%.3e <= %.3e", grad_norm, g_tol)

    losses, grads = sensor_losses_and_grads(model, theta, problem)
    if error_grad is None:
        _, error_grad = error_metric_and_grad(model, theta, problem, use_clean_error)
    error_grad = np.asarray(error_grad, dtype=float).ravel()

    operator = make_hvp(model, theta, problem, weights, loss_weights, hvp_cfg)
    n = problem.n_sensors
    _LOGGER.info("scoring %d sensors (%s HVP, damping %.1e, %d thread(s))",
                 n, hvp_cfg.mode, hvp_cfg.damping, threads)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda i: _solve_one(operator, grads[i], cg_cfg, i), range(n)))
    else:
        reports = [_solve_one(operator, grads[i], cg_cfg, i) for i in range(n)]

    S = np.array([abs(float(error_grad @ r.solution)) for r in reports])
    unconverged = sum(1 for r in reports if not r.converged)
    if unconverged:
        _LOGGER.warning("%d of %d CG solves did not reach rel_tol=%.1e",
                        unconverged, n, cg_cfg.rel_tol)

    return ImportanceScores(S=S, cg_reports=reports, losses=losses,
                            grad_norms=np.linalg.norm(grads, axis=1),
                            damping=hvp_cfg.damping,
                            grad_error_norm=float(np.linalg.norm(error_grad)))


def adjoint_scores(model, theta, problem: InverseProblem, weights: SensorWeights,
                   loss_weights: LossWeights, hvp_cfg: HvpConfig, cg_cfg: CgConfig,
                   use_clean_error: bool = False) -> Tuple[np.ndarray, CgReport]:
    """
    Single-solve cross-check: g = (H + mu I)^-1 grad E, S_i = |g . grad l_i|.

    Returns:
        Tuple (scores, report of the one CG solve)
    """
    _, grads = sensor_losses_and_grads(model, theta, problem)
    _, error_grad = error_metric_and_grad(model, theta, problem, use_clean_error)
    operator = make_hvp(model, theta, problem, weights, loss_weights, hvp_cfg)
    report = cg_solve(operator, error_grad, cg_cfg)
    return np.abs(grads @ report.solution), report


def max_relative_disagreement(primary: np.ndarray, check: np.ndarray) -> float:
    """Largest |primary - check| relative to the largest primary score."""
    primary = np.asarray(primary, dtype=float)
    check = np.asarray(check, dtype=float)
    finite = np.isfinite(primary) & np.isfinite(check)
    if not np.any(finite):
        return float('nan')
    scale = max(float(np.max(np.abs(primary[finite]))), np.finfo(float).tiny)
    return float(np.max(np.abs(primary[finite] - check[finite])) / scale)
