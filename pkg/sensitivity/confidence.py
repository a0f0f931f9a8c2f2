"""
Confidence Module

Stage 2 per-sensor confidence C = C_S * C_G.

C_S rates the CG solve by its relative residual on a log scale between
rho_min (full confidence) and rho_tol (c_min_solve). C_G penalises sensors
whose log gradient-to-loss ratio sits unusually far above the median,
measured in robust (median / MAD) units.
"""

import logging
from typing import Tuple

import numpy as np

from core.data_models import ConfidenceParams, ConfidenceScores, ImportanceScores
from core.errors import ConfigError

_LOGGER = logging.getLogger(__name__)

# 1.4826 * MAD estimates the standard deviation of normal data
MAD_TO_SIGMA = 1.4826

_TINY = np.finfo(float).tiny


def _residual_bounds(p: ConfidenceParams) -> Tuple[float, float]:
    if p.rho_min is None or p.rho_tol is None:
        raise ConfigError("rho_min and rho_tol must be set (see ConfidenceParams.with_cg)",
                          field='confidence.rho_min')
    return float(p.rho_min), float(p.rho_tol)


def solve_confidence(r_rel, p: ConfidenceParams) -> np.ndarray:
    """
    Solve confidence from CG relative residuals.

    A zero residual counts as rho_min. Aborted solves (NaN residual) get
    the floor value c_min_solve.
    """
    rho_min, rho_tol = _residual_bounds(p)
    r = np.array(r_rel, dtype=float, ndmin=1)
    if np.any(r < 0):
        raise ConfigError("relative residuals must be nonnegative", field='r_rel')
    r = np.where(r == 0.0, rho_min, r)

    with np.errstate(invalid='ignore'):
        t = (np.log(r) - np.log(rho_min)) / (np.log(rho_tol) - np.log(rho_min))
    t_clipped = np.where(np.isfinite(t), np.clip(t, 0.0, 1.0), 1.0)
    return p.c_min_solve + (1.0 - p.c_min_solve) * (1.0 - t_clipped) ** p.p_solve


def mismatch_scores(losses, grad_norms, p: ConfidenceParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Log gradient-to-loss mismatch s and its robust standardisation z.

    Returns:
        Tuple (s, z)
    """
    l = np.maximum(np.array(losses, dtype=float, ndmin=1), p.loss_floor)
    g = np.maximum(np.array(grad_norms, dtype=float, ndmin=1), p.loss_floor)
    if l.shape != g.shape:
        raise ConfigError("losses and gradient norms differ in length", field='grad_norms')

    s = np.log(g) - np.log(l)
    median = np.median(s)
    mad = float(np.median(np.abs(s - median)))
    if mad < p.mad_floor:
        _LOGGER.warning("MAD %.3e below floor %.1e; any deviation from the median "
                        "is penalised heavily", mad, p.mad_floor)
    z = (s - median) / (MAD_TO_SIGMA * max(mad, p.mad_floor))
    return s, z


def gradient_confidence(losses, grad_norms, p: ConfidenceParams) -> np.ndarray:
    """C_G = exp(-eta * max(z, 0)); only positive deviations are penalised."""
    _, z = mismatch_scores(losses, grad_norms, p)
    return np.maximum(np.exp(-p.eta * np.maximum(z, 0.0)), _TINY)


def combine_confidence(C_S, C_G) -> np.ndarray:
    """Elementwise product C = C_S * C_G."""
    C_S = np.asarray(C_S, dtype=float)
    C_G = np.asarray(C_G, dtype=float)
    if C_S.shape != C_G.shape:
        raise ConfigError(f"C_S {C_S.shape} and C_G {C_G.shape} differ", field='confidence')
    return np.maximum(C_S * C_G, _TINY)


def confidence_scores(scores: ImportanceScores, p: ConfidenceParams) -> ConfidenceScores:
    """All Stage-2 quantities for a set of raw importance scores."""
    C_S = solve_confidence(scores.r_rel, p)
    s, z = mismatch_scores(scores.losses, scores.grad_norms, p)
    C_G = np.maximum(np.exp(-p.eta * np.maximum(z, 0.0)), _TINY)
    C = combine_confidence(C_S, C_G)
    _LOGGER.info("confidence: median C=%.3f, min C=%.3e", float(np.median(C)), float(C.min()))
    return ConfidenceScores(C_S=C_S, C_G=C_G, C=C, s=s, z=z)
