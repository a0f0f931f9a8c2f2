"""
Conjugate Gradient

Solves A v = b for a symmetric positive definite operator given only as a
callable. The reported residual is recomputed from scratch at exit.
"""

import logging
from typing import Callable, Optional

import numpy as np

from core.data_models import CgConfig, CgReport
from core.errors import CgAbortError

_LOGGER = logging.getLogger(__name__)


def cg_solve(operator: Callable[[np.ndarray], np.ndarray], b, cfg: CgConfig,
             x0: Optional[np.ndarray] = None) -> CgReport:
    """
    Conjugate gradient iteration.

    Stops when ||b - A v|| <= rel_tol * ||b|| or after max_iters products.
    When the recurrence residual claims convergence but the true residual
    disagrees, the iteration restarts from the true residual.

    Args:
        operator: v -> A v
        b: Right-hand side
        cfg: Tolerance and iteration budget
        x0: Optional starting point (zeros by default)

    Returns:
        CgReport with the final iterate and its true relative residual

    Raises:
        CgAbortError: non-finite right-hand side or iterate, or p^T A p <= 0
    """
    b = np.asarray(b, dtype=float).ravel()
    if not np.all(np.isfinite(b)):
        raise CgAbortError("right-hand side is not finite")
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CgReport(iterations=0, r_rel=0.0, converged=True, solution=np.zeros_like(b))

    tol = cfg.rel_tol * b_norm
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    r = b - operator(x) if x0 is not None else b.copy()
    p = r.copy()
    rs = float(r @ r)

    iterations = 0
    while iterations < cfg.max_iters:
        if np.sqrt(rs) <= tol:
            r = b - operator(x)
            rs = float(r @ r)
            if np.sqrt(rs) <= tol:
                break
            # recurrence drifted; restart
            p = r.copy()

        Ap = operator(p)
        curvature = float(p @ Ap)
        if not np.isfinite(curvature) or curvature <= 0.0:
            raise CgAbortError(f"non-positive curvature {curvature:.3e} at iteration {iterations}")
        alpha = rs / curvature
        x = x + alpha * p
        r = r - alpha * Ap
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
            raise CgAbortError(f"non-finite iterate at iteration {iterations}")
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        iterations += 1

    r_rel = float(np.linalg.norm(b - operator(x)) / b_norm)
    converged = r_rel <= cfg.rel_tol
    if not converged:
        _LOGGER.debug("CG stopped after %d iterations at r_rel=%.3e", iterations, r_rel)
    return CgReport(iterations=iterations, r_rel=r_rel, converged=converged, solution=x)
