"""
Imputation Module

Stage 3: harmonic extension of trusted importance values over the body
surface graph. Trusted nodes keep their raw scores; unreliable nodes start
at the trusted mean and are relaxed by simultaneous (Jacobi) weighted
averages of all their neighbours with weights 1 / (d_ij + eps).
"""

import logging
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from core.data_models import ImputationConfig, ImputedScores
from core.errors import ConfigError, NonFiniteError
from core.geometry import WeightedGraph

_LOGGER = logging.getLogger(__name__)


def partition(C, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split sensors into trusted (C_i >= tau) and unreliable indices.

    Returns:
        Tuple (trusted, unreliable) as sorted index arrays
    """
    C = np.array(C, dtype=float, ndmin=1)
    if not np.all(np.isfinite(C)):
        raise ConfigError("confidences must be finite", field='C')
    trusted = np.flatnonzero(C >= tau)
    unreliable = np.flatnonzero(C < tau)
    if trusted.size == 0:
        raise ConfigError(f"no sensor has confidence >= tau={tau} (max {C.max():.3e}); "
                          f"lower tau so imputation has anchors", field='imputation.tau')
    return trusted, unreliable


def idw_weights(graph: WeightedGraph, epsilon: float) -> sp.csr_matrix:
    """Sparse inverse-distance weights 1 / (d_ij + eps) on graph edges."""
    rows, cols, lengths = graph.directed_edges()
    n = graph.node_count
    return sp.csr_matrix((1.0 / (lengths + epsilon), (rows, cols)), shape=(n, n))


def impute(graph: WeightedGraph, S, trusted, unreliable,
           cfg: ImputationConfig) -> ImputedScores:
    """
    Jacobi harmonic imputation of the unreliable scores.

    Args:
        graph: Body surface graph
        S: Raw scores, one per node
        trusted: Trusted node indices (nonempty)
        unreliable: Unreliable node indices
        cfg: Imputation settings

    Returns:
        ImputedScores; unreliable nodes whose graph component holds no
        trusted node keep the trusted mean and are listed in `isolated_nodes`
    """
    S = np.array(S, dtype=float, ndmin=1)
    trusted = np.asarray(trusted, dtype=int)
    unreliable = np.asarray(unreliable, dtype=int)
    n = graph.node_count
    if S.size != n:
        raise ConfigError(f"{S.size} scores for {n} graph nodes", field='S')
    if trusted.size == 0:
        raise ConfigError("trusted set is empty; lower tau", field='imputation.tau')
    if np.intersect1d(trusted, unreliable).size or trusted.size + unreliable.size != n:
        raise ConfigError("trusted and unreliable sets must partition the nodes",
                          field='trusted')
    if not np.all(np.isfinite(S[trusted])):
        bad = trusted[~np.isfinite(S[trusted])]
        raise NonFiniteError("trusted scores are not finite", location=f"nodes {bad.tolist()}")

    trusted_mask = np.zeros(n, dtype=bool)
    trusted_mask[trusted] = True
    S_tilde = S.copy()
    if unreliable.size == 0:
        return ImputedScores(S_tilde=S_tilde, trusted_mask=trusted_mask, iterations=0,
                             converged=True)

    weights = idw_weights(graph, cfg.idw_epsilon)
    _, labels = connected_components(weights, directed=False)
    anchored = np.isin(labels[unreliable], labels[trusted])
    isolated = unreliable[~anchored].tolist()
    if isolated:
        _LOGGER.warning("%d unreliable node(s) lie in components without trusted nodes "
                        "and keep the trusted mean", len(isolated))

    W = weights[unreliable]
    row_sums = np.asarray(W.sum(axis=1)).ravel()
    connected = row_sums > 0

    S_tilde[unreliable] = float(np.mean(S[trusted]))
    active = unreliable[connected]
    W_active = W[connected]
    denom = row_sums[connected]

    iterations = 0
    converged = active.size == 0
    while not converged and iterations < cfg.max_iters:
        updated = (W_active @ S_tilde) / denom
        change = float(np.max(np.abs(updated - S_tilde[active])))
        S_tilde[active] = updated
        iterations += 1
        converged = change < cfg.delta

    if not converged:
        _LOGGER.warning("imputation stopped at max_iters=%d (last change %.3e)",
                        cfg.max_iters, change)
    else:
        _LOGGER.info("imputed %d node(s) in %d sweeps", unreliable.size, iterations)
    return ImputedScores(S_tilde=S_tilde, trusted_mask=trusted_mask, iterations=iterations,
                         converged=converged, isolated_nodes=isolated)
