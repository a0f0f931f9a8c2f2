"""
Rank Band Strategy

Sort sensors by importance (descending, ties by index) and take a
contiguous window of k ranks: the top (high), the centred window
(middle, offset floor((N_b - k) / 2)) or the bottom (low).
"""

import numpy as np

from core.data_models import BANDS
from core.errors import ConfigError
from .base_strategy import BaseStrategy, check_budget


def importance_ranking(scores) -> np.ndarray:
    """Sensor indices from most to least important."""
    scores = np.asarray(scores, dtype=float).ravel()
    if not np.all(np.isfinite(scores)):
        raise ConfigError("importance scores must be finite to rank", field='S_tilde')
    return np.lexsort((np.arange(scores.size), -scores))


def select_by_rank(scores, budget: int, band: str = 'high') -> np.ndarray:
    """k sensors from the requested importance band, sorted by index."""
    if band not in BANDS:
        raise ConfigError(f"band must be one of {BANDS}", field='selection.band')
    order = importance_ranking(scores)
    n = order.size
    check_budget(budget, n)
    if band == 'high':
        offset = 0
    elif band == 'low':
        offset = n - budget
    else:
        offset = (n - budget) // 2
    return np.sort(order[offset:offset + budget])


class RankBandStrategy(BaseStrategy):
    """
    Importance-driven placement from imputed FOSSA scores.

    band='high' is the FOSSA top-k strategy.
    """

    def __init__(self, scores):
        super().__init__()
        self.scores = np.asarray(scores, dtype=float).ravel()

    @property
    def n_sensors(self) -> int:
        return int(self.scores.size)

    def select(self, budget: int, band: str = 'high', **kwargs) -> np.ndarray:
        return select_by_rank(self.scores, budget, band)
