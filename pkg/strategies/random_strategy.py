"""
Random Strategy

Uniform sample without replacement, seeded.
"""

import numpy as np

from .base_strategy import BaseStrategy, check_budget


def select_random(n_sensors: int, budget: int, seed: int) -> np.ndarray:
    """k sensors drawn uniformly without replacement, sorted."""
    check_budget(budget, n_sensors)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_sensors, size=budget, replace=False))


class RandomStrategy(BaseStrategy):
    """
    Random placement without prior knowledge.
    """

    def __init__(self, n_sensors: int):
        super().__init__()
        self._n_sensors = int(n_sensors)

    @property
    def n_sensors(self) -> int:
        return self._n_sensors

    def select(self, budget: int, seed: int = 0, **kwargs) -> np.ndarray:
        return select_random(self._n_sensors, budget, seed)
