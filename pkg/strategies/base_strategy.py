"""
Base Strategy Class

All sensor-selection strategies inherit from this base class.
Provides a consistent interface for picking k of N_b body sensors.
"""

from abc import ABC, abstractmethod

import numpy as np

from core.errors import ConfigError


class BaseStrategy(ABC):
    """
    Abstract base class for selection strategies.

    All strategy classes should inherit from this and implement select().
    """

    def __init__(self):
        self.strategy_name = self.__class__.__name__.replace('Strategy', '').lower()

    @property
    @abstractmethod
    def n_sensors(self) -> int:
        """Number of candidate sensors"""

    @abstractmethod
    def select(self, budget: int, **kwargs) -> np.ndarray:
        """
        Choose `budget` sensors.

        Args:
            budget: Number of sensors k
            **kwargs: Strategy specific options (seed, start, band)

        Returns:
            Sorted array of sensor indices
        """
        pass

    def get_name(self) -> str:
        return self.strategy_name

    def get_description(self) -> str:
        return self.__doc__ or "No description available"


def check_budget(budget: int, n_sensors: int):
    """Reject budgets outside 1..n_sensors"""
    if budget < 1 or budget > n_sensors:
        raise ConfigError(f"budget {budget} outside 1..{n_sensors}", field='selection.budget')
