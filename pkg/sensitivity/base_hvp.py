"""
Base Hessian-Vector Product Class

All Hessian-vector product operators inherit from this base class.
Provides a consistent interface for the damped operator v -> (H + mu I) v.
"""

from abc import ABC, abstractmethod

import numpy as np

from core.errors import NonFiniteError


class BaseHvp(ABC):
    """
    Abstract base class for damped Hessian-vector products at a fixed theta.

    All operators should inherit from this and implement apply_hessian().
    """

    def __init__(self, damping: float = 0.0):
        self.damping = float(damping)
        self.hvp_name = self.__class__.__name__.replace('Hvp', '').lower()

    @abstractmethod
    def apply_hessian(self, v: np.ndarray) -> np.ndarray:
        """
        Undamped product H v.

        Args:
            v: Direction with ||v|| > 0

        Returns:
            H v, same shape as v
        """
        pass

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        if not np.any(v):
            return np.zeros_like(v)
        out = self.apply_hessian(v) + self.damping * v
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("non-finite Hessian-vector product", location=self.hvp_name)
        return out

    def get_name(self) -> str:
        return self.hvp_name

    def get_description(self) -> str:
        return self.__doc__ or "No description available"
