"""
Parameter Penalty Physics

Quadratic penalty strength * ||theta||^2. Exactly quadratic, so the exact
Hessian-vector mode can use it; the analytic sensitivity oracles rely on it.
"""

import numpy as np

from core.autodiff import square
from core.errors import ConfigError
from .base_physics import BasePhysics


class ParameterPenaltyPhysics(BasePhysics):
    """
    Quadratic parameter penalty.

    Value: strength * sum(theta_k^2)
    """

    def __init__(self, strength: float = 1.0):
        super().__init__()
        if strength < 0:
            raise ConfigError(f"penalty strength must be nonnegative, got {strength}",
                              field='oracle_penalty')
        self.strength = float(strength)

    def loss_node(self, model, theta):
        return self.strength * square(theta).sum()

    def exact_hessian(self, model, theta):
        return 2.0 * self.strength * np.eye(np.asarray(theta).size)
