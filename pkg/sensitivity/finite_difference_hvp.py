"""
Finite-Difference Hessian-Vector Product

Central difference of the objective gradient along v:

    H v ~ [grad L(theta + eps v) - grad L(theta - eps v)] / (2 eps),
    eps = eps0 / ||v||
"""

import numpy as np

from core.data_models import LossWeights, SensorWeights
from core.errors import NonFiniteError
from core.field_models import BaseFieldModel, _as_array
from core.inverse_problem import InverseProblem, loss_and_grad
from .base_hvp import BaseHvp


class FiniteDifferenceHvp(BaseHvp):
    """
    Gradient central differences. Works for any field model.

    Each product costs two gradient evaluations on fresh tapes, so
    concurrent calls are safe.
    """

    def __init__(self, model: BaseFieldModel, theta, problem: InverseProblem,
                 weights: SensorWeights, loss_weights: LossWeights,
                 fd_step_scale: float = 1e-4, damping: float = 0.0):
        super().__init__(damping)
        self.model = model
        self.theta = np.array(_as_array(theta), dtype=float)
        self.problem = problem
        self.weights = weights
        self.loss_weights = loss_weights
        self.fd_step_scale = float(fd_step_scale)

    def _grad(self, theta: np.ndarray, side: str) -> np.ndarray:
        try:
            _, grad = loss_and_grad(self.model, theta, self.problem, self.weights,
                                    self.loss_weights)
        except NonFiniteError as exc:
            raise NonFiniteError("gradient at perturbed point is not finite",
                                 location=f"theta {side} eps*v: {exc.location}") from exc
        return grad

    def apply_hessian(self, v: np.ndarray) -> np.ndarray:
        eps = self.fd_step_scale / np.linalg.norm(v)
        plus = self._grad(self.theta + eps * v, '+')
        minus = self._grad(self.theta - eps * v, '-')
        return (plus - minus) / (2.0 * eps)
