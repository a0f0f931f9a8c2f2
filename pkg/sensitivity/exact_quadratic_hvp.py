"""
Exact Quadratic Hessian-Vector Product

For a LinearFieldModel the data loss is exactly quadratic in theta:

    H_data = 2 lambda_d sum_i w_i G_i^T G_i,   G_i = sum_h R_ih Phi_u(x_h, t)

and the physics term contributes its own closed-form Hessian. The dense
Hessian is assembled once; products are matrix-vector multiplies.
"""

import numpy as np

from core.data_models import LossWeights, SensorWeights
from core.errors import ConfigError
from core.field_models import LinearFieldModel, _as_array
from core.inverse_problem import InverseProblem
from .base_hvp import BaseHvp


def sensor_design(model: LinearFieldModel, problem: InverseProblem) -> np.ndarray:
    """Per-sensor design tensor G of shape (N_b, N_t, P): prediction_i(t) = G[i, t] @ theta."""
    coords, times = problem.query_points
    phi_u = model.design_matrix(coords, times)[:, 0, :]
    phi_u = phi_u.reshape(problem.n_heart, problem.n_frames, model.n_params)
    return np.einsum('ih,htp->itp', problem.transfer.entries, phi_u)


class ExactQuadraticHvp(BaseHvp):
    """Closed-form Hessian of a linear-model objective."""

    def __init__(self, model, theta, problem: InverseProblem, weights: SensorWeights,
                 loss_weights: LossWeights, damping: float = 0.0):
        super().__init__(damping)
        if not isinstance(model, LinearFieldModel):
            raise ConfigError("exact_quadratic mode requires a LinearFieldModel", field='hvp.mode')
        theta = _as_array(theta)

        G = sensor_design(model, problem)
        scaled = G * (loss_weights.lambda_d * weights.w)[:, None, None]
        hessian = 2.0 * np.einsum('itp,itq->pq', scaled, G)

        if problem.physics is not None and loss_weights.lambda_p > 0:
            physics_hessian = problem.physics.exact_hessian(model, theta)
            if physics_hessian is None:
                raise ConfigError(f"physics term '{problem.physics.get_name()}' is not quadratic; "
                                  f"use finite_difference mode", field='hvp.mode')
            hessian = hessian + loss_weights.lambda_p * np.asarray(physics_hessian, dtype=float)

        self.hessian = hessian

    def apply_hessian(self, v: np.ndarray) -> np.ndarray:
        return self.hessian @ v

    def dense(self) -> np.ndarray:
        """Damped Hessian H + mu I"""
        return self.hessian + self.damping * np.eye(self.hessian.shape[0])
