import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import spearmanr

from conftest import oracle_config, oracle_problem
from core.data_models import CgConfig, HvpConfig, LossWeights, SensorWeights
from core.errors import OptimalityError
from core.field_models import LinearFieldModel, MlpFieldModel
from core.geometry import TransferMatrix, sphere_mesh, synth_transfer_matrix
from core.inverse_problem import InverseProblem, error_metric, loss_and_grad
from physics import ParameterPenaltyPhysics
from sensitivity import (adjoint_scores, check_optimality, importance_scores,
                         max_relative_disagreement)
from sensitivity.exact_quadratic_hvp import sensor_design
from sensitivity.importance import _solve_one

TIGHT_CG = CgConfig(rel_tol=1e-10, abs_floor=1e-14, max_iters=200)


def _oracle_scores(mode, **kwargs):
    config = oracle_config(mode=mode, **kwargs)
    model, problem, weights = oracle_problem(config)
    return importance_scores(model, [1.0 / 3.0], problem, weights, config.loss_weights,
                             config.hvp, config.cg)


@pytest.mark.parametrize('mode, tol', [('exact_quadratic', 1e-6), ('finite_difference', 1e-3)])
def test_weighted_two_sensor_oracle(mode, tol):
    scores = _oracle_scores(mode)
    np.testing.assert_allclose(scores.S, [8.0 / 27.0, 16.0 / 27.0], rtol=tol)
    assert all(r.converged for r in scores.cg_reports)
    np.testing.assert_allclose(scores.losses, [4.0 / 9.0, 16.0 / 9.0])


@pytest.mark.parametrize('mode, tol', [('exact_quadratic', 1e-6), ('finite_difference', 1e-3)])
def test_penalised_oracle(mode, tol):
    scores = _oracle_scores(mode, oracle_y=(1.0, 0.0), weights=(1.0, 1.0), penalty=1.0,
                            lambda_p=1.0)
    assert scores.S[0] == pytest.approx(4.0 / 27.0, rel=tol)


def test_right_hand_side_carries_no_data_weight():
    # lambda_d = 2 doubles H while grad l_i stays put, so every score halves
    scores = _oracle_scores('exact_quadratic', lambda_d=2.0)
    np.testing.assert_allclose(scores.S, [4.0 / 27.0, 8.0 / 27.0], rtol=1e-6)


def _random_linear_problem(rng, n_sensors=8, n_heart=4, n_frames=3, n_params=10):
    basis = rng.normal(size=(n_heart * n_frames, 2, n_params))
    model = LinearFieldModel(lambda coords, times: basis, n_params=n_params)
    problem = InverseProblem(transfer=TransferMatrix(rng.normal(size=(n_sensors, n_heart))),
                             y=rng.normal(size=(n_sensors, n_frames)),
                             heart_coords=rng.normal(size=(n_heart, 3)),
                             times=np.linspace(0.0, 1.0, n_frames))
    return model, problem


def _normal_equations(G, y, w):
    """theta*(w) from the weighted normal equations and the Gram matrix."""
    A = np.einsum('i,itp,itq->pq', w, G, G)
    b = np.einsum('i,itp,it->p', w, G, y)
    return np.linalg.solve(A, b), A


def _weight_derivative_of_error(G, y, w):
    """|dE/dw_i| by differentiating theta*(w) = A(w)^-1 b(w) in closed form."""
    theta, A = _normal_equations(G, y, w)
    residual = y - G @ theta
    error_grad = -2.0 * np.einsum('itp,it->p', G, residual)
    dtheta = np.linalg.solve(A, np.einsum('itp,it->pi', G, residual))
    return np.abs(error_grad @ dtheta), theta


def test_scores_match_weight_derivative_of_the_error():
    rng = np.random.default_rng(2024)
    hvp_cfg = HvpConfig(mode='exact_quadratic', damping=0.0)
    loss_weights = LossWeights(lambda_d=1.0, lambda_p=0.0)
    for _ in range(50):
        model, problem = _random_linear_problem(rng)
        G = sensor_design(model, problem)
        w = rng.uniform(0.5, 2.0, size=problem.n_sensors)
        expected, theta = _weight_derivative_of_error(G, problem.y, w)

        scores = importance_scores(model, theta, problem, SensorWeights(w), loss_weights,
                                   hvp_cfg, TIGHT_CG)
        np.testing.assert_allclose(scores.S, expected, rtol=1e-6, atol=1e-9 * expected.max())


def test_threads_do_not_change_scores(tiny_mlp_problem):
    model, problem, weights, theta = tiny_mlp_problem
    args = (model, theta, problem, weights, LossWeights(lambda_p=0.0),
            HvpConfig(damping=0.1), CgConfig(rel_tol=1e-6, abs_floor=1e-12))
    serial = importance_scores(*args, threads=1)
    pooled = importance_scores(*args, threads=2)
    np.testing.assert_array_equal(serial.S, pooled.S)
    np.testing.assert_array_equal(serial.r_rel, pooled.r_rel)


def test_single_adjoint_solve_agrees():
    config = oracle_config()
    model, problem, weights = oracle_problem(config)
    primary = importance_scores(model, [1.0 / 3.0], problem, weights, config.loss_weights,
                                config.hvp, config.cg)
    check, report = adjoint_scores(model, [1.0 / 3.0], problem, weights, config.loss_weights,
                                   config.hvp, config.cg)
    assert report.converged
    assert max_relative_disagreement(primary.S, check) < 1e-8


def test_disagreement_ignores_non_finite_entries():
    assert max_relative_disagreement([1.0, np.nan], [0.5, 3.0]) == pytest.approx(0.5)
    assert np.isnan(max_relative_disagreement([np.nan], [1.0]))


def test_certificate_is_checked_before_scoring():
    config = oracle_config()
    model, problem, weights = oracle_problem(config)
    with pytest.raises(OptimalityError) as excinfo:
        importance_scores(model, [0.0], problem, weights, config.loss_weights, config.hvp,
                          config.cg, g_tol=1e-6)
    assert excinfo.value.grad_norm == pytest.approx(2.0)
    grad_norm = check_optimality(model, [1.0 / 3.0], problem, weights, config.loss_weights,
                                 1e-8)
    assert grad_norm < 1e-8


def test_aborted_solve_yields_nan():
    report = _solve_one(lambda v: -v, np.array([1.0, 2.0]), CgConfig(), sensor=3)
    assert report.aborted
    assert not report.converged
    assert np.isnan(report.r_rel)
    assert np.all(np.isnan(report.solution))


def test_scores_table_has_one_row_per_sensor():
    frame = _oracle_scores('exact_quadratic').to_frame(np.array([10, 11]))
    assert list(frame['sensor_id']) == [10, 11]
    assert frame['cg_converged'].all()


def _fit_tightly(model, theta0, problem, weights, loss_weights) -> np.ndarray:
    result = minimize(lambda t: loss_and_grad(model, t, problem, weights, loss_weights),
                      np.asarray(theta0, dtype=float), jac=True, method='L-BFGS-B',
                      options={'maxiter': 20000, 'gtol': 1e-12, 'ftol': 1e-16})
    return result.x


@pytest.mark.slow
def test_scores_rank_like_retrained_weight_derivatives():
    heart, body = sphere_mesh(6, 1.0), sphere_mesh(10, 3.0)
    transfer = synth_transfer_matrix(heart, body)
    times = np.linspace(0.0, 1.0, 4)
    u_true = np.outer(heart.node_coords[:, 0], np.cos(np.pi * times))
    rng = np.random.default_rng(11)
    y = transfer.entries @ u_true + rng.normal(0.0, 0.05, size=(body.node_count, times.size))
    problem = InverseProblem(transfer=transfer, y=y, heart_coords=heart.node_coords,
                             times=times, physics=ParameterPenaltyPhysics(0.05))
    model = MlpFieldModel.for_data([4, 4, 2], heart.node_coords, times)
    assert model.n_params <= 60
    loss_weights = LossWeights(lambda_d=1.0, lambda_p=1.0)
    n = problem.n_sensors
    theta = _fit_tightly(model, model.init_params(3).values, problem,
                         SensorWeights.ones(n), loss_weights)

    scores = importance_scores(model, theta, problem, SensorWeights.ones(n), loss_weights,
                               HvpConfig(damping=1e-8),
                               CgConfig(rel_tol=1e-6, abs_floor=1e-12, max_iters=500))
    assert np.all(np.isfinite(scores.S))

    h = 1e-2
    retrained = []
    for i in range(n):
        errors = []
        for step in (h, -h):
            w = np.ones(n)
            w[i] += step
            refit = _fit_tightly(model, theta, problem, SensorWeights(w), loss_weights)
            errors.append(error_metric(model, refit, problem))
        retrained.append(abs(errors[0] - errors[1]) / (2.0 * h))

    rho, _ = spearmanr(scores.S, retrained)
    assert rho >= 0.9
