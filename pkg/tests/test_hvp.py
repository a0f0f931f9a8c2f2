import numpy as np
import pytest

from conftest import oracle_config, oracle_problem
from core.data_models import HvpConfig, LossWeights
from core.errors import ConfigError, NonFiniteError
from sensitivity import BaseHvp, ExactQuadraticHvp, FiniteDifferenceHvp, hvp, make_hvp


def _oracle(**kwargs):
    config = oracle_config(**kwargs)
    model, problem, weights = oracle_problem(config)
    return model, problem, weights, config.loss_weights


def test_exact_oracle_hessian():
    model, problem, weights, loss_weights = _oracle()
    op = ExactQuadraticHvp(model, [1.0 / 3.0], problem, weights, loss_weights)
    np.testing.assert_allclose(op.hessian, [[6.0]])
    np.testing.assert_allclose(op([2.0]), [12.0])


def test_damping_shifts_the_operator():
    model, problem, weights, loss_weights = _oracle()
    cfg = HvpConfig(mode='exact_quadratic', damping=0.5)
    np.testing.assert_allclose(hvp(model, [0.0], problem, weights, loss_weights, [1.0], cfg),
                               [6.5])


def test_penalty_adds_its_curvature():
    model, problem, weights, loss_weights = _oracle(oracle_y=(1.0, 0.0), weights=(1.0, 1.0),
                                                    penalty=1.0, lambda_p=1.0)
    op = ExactQuadraticHvp(model, [0.0], problem, weights, loss_weights)
    np.testing.assert_allclose(op.hessian, [[4.0 + 2.0]])


def test_finite_difference_matches_exact_on_quadratic():
    model, problem, weights, loss_weights = _oracle()
    fd = FiniteDifferenceHvp(model, [0.1], problem, weights, loss_weights)
    exact = ExactQuadraticHvp(model, [0.1], problem, weights, loss_weights)
    for v in ([1.0], [-3.0], [1e-3]):
        np.testing.assert_allclose(fd(v), exact(v), rtol=1e-6)


def test_make_hvp_picks_mode():
    model, problem, weights, loss_weights = _oracle()
    assert isinstance(make_hvp(model, [0.0], problem, weights, loss_weights,
                               HvpConfig(mode='finite_difference')), FiniteDifferenceHvp)
    assert isinstance(make_hvp(model, [0.0], problem, weights, loss_weights,
                               HvpConfig(mode='exact_quadratic')), ExactQuadraticHvp)


def test_finite_difference_is_nearly_symmetric(tiny_mlp_problem):
    model, problem, weights, theta = tiny_mlp_problem
    op = FiniteDifferenceHvp(model, theta, problem, weights, LossWeights(lambda_p=0.0),
                             fd_step_scale=1e-4)
    rng = np.random.default_rng(11)
    for _ in range(100):
        u, v = rng.normal(size=(2, model.n_params))
        Hu, Hv = op(u), op(v)
        bound = 1e-4 * np.linalg.norm(u) * np.linalg.norm(v) * (
            1.0 + np.linalg.norm(Hu) / np.linalg.norm(u))
        assert abs(u @ Hv - v @ Hu) <= bound


def test_exact_mode_rejects_nonlinear_models(tiny_mlp_problem):
    model, problem, weights, theta = tiny_mlp_problem
    with pytest.raises(ConfigError, match="LinearFieldModel"):
        ExactQuadraticHvp(model, theta, problem, weights, LossWeights(lambda_p=0.0))


def test_zero_direction():
    model, problem, weights, loss_weights = _oracle()
    cfg = HvpConfig(mode='exact_quadratic')
    with pytest.raises(ConfigError):
        hvp(model, [0.0], problem, weights, loss_weights, [0.0], cfg)
    op = make_hvp(model, [0.0], problem, weights, loss_weights, cfg)
    np.testing.assert_array_equal(op([0.0]), [0.0])


class _Overflowing(BaseHvp):
    def apply_hessian(self, v):
        return np.full_like(v, np.inf)


def test_non_finite_product_is_reported():
    with pytest.raises(NonFiniteError, match="overflowing"):
        _Overflowing()(np.ones(2))
