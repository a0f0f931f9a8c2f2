import pytest

from core.data_models import (CgConfig, ConfidenceParams, ExperimentSpec, HvpConfig, RunConfig,
                              SelectionSpec, TrainConfig)
from core.errors import (EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, CgAbortError, ConfigError,
                         StageError)


def test_default_config_hash_is_stable():
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig(noise_sigma=0.05).config_hash() != RunConfig().config_hash()


def test_round_trip_preserves_hash():
    config = RunConfig(seeds=[1, 2], selections=[SelectionSpec(strategy='maximin', budget=4)])
    assert RunConfig.from_dict(config.to_dict()).config_hash() == config.config_hash()


def test_unknown_keys_name_their_section():
    with pytest.raises(ConfigError, match="hvp"):
        RunConfig.from_dict({'hvp': {'mode': 'finite_difference', 'step': 1.0}})
    with pytest.raises(ConfigError, match="config"):
        RunConfig.from_dict({'optimizer': {}})


def test_bounds_are_validated_eagerly():
    with pytest.raises(ConfigError, match="train.step_size"):
        TrainConfig(step_size=0.0)
    with pytest.raises(ConfigError):
        CgConfig(rel_tol=1e-9, abs_floor=1e-8)
    with pytest.raises(ConfigError):
        RunConfig(noise_sigma=-1.0)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'imputation': {'tau': 1.5}})


def test_selection_budget_cannot_exceed_sensors():
    with pytest.raises(ConfigError, match="budget"):
        RunConfig(selections=[SelectionSpec(budget=1000)])


def test_band_selection_needs_a_band():
    with pytest.raises(ConfigError):
        SelectionSpec(strategy='fossa_band', budget=3)
    assert SelectionSpec(strategy='fossa_band', budget=3, band='low').label == 'fossa_band_low'


def test_sensor_weight_count_is_checked():
    with pytest.raises(ConfigError, match="sensor_weights"):
        RunConfig(sensor_weights=[1.0, 1.0])


def test_solver_defaults():
    assert HvpConfig().damping == 1e-4
    cg = CgConfig()
    assert (cg.rel_tol, cg.abs_floor, cg.max_iters) == (1e-3, 1e-8, 500)


def test_residual_bounds_default_to_cg_settings():
    config = RunConfig(cg=CgConfig(rel_tol=1e-4, abs_floor=1e-10))
    assert config.confidence.rho_min == 1e-10
    assert config.confidence.rho_tol == 1e-4
    explicit = RunConfig(confidence=ConfidenceParams(rho_min=1e-6, rho_tol=1e-2))
    assert explicit.confidence.rho_tol == 1e-2


def test_relative_gradient_tolerance():
    assert TrainConfig().resolve_g_tol(9.0) == pytest.approx(1e-3)
    assert TrainConfig(g_tol=1e-6).resolve_g_tol(9.0) == 1e-6


def test_budget_defaults_scale_with_body_size():
    spec = ExperimentSpec()
    assert spec.resolve_budgets(352) == [32, 64, 96, 128, 160, 192, 224, 256, 288, 320, 352]
    scaled = spec.resolve_budgets(96)
    assert scaled[0] == 9 and scaled[-1] == 96
    assert spec.resolve_rank_split_budget(96) == 58
    assert ExperimentSpec(budgets=[5, 7]).resolve_budgets(96) == [5, 7]


def test_stage_error_keeps_the_cause_exit_code():
    error = StageError('score', CgAbortError("bad curvature"), seed=2)
    assert error.exit_code == EXIT_NUMERICAL_FAILURE
    assert "stage 'score', seed 2" in str(error)
    assert StageError('generate', ConfigError("x")).exit_code == EXIT_CONFIG_ERROR
