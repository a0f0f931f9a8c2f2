import numpy as np
import pytest

from conftest import oracle_config, tiny_benchmark_config
from core.data_models import (BenchmarkSpec, ExperimentResult, ExperimentSpec, FieldTimeSeries,
                              LossWeights, ModelSpec, TrainConfig)
from core.errors import ConfigError
from core.experiment_runner import ExperimentRunner, relative_error, results_frame, summarize
from core.pipeline_manager import PipelineManager


def test_relative_error_values():
    u = np.array([[3.0, 4.0]])
    assert relative_error(u, u) == 0.0
    assert relative_error(np.zeros_like(u), u) == pytest.approx(1.0)
    assert relative_error(np.array([[3.0, 0.0]]), u) == pytest.approx(0.8)


def test_relative_error_accepts_field_series():
    fields = FieldTimeSeries(u=[[1.0, 2.0]], v=[[0.0, 0.0]], times=[0.0, 1.0])
    assert relative_error(fields, fields) == 0.0


def test_relative_error_is_scale_invariant():
    rng = np.random.default_rng(0)
    u, u_hat = rng.normal(size=(2, 4, 3))
    assert relative_error(7.0 * u_hat, 7.0 * u) == pytest.approx(relative_error(u_hat, u))


def test_relative_error_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        relative_error(np.zeros((2, 2)), np.ones((2, 3)))
    with pytest.raises(ConfigError):
        relative_error(np.ones(3), np.zeros(3))


def test_summary_uses_population_std():
    results = [ExperimentResult('random', 4, 0.01, [0, 1], [1.0, 3.0], [np.nan, np.nan])]
    frame = results_frame(results)
    assert list(frame.columns) == ['strategy', 'budget', 'sigma', 'seed', 're', 'wall_seconds']
    assert len(frame) == 2
    summary = summarize(results)
    row = summary.iloc[0]
    assert (row['n'], row['re_mean'], row['re_std']) == (2, 2.0, 1.0)
    assert summarize([]).empty


def test_runner_needs_ground_truth_fields():
    with pytest.raises(ConfigError):
        ExperimentRunner(oracle_config())


def test_failed_seeds_are_recorded_and_skipped():
    config = tiny_benchmark_config(
        train=TrainConfig(step_size=1e-2, max_iters=2, g_tol=1e-12, require_certificate=True))
    runner = ExperimentRunner(config)
    results = runner.run_rank_split(0.01, 10, [0, 1])
    assert all(r.re_values == [] for r in results)
    assert [f['seed'] for f in runner.failures] == [0, 1]
    assert all("stage 'score'" in f['message'] for f in runner.failures)


@pytest.mark.slow
def test_full_budget_bands_give_identical_errors():
    results = ExperimentRunner(tiny_benchmark_config()).run_rank_split(0.01, 10, [0])
    assert [r.strategy for r in results] == ['fossa_band_high', 'fossa_band_middle',
                                             'fossa_band_low']
    errors = [r.re_values[0] for r in results]
    assert errors[0] == errors[1] == errors[2]
    assert np.isnan(results[0].wall_seconds[0])


@pytest.mark.slow
def test_budget_sweep_grid():
    config = tiny_benchmark_config()
    strategies = ['random', 'maximin', 'fossa_topk']
    results = ExperimentRunner(config).run_budget_sweep(0.01, [3, 10], strategies, [0, 1])
    frame = results_frame(results)
    assert len(frame) == 3 * 2 * 2
    assert np.all(frame['re'] > 0)
    full = frame[frame['budget'] == 10]
    for seed in (0, 1):
        assert full[full['seed'] == seed]['re'].nunique() == 1


@pytest.mark.slow
def test_sweep_is_deterministic():
    config = tiny_benchmark_config()
    first = results_frame(ExperimentRunner(config).run_budget_sweep(0.01, [4], ['random'], [0]))
    second = results_frame(ExperimentRunner(config).run_budget_sweep(0.01, [4], ['random'], [0]))
    assert first['re'].tolist() == second['re'].tolist()


@pytest.mark.slow
def test_reproducibility_table():
    frame = ExperimentRunner(tiny_benchmark_config()).run_reproducibility([0.0], [0, 1])
    assert list(frame.columns) == ['sigma', 'n_seeds', 'mean_spearman', 'min_spearman']
    row = frame.iloc[0]
    assert row['n_seeds'] == 2
    assert -1.0 <= row['mean_spearman'] <= 1.0


def test_reproducibility_needs_two_seeds():
    with pytest.raises(ConfigError):
        ExperimentRunner(tiny_benchmark_config()).run_reproducibility([0.0], [0])


@pytest.mark.slow
def test_rank_split_runs_every_configured_sigma(tmp_path):
    config = tiny_benchmark_config(
        seeds=[0], experiment=ExperimentSpec(sigmas=[0.0, 0.01], rank_split_budget=4))
    frame, summary = PipelineManager(config, out_dir=tmp_path).evaluate('rank_split')
    assert sorted(frame['sigma'].unique()) == [0.0, 0.01]
    assert len(frame) == 3 * 2
    assert len(summary) == 3 * 2
    assert set(summary['sigma']) == {0.0, 0.01}


def _desk_config():
    """64 heart / 96 body nodes, sigma 0.01, five paired seeds"""
    return tiny_benchmark_config(
        benchmark=BenchmarkSpec(heart_nodes=64, body_nodes=96),
        noise_sigma=0.01,
        model=ModelSpec(hidden_layers=[16, 16]),
        loss_weights=LossWeights(lambda_d=1.0, lambda_p=1.0),
        train=TrainConfig(max_iters=2000, require_certificate=False),
        seeds=[0, 1, 2, 3, 4],
    )


@pytest.mark.slow
def test_high_importance_band_beats_low_band():
    config = _desk_config()
    budget = config.experiment.resolve_rank_split_budget(config.benchmark.n_sensors)
    assert budget == 58
    runner = ExperimentRunner(config)
    high, _, low = runner.run_rank_split(0.01, budget, config.seeds)
    assert runner.failures == []
    assert len(high.re_values) == len(low.re_values) == 5
    assert np.mean(high.re_values) < np.mean(low.re_values)


@pytest.mark.slow
def test_fossa_beats_random_at_small_budgets():
    config = _desk_config()
    n = config.benchmark.n_sensors
    budgets = [n // 8, n // 4, n]
    runner = ExperimentRunner(config)
    frame = results_frame(runner.run_budget_sweep(0.01, budgets, ['random', 'fossa_topk'],
                                                  config.seeds))
    assert runner.failures == []
    table = frame.pivot_table(index=['budget', 'seed'], columns='strategy', values='re')
    for budget in budgets[:2]:
        cell = table.loc[budget]
        assert int((cell['fossa_topk'] <= cell['random']).sum()) >= 4
    full = table.loc[n]
    assert (full['fossa_topk'] == full['random']).all()
