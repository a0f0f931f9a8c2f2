import json

import pytest

from conftest import oracle_config
from core.errors import ConfigError
from core.pipeline_manager import STAGES, PipelineManager
from run_fossa import main


@pytest.fixture
def config():
    return oracle_config()


def test_oracle_pipeline_recovers_analytic_scores(tmp_path, config):
    outcome = PipelineManager(config, out_dir=tmp_path).run()
    report = outcome['report']
    assert report.stage == 'impute'
    assert report.scores.S[0] == pytest.approx(8.0 / 27.0, rel=1e-6)
    assert report.scores.S[1] == pytest.approx(16.0 / 27.0, rel=1e-6)
    assert outcome['results'] is None
    assert outcome['selection']['sensor_id'].tolist() == [1]
    for name in ('scores.csv', 'scores.json', 'selection.csv', 'checkpoint.json',
                 'checkpoint.csv', 'dataset/manifest.json'):
        assert (tmp_path / name).exists()


def test_reruns_are_byte_identical(tmp_path, config):
    PipelineManager(config, out_dir=tmp_path / 'a').run()
    PipelineManager(config, out_dir=tmp_path / 'b').run()
    for name in ('scores.csv', 'selection.csv', 'checkpoint.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_resume_after_score_matches_a_full_run(tmp_path, config):
    PipelineManager(config, out_dir=tmp_path / 'full').run()

    staged = PipelineManager(config, out_dir=tmp_path / 'staged')
    data = staged.generate()
    staged.train(data)
    staged.score(data)
    assert staged.completed_stages() == ['generate', 'train', 'score']
    staged.run(resume=True)

    assert ((tmp_path / 'full' / 'scores.csv').read_bytes()
            == (tmp_path / 'staged' / 'scores.csv').read_bytes())


def test_plan_reports_reuse(tmp_path, config):
    pipeline = PipelineManager(config, out_dir=tmp_path)
    assert [p['action'] for p in pipeline.plan()] == ['run'] * len(STAGES)
    pipeline.run()
    actions = {p['stage']: p['action'] for p in pipeline.plan()}
    assert actions['impute'] == 'reuse'
    assert actions['evaluate'] == 'run'
    assert all(p['action'] == 'run' for p in pipeline.plan(resume=False))


def test_adjoint_check_is_recorded(tmp_path, config):
    pipeline = PipelineManager(config, out_dir=tmp_path)
    data = pipeline.generate()
    pipeline.train(data)
    report = pipeline.score(data, adjoint_check=True)
    assert report.metadata['adjoint_disagreement'] < 1e-8
    sidecar = json.loads((tmp_path / 'scores.json').read_text())
    assert sidecar['stage'] == 'score'
    assert sidecar['provenance']['config_hash'] == config.config_hash()


def _write_config(path, config):
    path.write_text(json.dumps(config.to_dict()))
    return str(path)


def test_cli_dry_run_writes_nothing(tmp_path, config):
    cfg_path = _write_config(tmp_path / 'run.json', config)
    out = tmp_path / 'out'
    assert main(['--config', cfg_path, '--out', str(out), '--dry-run', 'pipeline']) == 0
    assert not out.exists()


def test_cli_config_errors_exit_with_two(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'hvp': {'mode': 'newton'}}))
    assert main(['--config', str(bad), 'pipeline']) == 2
    assert main(['--config', str(tmp_path / 'missing.json'), 'pipeline']) == 2
    assert main(['--threads', '0', '--dry-run', 'pipeline']) == 2


def test_cli_scores_the_oracle(tmp_path, config, capsys):
    cfg_path = _write_config(tmp_path / 'run.json', config)
    out = str(tmp_path / 'out')
    assert main(['--config', cfg_path, '--out', out, 'generate']) == 0
    assert main(['--config', cfg_path, '--out', out, 'train']) == 0
    assert main(['--config', cfg_path, '--out', out, 'score']) == 0
    assert main(['--config', cfg_path, '--out', out, 'impute', '--tau', '0.0']) == 0
    printed = capsys.readouterr().out
    assert "S[0] = 0.29629" in printed
    assert "Trusted sensors: 2/2" in printed


def test_cli_numerical_failure_exit_code(tmp_path):
    config = oracle_config(mode='exact_quadratic')
    config.train.max_iters = 1
    cfg_path = _write_config(tmp_path / 'run.json', config)
    out = str(tmp_path / 'out')
    assert main(['--config', cfg_path, '--out', out, 'generate']) == 0
    assert main(['--config', cfg_path, '--out', out, 'train']) == 0
    # training stopped early, so the optimality certificate fails
    assert main(['--config', cfg_path, '--out', out, 'score']) == 3


def test_resume_with_another_config_recomputes(tmp_path, config):
    out = tmp_path / 'shared'
    first = PipelineManager(config, out_dir=out).run()
    other = oracle_config(weights=(1.0, 2.0))
    assert other.config_hash() != config.config_hash()

    second = PipelineManager(other, out_dir=out)
    assert second.completed_stages() == []
    outcome = second.run(resume=True)
    assert outcome['report'].scores.S[0] != pytest.approx(first['report'].scores.S[0], rel=1e-3)

    fresh = PipelineManager(other, out_dir=tmp_path / 'fresh').run()
    for name in ('scores.csv', 'checkpoint.csv', 'selection.csv', 'dataset/manifest.json'):
        assert (out / name).read_bytes() == (tmp_path / 'fresh' / name).read_bytes()
    sidecar = json.loads((out / 'scores.json').read_text())
    assert sidecar['provenance']['config_hash'] == other.config_hash()
    assert fresh['report'].scores.S.tolist() == outcome['report'].scores.S.tolist()


def test_stale_inputs_are_refused(tmp_path, config):
    PipelineManager(config, out_dir=tmp_path).run()
    other = PipelineManager(oracle_config(weights=(1.0, 2.0)), out_dir=tmp_path)
    with pytest.raises(ConfigError, match="was written for config"):
        other.load_data()
    with pytest.raises(ConfigError, match="was written for config"):
        other.load_report()


def test_edited_dataset_is_refused(tmp_path, config):
    pipeline = PipelineManager(config, out_dir=tmp_path)
    pipeline.generate()
    with open(tmp_path / 'dataset' / 'measurements.csv', 'a') as f:
        f.write('0\n')
    with pytest.raises(ConfigError, match="measurements.csv"):
        pipeline.load_data()


def test_cli_refuses_a_dataset_from_another_config(tmp_path, config):
    out = str(tmp_path / 'out')
    first = _write_config(tmp_path / 'a.json', config)
    second = _write_config(tmp_path / 'b.json', oracle_config(weights=(1.0, 2.0)))
    assert main(['--config', first, '--out', out, 'generate']) == 0
    assert main(['--config', second, '--out', out, 'train']) == 2


def test_cli_unwritable_sidecar_exits_with_two(tmp_path, config):
    cfg_path = _write_config(tmp_path / 'run.json', config)
    out = tmp_path / 'out'
    assert main(['--config', cfg_path, '--out', str(out), 'generate']) == 0
    assert main(['--config', cfg_path, '--out', str(out), 'train']) == 0
    (out / 'scores.json').mkdir()
    assert main(['--config', cfg_path, '--out', str(out), 'score']) == 2
