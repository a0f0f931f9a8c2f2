import json

import numpy as np
import pandas as pd
import pytest

from conftest import tiny_benchmark_config
from core.benchmark import build_benchmark
from core.data_models import TrainReport
from core.dataset_io import (TRANSFER, load_config, provenance, read_checkpoint, read_dataset,
                             read_provenance, read_transfer, verify_manifest, write_checkpoint,
                             write_dataset, write_json, write_matrix, write_table,
                             write_transfer)
from core.errors import ConfigError
from core.field_models import MlpFieldModel
from core.geometry import TransferMatrix


@pytest.fixture(scope='module')
def tiny_data():
    config = tiny_benchmark_config()
    return config, build_benchmark(config.benchmark, config.ap_params, 0.01, seed=3)


def test_dataset_round_trip(tmp_path, tiny_data):
    config, data = tiny_data
    write_dataset(data, tmp_path / 'dataset', config)
    loaded = read_dataset(tmp_path / 'dataset')
    assert loaded.seed == 3
    assert loaded.kind == 'aliev_panfilov'
    np.testing.assert_array_equal(loaded.transfer.entries, data.transfer.entries)
    np.testing.assert_array_equal(loaded.measurements.y, data.measurements.y)
    np.testing.assert_array_equal(loaded.fields.u, data.fields.u)
    np.testing.assert_array_equal(loaded.collocation.node_index, data.collocation.node_index)
    np.testing.assert_array_equal(loaded.heart.triangles, data.heart.triangles)


def test_dataset_files_are_reproducible(tmp_path, tiny_data):
    config, data = tiny_data
    write_dataset(data, tmp_path / 'a', config)
    write_dataset(data, tmp_path / 'b', config)
    for name in ('measurements.csv', 'transfer.csv', 'manifest.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_manifest_checksums_catch_edits(tmp_path, tiny_data):
    config, data = tiny_data
    directory = tmp_path / 'dataset'
    manifest = write_dataset(data, directory, config)
    assert verify_manifest(directory) == []
    info = json.loads(manifest.read_text())
    assert info['config_hash'] == config.config_hash()
    with open(directory / 'measurements.csv', 'a') as f:
        f.write('0\n')
    assert verify_manifest(directory) == ['measurements.csv']


def test_transfer_header_must_match_contents(tmp_path):
    R = TransferMatrix(np.full((3, 2), 0.5))
    write_transfer(R, tmp_path / TRANSFER)
    np.testing.assert_array_equal(read_transfer(tmp_path / TRANSFER).entries, R.entries)

    write_matrix(np.ones((2, 2)), tmp_path / 'bad.csv', header="rows=3 cols=2")
    with pytest.raises(ConfigError, match="header"):
        read_transfer(tmp_path / 'bad.csv')


def test_missing_input_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_transfer(tmp_path / 'absent.csv')


def test_checkpoint_round_trip(tmp_path):
    model = MlpFieldModel([4, 5, 2], input_bounds=[[-1, 1], [-1, 1], [-1, 1], [0, 3]])
    theta = model.init_params(9)
    report = TrainReport(final_loss=0.5, grad_norm=1e-5, iterations=12, converged=True,
                         g_tol=1e-4, loss_history=[1.0, 0.5])
    prov = {'config_hash': 'abc', 'seed': '0', 'artifact_version': '1.0.0'}
    header, values = write_checkpoint(model, theta, report, tmp_path / 'checkpoint', prov)
    assert header.suffix == '.json' and values.suffix == '.csv'

    loaded_model, loaded_theta, loaded_report = read_checkpoint(tmp_path / 'checkpoint')
    np.testing.assert_array_equal(loaded_theta.values, theta.values)
    np.testing.assert_array_equal(loaded_model.input_bounds, model.input_bounds)
    assert loaded_report == report


def test_config_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'train': {'step_size': 0.1, 'learning_rate': 0.1}}))
    with pytest.raises(ConfigError, match="learning_rate"):
        load_config(path)


def test_config_file_must_be_json(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_round_trips_through_json(tmp_path):
    config = tiny_benchmark_config()
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(config.to_dict()))
    assert load_config(path).config_hash() == config.config_hash()


def test_provenance_is_read_back_from_csv_and_json(tmp_path, tiny_data):
    config, data = tiny_data
    prov = provenance('abc123', 7)
    write_table(pd.DataFrame({'x': [1.0]}), tmp_path / 'table.csv', prov)
    write_json({'provenance': prov, 'stage': 'score'}, tmp_path / 'sidecar.json')
    assert read_provenance(tmp_path / 'table.csv') == prov
    assert read_provenance(tmp_path / 'sidecar.json') == prov

    manifest = write_dataset(data, tmp_path / 'dataset', config)
    stored = read_provenance(manifest)
    assert stored['config_hash'] == config.config_hash()
    assert stored['seed'] == '3'


def test_unwritable_output_is_a_config_error(tmp_path):
    blocker = tmp_path / 'blocker'
    blocker.write_text('a regular file, not a directory\n')
    with pytest.raises(ConfigError, match="output_dir"):
        write_table(pd.DataFrame({'x': [1.0]}), blocker / 'table.csv')
    with pytest.raises(ConfigError, match="output_dir"):
        write_matrix(np.eye(2), blocker / 'matrix.csv')
    with pytest.raises(ConfigError, match="output_dir"):
        write_json({'a': 1}, blocker / 'sidecar.json')
