#!/usr/bin/env python3
"""
Dataset IO Module

Readers and writers for every file the pipeline exchanges:

    heart_mesh.json, body_mesh.json   {"nodes": [[x,y,z]...], "triangles": [[i,j,k]...]}
    transfer.csv                      "# rows=N_b cols=N_h" then the dense matrix
    fields_u.csv, fields_v.csv        heart potentials, one row per node
    fields.json                       time-series sidecar ({"times": [...]})
    measurements.csv                  noisy body potentials, one row per body node
    measurements_clean.csv            noise-free body potentials
    collocation.csv                   node_index,time
    manifest.json                     materialised config, seeds, file checksums

Every CSV starts with '#' provenance lines (config hash, seed, artifact
version). Nothing time dependent is written, so reruns are byte identical.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from core.benchmark import BenchmarkData
from core.data_models import (ARTIFACT_VERSION, FieldTimeSeries, MeasurementSet, RunConfig,
                              TrainReport, _to_native)
from core.errors import ConfigError
from core.field_models import BaseFieldModel, ParamVector, model_from_dict
from core.geometry import SurfaceMesh, TransferMatrix
from physics import CollocationSet

_LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

HEART_MESH = 'heart_mesh.json'
BODY_MESH = 'body_mesh.json'
TRANSFER = 'transfer.csv'
FIELDS_U = 'fields_u.csv'
FIELDS_V = 'fields_v.csv'
FIELDS_SIDECAR = 'fields.json'
MEASUREMENTS = 'measurements.csv'
MEASUREMENTS_CLEAN = 'measurements_clean.csv'
COLLOCATION = 'collocation.csv'
MANIFEST = 'manifest.json'


def provenance(config_hash: str, seed: Optional[int]) -> Dict[str, str]:
    return {
        'config_hash': config_hash,
        'seed': '' if seed is None else str(int(seed)),
        'artifact_version': ARTIFACT_VERSION,
    }


def _require_file(path: Path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Input file not found: {path}")
    return path


def _write_comments(handle, comments: List[str]):
    for line in comments:
        handle.write(f"# {line}\n")


def _read_comments(path: Path) -> Dict[str, str]:
    """`# key=value` header lines of a CSV"""
    info = {}
    with open(path) as f:
        for line in f:
            if not line.startswith('#'):
                break
            for token in line[1:].split():
                if '=' in token:
                    key, value = token.split('=', 1)
                    info[key] = value
    return info


def _open_output(path: Path):
    """Open `path` for writing, creating its directory; OS failures become ConfigError."""
    path = Path(path)
    try:
        path.parent.mkdir(exist_ok=True, parents=True)
        return open(path, 'w', newline='')
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}", field='output_dir') from exc


def write_json(data: Dict, path: Path):
    with _open_output(path) as f:
        json.dump(_to_native(data), f, indent=2, sort_keys=True)
        f.write('\n')


def _read_json(path: Path) -> Dict:
    with open(_require_file(path)) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Matrices and tables
# ---------------------------------------------------------------------------

def write_matrix(matrix: np.ndarray, path: Path, header: Optional[str] = None,
                 prov: Optional[Dict[str, str]] = None):
    """Dense matrix as headerless CSV behind comment lines."""
    comments = [] if header is None else [header]
    if prov:
        comments.append(' '.join(f"{k}={v}" for k, v in prov.items()))
    with _open_output(path) as f:
        _write_comments(f, comments)
        pd.DataFrame(np.atleast_2d(matrix)).to_csv(f, header=False, index=False,
                                                   float_format=FLOAT_FORMAT)


def read_matrix(path: Path) -> np.ndarray:
    frame = pd.read_csv(_require_file(path), comment='#', header=None)
    values = frame.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{path} contains non-finite values")
    return values


def write_table(frame: pd.DataFrame, path: Path, prov: Optional[Dict[str, str]] = None):
    """Tabular output with a provenance comment line."""
    with _open_output(path) as f:
        if prov:
            _write_comments(f, [' '.join(f"{k}={v}" for k, v in prov.items())])
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)
    _LOGGER.debug("wrote %s (%d rows)", path, len(frame))


def read_table(path: Path) -> pd.DataFrame:
    return pd.read_csv(_require_file(path), comment='#')


def write_transfer(R: TransferMatrix, path: Path, prov: Optional[Dict[str, str]] = None):
    write_matrix(R.entries, path, header=f"rows={R.n_body} cols={R.n_heart}", prov=prov)


def read_transfer(path: Path) -> TransferMatrix:
    """Transfer matrix; the header's row/column counts must match the body."""
    path = _require_file(path)
    info = _read_comments(path)
    entries = read_matrix(path)
    if 'rows' in info and 'cols' in info:
        expected = (int(info['rows']), int(info['cols']))
        if entries.shape != expected:
            raise ConfigError(f"{path}: header says {expected}, found {entries.shape}",
                              field='transfer')
    return TransferMatrix(entries)


# ---------------------------------------------------------------------------
# Meshes, fields, collocation
# ---------------------------------------------------------------------------

def write_mesh(mesh: SurfaceMesh, path: Path):
    write_json(mesh.to_dict(), Path(path))


def read_mesh(path: Path) -> SurfaceMesh:
    return SurfaceMesh.from_dict(_read_json(Path(path)))


def write_fields(fields: FieldTimeSeries, directory: Path, prov: Optional[Dict[str, str]] = None):
    directory = Path(directory)
    write_matrix(fields.u, directory / FIELDS_U, prov=prov)
    write_matrix(fields.v, directory / FIELDS_V, prov=prov)
    write_json({'times': fields.times, 'n_nodes': fields.n_nodes,
                 'n_frames': fields.n_frames}, directory / FIELDS_SIDECAR)


def read_fields(directory: Path) -> FieldTimeSeries:
    directory = Path(directory)
    sidecar = _read_json(directory / FIELDS_SIDECAR)
    return FieldTimeSeries(u=read_matrix(directory / FIELDS_U),
                           v=read_matrix(directory / FIELDS_V),
                           times=np.asarray(sidecar['times'], dtype=float))


def write_collocation(coll: CollocationSet, path: Path, prov: Optional[Dict[str, str]] = None):
    frame = pd.DataFrame({'node_index': coll.node_index, 'time': coll.times})
    write_table(frame, path, prov)


def read_collocation(path: Path, seed: Optional[int] = None) -> CollocationSet:
    frame = read_table(path)
    return CollocationSet(node_index=frame['node_index'].to_numpy(dtype=int),
                          times=frame['time'].to_numpy(dtype=float), seed=seed)


# ---------------------------------------------------------------------------
# Dataset directory and manifest
# ---------------------------------------------------------------------------

def file_checksum(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_dataset(data: BenchmarkData, directory: Path, config: RunConfig) -> Path:
    """
    Write every dataset file plus the manifest.

    Returns:
        Path of the manifest
    """
    directory = Path(directory)
    try:
        directory.mkdir(exist_ok=True, parents=True)
    except OSError as exc:
        raise ConfigError(f"cannot create dataset directory {directory}: {exc}",
                          field='output_dir') from exc

    prov = provenance(config.config_hash(), data.seed)
    written = [HEART_MESH, BODY_MESH, TRANSFER, MEASUREMENTS, MEASUREMENTS_CLEAN]
    write_mesh(data.heart, directory / HEART_MESH)
    write_mesh(data.body, directory / BODY_MESH)
    write_transfer(data.transfer, directory / TRANSFER, prov)
    write_matrix(data.measurements.y, directory / MEASUREMENTS, prov=prov)
    write_matrix(data.y_clean, directory / MEASUREMENTS_CLEAN, prov=prov)
    if data.fields is not None:
        write_fields(data.fields, directory, prov)
        written += [FIELDS_U, FIELDS_V, FIELDS_SIDECAR]
    else:
        write_json({'times': data.times, 'n_nodes': data.heart.node_count,
                     'n_frames': int(data.times.size)}, directory / FIELDS_SIDECAR)
        written.append(FIELDS_SIDECAR)
    if data.collocation is not None:
        write_collocation(data.collocation, directory / COLLOCATION, prov)
        written.append(COLLOCATION)

    manifest = {
        'artifact_version': ARTIFACT_VERSION,
        'kind': data.kind,
        'seed': int(data.seed),
        'noise_sigma': float(data.measurements.noise_sigma),
        'config': config.to_dict(),
        'config_hash': config.config_hash(),
        'files': {name: file_checksum(directory / name) for name in sorted(written)},
    }
    write_json(manifest, directory / MANIFEST)
    _LOGGER.info("dataset written to %s (%d files)", directory, len(written))
    return directory / MANIFEST


def read_manifest(directory: Path) -> Dict:
    return _read_json(Path(directory) / MANIFEST)


def verify_manifest(directory: Path) -> List[str]:
    """Names of listed files whose checksum no longer matches"""
    directory = Path(directory)
    manifest = read_manifest(directory)
    return [name for name, digest in manifest['files'].items()
            if file_checksum(_require_file(directory / name)) != digest]


def read_provenance(path: Path) -> Dict[str, str]:
    """
    Provenance stored with an output file.

    CSVs carry it in their comment lines, JSON files under `provenance`;
    a dataset manifest carries `config_hash` and `seed` at top level.

    Returns:
        Dictionary of strings, empty when the file records none
    """
    path = _require_file(path)
    if path.suffix != '.json':
        return _read_comments(path)
    data = _read_json(path)
    if 'provenance' in data:
        return {k: str(v) for k, v in data['provenance'].items()}
    if 'config_hash' in data:
        return provenance(data['config_hash'], data.get('seed'))
    return {}


def read_dataset(directory: Path) -> BenchmarkData:
    """Load a dataset directory written by write_dataset."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    seed = int(manifest.get('seed', 0))
    heart = read_mesh(directory / HEART_MESH)
    body = read_mesh(directory / BODY_MESH)
    transfer = read_transfer(directory / TRANSFER)
    if transfer.n_body != body.node_count or transfer.n_heart != heart.node_count:
        raise ConfigError(f"transfer matrix {transfer.entries.shape} does not match meshes "
                          f"({body.node_count} body, {heart.node_count} heart)", field='transfer')

    fields = None
    if (directory / FIELDS_U).exists():
        fields = read_fields(directory)
        times = fields.times
    else:
        times = np.asarray(_read_json(directory / FIELDS_SIDECAR)['times'], dtype=float)
    collocation = None
    if (directory / COLLOCATION).exists():
        collocation = read_collocation(directory / COLLOCATION, seed)

    return BenchmarkData(
        kind=manifest.get('kind', 'aliev_panfilov'),
        heart=heart,
        body=body,
        transfer=transfer,
        times=times,
        measurements=MeasurementSet(y=read_matrix(directory / MEASUREMENTS),
                                    noise_sigma=float(manifest.get('noise_sigma', 0.0)),
                                    seed=seed),
        y_clean=read_matrix(directory / MEASUREMENTS_CLEAN),
        fields=fields,
        collocation=collocation,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def write_checkpoint(model: BaseFieldModel, theta: ParamVector, report: TrainReport,
                     path: Path, prov: Dict[str, str]) -> Tuple[Path, Path]:
    """
    Checkpoint as a JSON header (architecture, train report, provenance)
    and a CSV of parameter values next to it.

    Returns:
        Tuple (header path, values path)
    """
    path = Path(path)
    header_path = path.with_suffix('.json')
    values_path = path.with_suffix('.csv')
    write_table(pd.DataFrame({'theta': theta.values}), values_path, prov)
    write_json({'model': model.to_dict(), 'train_report': report.to_dict(),
                 'n_params': theta.length, 'values_file': values_path.name,
                 'provenance': prov}, header_path)
    return header_path, values_path


def read_checkpoint(path: Path) -> Tuple[BaseFieldModel, ParamVector, TrainReport]:
    path = Path(path)
    header = _read_json(path.with_suffix('.json'))
    model = model_from_dict(header['model'])
    values = read_table(path.with_name(header['values_file']))['theta'].to_numpy(dtype=float)
    theta = ParamVector(values)
    model.check_params(theta.values)
    return model, theta, TrainReport.from_dict(header['train_report'])


def load_config(path: Path) -> RunConfig:
    """RunConfig from a JSON file"""
    return RunConfig.from_dict(_read_json(Path(path)))
