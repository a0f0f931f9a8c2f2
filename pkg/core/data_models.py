#!/usr/bin/env python3
"""
Data Models Module

Defines the configuration and report structures used throughout FOSSA.
Every config section is a dataclass with defaults, eager validation,
`to_dict` for JSON output and `from_dict` that rejects unknown keys.
"""

import hashlib
import json
from dataclasses import dataclass, field, asdict, fields
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from core.errors import ConfigError


ARTIFACT_VERSION = "1.0.0"

STRATEGIES = ('random', 'maximin', 'fossa_topk', 'fossa_band')
BANDS = ('high', 'middle', 'low')
HVP_MODES = ('finite_difference', 'exact_quadratic')
BENCHMARK_KINDS = ('aliev_panfilov', 'quadratic_oracle')
EXPERIMENT_MODES = ('rank_split', 'sweep', 'reproducibility')

# Budget grid of the 352-node body surface; scaled to the body node count at run time
REFERENCE_BODY_NODES = 352
REFERENCE_BUDGETS = (32, 64, 96, 128, 160, 192, 224, 256, 288, 320, 352)


def _to_native(value):
    """Convert numpy scalars/arrays to plain Python for JSON."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: _to_native(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_native(v) for v in value]
    return value


def _build(cls, data: Optional[Dict], section: str):
    """Instantiate a config dataclass, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError("expected a JSON object", field=section)
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", field=section)
    return cls(**data)


def _require(condition: bool, message: str, field_name: str):
    if not condition:
        raise ConfigError(message, field=field_name)


class _ConfigSection:
    """Shared serialisation for config dataclasses."""

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization"""
        return _to_native(asdict(self))

    @classmethod
    def from_dict(cls, data: Optional[Dict], section: str = None):
        """Create from dictionary, validating keys and bounds"""
        return _build(cls, data, section or cls.__name__)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass
class APParams(_ConfigSection):
    """
    Aliev-Panfilov parameters (all dimensionless).

    Defaults are the usual values from the Aliev-Panfilov literature.
    """
    D: float = 0.1
    k_r: float = 8.0
    a: float = 0.15
    e0: float = 0.002
    mu1: float = 0.2
    mu2: float = 0.3

    def __post_init__(self):
        _require(self.D > 0, "must be positive", 'ap_params.D')
        _require(self.k_r > 0, "must be positive", 'ap_params.k_r')
        _require(self.mu2 > 0, "must be positive", 'ap_params.mu2')


@dataclass
class FieldTimeSeries:
    """Heart-surface potential u and recovery variable v, one row per node."""
    u: np.ndarray       # (N_h, N_t)
    v: np.ndarray       # (N_h, N_t)
    times: np.ndarray   # (N_t,)

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if self.u.shape != self.v.shape:
            raise ConfigError(f"u {self.u.shape} and v {self.v.shape} differ", field='fields')
        if self.u.shape[1] != len(self.times):
            raise ConfigError(f"{self.u.shape[1]} frames but {len(self.times)} times",
                              field='fields')
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ConfigError("times must be strictly increasing", field='fields.times')

    @property
    def n_nodes(self) -> int:
        return int(self.u.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.u.shape[1])


@dataclass
class MeasurementSet:
    """Body-surface potentials y, one row per body node."""
    y: np.ndarray           # (N_b, N_t)
    noise_sigma: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        _require(self.noise_sigma >= 0, "must be nonnegative", 'noise_sigma')


@dataclass
class BenchmarkSpec(_ConfigSection):
    """
    Geometry, simulation protocol and collocation budget of a benchmark.

    `quadratic_oracle` ignores the geometry fields and builds the
    one-parameter weighted quadratic problem from `oracle_y` and
    `oracle_penalty`.
    """
    kind: str = 'aliev_panfilov'
    heart_nodes: int = 64
    body_nodes: int = 96
    heart_radius: float = 1.0
    body_radius: float = 3.0
    kernel_scale: float = 1.0
    stimulus_nodes: List[int] = field(default_factory=lambda: [0])
    dt: float = 0.05
    n_steps: int = 400
    frame_stride: int = 20
    n_collocation: int = 256
    oracle_y: List[float] = field(default_factory=lambda: [1.0, -1.0])
    oracle_penalty: float = 0.0

    def __post_init__(self):
        _require(self.kind in BENCHMARK_KINDS, f"must be one of {BENCHMARK_KINDS}",
                 'benchmark.kind')
        _require(self.heart_nodes >= 4, "must be >= 4", 'benchmark.heart_nodes')
        _require(self.body_nodes >= 4, "must be >= 4", 'benchmark.body_nodes')
        _require(0 < self.heart_radius < self.body_radius,
                 "need 0 < heart_radius < body_radius", 'benchmark.heart_radius')
        _require(self.kernel_scale > 0, "must be positive", 'benchmark.kernel_scale')
        _require(self.dt > 0, "must be positive", 'benchmark.dt')
        _require(self.n_steps >= 1, "must be >= 1", 'benchmark.n_steps')
        _require(self.frame_stride >= 1, "must be >= 1", 'benchmark.frame_stride')
        _require(self.n_collocation >= 1, "must be >= 1", 'benchmark.n_collocation')
        _require(len(self.oracle_y) >= 1, "needs at least one sensor", 'benchmark.oracle_y')
        _require(self.oracle_penalty >= 0, "must be nonnegative", 'benchmark.oracle_penalty')
        if self.kind == 'aliev_panfilov':
            bad = [s for s in self.stimulus_nodes if not 0 <= s < self.heart_nodes]
            _require(not bad, f"stimulus nodes {bad} outside the heart mesh",
                     'benchmark.stimulus_nodes')

    @property
    def n_sensors(self) -> int:
        if self.kind == 'quadratic_oracle':
            return len(self.oracle_y)
        return self.body_nodes


# ---------------------------------------------------------------------------
# Model and training
# ---------------------------------------------------------------------------

@dataclass
class ModelSpec(_ConfigSection):
    """MLP architecture: hidden layer widths (input 4, output 2 are fixed)."""
    hidden_layers: List[int] = field(default_factory=lambda: [32, 32, 32])

    def __post_init__(self):
        _require(len(self.hidden_layers) >= 1, "need at least one hidden layer",
                 'model.hidden_layers')
        _require(all(h >= 1 for h in self.hidden_layers), "widths must be positive",
                 'model.hidden_layers')

    @property
    def layer_sizes(self) -> List[int]:
        return [4] + list(self.hidden_layers) + [2]


@dataclass
class LossWeights(_ConfigSection):
    """
    Data and physics loss weights.

    lambda_d multiplies the whole weighted data sum; with per-sensor weights
    w_i this knob is redundant but kept so both loss notations are expressible.
    """
    lambda_d: float = 1.0
    lambda_p: float = 1.0

    def __post_init__(self):
        _require(self.lambda_d > 0, "must be positive", 'loss_weights.lambda_d')
        _require(self.lambda_p >= 0, "must be nonnegative", 'loss_weights.lambda_p')


@dataclass
class SensorWeights:
    """Per-sensor nonnegative loss weights (default all ones)."""
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).ravel()
        _require(np.all(self.w >= 0) and np.all(np.isfinite(self.w)),
                 "weights must be finite and nonnegative", 'sensor_weights')

    @classmethod
    def ones(cls, n_sensors: int) -> 'SensorWeights':
        return cls(np.ones(n_sensors))

    def __len__(self):
        return len(self.w)


@dataclass
class TrainConfig(_ConfigSection):
    """
    Full-batch Adam-style trainer settings.

    g_tol=None means 1e-4 * (1 + |L(theta_0)|), computed at the start of a run.
    Initial parameters are drawn with seed `seed + run seed`. With
    `require_certificate` scoring refuses parameters whose gradient norm
    exceeds g_tol; without it the violation is only logged.
    """
    step_size: float = 1e-3
    max_iters: int = 5000
    g_tol: Optional[float] = None
    g_tol_rel: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    amsgrad: bool = True
    seed: int = 0
    require_certificate: bool = True

    def __post_init__(self):
        _require(self.step_size > 0, "must be positive", 'train.step_size')
        _require(self.max_iters >= 0, "must be nonnegative", 'train.max_iters')
        _require(self.g_tol is None or self.g_tol > 0, "must be positive", 'train.g_tol')
        _require(self.g_tol_rel > 0, "must be positive", 'train.g_tol_rel')
        _require(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "betas must lie in [0, 1)",
                 'train.beta1')

    def resolve_g_tol(self, initial_loss: float) -> float:
        if self.g_tol is not None:
            return float(self.g_tol)
        return self.g_tol_rel * (1.0 + abs(initial_loss))


@dataclass
class TrainReport:
    """Outcome of one training run."""
    final_loss: float
    grad_norm: float
    iterations: int
    converged: bool
    g_tol: float
    loss_history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization"""
        return _to_native(asdict(self))

    @classmethod
    def from_dict(cls, data: Dict) -> 'TrainReport':
        return cls(**data)


# ---------------------------------------------------------------------------
# Sensitivity (Stage 1)
# ---------------------------------------------------------------------------

@dataclass
class HvpConfig(_ConfigSection):
    """Hessian-vector product settings."""
    fd_step_scale: float = 1e-4
    damping: float = 1e-4
    mode: str = 'finite_difference'

    def __post_init__(self):
        _require(self.fd_step_scale > 0, "must be positive", 'hvp.fd_step_scale')
        _require(self.damping >= 0, "must be nonnegative", 'hvp.damping')
        _require(self.mode in HVP_MODES, f"must be one of {HVP_MODES}", 'hvp.mode')


@dataclass
class CgConfig(_ConfigSection):
    """Conjugate gradient settings. abs_floor is the practical residual floor rho_min."""
    rel_tol: float = 1e-3
    max_iters: int = 500
    abs_floor: float = 1e-8

    def __post_init__(self):
        _require(0 < self.abs_floor < self.rel_tol < 1,
                 "need 0 < abs_floor < rel_tol < 1", 'cg.rel_tol')
        _require(self.max_iters >= 1, "must be >= 1", 'cg.max_iters')


@dataclass
class CgReport:
    """Diagnostics of one CG solve; r_rel is recomputed from scratch at exit."""
    iterations: int
    r_rel: float
    converged: bool
    solution: np.ndarray
    aborted: bool = False
    message: str = ''

    def to_dict(self) -> Dict:
        return {
            'iterations': int(self.iterations),
            'r_rel': float(self.r_rel),
            'converged': bool(self.converged),
            'aborted': bool(self.aborted),
            'message': self.message,
        }


@dataclass
class ImportanceScores:
    """Raw Stage-1 scores with everything Stage 2 needs."""
    S: np.ndarray
    cg_reports: List[CgReport]
    losses: np.ndarray
    grad_norms: np.ndarray
    damping: float = 0.0
    grad_error_norm: float = 0.0

    @property
    def r_rel(self) -> np.ndarray:
        return np.array([r.r_rel for r in self.cg_reports], dtype=float)

    def to_frame(self, sensor_ids: Optional[np.ndarray] = None) -> pd.DataFrame:
        """Render the scores.csv columns"""
        n = len(self.S)
        ids = np.arange(n) if sensor_ids is None else np.asarray(sensor_ids)
        return pd.DataFrame({
            'sensor_id': ids,
            'S_raw': self.S,
            'l_i': self.losses,
            'grad_norm': self.grad_norms,
            'cg_iters': [r.iterations for r in self.cg_reports],
            'cg_rrel': self.r_rel,
            'cg_converged': [r.converged for r in self.cg_reports],
        })


# ---------------------------------------------------------------------------
# Confidence (Stage 2) and imputation (Stage 3)
# ---------------------------------------------------------------------------

@dataclass
class ConfidenceParams(_ConfigSection):
    """
    Stage-2 parameters.

    rho_min / rho_tol default to None and are then inherited from CgConfig.
    """
    rho_min: Optional[float] = None
    rho_tol: Optional[float] = None
    c_min_solve: float = 0.2
    p_solve: float = 2.0
    eta: float = 1.0
    mad_floor: float = 1e-12
    loss_floor: float = 1e-30

    def __post_init__(self):
        _require(0 < self.c_min_solve < 1, "must lie in (0, 1)", 'confidence.c_min_solve')
        _require(self.p_solve >= 1, "must be >= 1", 'confidence.p_solve')
        _require(self.eta > 0, "must be positive", 'confidence.eta')
        _require(self.mad_floor > 0, "must be positive", 'confidence.mad_floor')
        _require(self.loss_floor > 0, "must be positive", 'confidence.loss_floor')
        if self.rho_min is not None and self.rho_tol is not None:
            _require(0 < self.rho_min < self.rho_tol, "need 0 < rho_min < rho_tol",
                     'confidence.rho_min')

    def with_cg(self, cg: CgConfig) -> 'ConfidenceParams':
        """Fill unset residual bounds from the CG settings."""
        data = self.to_dict()
        if data['rho_min'] is None:
            data['rho_min'] = cg.abs_floor
        if data['rho_tol'] is None:
            data['rho_tol'] = cg.rel_tol
        return ConfidenceParams(**data)


@dataclass
class ConfidenceScores:
    """Per-sensor confidence components; C = C_S * C_G."""
    C_S: np.ndarray
    C_G: np.ndarray
    C: np.ndarray
    s: np.ndarray
    z: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'C_S': self.C_S, 'C_G': self.C_G, 'C': self.C,
                             's': self.s, 'z': self.z})


@dataclass
class ImputationConfig(_ConfigSection):
    """Stage-3 settings."""
    tau: float = 0.5
    idw_epsilon: float = 1e-12
    delta: float = 1e-8
    max_iters: int = 10000

    def __post_init__(self):
        _require(0 <= self.tau <= 1, "must lie in [0, 1]", 'imputation.tau')
        _require(self.idw_epsilon > 0, "must be positive", 'imputation.idw_epsilon')
        _require(self.delta > 0, "must be positive", 'imputation.delta')
        _require(self.max_iters >= 1, "must be >= 1", 'imputation.max_iters')


@dataclass
class ImputedScores:
    """Stage-3 output. Trusted entries equal the raw scores bit for bit."""
    S_tilde: np.ndarray
    trusted_mask: np.ndarray
    iterations: int
    converged: bool
    isolated_nodes: List[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Selection and evaluation
# ---------------------------------------------------------------------------

@dataclass
class SelectionSpec(_ConfigSection):
    """One sensor-selection request."""
    strategy: str = 'fossa_topk'
    budget: int = 1
    seed: int = 0
    start: int = 0
    band: Optional[str] = None

    def __post_init__(self):
        _require(self.strategy in STRATEGIES, f"must be one of {STRATEGIES}",
                 'selection.strategy')
        _require(self.budget >= 1, "must be positive", 'selection.budget')
        if self.strategy == 'fossa_band':
            _require(self.band in BANDS, f"must be one of {BANDS}", 'selection.band')

    @property
    def label(self) -> str:
        if self.strategy == 'fossa_band':
            return f"fossa_band_{self.band}"
        return self.strategy


@dataclass
class ExperimentSpec(_ConfigSection):
    """
    Evaluation experiment settings.

    Budgets left as None are derived from the body node count:
    rank split uses `rank_split_fraction`, the sweep scales the 32..352 grid.
    Wall-clock seconds go into results.csv only with `record_wall_time`;
    otherwise the column stays empty and reruns are byte identical.
    """
    mode: str = 'rank_split'
    rank_split_budget: Optional[int] = None
    rank_split_fraction: float = 0.6
    budgets: Optional[List[int]] = None
    strategies: List[str] = field(default_factory=lambda: ['random', 'maximin', 'fossa_topk'])
    sigmas: List[float] = field(default_factory=lambda: [0.0, 0.005, 0.01, 0.05])
    maximin_start: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        _require(self.mode in EXPERIMENT_MODES, f"must be one of {EXPERIMENT_MODES}",
                 'experiment.mode')
        _require(0 < self.rank_split_fraction <= 1, "must lie in (0, 1]",
                 'experiment.rank_split_fraction')
        bad = [s for s in self.strategies if s not in ('random', 'maximin', 'fossa_topk')]
        _require(not bad, f"unsupported sweep strategies {bad}", 'experiment.strategies')
        _require(all(s >= 0 for s in self.sigmas), "must be nonnegative", 'experiment.sigmas')

    def resolve_rank_split_budget(self, n_body: int) -> int:
        if self.rank_split_budget is not None:
            return int(self.rank_split_budget)
        return max(1, int(round(self.rank_split_fraction * n_body)))

    def resolve_budgets(self, n_body: int) -> List[int]:
        if self.budgets is not None:
            return [int(b) for b in self.budgets]
        scaled = [max(1, int(round(b * n_body / REFERENCE_BODY_NODES)))
                  for b in REFERENCE_BUDGETS]
        return sorted(set(scaled))


@dataclass
class ExperimentResult:
    """
    Relative errors of one (strategy, budget, sigma) cell over seeds.

    Mean and standard deviation are always recomputed from `re_values`.
    """
    strategy: str
    budget: int
    sigma: float
    seeds: List[int]
    re_values: List[float]
    wall_seconds: List[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.re_values))

    @property
    def std(self) -> float:
        return float(np.std(self.re_values))

    def to_rows(self) -> List[Dict]:
        """One results.csv row per seed"""
        return [
            {'strategy': self.strategy, 'budget': int(self.budget), 'sigma': float(self.sigma),
             'seed': int(seed), 're': float(re), 'wall_seconds': float(wall)}
            for seed, re, wall in zip(self.seeds, self.re_values, self.wall_seconds)
        ]


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Complete configuration of a FOSSA run, loaded from one JSON document."""
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)
    ap_params: APParams = field(default_factory=APParams)
    noise_sigma: float = 0.01
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    sensor_weights: Optional[List[float]] = None
    hvp: HvpConfig = field(default_factory=HvpConfig)
    cg: CgConfig = field(default_factory=CgConfig)
    confidence: ConfidenceParams = field(default_factory=ConfidenceParams)
    imputation: ImputationConfig = field(default_factory=ImputationConfig)
    selections: List[SelectionSpec] = field(default_factory=list)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: str = 'fossa_out'

    _SECTIONS = {
        'benchmark': BenchmarkSpec,
        'ap_params': APParams,
        'model': ModelSpec,
        'train': TrainConfig,
        'loss_weights': LossWeights,
        'hvp': HvpConfig,
        'cg': CgConfig,
        'confidence': ConfidenceParams,
        'imputation': ImputationConfig,
        'experiment': ExperimentSpec,
    }

    def __post_init__(self):
        _require(self.noise_sigma >= 0, "must be nonnegative", 'noise_sigma')
        _require(len(self.seeds) >= 1, "need at least one seed", 'seeds')
        n = self.benchmark.n_sensors
        if self.sensor_weights is not None:
            _require(len(self.sensor_weights) == n,
                     f"expected {n} weights, got {len(self.sensor_weights)}", 'sensor_weights')
            SensorWeights(self.sensor_weights)
        for spec in self.selections:
            _require(spec.budget <= n, f"budget {spec.budget} exceeds {n} sensors",
                     'selections.budget')
        self.confidence = self.confidence.with_cg(self.cg)
        _require(self.confidence.rho_min < self.confidence.rho_tol,
                 "need rho_min < rho_tol", 'confidence.rho_min')

    def weights(self) -> SensorWeights:
        if self.sensor_weights is None:
            return SensorWeights.ones(self.benchmark.n_sensors)
        return SensorWeights(self.sensor_weights)

    def to_dict(self) -> Dict:
        """Fully materialised config (all defaults filled in)"""
        data = {name: getattr(self, name).to_dict() for name in self._SECTIONS}
        data['noise_sigma'] = float(self.noise_sigma)
        data['sensor_weights'] = _to_native(self.sensor_weights)
        data['selections'] = [s.to_dict() for s in self.selections]
        data['seeds'] = [int(s) for s in self.seeds]
        data['output_dir'] = self.output_dir
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'RunConfig':
        """Create a RunConfig from a parsed JSON document"""
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = set(cls._SECTIONS) | {'noise_sigma', 'sensor_weights', 'selections',
                                      'seeds', 'output_dir'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field='config')

        kwargs = {name: section.from_dict(data.get(name), name)
                  for name, section in cls._SECTIONS.items()}
        kwargs['selections'] = [SelectionSpec.from_dict(s, 'selections')
                                for s in data.get('selections', [])]
        for key in ('noise_sigma', 'sensor_weights', 'seeds', 'output_dir'):
            if key in data:
                kwargs[key] = data[key]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc), field='config') from exc

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the materialised config"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
