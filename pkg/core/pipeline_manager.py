"""
Pipeline Manager

Coordinates the stages of one FOSSA run inside an output directory:

    generate    dataset/                  meshes, R, fields, measurements, manifest
    train       checkpoint.json/.csv      trained parameters theta*
    score       scores.csv, scores.json   raw importance per sensor
    confidence  scores.csv                + C_S, C_G, C, s, z
    impute      scores.csv                + S_tilde, trusted
    select      selection.csv             one row per selected sensor
    evaluate    results.csv               RE per (strategy, budget, sigma, seed)

Every stage reads its inputs from the files of the previous stages, so a
run can be resumed from any of them. Files only count as done when their
provenance (config hash and seed) matches the current run.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from core.benchmark import BenchmarkData, build_benchmark, build_problem
from core.data_models import RunConfig, SelectionSpec
from core.dataset_io import (MANIFEST, provenance, read_checkpoint, read_dataset, read_provenance,
                             read_table, verify_manifest, write_checkpoint, write_dataset,
                             write_json, write_table)
from core.errors import ConfigError, FossaError, StageError
from core.experiment_runner import (ExperimentRunner, results_frame, summarize)
from core.trainer import train
from sensitivity import (SensitivityReport, adjoint_scores, confidence_scores, impute,
                         importance_scores, max_relative_disagreement, partition)
from strategies import SelectionManager

_LOGGER = logging.getLogger(__name__)

STAGES = ('generate', 'train', 'score', 'confidence', 'impute', 'select', 'evaluate')

DATASET_DIR = 'dataset'
CHECKPOINT = 'checkpoint'
SCORES = 'scores.csv'
SCORES_SIDECAR = 'scores.json'
SELECTION = 'selection.csv'
RESULTS = 'results.csv'
SUMMARY = 'summary.csv'
REPRODUCIBILITY = 'reproducibility.csv'


class PipelineManager:
    """
    Runs FOSSA stages for one config and seed.

    Stage outputs are only recomputed when missing, written by another
    config or seed, or when `resume` is off, and every stage failure is wrapped in a StageError naming the
    stage and seed.
    """

    def __init__(self, config: RunConfig, out_dir: Optional[Path] = None,
                 seed: Optional[int] = None, threads: int = 1):
        """
        Initialize the pipeline.

        Args:
            config: Run configuration
            out_dir: Output directory (default: config.output_dir)
            seed: Run seed (default: first config seed)
            threads: Worker count for the per-sensor solves
        """
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.seed = int(config.seeds[0] if seed is None else seed)
        self.threads = max(1, int(threads))
        self.prov = provenance(config.config_hash(), self.seed)

    # Paths -----------------------------------------------------------------

    @property
    def dataset_dir(self) -> Path:
        return self.out_dir / DATASET_DIR

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / f"{CHECKPOINT}.json"

    @property
    def scores_path(self) -> Path:
        return self.out_dir / SCORES

    @property
    def selection_path(self) -> Path:
        return self.out_dir / SELECTION

    @property
    def results_path(self) -> Path:
        return self.out_dir / RESULTS

    @property
    def sidecar_path(self) -> Path:
        return self.out_dir / SCORES_SIDECAR

    def stage_outputs(self) -> Dict[str, Path]:
        return {
            'generate': self.dataset_dir / MANIFEST,
            'train': self.checkpoint_path,
            'score': self.scores_path,
            'confidence': self.scores_path,
            'impute': self.scores_path,
            'select': self.selection_path,
            'evaluate': self.results_path,
        }

    def _stale_reason(self, path: Path) -> Optional[str]:
        """Why `path` does not belong to this run, or None when it does"""
        stored = read_provenance(path)
        if (stored.get('config_hash') == self.prov['config_hash']
                and stored.get('seed') == self.prov['seed']):
            return None
        return (f"{path} was written for config {stored.get('config_hash') or '?'} "
                f"seed {stored.get('seed') or '?'}, this run is config "
                f"{self.prov['config_hash']} seed {self.prov['seed']}")

    def _is_current(self, path: Path) -> bool:
        if not path.exists():
            return False
        reason = self._stale_reason(path)
        if reason:
            _LOGGER.warning("%s; recomputing", reason)
        return reason is None

    def _require_current(self, path: Path):
        if not path.exists():
            raise FileNotFoundError(f"Input file not found: {path}")
        reason = self._stale_reason(path)
        if reason:
            raise ConfigError(f"{reason}; rerun the stage that writes it", field='output_dir')

    def completed_stages(self) -> List[str]:
        """
        Stages whose output on disk belongs to this config and seed.

        generate through impute form a chain: a stage only counts when every
        stage before it does.
        """
        outputs = self.stage_outputs()
        done = []
        for stage in ('generate', 'train'):
            if not self._is_current(outputs[stage]):
                break
            done.append(stage)
        if (len(done) == 2 and self._is_current(self.scores_path)
                and self._is_current(self.sidecar_path)):
            stage = self.load_report().stage
            done += list(STAGES[STAGES.index('score'):STAGES.index(stage) + 1])
        done += [s for s in ('select', 'evaluate') if self._is_current(outputs[s])]
        return done

    def plan(self, stages=STAGES, resume: bool = True) -> List[Dict]:
        """
        Stage plan without running anything.

        Returns:
            One dict per stage: stage, output, action ('run' or 'reuse')
        """
        done = set(self.completed_stages()) if resume else set()
        outputs = self.stage_outputs()
        return [{'stage': s, 'output': str(outputs[s]),
                 'action': 'reuse' if s in done else 'run'}
                for s in stages]

    # Loading ---------------------------------------------------------------

    def load_data(self) -> BenchmarkData:
        """Dataset of this run; edited files or another run's dataset are refused"""
        self._require_current(self.dataset_dir / MANIFEST)
        changed = verify_manifest(self.dataset_dir)
        if changed:
            raise ConfigError(f"files changed since the dataset was written: "
                              f"{', '.join(changed)}; rerun generate", field='dataset')
        return read_dataset(self.dataset_dir)

    def load_report(self) -> SensitivityReport:
        self._require_current(self.scores_path)
        metadata = {}
        if self.sidecar_path.exists():
            self._require_current(self.sidecar_path)
            with open(self.sidecar_path) as f:
                metadata = json.load(f).get('metadata', {})
        return SensitivityReport.from_frame(read_table(self.scores_path), metadata)

    def _save_report(self, report: SensitivityReport):
        write_table(report.to_frame(), self.scores_path, self.prov)
        write_json({'provenance': self.prov, 'stage': report.stage,
                    'metadata': report.metadata}, self.sidecar_path)

    def _problem(self, data: BenchmarkData):
        return build_problem(data, self.config)

    # Stages ----------------------------------------------------------------

    def generate(self) -> BenchmarkData:
        """Build the benchmark for this seed and write the dataset directory"""
        cfg = self.config
        data = build_benchmark(cfg.benchmark, cfg.ap_params, cfg.noise_sigma, self.seed)
        write_dataset(data, self.dataset_dir, cfg)
        return data

    def train(self, data: BenchmarkData):
        """Train on every sensor and write the checkpoint"""
        cfg = self.config
        model, problem, weights = self._problem(data)
        theta0 = model.init_params(cfg.train.seed + self.seed)
        theta, report = train(model, theta0, problem, weights, cfg.loss_weights, cfg.train)
        write_checkpoint(model, theta, report, self.out_dir / CHECKPOINT, self.prov)
        return model, theta, report

    def score(self, data: BenchmarkData, adjoint_check: bool = False) -> SensitivityReport:
        """Stage 1: raw importance of every sensor from the checkpoint"""
        cfg = self.config
        self._require_current(self.checkpoint_path)
        model, theta, train_report = read_checkpoint(self.checkpoint_path)
        _, problem, weights = self._problem(data)
        g_tol = train_report.g_tol if cfg.train.require_certificate else None
        if g_tol is None and not train_report.converged:
            _LOGGER.warning("scoring without optimality certificate (|g|=%.3e > g_tol=%.3e)",
                            train_report.grad_norm, train_report.g_tol)
        scores = importance_scores(model, theta, problem, weights, cfg.loss_weights,
                                   cfg.hvp, cfg.cg, g_tol=g_tol, threads=self.threads)
        metadata = {'damping': scores.damping, 'grad_error_norm': scores.grad_error_norm,
                    'hvp': cfg.hvp.to_dict(), 'cg': cfg.cg.to_dict()}
        if adjoint_check:
            check, solve = adjoint_scores(model, theta, problem, weights, cfg.loss_weights,
                                          cfg.hvp, cfg.cg)
            disagreement = max_relative_disagreement(scores.S, check)
            _LOGGER.info("adjoint cross-check: max relative disagreement %.3e "
                         "(%d CG iterations)", disagreement, solve.iterations)
            metadata['adjoint_disagreement'] = disagreement
        report = SensitivityReport(scores=scores, sensor_ids=problem.sensor_ids,
                                   metadata=metadata)
        self._save_report(report)
        return report

    def confidence(self, report: SensitivityReport) -> SensitivityReport:
        """Stage 2: solve and mismatch confidence"""
        report.confidence = confidence_scores(report.scores, self.config.confidence)
        report.imputed = None
        report.metadata['confidence'] = self.config.confidence.to_dict()
        self._save_report(report)
        return report

    def impute(self, report: SensitivityReport, data: BenchmarkData,
               tau: Optional[float] = None) -> SensitivityReport:
        """Stage 3: replace unreliable scores from trusted mesh neighbours"""
        cfg = self.config.imputation
        if tau is not None:
            cfg = type(cfg).from_dict({**cfg.to_dict(), 'tau': tau}, 'imputation')
        if report.confidence is None:
            raise ConfigError("impute needs confidence columns; run the confidence stage",
                              field='scores')
        trusted, unreliable = partition(report.confidence.C, cfg.tau)
        imputed = impute(data.body_graph, report.scores.S, trusted, unreliable, cfg)
        report.imputed = imputed
        report.metadata.update({
            'imputation': cfg.to_dict(),
            'imputation_iterations': imputed.iterations,
            'imputation_converged': imputed.converged,
            'isolated_nodes': imputed.isolated_nodes,
        })
        self._save_report(report)
        return report

    def select(self, report: Optional[SensitivityReport], data: BenchmarkData) -> pd.DataFrame:
        """Resolve every configured selection; one row per chosen sensor"""
        specs = self.config.selections or [SelectionSpec(
            strategy='fossa_topk',
            budget=self.config.experiment.resolve_rank_split_budget(data.n_sensors),
            seed=self.seed)]
        scores = None if report is None else report.ranking_scores()
        manager = SelectionManager(data.body_graph, scores)
        rows = []
        for spec in specs:
            for sensor in manager.select(spec):
                rows.append({'selection': spec.label, 'strategy': spec.strategy,
                             'budget': spec.budget, 'seed': spec.seed,
                             'sensor_id': int(sensor)})
        frame = pd.DataFrame(rows, columns=['selection', 'strategy', 'budget', 'seed',
                                            'sensor_id'])
        write_table(frame, self.selection_path, self.prov)
        return frame

    def evaluate(self, mode: Optional[str] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """
        Evaluation experiment over all config seeds.

        The rank split runs once per `experiment.sigmas` entry; the budget
        sweep runs at `noise_sigma`.

        Returns:
            Tuple (per-seed table, aggregated table)
        """
        cfg = self.config
        mode = mode or cfg.experiment.mode
        runner = ExperimentRunner(cfg, self.threads)
        n_body = cfg.benchmark.n_sensors
        if mode == 'reproducibility':
            table = runner.run_reproducibility(cfg.experiment.sigmas, cfg.seeds)
            write_table(table, self.out_dir / REPRODUCIBILITY, self.prov)
            return table, table
        if mode == 'rank_split':
            budget = cfg.experiment.resolve_rank_split_budget(n_body)
            results = [cell for sigma in cfg.experiment.sigmas
                       for cell in runner.run_rank_split(sigma, budget, cfg.seeds)]
        elif mode == 'sweep':
            results = runner.run_budget_sweep(
                cfg.noise_sigma, cfg.experiment.resolve_budgets(n_body),
                cfg.experiment.strategies, cfg.seeds)
        else:
            raise ConfigError(f"unknown evaluation mode '{mode}'", field='experiment.mode')
        frame = results_frame(results)
        summary = summarize(results)
        write_table(frame, self.results_path, self.prov)
        write_table(summary, self.out_dir / SUMMARY, self.prov)
        if runner.failures:
            _LOGGER.warning("%d seed(s) failed: %s", len(runner.failures),
                            ', '.join(str(f['seed']) for f in runner.failures))
        return frame, summary

    # Orchestration ---------------------------------------------------------

    def run_stage(self, name: str, fn, *args, **kwargs):
        _LOGGER.info("stage %s (seed %d)", name, self.seed)
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except FossaError as exc:
            raise StageError(name, exc, seed=self.seed) from exc

    def run(self, resume: bool = True, adjoint_check: bool = False) -> Dict:
        """
        Run generate -> ... -> evaluate, reusing outputs already on disk.

        The evaluate stage is skipped for the quadratic oracle, which has
        no ground-truth field.

        Returns:
            Dictionary with the report, selection and evaluation tables
        """
        done = set(self.completed_stages()) if resume else set()
        for stage in STAGES:
            if stage in done:
                _LOGGER.info("stage %s: reusing %s", stage, self.stage_outputs()[stage])

        if 'generate' in done:
            data = self.run_stage('generate', self.load_data)
        else:
            data = self.run_stage('generate', self.generate)
        if 'train' not in done:
            self.run_stage('train', self.train, data)

        if 'score' in done:
            report = self.load_report()
        else:
            report = self.run_stage('score', self.score, data, adjoint_check)
        if 'confidence' not in done:
            report = self.run_stage('confidence', self.confidence, report)
        if 'impute' not in done:
            report = self.run_stage('impute', self.impute, report, data)

        selection = self.run_stage('select', self.select, report, data)

        outcome = {'report': report, 'selection': selection, 'results': None,
                   'summary': None}
        if data.kind == 'quadratic_oracle':
            _LOGGER.info("stage evaluate skipped: oracle benchmark has no ground truth")
        elif 'evaluate' in done:
            outcome['results'] = read_table(self.results_path)
        else:
            outcome['results'], outcome['summary'] = self.run_stage('evaluate', self.evaluate)
        return outcome
