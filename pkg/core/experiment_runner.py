#!/usr/bin/env python3
"""
Experiment Runner Module

Evaluation experiments on the synthetic benchmark:

    rank split       retrain on the high / middle / low importance bands
    budget sweep     random vs maximin vs FOSSA top-k over sensing budgets
    reproducibility  rank agreement of importance maps across seeds

Every retraining starts from the full-sensor optimum with a fresh
optimizer state. Within a sweep all strategies share one dataset per
seed, so RE differences come from the selection alone.
"""

import itertools
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from core.benchmark import BenchmarkData, build_benchmark, build_problem
from core.data_models import (BANDS, ExperimentResult, FieldTimeSeries, RunConfig,
                              SensorWeights, TrainReport)
from core.errors import ConfigError, FossaError, StageError
from core.field_models import BaseFieldModel, ParamVector
from core.inverse_problem import InverseProblem, reconstruct
from core.trainer import train
from sensitivity import (SensitivityReport, confidence_scores, impute, importance_scores,
                         partition)
from strategies import select_by_rank, select_maximin, select_random

_LOGGER = logging.getLogger(__name__)


def relative_error(u_hat, u) -> float:
    """
    RE = ||u_hat - u||_2 / ||u||_2 over all nodes and frames.

    Args:
        u_hat: Reconstruction (FieldTimeSeries or array)
        u: Ground truth of the same shape

    Returns:
        Relative error (>= 0)
    """
    u_hat = u_hat.u if isinstance(u_hat, FieldTimeSeries) else np.asarray(u_hat, dtype=float)
    u = u.u if isinstance(u, FieldTimeSeries) else np.asarray(u, dtype=float)
    if u_hat.shape != u.shape:
        raise ConfigError(f"reconstruction {u_hat.shape} and ground truth {u.shape} differ",
                          field='u_hat')
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise ConfigError("ground truth is identically zero; RE undefined", field='u')
    return float(np.linalg.norm(u_hat - u) / norm)


@dataclass
class ScoredModel:
    """Full-sensor fit of one dataset with its three scoring stages."""
    data: BenchmarkData
    model: BaseFieldModel
    problem: InverseProblem
    weights: SensorWeights
    theta: ParamVector
    train_report: TrainReport
    report: SensitivityReport


def score_trained(model, theta, problem: InverseProblem, weights: SensorWeights,
                  train_report: TrainReport, body_graph, config: RunConfig,
                  threads: int = 1) -> SensitivityReport:
    """Stages 1-3 for trained parameters."""
    g_tol = train_report.g_tol if config.train.require_certificate else None
    if g_tol is None and not train_report.converged:
        _LOGGER.warning("scoring without optimality certificate (|g|=%.3e > g_tol=%.3e)",
                        train_report.grad_norm, train_report.g_tol)
    scores = importance_scores(model, theta, problem, weights, config.loss_weights,
                               config.hvp, config.cg, g_tol=g_tol, threads=threads)
    confidence = confidence_scores(scores, config.confidence)
    trusted, unreliable = partition(confidence.C, config.imputation.tau)
    imputed = impute(body_graph, scores.S, trusted, unreliable, config.imputation)
    metadata = {
        'damping': scores.damping,
        'grad_error_norm': scores.grad_error_norm,
        'hvp': config.hvp.to_dict(),
        'cg': config.cg.to_dict(),
        'confidence': config.confidence.to_dict(),
        'imputation': config.imputation.to_dict(),
        'imputation_iterations': imputed.iterations,
        'imputation_converged': imputed.converged,
        'isolated_nodes': imputed.isolated_nodes,
    }
    return SensitivityReport(scores=scores, sensor_ids=problem.sensor_ids,
                             confidence=confidence, imputed=imputed, metadata=metadata)


class ExperimentRunner:
    """
    Runs evaluation experiments for one RunConfig.

    Seeds whose pipeline fails are skipped; the failures are kept in
    `failures` as (experiment, seed, message) records.
    """

    def __init__(self, config: RunConfig, threads: int = 1):
        if config.benchmark.kind != 'aliev_panfilov':
            raise ConfigError("evaluation experiments need the aliev_panfilov benchmark "
                              "(ground-truth fields)", field='benchmark.kind')
        self.config = config
        self.threads = threads
        self.failures: List[Dict] = []

    # Building blocks -------------------------------------------------------

    def fit(self, sigma: float, seed: int, data_seed: Optional[int] = None) -> ScoredModel:
        """Generate data, train on all sensors and score."""
        cfg = self.config
        data = build_benchmark(cfg.benchmark, cfg.ap_params, sigma,
                               seed if data_seed is None else data_seed,
                               collocation_seed=seed)
        model, problem, weights = build_problem(data, cfg)
        theta0 = model.init_params(cfg.train.seed + seed)
        try:
            theta, train_report = train(model, theta0, problem, weights, cfg.loss_weights,
                                        cfg.train)
        except FossaError as exc:
            raise StageError('train', exc, seed=seed) from exc
        try:
            report = score_trained(model, theta, problem, weights, train_report,
                                   data.body_graph, cfg, self.threads)
        except FossaError as exc:
            raise StageError('score', exc, seed=seed) from exc
        return ScoredModel(data=data, model=model, problem=problem, weights=weights,
                           theta=theta, train_report=train_report, report=report)

    def retrain_error(self, fitted: ScoredModel, sensors: Sequence[int]) -> Tuple[float, float]:
        """
        Retrain on a sensor subset from theta* and measure RE.

        Returns:
            Tuple (RE against the ground-truth heart potential, wall seconds)
        """
        start = time.perf_counter()
        sub = fitted.problem.restrict(sensors)
        theta, _ = train(fitted.model, fitted.theta, sub, SensorWeights.ones(sub.n_sensors),
                         self.config.loss_weights, self.config.train)
        u_hat = reconstruct(fitted.model, theta, fitted.problem)
        re = relative_error(u_hat, fitted.data.fields.u)
        return re, time.perf_counter() - start

    def _wall(self, seconds: float) -> float:
        return seconds if self.config.experiment.record_wall_time else float('nan')

    def _per_seed(self, name: str, seeds: Sequence[int], body: Callable[[int], None]):
        for seed in seeds:
            try:
                body(seed)
            except FossaError as exc:
                _LOGGER.error("%s: seed %d aborted: %s", name, seed, exc)
                self.failures.append({'experiment': name, 'seed': int(seed),
                                      'message': str(exc)})

    # Experiments -----------------------------------------------------------

    def run_rank_split(self, sigma: float, budget: int,
                       seeds: Sequence[int]) -> List[ExperimentResult]:
        """
        High / middle / low importance bands of equal size.

        Returns:
            One ExperimentResult per band, in BANDS order
        """
        cells = {band: ExperimentResult(f"fossa_band_{band}", budget, sigma, [], [], [])
                 for band in BANDS}

        def one_seed(seed):
            fitted = self.fit(sigma, seed)
            ranking = fitted.report.ranking_scores()
            measured = {}
            for band in BANDS:
                sensors = select_by_rank(ranking, budget, band)
                try:
                    measured[band] = self.retrain_error(fitted, sensors)
                except FossaError as exc:
                    raise StageError('evaluate', exc, seed=seed) from exc
                _LOGGER.info("rank split sigma=%g seed=%d %s: RE=%.4f",
                             sigma, seed, band, measured[band][0])
            for band, (re, wall) in measured.items():
                cells[band].seeds.append(int(seed))
                cells[band].re_values.append(re)
                cells[band].wall_seconds.append(self._wall(wall))

        self._per_seed('rank_split', seeds, one_seed)
        return [cells[band] for band in BANDS]

    def _select(self, strategy: str, fitted: ScoredModel, budget: int, seed: int) -> np.ndarray:
        if strategy == 'random':
            return select_random(fitted.problem.n_sensors, budget, seed)
        if strategy == 'maximin':
            return select_maximin(fitted.data.body_graph, budget,
                                  self.config.experiment.maximin_start)
        return select_by_rank(fitted.report.ranking_scores(), budget, 'high')

    def run_budget_sweep(self, sigma: float, budgets: Sequence[int], strategies: Sequence[str],
                         seeds: Sequence[int]) -> List[ExperimentResult]:
        """
        Full (strategy x budget x seed) grid with one shared dataset per seed.

        Returns:
            One ExperimentResult per (strategy, budget)
        """
        cells = {(s, b): ExperimentResult(s, int(b), sigma, [], [], [])
                 for s, b in itertools.product(strategies, budgets)}

        def one_seed(seed):
            fitted = self.fit(sigma, seed)
            measured = {}
            for strategy, budget in itertools.product(strategies, budgets):
                try:
                    sensors = self._select(strategy, fitted, int(budget), seed)
                    measured[(strategy, budget)] = self.retrain_error(fitted, sensors)
                except FossaError as exc:
                    raise StageError('evaluate', exc, seed=seed) from exc
                _LOGGER.info("sweep sigma=%g seed=%d %s k=%d: RE=%.4f", sigma, seed,
                             strategy, budget, measured[(strategy, budget)][0])
            for key, (re, wall) in measured.items():
                cells[key].seeds.append(int(seed))
                cells[key].re_values.append(re)
                cells[key].wall_seconds.append(self._wall(wall))

        self._per_seed('sweep', seeds, one_seed)
        return [cells[key] for key in itertools.product(strategies, budgets)]

    def run_reproducibility(self, sigmas: Sequence[float], seeds: Sequence[int]) -> pd.DataFrame:
        """
        Rank agreement of imputed importance maps across training seeds.

        The measurement noise is fixed per sigma (first seed); each seed
        changes the initialisation and the collocation sample.

        Returns:
            DataFrame with columns sigma, n_seeds, mean_spearman, min_spearman
        """
        if len(seeds) < 2:
            raise ConfigError("reproducibility needs at least two seeds", field='seeds')
        rows = []
        for sigma in sigmas:
            maps: Dict[int, np.ndarray] = {}

            def one_seed(seed, sigma=sigma, maps=maps):
                fitted = self.fit(sigma, seed, data_seed=seeds[0])
                maps[int(seed)] = fitted.report.ranking_scores()

            self._per_seed('reproducibility', seeds, one_seed)
            rho = [spearmanr(maps[a], maps[b]).correlation
                   for a, b in itertools.combinations(sorted(maps), 2)]
            rows.append({
                'sigma': float(sigma),
                'n_seeds': len(maps),
                'mean_spearman': float(np.mean(rho)) if rho else float('nan'),
                'min_spearman': float(np.min(rho)) if rho else float('nan'),
            })
            _LOGGER.info("reproducibility sigma=%g: %s", sigma, rows[-1])
        return pd.DataFrame(rows)


def results_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """results.csv rows: strategy, budget, sigma, seed, re, wall_seconds"""
    rows = [row for result in results for row in result.to_rows()]
    return pd.DataFrame(rows, columns=['strategy', 'budget', 'sigma', 'seed', 're',
                                       'wall_seconds'])


def summarize(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """Mean and standard deviation of RE per (strategy, budget, sigma)."""
    frame = results_frame(results)
    if frame.empty:
        return pd.DataFrame(columns=['strategy', 'budget', 'sigma', 'n', 're_mean', 're_std'])
    grouped = frame.groupby(['strategy', 'budget', 'sigma'], sort=False)['re']
    summary = grouped.agg(n='count', re_mean='mean',
                          re_std=lambda x: float(np.std(x.to_numpy()))).reset_index()
    return summary


def run_rank_split(config: RunConfig, sigma: float, budget: int, seeds: Sequence[int],
                   threads: int = 1) -> List[ExperimentResult]:
    return ExperimentRunner(config, threads).run_rank_split(sigma, budget, seeds)


def run_budget_sweep(config: RunConfig, sigma: float, budgets: Sequence[int],
                     strategies: Sequence[str], seeds: Sequence[int],
                     threads: int = 1) -> List[ExperimentResult]:
    return ExperimentRunner(config, threads).run_budget_sweep(sigma, budgets, strategies, seeds)


def run_reproducibility(config: RunConfig, sigmas: Sequence[float], seeds: Sequence[int],
                        threads: int = 1) -> pd.DataFrame:
    return ExperimentRunner(config, threads).run_reproducibility(sigmas, seeds)
