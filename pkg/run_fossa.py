#!/usr/bin/env python3
"""
FOSSA - Main Script

Command-line entry point: generates the synthetic inverse-ECG benchmark,
trains the physics-informed model, scores sensor importance, refines the
scores, selects sensor sets and evaluates them.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from core.data_models import RunConfig
from core.dataset_io import load_config
from core.errors import EXIT_CONFIG_ERROR, EXIT_OK, ConfigError, FossaError
from core.pipeline_manager import STAGES, PipelineManager

_LOGGER = logging.getLogger('fossa')

# Stages each subcommand runs
COMMAND_STAGES = {
    'generate': ['generate'],
    'train': ['train'],
    'score': ['score'],
    'impute': ['confidence', 'impute'],
    'select': ['select'],
    'evaluate': ['evaluate'],
    'pipeline': list(STAGES),
}

EVALUATE_MODES = {'rank-split': 'rank_split', 'sweep': 'sweep',
                  'reproducibility': 'reproducibility'}


def resolve_threads(value: Optional[int]) -> int:
    """--threads, else FOSSA_THREADS, else 1"""
    if value is None:
        env = os.environ.get('FOSSA_THREADS')
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"'{env}' is not an integer", field='FOSSA_THREADS') from exc
    if value < 1:
        raise ConfigError("must be >= 1", field='threads')
    return value


def build_config(args) -> RunConfig:
    return load_config(Path(args.config)) if args.config else RunConfig()


def _print_plan(command: str, plan: List[Dict]):
    print(f"\n{'='*60}")
    print(f"Dry run: {command}")
    print(f"{'='*60}")
    for entry in plan:
        print(f"  {entry['stage']:<11} {entry['action']:<6} {entry['output']}")
    print(f"{'='*60}\n")


def _print_summary(command: str, pipeline: PipelineManager, outcome: Dict):
    """
    Print summary of a finished command.

    Args:
        command: Subcommand name
        pipeline: Pipeline that ran it
        outcome: Objects produced by the command
    """
    print(f"\n{'='*60}")
    print(f"✓ {command} complete (seed {pipeline.seed})")
    print(f"{'='*60}")
    print(f"Output directory: {pipeline.out_dir}")
    print(f"Config hash: {pipeline.prov['config_hash'][:16]}")

    report = outcome.get('report')
    if report is not None:
        S = report.ranking_scores()
        print(f"Sensors scored: {report.n_sensors} (stage: {report.stage})")
        print(f"Top sensors: {', '.join(str(i) for i in report.sensor_ids[S.argsort()[::-1][:5]])}")
        if report.n_sensors <= 4:
            for sid, value in zip(report.sensor_ids, report.scores.S):
                print(f"  S[{sid}] = {value:.10g}")
        if report.confidence is not None:
            print(f"Mean confidence: {report.confidence.C.mean():.4f}")
        if report.imputed is not None:
            print(f"Trusted sensors: {int(report.imputed.trusted_mask.sum())}/{report.n_sensors}")
        if 'adjoint_disagreement' in report.metadata:
            print(f"Adjoint cross-check disagreement: "
                  f"{report.metadata['adjoint_disagreement']:.3e}")

    if outcome.get('train_report') is not None:
        tr = outcome['train_report']
        print(f"Training: {tr.iterations} iterations, loss {tr.final_loss:.6g}, "
              f"|g| {tr.grad_norm:.3e} ({'certified' if tr.converged else 'not certified'})")

    if outcome.get('selection') is not None:
        sel = outcome['selection']
        print(f"Selections: {sel['selection'].nunique()} ({len(sel)} sensor rows)")

    summary = outcome.get('summary')
    if summary is not None and len(summary):
        print("Results:")
        print(summary.to_string(index=False))
    print(f"{'='*60}\n")


def run_command(args) -> int:
    """Execute one subcommand; returns the process exit code"""
    config = build_config(args)
    threads = resolve_threads(args.threads)
    pipeline = PipelineManager(config, out_dir=args.out, seed=args.seed, threads=threads)
    command = args.command

    if args.dry_run:
        resume = command == 'pipeline' and not args.no_resume
        _print_plan(command, pipeline.plan(COMMAND_STAGES[command], resume=resume))
        return EXIT_OK

    outcome: Dict = {}
    if command == 'pipeline':
        outcome = pipeline.run(resume=not args.no_resume, adjoint_check=args.adjoint_check)
    elif command == 'generate':
        pipeline.run_stage('generate', pipeline.generate)
    elif command == 'train':
        data = pipeline.run_stage('generate', pipeline.load_data)
        _, _, outcome['train_report'] = pipeline.run_stage('train', pipeline.train, data)
    elif command == 'score':
        data = pipeline.run_stage('generate', pipeline.load_data)
        outcome['report'] = pipeline.run_stage('score', pipeline.score, data, args.adjoint_check)
    elif command == 'impute':
        data = pipeline.run_stage('generate', pipeline.load_data)
        report = pipeline.load_report()
        if report.confidence is None:
            report = pipeline.run_stage('confidence', pipeline.confidence, report)
        outcome['report'] = pipeline.run_stage('impute', pipeline.impute, report, data, args.tau)
    elif command == 'select':
        data = pipeline.run_stage('generate', pipeline.load_data)
        report = pipeline.load_report() if pipeline.scores_path.exists() else None
        outcome['selection'] = pipeline.run_stage('select', pipeline.select, report, data)
    elif command == 'evaluate':
        _, outcome['summary'] = pipeline.run_stage('evaluate', pipeline.evaluate,
                                                EVALUATE_MODES[args.mode])

    _print_summary(command, pipeline, outcome)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Post-training sensor importance scoring on a synthetic inverse-ECG benchmark",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Full run with defaults into fossa_out/
  %(prog)s pipeline

  # Step by step with a config file
  %(prog)s --config run.json --out run1 generate
  %(prog)s --config run.json --out run1 train
  %(prog)s --config run.json --out run1 score --adjoint-check
  %(prog)s --config run.json --out run1 impute --tau 0.5
  %(prog)s --config run.json --out run1 select

  # Budget sweep over all config seeds, four threads
  %(prog)s --config run.json --threads 4 evaluate --mode sweep

  # Show what a pipeline run would do
  %(prog)s --config run.json --dry-run pipeline

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
        """
    )
    parser.add_argument("--config", help="JSON run configuration (default: built-in defaults)")
    parser.add_argument("--out", help="Output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, default=None,
                        help="Run seed (default: first entry of seeds)")
    parser.add_argument("--threads", type=int, default=None,
                        help="Workers for per-sensor solves (default: $FOSSA_THREADS or 1)")
    parser.add_argument("--dry-run", action="store_true",
                        help="Validate the config and print the stage plan")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="Write the benchmark dataset")
    sub.add_parser("train", help="Train on all sensors and write the checkpoint")
    score = sub.add_parser("score", help="Raw importance score per sensor")
    score.add_argument("--adjoint-check", action="store_true",
                       help="Cross-check with a single adjoint solve")
    impute = sub.add_parser("impute", help="Confidence and imputation of the scores")
    impute.add_argument("--tau", type=float, default=None,
                        help="Confidence threshold (default: imputation.tau)")
    sub.add_parser("select", help="Resolve the configured sensor selections")
    evaluate = sub.add_parser("evaluate", help="Run an evaluation experiment")
    evaluate.add_argument("--mode", choices=sorted(EVALUATE_MODES), default="rank-split")
    pipeline = sub.add_parser("pipeline", help="Run every stage, resuming from files")
    pipeline.add_argument("--no-resume", action="store_true",
                          help="Recompute stages even when outputs exist")
    pipeline.add_argument("--adjoint-check", action="store_true",
                          help="Cross-check scores with a single adjoint solve")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for FOSSA"""
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ('adjoint_check', 'no_resume'):
        if not hasattr(args, name):
            setattr(args, name, False)
    if not hasattr(args, 'tau'):
        args.tau = None

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return run_command(args)
    except FossaError as exc:
        _LOGGER.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        _LOGGER.error("%s", exc)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
