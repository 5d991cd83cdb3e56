#!/usr/bin/env python3
"""
Command-line entry point.

    python cli/main.py <decompose|mbss|linked|features|pls|synth> [--config FILE] [flags]

Flags override config-file values, which override defaults. Exit codes: 0 on
success, 2 for usage and validation errors, 1 for runtime or numerical failures.
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import ValidationError

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from cli.commands import cmd_decompose, cmd_features, cmd_linked, cmd_mbss, cmd_pls, cmd_synth
from core.types import TensorError
from data_model.run_config_models import (
    DecomposeConfig,
    FeaturesConfig,
    LinkedConfig,
    MbssConfig,
    PlsConfig,
    SynthConfig,
)
from utils.report_writer import display_results_summary
from utils.run_configuration import ConfigFileError, build_run_config

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "MBSS_LOG_LEVEL"
USAGE_ERRORS = {"invalid-mode", "shape", "invalid-rank", "invalid-argument", "invalid-input", "unsupported"}

COMMANDS: Dict[str, Tuple[type, Callable]] = {
    "decompose": (DecomposeConfig, cmd_decompose),
    "mbss": (MbssConfig, cmd_mbss),
    "linked": (LinkedConfig, cmd_linked),
    "features": (FeaturesConfig, cmd_features),
    "pls": (PlsConfig, cmd_pls),
    "synth": (SynthConfig, cmd_synth),
}


def int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'")


def float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{value}'")


def str_list(value: str) -> List[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _add_common(parser: argparse.ArgumentParser, iterative: bool = True) -> None:
    parser.add_argument('--config', type=str, help='YAML or JSON run configuration')
    parser.add_argument('--output', type=str, help='Output directory')
    parser.add_argument('--seed', type=int, help='Seed of every random generator')
    if iterative:
        parser.add_argument('--max-iters', dest='max_iters', type=int, help='Iteration cap')
        parser.add_argument('--tol', type=float, help='Relative objective change that stops iteration')


def _add_constraints(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--ranks', type=int_list, help='Per-mode ranks, e.g. 2,2,2')
    parser.add_argument('--constraints', type=str_list,
                        help='Per-mode constraint kinds (one entry applies to every mode)')
    parser.add_argument('--penalty-weights', dest='penalty_weights', type=float_list,
                        help='Per-mode penalty weights')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Constrained tensor decompositions and multiway BSS.")
    parser.add_argument('--log-level', dest='log_level', type=str,
                        help=f'Logging level (default: ${LOG_LEVEL_ENV} or INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('decompose', help='Tucker, CP, penalized Tucker or block-oriented decomposition')
    _add_common(p)
    p.add_argument('--input', type=str, help='TNSR input tensor')
    p.add_argument('--algo', choices=['hosvd', 'hooi', 'cp', 'penalized', 'bod'])
    p.add_argument('--ranks', type=int_list, help='Per-mode ranks, e.g. 2,2,2')
    p.add_argument('--r', type=int, help='CP rank')
    p.add_argument('--n-restarts', dest='n_restarts', type=int, help='CP random restarts')
    p.add_argument('--constraints', type=str_list, help='Penalized Tucker constraint kinds')
    p.add_argument('--alphas', type=float_list, help='Penalized Tucker penalty weights')

    p = sub.add_parser('mbss', help='Multiway blind source separation')
    _add_common(p)
    _add_constraints(p)
    p.add_argument('--input', type=str, help='TNSR input tensor')
    p.add_argument('--pipeline', choices=['unfold', 'refine'])
    p.add_argument('--reduction-factor', dest='reduction_factor', type=int)
    p.add_argument('--max-workers', dest='max_workers', type=int)

    p = sub.add_parser('linked', help='Linked multiway BSS across subjects')
    _add_common(p)
    _add_constraints(p)
    p.add_argument('--inputs', nargs='+', help='One TNSR tensor per subject')
    p.add_argument('--model', choices=['linked', 'btd'])
    p.add_argument('--common-counts', dest='common_counts', type=int_list)
    p.add_argument('--threshold', type=float)

    p = sub.add_parser('features', help='Feature extraction and classification')
    _add_common(p)
    p.add_argument('--train-manifest', dest='train_manifest', type=str)
    p.add_argument('--test-manifest', dest='test_manifest', type=str)
    p.add_argument('--test-fraction', dest='test_fraction', type=float)
    p.add_argument('--ranks', type=int_list)
    p.add_argument('--classifier', choices=['knn', 'centroid', 'both'])
    p.add_argument('--k', type=int)

    p = sub.add_parser('pls', help='Matrix or tensor partial least squares')
    _add_common(p)
    p.add_argument('--model', choices=['matrix', 'tensor'])
    p.add_argument('--x', type=str)
    p.add_argument('--y', type=str)
    p.add_argument('--x-test', dest='x_test', type=str)
    p.add_argument('--y-test', dest='y_test', type=str)
    p.add_argument('--model-dir', dest='model_dir', type=str)
    p.add_argument('--components', type=int)
    p.add_argument('--ranks-x', dest='ranks_x', type=int_list)
    p.add_argument('--ranks-y', dest='ranks_y', type=int_list)
    p.add_argument('--shared-modes', dest='shared_modes', type=int_list)

    p = sub.add_parser('synth', help='Synthetic data with ground truth')
    _add_common(p, iterative=False)
    p.add_argument('--kind', choices=['tucker', 'cp', 'ica', 'sparse', 'smooth', 'corpus', 'linked', 'pls',
                                      'tensor-pls'])
    p.add_argument('--dims', type=int_list)
    p.add_argument('--ranks', type=int_list)
    p.add_argument('--rank', type=int)
    p.add_argument('--noise', type=float)
    p.add_argument('--nonnegative', action='store_const', const=True)
    for name in ('n-samples', 'n-sources', 'rows', 'cols', 'n-classes', 'per-class', 'n-subjects', 'n-common',
                 'n-test'):
        p.add_argument(f'--{name}', dest=name.replace('-', '_'), type=int)
    return parser


def configure_logging(level_name: Optional[str]) -> None:
    level_name = (level_name or os.getenv(LOG_LEVEL_ENV) or "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(level=level)
    logging.getLogger().setLevel(level)


def exit_code_for(error: Exception) -> Tuple[int, str]:
    """Map an exception to (exit code, error type)."""
    if isinstance(error, (ValidationError, ConfigFileError)):
        return 2, "invalid-config"
    if isinstance(error, FileNotFoundError):
        return 2, "missing-file"
    if isinstance(error, TensorError):
        return (2 if error.error_type in USAGE_ERRORS else 1), error.error_type
    return 1, "runtime"


def run_command(command: str, config_path: Optional[str], flags: Dict[str, Any]) -> Tuple[int, Dict[str, Any]]:
    """Validate the configuration and run one subcommand; errors become exit codes."""
    model_cls, handler = COMMANDS[command]
    try:
        config = build_run_config(model_cls, config_path, flags)
        return handler(config)
    except Exception as e:
        code, error_type = exit_code_for(e)
        message = " ".join(str(e).split())
        print(f"error: {error_type}: {message}", file=sys.stderr)
        if code == 1:
            logger.exception(f"{command} failed")
        return code, {"error_type": error_type, "error_message": message}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    flags = {key: value for key, value in vars(args).items() if key not in ('command', 'config', 'log_level')}
    code, results = run_command(args.command, args.config, flags)
    if code == 0:
        display_results_summary(results, title=f"{args.command} results")
        print(f"✅ {args.command} finished, artifacts in {results.get('output')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
