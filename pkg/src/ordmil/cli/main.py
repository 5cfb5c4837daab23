"""Weakly supervised ordinal severity scoring from video-level labels.

Commands run one pipeline stage each, reading and writing fixed files under the run directory:

    ordmil gen   --config run.toml           generate the synthetic dataset and folds
    ordmil qc    --config run.toml --mode M  train the artifact SVM (train) or filter (filter)
    ordmil train --config run.toml --mode M  train gt0|gt1|gt2|ensemble|regression|all
    ordmil tune  --config run.toml --mode M  grid-search thresholds (ensemble|regression|all)
    ordmil eval  --config run.toml           write the metrics report
    ordmil sweep --config run.toml           cross-validated top-K sweep

Set ORDMIL_THREADS to train folds and ensemble members in parallel processes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from polykit import PolyArgs, PolyLog
from polykit.cli import handle_interrupt
from polykit.core import polykit_setup
from polykit.env import PolyEnv

from ordmil.cli.commands import (
    QC_MODES,
    TRAIN_MODES,
    TUNE_MODES,
    cmd_eval,
    cmd_gen,
    cmd_qc,
    cmd_sweep,
    cmd_train,
    cmd_tune,
)
from ordmil.cli.config import load_run_config
from ordmil.cli.layout import RunLayout
from ordmil.errors import OrdmilError

polykit_setup()

DEFAULT_OUT = Path("run")


def get_env() -> PolyEnv:
    """Environment variables the CLI reads."""
    env = PolyEnv()
    env.add_debug_var()
    env.add_var(
        "ORDMIL_THREADS",
        attr_name="threads",
        description="Worker processes for fold and member training",
        required=False,
        default=1,
        var_type=int,
    )
    return env


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="run config (TOML)")
    common.add_argument("--out", type=Path, default=DEFAULT_OUT, help="run directory (default: ./run)")
    common.add_argument("--seed", type=int, help="override the config's top-level seed")

    parser = PolyArgs(description=__doc__, lines=2, arg_width=24)
    subparsers = parser.add_subparsers(dest="command", required=True, help="pipeline stage")

    subparsers.add_parser("gen", parents=[common], help="generate the synthetic dataset")

    qc = subparsers.add_parser("qc", parents=[common], help="quality-control SVM")
    qc.add_argument("--mode", choices=QC_MODES, default="train", help="train the SVM or filter frames")

    train = subparsers.add_parser("train", parents=[common], help="train scorers per fold")
    train.add_argument("--mode", choices=list(TRAIN_MODES), default="all", help="which scorers")
    train.add_argument("--fold", type=int, help="run a single fold")

    tune = subparsers.add_parser("tune", parents=[common], help="grid-search thresholds")
    tune.add_argument("--mode", choices=TUNE_MODES, default="all", help="which thresholds")
    tune.add_argument("--fold", type=int, help="run a single fold")
    tune.add_argument("--grid-step", type=float, help="grid spacing for every threshold")

    evaluate = subparsers.add_parser("eval", parents=[common], help="write the metrics report")
    evaluate.add_argument("--fold", type=int, help="run a single fold")

    sweep = subparsers.add_parser("sweep", parents=[common], help="top-K sweep for one member")
    sweep.add_argument("--fold", type=int, help="run a single fold")

    return parser.parse_args(argv)


def run(args: argparse.Namespace, workers: int = 1) -> None:
    """Dispatch a parsed command line."""
    config = load_run_config(args.config, args.seed)
    layout = RunLayout(args.out)

    match args.command:
        case "gen":
            cmd_gen(config, layout)
        case "qc":
            cmd_qc(config, layout, args.mode)
        case "train":
            cmd_train(config, layout, args.mode, args.fold, workers)
        case "tune":
            cmd_tune(config, layout, args.mode, args.fold, args.grid_step)
        case "eval":
            cmd_eval(config, layout, args.fold)
        case "sweep":
            cmd_sweep(config, layout, args.fold, workers)


@handle_interrupt()
def main(argv: list[str] | None = None) -> None:
    """Run one pipeline command, exiting with status 1 on any rejected input or I/O error."""
    env = get_env()
    logger = PolyLog.get_logger("ordmil", level="debug" if env.debug else "info", simple=not env.debug)
    args = parse_arguments(argv)

    try:
        run(args, workers=max(1, env.threads))
    except (OrdmilError, OSError) as e:
        logger.error(e)
        sys.exit(1)


if __name__ == "__main__":
    main()
