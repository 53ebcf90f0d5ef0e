"""Command-line interface.

Subcommands::

    simulate   write training, validation and test datasets
    train      train every pending (architecture, seed) entry
    evaluate   evaluate trained entries and write metrics.csv
    report     summary tables, loss curves and missingness curves
    run        simulate + train + evaluate + report
    schema     print the JSON schema of the experiment config

Exit code 0 on success; failures print one JSON object on stderr and exit
non-zero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from src.core.errors import ConfigError, MultiNPEError
from src.harness.batch_runner import ExperimentRunner
from src.harness.config import (
    ExperimentConfig,
    apply_overrides,
    available_profiles,
    config_schema,
    load_config,
    load_profile,
    validate_config,
)
from src.harness.report import build_report, load_output_config
from src.harness.telemetry import TELEMETRY_MODES, configure_telemetry_mode

logger = logging.getLogger(__name__)

DEFAULT_PROFILE = "exp1-small"
EXIT_ERROR = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multinpe", description="Multi-source neural posterior estimation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Experiment config file (JSON or YAML)")
    common.add_argument("--profile", type=str, help=f"Named profile (default {DEFAULT_PROFILE})")
    common.add_argument("--seed", type=int, help="simulate: data seed; other commands: run only this model seed")
    common.add_argument("--out", type=str, help="Output directory (default from config / MULTINPE_OUTPUT_ROOT)")
    common.add_argument("--force", action="store_true", help="Redo completed work")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config field by dotted path, e.g. train.epochs=3")
    common.add_argument("--log-mode", choices=TELEMETRY_MODES, default="designer", help="Telemetry mode")

    sub.add_parser("simulate", parents=[common], help="Simulate datasets")
    sub.add_parser("train", parents=[common], help="Train the architecture x seed matrix")
    sub.add_parser("evaluate", parents=[common], help="Evaluate trained runs")
    report = sub.add_parser("report", parents=[common], help="Render report files")
    report.add_argument("--plots", action="store_true", help="Also render PNG figures")
    run = sub.add_parser("run", parents=[common], help="simulate, train, evaluate and report")
    run.add_argument("--plots", action="store_true", help="Also render PNG figures")
    sub.add_parser("schema", help="Print the config JSON schema")
    sub.add_parser("profiles", help="List named profiles")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config from --config / --profile (or the output dir echo for report), then --set, --seed and --out."""
    if args.config and args.profile:
        raise ConfigError("use either --config or --profile", "config")
    overrides: List[str] = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"simulation.data_seed={args.seed}" if args.command == "simulate" else f"seeds=[{args.seed}]")
    if args.out:
        overrides.append(f"output_dir={args.out}")

    if args.config:
        return load_config(args.config, overrides)
    if args.profile:
        return load_profile(args.profile, overrides)
    if args.command == "report" and args.out and (Path(args.out) / "config.json").exists():
        return validate_config(apply_overrides(load_output_config(Path(args.out)), overrides))
    return load_profile(DEFAULT_PROFILE, overrides)


def _cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> None:
    paths = ExperimentRunner(config, force=args.force).simulate()
    for split, path in paths.items():
        print(f"{split}: {path}")


def _cmd_train(config: ExperimentConfig, args: argparse.Namespace) -> None:
    outcomes = ExperimentRunner(config, force=args.force).train()
    failed = [o for o in outcomes if not o.ok]
    print(f"trained {len(outcomes) - len(failed)} run(s), {len(failed)} failed")


def _cmd_evaluate(config: ExperimentConfig, args: argparse.Namespace) -> None:
    runner = ExperimentRunner(config, force=args.force)
    outcomes = runner.evaluate()
    print(f"evaluated {len(outcomes)} run(s); metrics in {runner.paths.metrics_csv}")


def _cmd_report(config: ExperimentConfig, args: argparse.Namespace) -> None:
    written = build_report(config.output_path, config, plots=args.plots or config.plots)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")


def _cmd_run(config: ExperimentConfig, args: argparse.Namespace) -> None:
    runner = ExperimentRunner(config, force=args.force)
    runner.simulate()
    runner.train()
    runner.evaluate()
    _cmd_report(config, args)


COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "run": _cmd_run,
}


def _fail(payload: dict, code: int) -> int:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(config_schema(), indent=2, sort_keys=True))
        return 0
    if args.command == "profiles":
        print("\n".join(available_profiles()))
        return 0

    configure_telemetry_mode(args.log_mode)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config, args)
    except MultiNPEError as exc:
        logger.debug("Command failed", exc_info=True)
        return _fail(exc.to_dict(), EXIT_ERROR)
    except OSError as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc)}, EXIT_IO)
    return 0


if __name__ == "__main__":
    sys.exit(main())
