#!/usr/bin/env python3
"""Replicability analysis CLI."""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

# Put src/ on the Python path for absolute imports
_src_root = Path(__file__).resolve().parent.parent
if str(_src_root) not in sys.path:
    sys.path.insert(0, str(_src_root))

from cli.interface.commands import (  # noqa: E402
    CompareCommand,
    EstimateCommand,
    OracleTestCommand,
    PresetsCommand,
    SimulateCommand,
    TestCommand,
    VersionCommand,
)
from cli.interface.presentation import Presenter  # noqa: E402
from config.loader import load_settings, project_root  # noqa: E402
from config.logging_config import setup_logging  # noqa: E402
from config.settings import Settings  # noqa: E402
from models.errors import DomainError, InputDataError, NumericalFailure, ParamsValidationError  # noqa: E402
from processing.baselines import BaselineMethod  # noqa: E402
from simulation.harness import SIM_METHODS  # noqa: E402

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

logger = logging.getLogger("replictl")


def setup_replictl_logging(settings: Optional[dict] = None) -> None:
    """Route logs to logs/replictl.log (or $REPLICTL_LOG_FILE); REPLICTL_DEBUG adds a console handler."""
    logging_section = dict((settings or {}).get("logging", {}))
    if os.getenv("REPLICTL_DEBUG"):
        logging_section["console_enabled"] = True
    log_file = os.getenv("REPLICTL_LOG_FILE")
    if not log_file:
        configured = Path(logging_section.get("file_path", "logs/replictl.log"))
        log_file = str(configured if configured.is_absolute() else project_root() / configured)
    setup_logging({"logging": logging_section}, log_file_override=log_file)


def _comma_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _float_list(value: str) -> list[float]:
    try:
        return [float(item) for item in _comma_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from e


def _baseline_list(value: str) -> list[BaselineMethod]:
    try:
        return [BaselineMethod(item) for item in _comma_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"unknown baseline in {value!r}; choose from {', '.join(m.value for m in BaselineMethod)}") from e


def _sim_method_list(value: str) -> list[str]:
    methods = _comma_list(value)
    unknown = [m for m in methods if m not in SIM_METHODS]
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"unknown method(s) {unknown}; choose from {', '.join(SIM_METHODS)}")
    return methods


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


class ReplicabilityCLI:
    """Main CLI application using clean architecture."""

    def __init__(self):
        self.project_root = project_root()

    def create_parser(self) -> argparse.ArgumentParser:
        """Create argument parser."""
        # Global options are accepted before or after the subcommand
        global_opts = argparse.ArgumentParser(add_help=False)
        global_opts.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed for EM initialisation and simulation")
        global_opts.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS, help="Worker count for compare and simulate")
        global_opts.add_argument("--preset", default=argparse.SUPPRESS, help="Settings preset under configs/ (desk, full, full-scenario2; paper is an alias of full)")
        global_opts.add_argument("--config", default=argparse.SUPPRESS, help="Explicit settings TOML file")
        global_opts.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="Output in JSON format (no emojis)")
        global_opts.add_argument("--no-emoji", action="store_true", default=argparse.SUPPRESS, help="Remove emojis from text output (ignored when --json is used)")

        parser = argparse.ArgumentParser(
            prog="replictl",
            description="🧬 Replicability analysis of paired p-values with a four-state hidden Markov model",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            parents=[global_opts],
            epilog="""
Examples:
  %(prog)s estimate --input pairs.tsv --out results/      # Fit the model, write params.json
  %(prog)s test --input pairs.tsv --q 1e-5 --out results/ # Fit and test, write results.tsv
  %(prog)s oracle-test --input pairs.tsv --params known.json
  %(prog)s compare --input pairs.tsv --q 0.05             # rLIS next to every baseline
  %(prog)s --preset desk simulate --methods rlis,maxp,jump
  %(prog)s --preset full simulate --mu-grid 1.5,2,2.5 --threads 8
  %(prog)s presets                                        # List settings presets
  %(prog)s --version                                      # Show version

💡 Use --json or --no-emoji with any command for machine-readable output (no emojis)
            """,
        )
        parser.add_argument("--version", "-v", action="store_true", help="Show version information")

        subparsers = parser.add_subparsers(dest="command", help="Available commands")

        def add_input_args(sub: argparse.ArgumentParser) -> None:
            sub.add_argument("--input", "-i", required=True, help="TSV or CSV table with a header holding id, p1 and p2 columns")
            sub.add_argument("--out", "-o", default="results", help="Output directory (default: results)")
            sub.add_argument("--sort-by-position", action="store_true", help="Sort rows by (chrom, pos) before fitting")
            sub.add_argument("--id-column", help="Feature id column name")
            sub.add_argument("--p1-column", help="Study 1 p-value column name")
            sub.add_argument("--p2-column", help="Study 2 p-value column name")

        estimate_parser = subparsers.add_parser("estimate", help="Fit the model and write params JSON", parents=[global_opts])
        add_input_args(estimate_parser)

        test_parser = subparsers.add_parser("test", help="Fit, compute rLIS and run the step-up test", parents=[global_opts])
        add_input_args(test_parser)
        test_parser.add_argument("--q", type=float, default=0.05, help="Nominal FDR level (default: 0.05)")

        oracle_parser = subparsers.add_parser("oracle-test", help="Step-up test under known parameters", parents=[global_opts])
        add_input_args(oracle_parser)
        oracle_parser.add_argument("--params", required=True, help="Parameter JSON written by estimate")
        oracle_parser.add_argument("--q", type=float, default=0.05, help="Nominal FDR level (default: 0.05)")

        compare_parser = subparsers.add_parser("compare", help="Run rLIS and baseline procedures on the same input", parents=[global_opts])
        add_input_args(compare_parser)
        compare_parser.add_argument("--q", type=float, default=0.05, help="Nominal FDR level (default: 0.05)")
        compare_parser.add_argument("--methods", type=_baseline_list, help=f"Comma-separated baselines ({', '.join(m.value for m in BaselineMethod)})")
        compare_parser.add_argument("--jump-lambda1", type=float, help="Storey tuning parameter for study 1 in JUMP")
        compare_parser.add_argument("--jump-lambda2", type=float, help="Storey tuning parameter for study 2 in JUMP")
        compare_parser.add_argument("--jump-lambda3", type=float, help="Storey tuning parameter for the pooled maxima in JUMP")

        simulate_parser = subparsers.add_parser("simulate", help="Monte Carlo FDR and power evaluation", parents=[global_opts])
        simulate_parser.add_argument("--out", "-o", default="results", help="Output directory (default: results)")
        simulate_parser.add_argument("--methods", type=_sim_method_list, help=f"Comma-separated methods ({', '.join(SIM_METHODS)})")
        simulate_parser.add_argument("--scenario", help="Named generating process (scenario1, scenario2)")
        simulate_parser.add_argument("--m", type=_positive_int, help="Features per replication")
        simulate_parser.add_argument("--replications", type=_positive_int, help="Replications per cell")
        simulate_parser.add_argument("--mu1", type=float, help="Study 1 signal mean")
        simulate_parser.add_argument("--mu2", type=float, help="Study 2 signal mean")
        simulate_parser.add_argument("--sigma1", type=float, help="Study 1 signal standard deviation")
        simulate_parser.add_argument("--sigma2", type=float, help="Study 2 signal standard deviation")
        simulate_parser.add_argument("--q-grid", type=_float_list, help="Comma-separated nominal levels")
        simulate_parser.add_argument("--mu-grid", type=_float_list, help="Comma-separated common signal means mu1 = mu2")
        simulate_parser.add_argument("--pi1-grid", type=_float_list, help="Comma-separated single-study signal shares")

        subparsers.add_parser("presets", help="List settings presets", parents=[global_opts])
        subparsers.add_parser("version", help="Show version information", parents=[global_opts])

        return parser

    def _load_settings(self, args: argparse.Namespace) -> Settings:
        return Settings.from_dict(load_settings(preset=getattr(args, "preset", None), path=getattr(args, "config", None)))

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse argv, run one command and return its exit status."""
        parser = self.create_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_INPUT

        json_mode = getattr(args, "json", False)
        no_emoji = getattr(args, "no_emoji", False)
        presenter = Presenter(json_mode=json_mode, no_emoji=no_emoji)

        setup_replictl_logging()
        try:
            settings = self._load_settings(args)
        except InputDataError as e:
            logger.error(f"Invalid configuration: {e}")
            presenter.show_error(str(e))
            return EXIT_INPUT
        setup_replictl_logging(settings.model_dump())

        if args.version:
            VersionCommand(self.project_root, json_mode, no_emoji, settings).execute(args)
            return EXIT_OK

        command_map = {
            "estimate": EstimateCommand,
            "test": TestCommand,
            "oracle-test": OracleTestCommand,
            "compare": CompareCommand,
            "simulate": SimulateCommand,
            "presets": PresetsCommand,
            "version": VersionCommand,
        }
        if args.command not in command_map:
            logger.info("No command provided - showing help")
            parser.print_help()
            return EXIT_INPUT

        logger.info(f"Executing command: {args.command} with args: {vars(args)}")
        try:
            command_map[args.command](self.project_root, json_mode, no_emoji, settings).execute(args)
        except KeyboardInterrupt:
            logger.warning(f"Command {args.command} cancelled by user")
            presenter.show_warning("Operation cancelled")
            return EXIT_FAILURE
        except (InputDataError, ParamsValidationError, DomainError) as e:
            logger.error(f"Command {args.command} rejected its input: {e}")
            presenter.show_error(str(e))
            return EXIT_INPUT
        except NumericalFailure as e:
            logger.error(f"Command {args.command} failed numerically: {e}", exc_info=True)
            presenter.show_error(f"numerical failure: {e}")
            return EXIT_NUMERIC
        except Exception as e:
            logger.error(f"Command {args.command} failed: {e}", exc_info=True)
            presenter.show_error(str(e))
            return EXIT_FAILURE
        logger.info(f"Command {args.command} completed successfully")
        return EXIT_OK


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    return ReplicabilityCLI().run(argv)


def main():
    """Main entry point for the CLI."""
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
