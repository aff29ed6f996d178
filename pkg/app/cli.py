"""
Command-line entry point ``uampmf``.

Subcommands:
    run <config>      run an experiment configuration
    uamp <config>     run the configuration as a linear-model (standalone UAMP) experiment
    oracle <suite>    run an oracle suite and print pass/fail per check
    version           print the package version
"""

import argparse
import sys
from typing import List, Optional

from dotenv import load_dotenv

from app import __version__
from app.core.exceptions import UampMfException
from app.core.logging_config import get_logger, setup_logging
from app.services.experiment_config import ExperimentConfig, load_experiment_config
from app.services.experiment_service import run_experiment
from app.services.oracle_service import SUITES, all_passed, run_oracle_suite

# Load environment variables from .env file
load_dotenv()

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uampmf",
        description="Bayesian matrix factorization with unitary approximate message passing.",
    )
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors on the console.")
    subcommands = parser.add_subparsers(dest="command", required=True, metavar="{run,uamp,oracle,version}")

    for name, help_text in (
        ("run", "Run an experiment configuration."),
        ("uamp", "Run a configuration with the standalone linear-model solver."),
    ):
        command = subcommands.add_parser(name, help=help_text)
        command.add_argument("config", type=str, help="Path to the INI configuration.")
        command.add_argument("--seed", type=int, default=None, help="Override [data] seed.")
        command.add_argument("--out", type=str, default=None, help="Override [experiment] output_dir.")
        command.add_argument("--full", action="store_true", help="Apply the [full] overrides.")
        command.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    oracle = subcommands.add_parser("oracle", help="Run an oracle suite.")
    oracle.add_argument("suite", choices=SUITES, help="Suite to run.")
    oracle.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    subcommands.add_parser("version", help="Print the version.")
    return parser


def _as_linear_model(config: ExperimentConfig) -> ExperimentConfig:
    experiment = config.experiment.model_copy(update={"application": "uamp"})
    return config.model_copy(update={"experiment": experiment})


def _run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config, full=args.full)
    if args.command == "uamp":
        config = _as_linear_model(config)
    rows = run_experiment(config, output_dir=args.out, seed=args.seed)
    failed = sum(1 for row in rows if not row.converged)
    out = args.out or config.experiment.output_dir
    print(f"{len(rows)} rows written to {out}/results.csv ({failed} not converged)")
    return EXIT_OK


def _oracle(args: argparse.Namespace) -> int:
    checks = run_oracle_suite(args.suite)
    for check in checks:
        print(check.line())
    passed = all_passed(checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return EXIT_OK if passed else EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv`` and dispatch.

    Returns:
        int: 0 on success, 1 on runtime failure, 2 on usage or configuration errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse prints usage itself; --help exits 0
        return int(e.code or 0)

    if args.command == "version":
        print(__version__)
        return EXIT_OK

    setup_logging(quiet=args.quiet)

    try:
        if args.command in ("run", "uamp"):
            return _run(args)
        return _oracle(args)
    except UampMfException as e:
        logger.error(e.message)
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
