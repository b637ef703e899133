#!/usr/bin/env python3
"""
CLI Runner - Command-line interface for the equivalence lab experiments.
"""

import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from experiments import experiment_registry, run
from reporting.formatters import OutputFormatter
from schemas.experiment_schema import ExperimentConfig
from utils.errors import ConfigurationError, LabError
from utils.file_utils import to_plain
from utils.logger import get_logger, set_verbose

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def load_config_file(path: Optional[str], name: Optional[str] = None) -> Dict[str, Any]:
    """
    Read a JSON config file.

    The file either holds one experiment's values or maps experiment names to
    their values; in the second form only the entry for ``name`` is returned.
    """
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}", module="cli")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}", module="cli")
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{path} must hold a JSON object", module="cli")
    if name is not None and experiment_registry.is_registered(name) and isinstance(payload.get(name), dict):
        return payload[name]
    if name is not None and any(experiment_registry.is_registered(k) for k in payload):
        return {}
    return payload


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {"seed": args.seed, "reps": args.reps, "out_dir": args.out_dir, "workers": args.workers}


def resolve_config(name: str, args: argparse.Namespace) -> ExperimentConfig:
    return experiment_registry.build_config(name, load_config_file(args.config, name), overrides_from_args(args))


def cmd_list(args: argparse.Namespace) -> int:
    experiments = experiment_registry.list_experiments()
    if args.output_format == "json":
        print(json.dumps(experiments, indent=2))
    else:
        width = max((len(e["name"]) for e in experiments), default=0)
        for e in experiments:
            print(f"{e['name']:<{width}}  {e['description']}")
    return EXIT_PASS


def cmd_show_config(args: argparse.Namespace) -> int:
    config = resolve_config(args.experiment, args)
    print(json.dumps(to_plain(config.model_dump()), indent=2, sort_keys=True))
    return EXIT_PASS


def cmd_validate(args: argparse.Namespace) -> int:
    names: List[str] = [args.experiment] if args.experiment else [e["name"] for e in
                                                                   experiment_registry.list_experiments()]
    for name in names:
        resolve_config(name, args).validate_experiment()
        print(f"{name}: ok")
    return EXIT_PASS


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args.experiment, args)
    config.build_context()
    outcome = run(config)
    print(OutputFormatter.render([outcome.to_dict()], args.output_format))
    return EXIT_PASS if outcome.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Equivalence lab: autoregression versus regression experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # List the named experiments
  python cli_runner.py list

  # Print the merged configuration of one experiment
  python cli_runner.py show-config hellinger-sweep --reps 50

  # Validate every default configuration
  python cli_runner.py validate

  # Run an experiment with a custom seed and output directory
  python cli_runner.py run coupling-gap --seed 7 --out-dir ./results --workers 4

Exit codes: 0 all checks passed, 1 a check failed or a run error, 2 configuration error.
        """
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with config values (single experiment or keyed by name)")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--reps", type=int, help="Monte Carlo replications")
    common.add_argument("--out-dir", help="Output directory")
    common.add_argument("--workers", type=int, help="Worker processes for replications")
    common.add_argument("--output-format", default="text", choices=["json", "text", "csv"],
                        help="Output format (default: text)")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="Run a named experiment")
    p_run.add_argument("experiment", help="Experiment name (see 'list')")
    p_run.set_defaults(handler=cmd_run)

    p_list = sub.add_parser("list", parents=[common], help="List experiments with a one-line description")
    p_list.set_defaults(handler=cmd_list)

    p_show = sub.add_parser("show-config", parents=[common], help="Print the merged configuration of an experiment")
    p_show.add_argument("experiment", help="Experiment name")
    p_show.set_defaults(handler=cmd_show_config)

    p_validate = sub.add_parser("validate", parents=[common], help="Validate one or every experiment configuration")
    p_validate.add_argument("experiment", nargs="?", help="Experiment name (all when omitted)")
    p_validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_verbose(True)

    try:
        return args.handler(args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as e:
        logger.error(f"Run failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
