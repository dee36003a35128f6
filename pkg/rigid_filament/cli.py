"""
Command line entry point: run a scenario and write its outputs.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from rigid_filament.models.config import SCENARIOS

EXIT_OK = 0
EXIT_OUTPUT = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Simulate a rigid closed filament in a perfect fluid.",
    )
    parser.add_argument("scenario", choices=SCENARIOS, help="Scenario to run")
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="Path to the scenario YAML file",
    )
    parser.add_argument(
        "--eps",
        type=float,
        nargs="+",
        default=None,
        help="Tube radii overriding eps_list (largest first)",
    )
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Random seed")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Returns:
        0 on success, 2 on invalid input, 3 on a runtime halt, 1 on an output failure
    """
    args = build_parser().parse_args(argv)
    log_level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=log_level, format="%(levelname)s: %(message)s")

    from rigid_filament.errors import IOFailure
    from rigid_filament.parser.config_parser import apply_overrides, parse_scenario_config
    from rigid_filament.reporter import RunReporter
    from rigid_filament.simulator import ScenarioRunner

    config_path = Path(args.config)
    try:
        config = parse_scenario_config(config_path, scenario=args.scenario)
        config = apply_overrides(config, eps=args.eps, out=args.out, seed=args.seed)
    except (FileNotFoundError, ValueError) as e:
        logger.error(str(e))
        return EXIT_VALIDATION

    try:
        report = ScenarioRunner(config, config_path.parent, log_level).run()
        manifest = RunReporter(config.output.directory, log_level).emit_outputs(report, config)
    except IOFailure as e:
        logger.error(f"Output failed: {e}")
        return EXIT_OUTPUT

    print(f"\nRun Results ({config.scenario}):")
    print(report.get_formatted_report())
    print(f"\nManifest written to: {manifest}")

    if report.validation_failure:
        return EXIT_VALIDATION
    if report.halted or report.runtime_failure:
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
