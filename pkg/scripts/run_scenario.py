#!/usr/bin/env python3
"""
Script to run one or more scenario files and write their outputs.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from rigid_filament.errors import IOFailure
from rigid_filament.parser.config_parser import apply_overrides, parse_scenario_config
from rigid_filament.reporter import RunReporter
from rigid_filament.simulator import ScenarioRunner
from rigid_filament.utils.generate_reference import generate_reference

logging.basicConfig(
    level=logging.INFO,
    format="%(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)


def run_one(config_path: Path, out: Optional[Path], eps: Optional[List[float]]) -> bool:
    """Run a single scenario file, returning True when it finished without errors."""
    try:
        config = parse_scenario_config(config_path)
        config = apply_overrides(config, eps=eps, out=str(out) if out else None)
    except (FileNotFoundError, ValueError) as e:
        print(f"Error: {config_path}: {e}")
        return False

    try:
        report = ScenarioRunner(config, config_path.parent).run()
        manifest = RunReporter(config.output.directory).emit_outputs(report, config)
    except IOFailure as e:
        print(f"Error: {config_path}: {e}")
        return False

    print(f"\nRun Results ({config_path.name}):")
    print(report.get_formatted_report())
    print(f"Manifest written to: {manifest}")
    return not (report.has_errors() or report.halted)


def main() -> int:
    """Main entry point for the script."""
    parser = argparse.ArgumentParser(description="Run scenario files and write their outputs.")
    parser.add_argument("configs", type=str, nargs="+", help="Scenario YAML files")
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output root; each scenario writes to <out>/<file stem>",
    )
    parser.add_argument(
        "--eps",
        type=float,
        nargs="+",
        default=None,
        help="Tube radii overriding every file's eps_list (largest first)",
    )
    parser.add_argument(
        "--generate-reference",
        action="store_true",
        help="Regenerate docs/configuration-reference.md before running",
    )
    args = parser.parse_args()

    if args.generate_reference:
        generate_reference(Path("docs/configuration-reference.md"))

    failed = []
    for name in args.configs:
        config_path = Path(name)
        if not config_path.exists():
            print(f"Error: Scenario file '{config_path}' does not exist")
            failed.append(name)
            continue
        out = Path(args.out) / config_path.stem if args.out else None
        if not run_one(config_path, out, args.eps):
            failed.append(name)

    if failed:
        print(f"\n{len(failed)} of {len(args.configs)} scenarios failed: {', '.join(failed)}")
        return 1
    print(f"\nAll {len(args.configs)} scenarios finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
