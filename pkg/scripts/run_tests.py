#!/usr/bin/env python3
"""Script to run the test suite, type checking and linting."""

import argparse
import subprocess
import sys
from pathlib import Path
from typing import List

PACKAGE = "rigid_filament"


def run_command(command: List[str], cwd: Path) -> bool:
    """Run a command and return True if successful."""
    try:
        subprocess.run(command, check=True, cwd=cwd, capture_output=True, text=True)
        return True
    except subprocess.CalledProcessError as e:
        print(f"Error running command {' '.join(command)}:")
        print(e.stdout)
        print(e.stderr)
        return False


def main() -> None:
    """Run tests, mypy and ruff."""
    parser = argparse.ArgumentParser(description="Run the test suite and static checks.")
    parser.add_argument("--slow", action="store_true", help="Include the slow BEM tests")
    parser.add_argument("--no-lint", action="store_true", help="Skip mypy and ruff")
    args = parser.parse_args()

    project_root = Path(__file__).resolve().parent.parent
    if not (project_root / "pyproject.toml").exists():
        print("Error: pyproject.toml not found next to the scripts directory")
        sys.exit(1)

    python = sys.executable
    pytest_command = [python, "-m", "pytest"]
    if not args.slow:
        pytest_command += ["-m", "not slow"]

    print("Running tests" + (" (including slow)..." if args.slow else "..."))
    if not run_command(pytest_command, project_root):
        sys.exit(1)

    if args.no_lint:
        print("\nTests passed!")
        return

    print("\nRunning type checking...")
    if not run_command([python, "-m", "mypy", PACKAGE], project_root):
        sys.exit(1)

    print("\nRunning linting...")
    if not run_command([python, "-m", "ruff", "check", PACKAGE, "tests", "scripts"], project_root):
        sys.exit(1)

    print("\nAll checks passed!")


if __name__ == "__main__":
    main()
