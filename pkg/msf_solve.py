#!/usr/bin/env python3

"""
Maxwell-Stefan-Fourier Cross-Diffusion Solver CLI

Usage:
    ./msf_solve.py run --config configs/mixing.toml --out results/mixing
    ./msf_solve.py check-matrix --config configs/maxwell_stefan_check.toml
    ./msf_solve.py convergence --config configs/smooth.toml
    ./msf_solve.py run --sweep configs/heating.toml configs/cooling.toml --out results/sweep

For detailed usage information, run:
    ./msf_solve.py --help
"""

import sys
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Add the package to the path for local imports
sys.path.insert(0, str(Path(__file__).parent))

from msf_solver.arg_parser import MSFArgumentParser, COMMAND_CHECK_MATRIX, COMMAND_CONVERGENCE
from msf_solver.cli.commands import (
    EXIT_ABORT,
    EXIT_FAILED,
    EXIT_INTERRUPTED,
    EXIT_VIOLATION,
    cmd_check_matrix,
    cmd_convergence,
    cmd_run,
    run_sweep,
)
from msf_solver.exceptions import (
    AbortError,
    ConfigurationError,
    MSFSolverError,
    StructuralViolationError,
)
from msf_solver.logger import init_library_logger


def _parse_arguments(argv=None):
    """Parse command-line arguments and handle early exits."""
    parser = MSFArgumentParser()
    try:
        return parser.parse_arguments(argv)
    except ValueError as e:
        print(f"❌ {e}", file=sys.stderr)
        sys.exit(EXIT_FAILED)


def _handle_exceptions(e: Exception) -> int:
    """Report an error and return the matching exit code."""
    if isinstance(e, ConfigurationError):
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        if e.key_path:
            print(f"   Offending key: {e.key_path}", file=sys.stderr)
        return EXIT_FAILED
    if isinstance(e, AbortError):
        print(f"❌ Run aborted: {e}", file=sys.stderr)
        return EXIT_ABORT
    if isinstance(e, StructuralViolationError):
        print(f"❌ Structural violation: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    if isinstance(e, MSFSolverError):
        print(f"❌ Solver error: {e}", file=sys.stderr)
        return EXIT_FAILED
    if isinstance(e, FileNotFoundError):
        print(f"❌ File error: {e}", file=sys.stderr)
        return EXIT_FAILED

    print(f"❌ Unexpected error: {e}", file=sys.stderr)
    import traceback
    traceback.print_exc()
    return EXIT_FAILED


def _route_to_command(args) -> int:
    command = args['command']
    if command == COMMAND_CHECK_MATRIX:
        return cmd_check_matrix(args['config'])
    if command == COMMAND_CONVERGENCE:
        return cmd_convergence(args['config'], args['out'])
    if args['sweep']:
        return run_sweep(args['sweep'], args['out'])
    return cmd_run(args['config'], args['out'])


def main(argv=None) -> int:
    """Main entry point for the CLI application."""
    args = _parse_arguments(argv)
    init_library_logger(verbose=args['verbose'], log_to_file=args['log-file'])

    try:
        return _route_to_command(args)
    except KeyboardInterrupt:
        print("\n👋 Run cancelled by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        return _handle_exceptions(e)


if __name__ == "__main__":
    sys.exit(main())
