"""
Command-line argument parsing for the cross-diffusion solver.

The first positional argument selects the command (run, check-matrix,
convergence); options may appear before or after it.
"""

import sys
from typing import Any, Dict, List, Optional

from .cli import ArgumentValidator, HelpGenerator

COMMAND_RUN = 'run'
COMMAND_CHECK_MATRIX = 'check-matrix'
COMMAND_CONVERGENCE = 'convergence'
SUPPORTED_COMMANDS = [COMMAND_RUN, COMMAND_CHECK_MATRIX, COMMAND_CONVERGENCE]


class MSFArgumentParser:
    def __init__(self):
        """Initialize the argument parser with helper modules."""
        self.help_generator = HelpGenerator(SUPPORTED_COMMANDS)
        self.validator = ArgumentValidator(SUPPORTED_COMMANDS)

    @property
    def help_text(self) -> str:
        """Get the help text."""
        return self.help_generator.generate_help_text()

    def parse_arguments(self, argv: Optional[List[str]] = None) -> Dict[str, Any]:
        """
        Parse command-line arguments.
        Returns a dictionary of parsed arguments.
        """
        if argv is None:
            argv = sys.argv[1:]

        if not argv or '-h' in argv or '--help' in argv:
            print(self.help_text)
            sys.exit(0)

        result = self._default_result_dict()
        i = 0
        while i < len(argv):
            i = self._handle_option(argv[i], argv, i, result)
            i += 1

        self.validator.validate_and_finalize(result)
        return result

    def _default_result_dict(self) -> Dict[str, Any]:
        return {
            'command': None,
            'config': None,
            'out': None,
            'sweep': [],
            'verbose': False,
            'log-file': True,
        }

    def _handle_option(self, arg: str, args: List[str], i: int, result: Dict[str, Any]) -> int:
        """Route argument to appropriate handler."""
        if arg in ['-c', '--config', '-o', '--out']:
            return self._parse_string_option(arg, args, i, result)
        if arg == '--sweep':
            return self._parse_sweep(args, i, result)
        if arg in ['-v', '--verbose']:
            result['verbose'] = True
            return i
        if arg == '--no-log-file':
            result['log-file'] = False
            return i

        if not arg.startswith('-') and result['command'] is None:
            result['command'] = arg
            return i

        if arg.startswith('-'):
            raise ValueError(
                f"Unknown argument: {arg}\n"
                "Tip: Use -h or --help to see all available options"
            )
        raise ValueError(
            f"Unexpected positional argument: {arg}\n"
            "Tip: Only the command is positional; pass files with --config or --sweep"
        )

    def _parse_string_option(self, arg: str, args: List[str], i: int, result: Dict[str, Any]) -> int:
        """Parse an option that takes one value."""
        key = 'config' if arg in ['-c', '--config'] else 'out'
        if i + 1 >= len(args) or args[i + 1].startswith('-'):
            raise ValueError(f"{arg} requires a value")
        result[key] = args[i + 1]
        return i + 1

    def _parse_sweep(self, args: List[str], i: int, result: Dict[str, Any]) -> int:
        """Parse --sweep followed by one or more config paths."""
        i += 1
        while i < len(args) and not args[i].startswith('-'):
            result['sweep'].append(args[i])
            i += 1
        if not result['sweep']:
            raise ValueError("--sweep requires at least one config path")
        return i - 1
