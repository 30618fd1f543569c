"""
Argument validation for the solver CLI.
"""

from typing import Any, Dict, List


class ArgumentValidator:
    """Validates parsed CLI arguments and ensures they are consistent."""

    def __init__(self, supported_commands: List[str]):
        self.supported_commands = list(supported_commands)

    def validate_and_finalize(self, result: Dict[str, Any]) -> None:
        """Validate all parsed arguments."""
        self.validate_command(result.get('command'))
        self._validate_sources(result)

    def validate_command(self, command: str) -> None:
        if command is None:
            raise ValueError(
                f"No command given.\nTip: Use one of: {', '.join(self.supported_commands)}"
            )
        if command not in self.supported_commands:
            raise ValueError(
                f"Unknown command '{command}'. Supported: {', '.join(self.supported_commands)}"
            )

    def _validate_sources(self, result: Dict[str, Any]) -> None:
        """Exactly one of --config and --sweep; --sweep only for run."""
        if result['sweep']:
            if result['command'] != 'run':
                raise ValueError("--sweep is only supported by the run command")
            if result['config']:
                raise ValueError("Use either --config or --sweep, not both")
            return
        if not result['config']:
            raise ValueError(
                "No configuration given.\nTip: Pass --config path/to/config.toml"
            )
