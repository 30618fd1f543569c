"""
CLI components for the cross-diffusion solver:
- help_generator: Generates help text
- argument_validator: Validates parsed arguments
- commands: The run, check-matrix and convergence commands
"""

from .help_generator import HelpGenerator
from .argument_validator import ArgumentValidator

__all__ = [
    'HelpGenerator',
    'ArgumentValidator',
]
