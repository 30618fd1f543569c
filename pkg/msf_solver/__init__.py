"""
Maxwell-Stefan-Fourier Cross-Diffusion Solver Package

A structure-preserving finite-volume solver for non-isothermal
multicomponent cross-diffusion in one space dimension. Unknowns are the
entropy variables; the discrete scheme keeps densities and temperature
positive, dissipates entropy exactly and conserves species masses.

Core Modules:
- thermo: Entropy density, free energy and the variable maps rho <-> (v, w)
- onsager: Onsager matrix models, Maxwell-Stefan friction route, coercivity certificates
- constitutive: Heat conductivity and reaction laws
- grid: Uniform 1D cell-centred grid and discrete operators
- scheme: Implicit Euler step, analytic Jacobian, damped Newton with Picard fallback
- diagnostics: Entropy balance, temperature estimate, conservation and norms
- convergence: Grid and time-step refinement studies
- config: Configuration files, validation and the scheme configuration
- output: CSV writers and the run manifest
- benchmarks: Built-in benchmark configurations
- arg_parser, cli/: Command-line interface
- logger: Centralized logging infrastructure
"""

__version__ = "1.0.0"

from .config import RunConfig, SchemeConfig, load_config, parse_config
from .diagnostics import conservation_report, entropy_balance, temperature_estimate
from .grid import Grid1D
from .logger import init_library_logger, get_library_logger
from .onsager import builtin_matrix_model, certify_m2, certify_m3, group_inverse
from .scheme import Trajectory, residual, jacobian, run, solve_step
from .thermo import MixtureState, densities_from_potentials, potentials_from_densities

__all__ = [
    'RunConfig',
    'SchemeConfig',
    'load_config',
    'parse_config',
    'conservation_report',
    'entropy_balance',
    'temperature_estimate',
    'Grid1D',
    'init_library_logger',
    'get_library_logger',
    'builtin_matrix_model',
    'certify_m2',
    'certify_m3',
    'group_inverse',
    'Trajectory',
    'residual',
    'jacobian',
    'run',
    'solve_step',
    'MixtureState',
    'densities_from_potentials',
    'potentials_from_densities',
]
