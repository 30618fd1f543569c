"""
Named reference configurations.

Together they form the structural battery (mixing, heating, cooling,
Soret- and Dufour-driven runs, degenerate diffusion), plus an equilibrium
case, the smooth convergence benchmark and a binary configuration that
reduces exactly to the linear heat equation.
"""

import copy
from typing import Any, Dict, List, Optional

from .config import RunConfig, parse_config


def _constant(value: float) -> Dict[str, Any]:
    return {"profile": "constant", "value": value}


def _cosine(value: float, amplitude: float, modes: int = 1) -> Dict[str, Any]:
    return {"profile": "cosine", "value": value, "amplitude": amplitude, "modes": modes}


def _gaussian(value: float, amplitude: float, center: float = 0.5, width: float = 0.1) -> Dict[str, Any]:
    return {"profile": "gaussian", "value": value, "amplitude": amplitude, "center": center, "width": width}


BENCHMARKS: Dict[str, Dict[str, Any]] = {
    "equilibrium": {
        "n": 3,
        "domain": {"length": 1.0, "cells": 16},
        "time": {"tau": 1e-2, "t_end": 0.1},
        "boundary": {"lambda": 0.5, "theta0": 1.0},
        "matrix": {"model": "constant_pi", "params": {"c": 1.0}},
        "initial": {"rho_1": _constant(0.2), "rho_2": _constant(0.3), "rho_3": _constant(0.5),
                    "theta": _constant(1.0)},
    },
    "mixing": {
        "n": 2,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 1e-3, "t_end": 0.05},
        "matrix": {"model": "maxwell_stefan", "params": {"b": 1.0}},
        "initial": {"rho_1": {"profile": "step", "left": 0.8, "right": 0.2, "position": 0.5},
                    "rho_2": {"profile": "step", "left": 0.2, "right": 0.8, "position": 0.5},
                    "theta": _constant(1.0)},
    },
    "heating": {
        "n": 2,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 5e-3, "t_end": 0.2},
        "boundary": {"lambda": 1.0, "theta0": 1.5},
        "matrix": {"model": "constant_pi", "params": {"c": 1.0}},
        "initial": {"rho_1": _cosine(0.5, 0.1), "rho_2": _cosine(0.5, -0.1), "theta": _constant(0.5)},
    },
    "cooling": {
        "n": 2,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 5e-3, "t_end": 0.2},
        "boundary": {"lambda": 1.0, "theta0": 1.0},
        "matrix": {"model": "maxwell_stefan", "params": {"b": 2.0}},
        "initial": {"rho_1": _constant(0.4), "rho_2": _constant(0.6), "theta": _gaussian(1.0, 1.0)},
    },
    "soret": {
        "n": 3,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 2e-3, "t_end": 0.05},
        "matrix": {"model": "maxwell_stefan", "params": {"b": 1.0, "q_star": [1.0, -1.0, 0.0]}},
        "initial": {"rho_1": _constant(0.3), "rho_2": _constant(0.3), "rho_3": _constant(0.4),
                    "theta": _gaussian(1.0, 0.5)},
    },
    "dufour": {
        "n": 3,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 2e-3, "t_end": 0.05},
        "matrix": {"model": "constant_pi", "params": {"c": 1.0, "soret": [0.5, -0.25, -0.25]}},
        "initial": {"rho_1": _cosine(0.3, 0.1), "rho_2": _cosine(0.3, -0.1), "rho_3": _constant(0.4),
                    "theta": _constant(1.0)},
    },
    "degenerate": {
        "n": 3,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 1e-3, "t_end": 0.02},
        "matrix": {"model": "degenerate_pirhopi", "params": {"c": 1.0}},
        "initial": {"rho_1": _gaussian(1e-4, 0.3), "rho_2": _cosine(0.5, 0.2), "rho_3": _constant(0.5),
                    "theta": _constant(1.0)},
    },
    "smooth": {
        "n": 2,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 1e-3, "t_end": 0.02},
        "matrix": {"model": "maxwell_stefan", "params": {"b": 1.0}},
        "initial": {"rho_1": _cosine(0.5, 0.2), "rho_2": _cosine(0.5, -0.2), "theta": _cosine(1.0, 0.1)},
        "convergence": {"cells": [16, 32, 64, 128], "taus": [4e-3, 2e-3, 1e-3], "reference_tau": 6.25e-5},
    },
    "binary_heat": {
        "n": 2,
        "domain": {"length": 1.0, "cells": 32},
        "time": {"tau": 1e-3, "t_end": 0.1},
        "matrix": {"model": "maxwell_stefan", "params": {"b": 1.0}},
        "formulation": "density",
        "density_mean": "arithmetic",
        "newton": {"tol": 1e-12},
        "initial": {"rho_1": _cosine(0.5, 0.3), "rho_2": _cosine(0.5, -0.3), "theta": _constant(1.0)},
    },
}

# The structural battery every release must pass
BATTERY = ("mixing", "heating", "cooling", "soret", "dufour", "degenerate")


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    *parents, leaf = key.split(".")
    node = data
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def benchmark_names() -> List[str]:
    return sorted(BENCHMARKS)


def benchmark_data(name: str, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Raw configuration mapping of a benchmark with dotted-key overrides applied."""
    if name not in BENCHMARKS:
        raise KeyError(f"Unknown benchmark '{name}'. Available: {', '.join(benchmark_names())}")
    data = copy.deepcopy(BENCHMARKS[name])
    for key, value in (overrides or {}).items():
        _set_dotted(data, key, value)
    return data


def benchmark_config(name: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Validated configuration of a named benchmark.

    Args:
        name: Benchmark name (see ``benchmark_names()``)
        overrides: Dotted keys to replace, e.g. ``{"time.t_end": 0.01}``
    """
    return parse_config(benchmark_data(name, overrides))
