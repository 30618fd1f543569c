"""
Grid and time-step refinement studies.

Spatial errors are successive differences between levels (self-convergence)
or differences to a reference grid, after restricting fine cell values to
the coarse grid by averaging. Temporal errors are measured on a fixed grid
against a run with a much smaller reference step.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from .config import RunConfig
from .exceptions import ConfigurationError
from .grid import Grid1D
from .logger import get_library_logger
from .scheme import run
from .thermo import MixtureState

SPATIAL_ORDER_RANGE = (1.8, 2.2)
TEMPORAL_ORDER_RANGE = (0.8, 1.2)


@dataclass(frozen=True)
class ConvergenceTable:
    """Errors and observed orders along a refinement ladder."""
    kind: str  # 'spatial' or 'temporal'
    levels: List[float]
    errors: List[float]
    orders: List[float]

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    def within(self, low: float, high: float) -> bool:
        return bool(self.orders) and all(low <= order <= high for order in self.orders)

    def to_frame(self) -> pd.DataFrame:
        label = "cells" if self.kind == "spatial" else "tau"
        return pd.DataFrame({
            label: self.levels[:len(self.errors)],
            "error": self.errors,
            "order": [np.nan] + list(self.orders),
        })


def restrict(values: np.ndarray, factor: int = 2) -> np.ndarray:
    """Average groups of ``factor`` consecutive fine cells onto the coarse grid."""
    values = np.asarray(values, dtype=float)
    return values.reshape((values.shape[0] // factor, factor) + values.shape[1:]).mean(axis=1)


def _stack(state: MixtureState) -> np.ndarray:
    return np.column_stack([state.rho, state.theta])


def _final_state(run_config: RunConfig, cells: int, tau: float, t_end: float) -> MixtureState:
    grid = Grid1D(run_config.domain.length, cells)
    cfg = run_config.to_scheme_config(grid=grid, tau=tau)
    return run(run_config.initial_state(grid), cfg, t_end).final_state


def _orders(errors: List[float], ratios: List[float]) -> List[float]:
    return [float(np.log(e0 / e1) / np.log(r)) for e0, e1, r in zip(errors, errors[1:], ratios)]


def _study_settings(run_config: RunConfig):
    study = run_config.convergence
    if study is None:
        raise ConfigurationError("The configuration names no refinement ladder", key_path="convergence")
    return study, study.t_end or run_config.time.t_end


def spatial_study(run_config: RunConfig) -> Optional[ConvergenceTable]:
    """Spatial errors in the max norm over (rho, theta) at t_end; None without a cells ladder."""
    study, t_end = _study_settings(run_config)
    if not study.cells:
        return None
    logger = get_library_logger()
    tau = run_config.time.tau
    solutions = {}
    for cells in study.cells:
        logger.info(f"Spatial study: {cells} cells")
        solutions[cells] = _stack(_final_state(run_config, cells, tau, t_end))

    if study.reference_cells is not None:
        reference = _stack(_final_state(run_config, study.reference_cells, tau, t_end))
        errors = []
        for cells in study.cells:
            factor = study.reference_cells // cells
            if factor * cells != study.reference_cells:
                raise ConfigurationError(
                    "reference_cells must be a multiple of every ladder level", key_path="convergence.reference_cells"
                )
            errors.append(float(np.abs(solutions[cells] - restrict(reference, factor)).max()))
        ratios = [2.0] * (len(errors) - 1)
    else:
        errors = [
            float(np.abs(solutions[coarse] - restrict(solutions[fine])).max())
            for coarse, fine in zip(study.cells, study.cells[1:])
        ]
        ratios = [2.0] * (len(errors) - 1)
    return ConvergenceTable("spatial", list(study.cells), errors, _orders(errors, ratios))


def temporal_study(run_config: RunConfig) -> Optional[ConvergenceTable]:
    """Time-step errors on the configured grid against a reference step; None without a taus ladder."""
    study, t_end = _study_settings(run_config)
    if not study.taus:
        return None
    logger = get_library_logger()
    cells = run_config.domain.cells
    reference_tau = study.reference_tau or study.taus[-1] / 16.0
    logger.info(f"Temporal study: reference tau {reference_tau:g}")
    reference = _stack(_final_state(run_config, cells, reference_tau, t_end))
    errors = []
    for tau in study.taus:
        logger.info(f"Temporal study: tau {tau:g}")
        errors.append(float(np.abs(_stack(_final_state(run_config, cells, tau, t_end)) - reference).max()))
    ratios = [a / b for a, b in zip(study.taus, study.taus[1:])]
    return ConvergenceTable("temporal", list(study.taus), errors, _orders(errors, ratios))
