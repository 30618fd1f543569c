"""
Run outputs: the fields and diagnostics CSV files and the run manifest.

CSV column order is fixed and floats are written with 17 significant
digits, so identical runs produce identical files.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .diagnostics import entropy_functional
from .grid import Grid1D
from .logger import get_library_logger
from .thermo import MixtureState

FIELDS_FILE = "fields.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
MANIFEST_FILE = "manifest.json"
FLOAT_FORMAT = "%.17g"


def fields_columns(n: int) -> List[str]:
    return ["t", "x"] + [f"rho_{i}" for i in range(1, n + 1)] + ["theta"]


def diagnostics_columns(n: int) -> List[str]:
    return (["t", "entropy", "entropy_slack"]
            + [f"mass_{i}" for i in range(1, n + 1)]
            + ["energy", "min_rho", "min_theta", "max_theta", "newton_iters",
               "diffusion_production", "heat_production", "boundary_production"])


class FieldWriter:
    """Collects nodal fields every ``stride`` steps (plus the final state) into fields.csv."""

    def __init__(self, path: Union[str, Path], grid: Grid1D, n: int, stride: int = 1):
        self.path = Path(path)
        self.grid = grid
        self.n = n
        self.stride = stride
        self._frames: List[np.ndarray] = []
        self._step = 0
        self._pending: Optional[np.ndarray] = None

    def _frame(self, t: float, state: MixtureState) -> np.ndarray:
        cells = self.grid.cells
        return np.column_stack([np.full(cells, t), self.grid.x, state.rho, state.theta])

    def __call__(self, t: float, state: MixtureState, report=None) -> None:
        frame = self._frame(t, state)
        if report is not None:
            self._step += 1
        if report is None or self._step % self.stride == 0:
            self._frames.append(frame)
            self._pending = None
        else:
            self._pending = frame

    def close(self) -> Path:
        if self._pending is not None:
            self._frames.append(self._pending)
            self._pending = None
        data = np.vstack(self._frames) if self._frames else np.empty((0, self.n + 3))
        pd.DataFrame(data, columns=fields_columns(self.n)).to_csv(
            self.path, index=False, float_format=FLOAT_FORMAT
        )
        return self.path


class DiagnosticsWriter:
    """One diagnostics.csv row per accepted step (and one for the initial state)."""

    def __init__(self, path: Union[str, Path], grid: Grid1D, n: int, theta0: float):
        self.path = Path(path)
        self.grid = grid
        self.n = n
        self.theta0 = theta0
        self._rows: List[List[float]] = []

    def __call__(self, t: float, state: MixtureState, report=None) -> None:
        masses = self.grid.integrate(state.rho)
        energy = float(self.grid.integrate(state.rho_total * state.theta))
        if report is None:
            entropy = entropy_functional(state, self.grid, self.theta0)
            slack, iterations, productions = 0.0, 0, (0.0, 0.0, 0.0)
        else:
            ledger = report.entropy_ledger
            entropy = report.entropy_after
            slack = ledger.slack
            iterations = report.newton_iterations + report.picard_iterations
            productions = (ledger.diffusion, ledger.heat, ledger.boundary)
        self._rows.append(
            [t, entropy, slack, *masses, energy, float(state.rho.min()), float(state.theta.min()),
             float(state.theta.max()), iterations, *productions]
        )

    def close(self) -> Path:
        frame = pd.DataFrame(self._rows, columns=diagnostics_columns(self.n))
        frame["newton_iters"] = frame["newton_iters"].astype(int)
        frame.to_csv(self.path, index=False, float_format=FLOAT_FORMAT)
        return self.path


@dataclass
class RunManifest:
    """Record of one run: resolved configuration, version, timing, outputs and gates."""
    config: Dict[str, Any]
    version: str
    command: str
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())
    wall_clock_seconds: float = 0.0
    outputs: Dict[str, str] = field(default_factory=dict)
    gates: Dict[str, int] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)
    status: str = "running"  # 'completed', 'violation', 'aborted', 'failed'
    exit_code: Optional[int] = None

    def __post_init__(self):
        self._started = time.perf_counter()

    def finish(self, status: str, exit_code: int) -> None:
        self.status = status
        self.exit_code = exit_code
        self.wall_clock_seconds = time.perf_counter() - self._started

    def save(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / MANIFEST_FILE
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(asdict(self), f, indent=2)
        except OSError as e:
            get_library_logger().error(f"Failed to save manifest: {e}")
            raise
        return path
