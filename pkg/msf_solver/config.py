"""
Configuration for the cross-diffusion solver.

Two layers:
- ``RunConfig``: the versioned, validated file configuration (pydantic),
  read from dotted ``key = value`` text or from a previous run's manifest
- ``SchemeConfig``: the immutable runtime parameters of one time step,
  built by ``RunConfig.to_scheme_config()``
"""

import json
import os
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # dotenv not installed; assume environment variables are set elsewhere
    pass

from .constitutive import KappaModel, ReactionModel
from .exceptions import ConfigurationError
from .grid import Grid1D
from .onsager import MatrixModel, builtin_matrix_model
from .thermo import MixtureState

SCHEMA_VERSION = 1
DEFAULT_OUTPUT_DIR = "results"

Formulation = Literal["potential", "density"]
DensityMean = Literal["logarithmic", "arithmetic"]


@dataclass(frozen=True)
class NewtonSettings:
    """Nonlinear solver controls."""
    tol: float = 1e-10
    max_iter: int = 25
    damping_min: float = 2.0 ** -30
    picard_max_iter: int = 200


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one implicit Euler step."""
    grid: Grid1D
    tau: float
    matrix_model: MatrixModel
    epsilon: float = 0.0
    lam: float = 0.0
    theta0: float = 1.0
    kappa: KappaModel = field(default_factory=KappaModel)
    reaction: ReactionModel = field(default_factory=ReactionModel)
    formulation: str = "potential"
    density_mean: str = "logarithmic"
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    picard_fallback: bool = True
    max_halvings: int = 10

    @property
    def n(self) -> int:
        return self.matrix_model.n

    @property
    def w0(self) -> float:
        return float(np.log(self.theta0))

    def with_tau(self, tau: float) -> "SchemeConfig":
        return replace(self, tau=tau)

    def validate(self) -> "SchemeConfig":
        """
        Check parameter ranges and the conductivity bounds.

        Raises:
            ConfigurationError: Naming the offending key
        """
        if not self.tau > 0:
            raise ConfigurationError("Time step must be positive", key_path="time.tau")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative", key_path="epsilon")
        if self.lam < 0:
            raise ConfigurationError("Boundary relaxation must be nonnegative", key_path="boundary.lambda")
        if not self.theta0 > 0:
            raise ConfigurationError("Background temperature must be positive", key_path="boundary.theta0")
        if self.formulation not in ("potential", "density"):
            raise ConfigurationError(f"Unknown formulation '{self.formulation}'", key_path="formulation")
        if self.density_mean not in ("logarithmic", "arithmetic"):
            raise ConfigurationError(f"Unknown density mean '{self.density_mean}'", key_path="density_mean")
        if self.epsilon > 0:
            # Touch the bilaplacian so a too-small grid fails here
            self.grid.bilaplacian_matrix
        self.kappa.validate(self.lam)
        return self


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ProfileSpec(_Section):
    """Initial profile of one field on [0, L]."""
    profile: Literal["constant", "gaussian", "step", "cosine"] = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    center: float = 0.5
    width: float = Field(0.1, gt=0)
    left: float = 1.0
    right: float = 1.0
    position: float = 0.5
    modes: int = Field(1, ge=0)

    def evaluate(self, x: np.ndarray, length: float) -> np.ndarray:
        """Nodal values at cell centers ``x``; center/position are absolute coordinates."""
        if self.profile == "constant":
            return np.full_like(x, self.value)
        if self.profile == "gaussian":
            return self.value + self.amplitude * np.exp(-((x - self.center) ** 2) / (2.0 * self.width ** 2))
        if self.profile == "step":
            return np.where(x < self.position, self.left, self.right)
        return self.value + self.amplitude * np.cos(self.modes * np.pi * x / length)


class DomainSection(_Section):
    length: float = Field(1.0, gt=0)
    cells: int = Field(32, ge=4)


class TimeSection(_Section):
    tau: float = Field(1e-3, gt=0)
    t_end: float = Field(0.1, gt=0)


class BoundarySection(_Section):
    lambda_: float = Field(0.0, ge=0, alias="lambda")
    theta0: float = Field(1.0, gt=0)


class KappaSection(_Section):
    c: float = Field(1.0, gt=0)
    C: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.c > self.C:
            raise ValueError(f"c = {self.c} must not exceed C = {self.C}")
        return self


class MatrixSection(_Section):
    model: Literal["constant_pi", "maxwell_stefan", "degenerate_pirhopi", "custom"] = "constant_pi"
    params: Dict[str, Any] = Field(default_factory=dict)


class ReactionSection(_Section):
    model: Literal["none", "linear_pi_q"] = "none"
    c_r: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _rate_given(self):
        if self.model == "linear_pi_q" and not self.c_r > 0:
            raise ValueError("linear_pi_q needs c_r > 0")
        return self


class NewtonSection(_Section):
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(25, ge=1)
    damping_min: float = Field(2.0 ** -30, gt=0, le=1)
    picard_fallback: bool = True
    picard_max_iter: int = Field(200, ge=1)
    max_halvings: int = Field(10, ge=0)


class OutputSection(_Section):
    stride: int = Field(1, ge=1)
    dir: str = DEFAULT_OUTPUT_DIR


class CheckSection(_Section):
    samples: int = Field(20, ge=1)
    seed: int = 0
    floor: float = Field(0.0, ge=0)
    conditions: List[Literal["M2", "M3"]] = Field(default_factory=lambda: ["M2"])


class ConvergenceSection(_Section):
    cells: List[int] = Field(default_factory=list)
    taus: List[float] = Field(default_factory=list)
    reference_cells: Optional[int] = None
    reference_tau: Optional[float] = None
    t_end: Optional[float] = Field(None, gt=0)

    @field_validator("cells")
    @classmethod
    def _doubling(cls, cells: List[int]) -> List[int]:
        if cells and (len(cells) < 2 or any(b != 2 * a for a, b in zip(cells, cells[1:]))):
            raise ValueError("a spatial ladder needs at least two doubling cell counts")
        return cells

    @field_validator("taus")
    @classmethod
    def _halving(cls, taus: List[float]) -> List[float]:
        if taus and (len(taus) < 2 or any(not np.isclose(b, a / 2) for a, b in zip(taus, taus[1:]))):
            raise ValueError("a temporal ladder needs at least two halving time steps")
        return taus

    @model_validator(mode="after")
    def _enough_levels(self):
        if not self.cells and not self.taus:
            raise ValueError("cells or taus must name a refinement ladder")
        # Self-convergence without a reference needs three levels
        if self.cells and self.reference_cells is None and len(self.cells) < 3:
            raise ValueError("cells needs three levels unless reference_cells is given")
        return self


class RunConfig(_Section):
    """Validated run configuration; unknown keys are errors."""
    schema_version: Literal[1] = SCHEMA_VERSION
    n: int = Field(2, ge=2)
    domain: DomainSection = Field(default_factory=DomainSection)
    time: TimeSection = Field(default_factory=TimeSection)
    epsilon: float = Field(0.0, ge=0)
    boundary: BoundarySection = Field(default_factory=BoundarySection)
    kappa: KappaSection = Field(default_factory=KappaSection)
    matrix: MatrixSection = Field(default_factory=MatrixSection)
    reaction: ReactionSection = Field(default_factory=ReactionSection)
    formulation: Formulation = "potential"
    density_mean: DensityMean = "logarithmic"
    newton: NewtonSection = Field(default_factory=NewtonSection)
    initial: Dict[str, ProfileSpec] = Field(default_factory=dict)
    output: OutputSection = Field(default_factory=OutputSection)
    check: CheckSection = Field(default_factory=CheckSection)
    convergence: Optional[ConvergenceSection] = None

    @field_validator("initial")
    @classmethod
    def _one_profile_per_field(cls, initial: Dict[str, ProfileSpec], info: ValidationInfo):
        n = info.data.get("n")
        if n is None:
            return initial
        expected = {f"rho_{i}" for i in range(1, n + 1)} | {"theta"}
        missing = sorted(expected - set(initial))
        extra = sorted(set(initial) - expected)
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing {', '.join(missing)}")
            if extra:
                parts.append(f"unexpected {', '.join(extra)}")
            raise ValueError("; ".join(parts))
        return initial

    def grid(self) -> Grid1D:
        return Grid1D(self.domain.length, self.domain.cells)

    def matrix_model(self) -> MatrixModel:
        return builtin_matrix_model(self.matrix.model, self.matrix.params, self.n)

    def to_scheme_config(self, grid: Optional[Grid1D] = None, tau: Optional[float] = None) -> SchemeConfig:
        """Runtime step parameters, optionally on another grid or time step."""
        cfg = SchemeConfig(
            grid=grid or self.grid(),
            tau=tau or self.time.tau,
            matrix_model=self.matrix_model(),
            epsilon=self.epsilon,
            lam=self.boundary.lambda_,
            theta0=self.boundary.theta0,
            kappa=KappaModel(c=self.kappa.c, C=self.kappa.C),
            reaction=ReactionModel(name=self.reaction.model, c_r=self.reaction.c_r),
            formulation=self.formulation,
            density_mean=self.density_mean,
            newton=NewtonSettings(
                tol=self.newton.tol,
                max_iter=self.newton.max_iter,
                damping_min=self.newton.damping_min,
                picard_max_iter=self.newton.picard_max_iter,
            ),
            picard_fallback=self.newton.picard_fallback,
            max_halvings=self.newton.max_halvings,
        )
        return cfg.validate()

    def initial_state(self, grid: Optional[Grid1D] = None) -> MixtureState:
        """
        Evaluate the initial profiles on the grid.

        Raises:
            ConfigurationError: If a profile is not strictly positive
        """
        grid = grid or self.grid()
        rho = np.empty((grid.cells, self.n))
        for i in range(self.n):
            key = f"rho_{i + 1}"
            rho[:, i] = self.initial[key].evaluate(grid.x, grid.length)
            if not np.all(rho[:, i] > 0):
                raise ConfigurationError(f"Initial {key} must be positive", key_path=f"initial.{key}")
        theta = self.initial["theta"].evaluate(grid.x, grid.length)
        if not np.all(theta > 0):
            raise ConfigurationError("Initial theta must be positive", key_path="initial.theta")
        return MixtureState.from_densities(rho, theta)

    def resolved(self) -> Dict[str, Any]:
        """Configuration with every default materialized, as written to manifests."""
        return self.model_dump(mode="json", by_alias=True)


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a configuration mapping.

    Raises:
        ConfigurationError: With the dotted key path of the first failure
    """
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        errors = e.errors()
        lines = []
        for error in errors:
            path = ".".join(str(part) for part in error["loc"]) or "<root>"
            lines.append(f"{path}: {error['msg']}")
        first = ".".join(str(part) for part in errors[0]["loc"]) or None
        raise ConfigurationError("Invalid configuration:\n  " + "\n  ".join(lines), key_path=first) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Load a configuration file.

    Accepts dotted ``key = value`` text (TOML syntax) or a ``manifest.json``
    written by a previous run.

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Cannot parse manifest {path}: {e}") from e
        data = data.get("config", data)
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Cannot parse {path}: {e}") from e
    return parse_config(data)


def resolve_output_dir(run_config: RunConfig, cli_out: Optional[str] = None) -> Path:
    """Output directory: --out, then $MSF_OUTPUT_DIR, then output.dir."""
    return Path(cli_out or os.getenv("MSF_OUTPUT_DIR") or run_config.output.dir)
