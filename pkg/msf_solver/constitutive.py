"""
Heat conductivity and reaction laws used by the scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigurationError
from .thermo import project_pi

# Temperatures at which the conductivity bounds are sampled
KAPPA_SAMPLE_THETA = np.logspace(-3, 3, 61)
KAPPA_FD_STEP = 1e-6

REACTION_MODELS = ("none", "linear_pi_q")


@dataclass(frozen=True)
class KappaModel:
    """
    Heat conductivity kappa(theta).

    Defaults to kappa = (c + C)/2 * (1 + theta^2), which lies between the
    bounds c(1 + theta^2) and C(1 + theta^2). A user ``function`` replaces it;
    its derivative comes from ``derivative_function`` or central differences.
    """
    c: float = 1.0
    C: float = 1.0
    function: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derivative_function: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.function is not None:
            return np.asarray(self.function(theta), dtype=float)
        return 0.5 * (self.c + self.C) * (1.0 + theta ** 2)

    def derivative(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.function is None:
            return (self.c + self.C) * theta
        if self.derivative_function is not None:
            return np.asarray(self.derivative_function(theta), dtype=float)
        step = KAPPA_FD_STEP * np.maximum(theta, 1.0)
        return (self(theta + step) - self(theta - step)) / (2.0 * step)

    def validate(self, lam: float) -> None:
        """
        Check the growth bounds on sampled temperatures.

        With lam = 0 the lower bound weakens to c theta^2.

        Raises:
            ConfigurationError: Naming ``kappa`` on any violation
        """
        if not (self.c > 0 and self.C > 0):
            raise ConfigurationError("kappa constants c and C must be positive", key_path="kappa")
        if self.c > self.C:
            raise ConfigurationError(f"kappa.c = {self.c} exceeds kappa.C = {self.C}", key_path="kappa")
        theta = KAPPA_SAMPLE_THETA
        values = self(theta)
        lower = self.c * (1.0 + theta ** 2) if lam > 0 else self.c * theta ** 2
        upper = self.C * (1.0 + theta ** 2)
        slack = 1e-12 * upper
        bad = (values < lower - slack) | (values > upper + slack) | ~np.isfinite(values)
        if bad.any():
            theta_bad = float(theta[np.argmax(bad)])
            raise ConfigurationError(
                f"kappa violates c(1+theta^2) <= kappa <= C(1+theta^2) at theta = {theta_bad:.3g}",
                key_path="kappa",
            )


@dataclass(frozen=True)
class ReactionModel:
    """Reaction rates r = -c_r Pi q (``linear_pi_q``) or none."""
    name: str = "none"
    c_r: float = 0.0

    def __post_init__(self):
        if self.name not in REACTION_MODELS:
            raise ConfigurationError(
                f"Unknown reaction model '{self.name}'. Supported: {', '.join(REACTION_MODELS)}",
                key_path="reaction.model",
            )
        if self.name == "linear_pi_q" and not self.c_r > 0:
            raise ConfigurationError("linear_pi_q needs c_r > 0", key_path="reaction.c_r")

    @property
    def active(self) -> bool:
        return self.name != "none"

    def rates(self, log_rho: np.ndarray) -> np.ndarray:
        """Nodal rates; Pi q = Pi log(rho) since q differs from log(rho) by a multiple of 1."""
        if not self.active:
            return np.zeros_like(log_rho)
        return -self.c_r * project_pi(log_rho)

    def rate_jacobian(self, n: int) -> np.ndarray:
        """d r / d log(rho) as an (n, n) matrix."""
        if not self.active:
            return np.zeros((n, n))
        return -self.c_r * (np.eye(n) - np.full((n, n), 1.0 / n))
