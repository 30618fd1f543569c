"""
One-dimensional cell-centered finite-volume grid.

Cells k = 0..N-1 have centers x_k = (k + 1/2) h on [0, L]. Face-valued
arrays carry N + 1 entries: index 0 is the left boundary face, index N the
right one, and index f (1 <= f <= N-1) sits between cells f-1 and f.
Nodal arrays may carry trailing component axes; all operators act on axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigurationError

MIN_CELLS = 4
MIN_BILAPLACIAN_CELLS = 5


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid on [0, length] with ``cells`` cells."""
    length: float
    cells: int

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigurationError("Domain length must be positive", key_path="domain.length")
        if int(self.cells) != self.cells or self.cells < MIN_CELLS:
            raise ConfigurationError(
                f"Cell count must be an integer >= {MIN_CELLS}", key_path="domain.cells"
            )

    @property
    def h(self) -> float:
        return self.length / self.cells

    @cached_property
    def x(self) -> np.ndarray:
        """Cell centers."""
        return (np.arange(self.cells) + 0.5) * self.h

    @cached_property
    def faces(self) -> np.ndarray:
        """Face positions including both boundary faces."""
        return np.arange(self.cells + 1) * self.h

    def interior_grad(self, f: np.ndarray) -> np.ndarray:
        """Differences (f_{k+1} - f_k)/h on the N-1 interior faces."""
        f = np.asarray(f, dtype=float)
        return (f[1:] - f[:-1]) / self.h

    def face_average(self, f: np.ndarray) -> np.ndarray:
        """Arithmetic mean of the two neighbouring nodal values on interior faces."""
        f = np.asarray(f, dtype=float)
        return 0.5 * (f[1:] + f[:-1])

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Face differences with zero (no-flux) values on both boundary faces."""
        f = np.asarray(f, dtype=float)
        out = np.zeros((self.cells + 1,) + f.shape[1:])
        out[1:-1] = self.interior_grad(f)
        return out

    def div_flux(self, flux: np.ndarray) -> np.ndarray:
        """
        Cell divergence (F_{k+1/2} - F_{k-1/2})/h of a face-valued flux.

        Boundary faces must already hold the prescribed boundary flux (outward
        positive on the right, inward positive on the left).
        """
        flux = np.asarray(flux, dtype=float)
        if flux.shape[0] != self.cells + 1:
            raise ValueError(f"Face array needs {self.cells + 1} entries, got {flux.shape[0]}")
        return (flux[1:] - flux[:-1]) / self.h

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Midpoint quadrature sum_k f_k h."""
        return np.asarray(f, dtype=float).sum(axis=0) * self.h

    def boundary_values(self, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Degree-one extrapolation of nodal values to x = 0 and x = L."""
        f = np.asarray(f, dtype=float)
        return 1.5 * f[0] - 0.5 * f[1], 1.5 * f[-1] - 0.5 * f[-2]

    @cached_property
    def second_difference_matrix(self) -> sp.csr_matrix:
        """
        Second differences (f_{k-1} - 2 f_k + f_{k+1})/h^2 at interior cells.

        The first and last rows are zero (natural closure: vanishing second
        derivative at the boundary).
        """
        n = self.cells
        main = np.full(n, -2.0)
        lower = np.ones(n - 1)
        upper = np.ones(n - 1)
        main[[0, -1]] = 0.0
        upper[0] = 0.0
        lower[-1] = 0.0
        return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / self.h ** 2

    @cached_property
    def bilaplacian_matrix(self) -> sp.csr_matrix:
        """D2^T D2: interior stencil (1, -4, 6, -4, 1)/h^4, symmetric positive semidefinite."""
        if self.cells < MIN_BILAPLACIAN_CELLS:
            raise ConfigurationError(
                f"The bilaplacian needs at least {MIN_BILAPLACIAN_CELLS} cells",
                key_path="domain.cells",
            )
        d2 = self.second_difference_matrix
        return (d2.T @ d2).tocsr()

    def discrete_bilaplacian(self, f: np.ndarray) -> np.ndarray:
        """Apply :attr:`bilaplacian_matrix` to a nodal array."""
        return self.bilaplacian_matrix @ np.asarray(f, dtype=float)


@dataclass(frozen=True)
class Field:
    """Nodal scalar values bound to a grid."""
    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        if np.shape(self.values)[0] != self.grid.cells:
            raise ValueError(
                f"Field has {np.shape(self.values)[0]} values for a grid of {self.grid.cells} cells"
            )


def grad(field: Field) -> np.ndarray:
    """Face-valued differences of a field, zero on boundary faces."""
    return field.grid.grad(field.values)


def div_flux(grid: Grid1D, flux: np.ndarray) -> Field:
    """Cell divergence of a face-valued flux as a field."""
    return Field(grid.div_flux(flux), grid)


def integrate(field: Field) -> float:
    """Midpoint quadrature of a field."""
    return float(field.grid.integrate(field.values))


def boundary_values(field: Field) -> Tuple[float, float]:
    """Linear extrapolation of a field to both boundary points."""
    left, right = field.grid.boundary_values(field.values)
    return float(left), float(right)


def discrete_bilaplacian(field: Field) -> Field:
    """Bilaplacian with natural closure applied to a field."""
    return Field(field.grid.discrete_bilaplacian(field.values), field.grid)
