"""
Onsager diffusion matrices and their certification.

Builds the diffusion matrix M and the Soret/Dufour vector M_soret, either
directly (constant and degenerate models) or from Maxwell-Stefan friction
coefficients through the group inverse of the friction matrix B.

Matrix models are evaluated in batches: ``rho`` has shape (N, n) and
``theta`` shape (N,), returning M of shape (N, n, n) and M_soret of shape
(N, n). Derivatives with respect to (rho, theta) are analytic for the
built-in models with constant coefficients.
"""

from __future__ import annotations

import importlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .exceptions import ConfigurationError, SingularityError, ValidationError
from .thermo import project_pi

# Bordered system condition number beyond which B is treated as rank-deficient
SINGULARITY_CONDITION = 1e12
INVARIANT_TOLERANCE = 1e-12
ORTHOGONALITY_TOLERANCE = 1e-10
# Relative step for finite-difference derivatives of user-supplied models
FD_RELATIVE_STEP = 1e-6

MODEL_NAMES = ("constant_pi", "maxwell_stefan", "degenerate_pirhopi", "custom")

Provenance = str


@dataclass(frozen=True)
class OnsagerMatrices:
    """Diffusion matrix M and Soret vector M_soret at one state."""
    M: np.ndarray
    M_soret: np.ndarray
    provenance: Provenance

    def invariant_violations(self, tol: float = INVARIANT_TOLERANCE) -> List[str]:
        """List the violated structural conditions (empty when admissible)."""
        scale = max(1.0, float(np.abs(self.M).max(initial=0.0)))
        soret_scale = max(1.0, float(np.abs(self.M_soret).max(initial=0.0)))
        problems = []
        if np.abs(self.M.sum(axis=0)).max() > tol * scale:
            problems.append("column sums of M are not zero")
        if abs(self.M_soret.sum()) > tol * soret_scale:
            problems.append("Soret coefficients do not sum to zero")
        if np.abs(self.M - self.M.T).max() > tol * scale:
            problems.append("M is not symmetric")
        if np.linalg.eigvalsh(0.5 * (self.M + self.M.T)).min() < -tol * scale:
            problems.append("M is not positive semidefinite")
        return problems

    def check(self, tol: float = INVARIANT_TOLERANCE) -> "OnsagerMatrices":
        """Raise ValidationError unless every invariant holds; returns self."""
        problems = self.invariant_violations(tol)
        if problems:
            raise ValidationError(f"{self.provenance} Onsager matrices: " + "; ".join(problems))
        return self


@dataclass(frozen=True)
class CoercivityCertificate:
    """Coercivity constant with the vector that attains it."""
    kind: str  # "M2" or "M3"
    constant: float
    witness: np.ndarray


@dataclass(frozen=True)
class CoercivityCheck:
    """Outcome of the reduced (n-1)-block coercivity check."""
    passed: bool
    min_eigenvalue: float
    witness: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FrictionSpec:
    """
    Maxwell-Stefan friction coefficients b_ij (diagonal ignored).

    Either a constant symmetric matrix ``b`` or a ``callback(rho, theta)``
    returning one.
    """
    b: Optional[np.ndarray] = None
    callback: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    @classmethod
    def uniform(cls, n: int, value: float) -> "FrictionSpec":
        return cls(b=np.full((n, n), float(value)))

    def matrix_at(self, rho: np.ndarray, theta: float = 1.0, require_positive: bool = False) -> np.ndarray:
        """Validated off-diagonal friction matrix at a state (zero diagonal)."""
        raw = self.callback(rho, theta) if self.callback is not None else self.b
        if raw is None:
            raise ConfigurationError("Friction needs a matrix or a callback", key_path="matrix.params.b")
        b = np.array(raw, dtype=float)
        n = len(rho)
        if b.shape != (n, n):
            raise ConfigurationError(f"Friction matrix must be {n}x{n}", key_path="matrix.params.b")
        np.fill_diagonal(b, 0.0)
        if np.abs(b - b.T).max() > INVARIANT_TOLERANCE * max(1.0, np.abs(b).max()):
            raise ConfigurationError("Friction matrix must be symmetric", key_path="matrix.params.b")
        offdiagonal = b[~np.eye(n, dtype=bool)]
        if (offdiagonal < 0).any() or (require_positive and (offdiagonal <= 0).any()):
            requirement = "positive" if require_positive else "nonnegative"
            raise ConfigurationError(
                f"Off-diagonal friction coefficients must be {requirement}", key_path="matrix.params.b"
            )
        return b


@dataclass(frozen=True)
class FrictionMatrixB:
    """Friction matrix B and the state it was built at."""
    B: np.ndarray
    rho: np.ndarray

    def kernel_residuals(self) -> Tuple[float, float]:
        """Relative sizes of B rho (right kernel) and 1^T B (left kernel)."""
        scale = max(1.0, float(np.abs(self.B).max()) * float(np.abs(self.rho).max()))
        return (float(np.abs(self.B @ self.rho).max() / scale),
                float(np.abs(self.B.sum(axis=0)).max() / max(1.0, float(np.abs(self.B).max()))))


def _friction_from_coefficients(rho: np.ndarray, b: np.ndarray) -> np.ndarray:
    """B = diag(b rho) - diag(rho) b for zero-diagonal b; batched over leading axes."""
    n = rho.shape[-1]
    diagonal = rho @ b.T
    return np.eye(n) * diagonal[..., :, None] - rho[..., :, None] * b


def friction_matrix(rho, spec: FrictionSpec, theta: float = 1.0) -> FrictionMatrixB:
    """
    Build B with B_ii = sum_{j != i} b_ij rho_j and B_ij = -b_ij rho_i.

    Raises:
        ConfigurationError: If the friction coefficients are not symmetric
    """
    rho = np.asarray(rho, dtype=float)
    b = spec.matrix_at(rho, theta)
    return FrictionMatrixB(B=_friction_from_coefficients(rho, b), rho=rho)


def _kernel_projector(rho: np.ndarray) -> np.ndarray:
    """Q = rho 1^T / (1 . rho), batched."""
    n = rho.shape[-1]
    shares = rho / rho.sum(axis=-1, keepdims=True)
    return np.broadcast_to(shares[..., :, None], rho.shape[:-1] + (n, n)).copy()


def _bordered_group_inverse(B: np.ndarray, rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Solve (B + Q) X = I - Q and return (B#, B + Q); batched."""
    n = rho.shape[-1]
    Q = _kernel_projector(rho)
    complement = np.eye(n) - Q
    bordered = B + Q
    condition = np.linalg.cond(bordered)
    worst = float(np.max(condition))
    if not np.isfinite(worst) or worst > SINGULARITY_CONDITION:
        raise SingularityError(
            f"Friction matrix is singular beyond its kernel (condition {worst:.3e})", condition=worst
        )
    X = np.linalg.solve(bordered, complement)
    return X @ complement, bordered


def group_inverse(fm: FrictionMatrixB) -> np.ndarray:
    """
    Group inverse B# of the friction matrix via the bordered system.

    Returns:
        B# with B B# = B# B = I - (rho/rho_tot) 1^T, B B# B = B, B# B B# = B#

    Raises:
        SingularityError: If B has more than a one-dimensional kernel
    """
    sharp, _ = _bordered_group_inverse(fm.B, fm.rho)
    return sharp


def group_inverse_via_symmetrization(fm: FrictionMatrixB) -> np.ndarray:
    """
    Independent route: tau = B R is symmetric, so its group inverse is the
    spectral pseudo-inverse; then B# = P^T R tau# P^T.
    """
    rho = fm.rho
    n = rho.size
    R = np.diag(rho)
    tau = fm.B @ R
    tau = 0.5 * (tau + tau.T)
    eigenvalues, vectors = np.linalg.eigh(tau)
    cutoff = INVARIANT_TOLERANCE * max(1.0, np.abs(eigenvalues).max())
    inverse_values = np.array([1.0 / lam if abs(lam) > cutoff else 0.0 for lam in eigenvalues])
    tau_sharp = (vectors * inverse_values) @ vectors.T
    P = np.eye(n) - np.outer(np.ones(n), rho / rho.sum())
    return P.T @ R @ tau_sharp @ P.T


def project_q_star(q_star, rho) -> np.ndarray:
    """Shift q* by a multiple of 1 so that sum_i q*_i rho_i = 0; batched over rho."""
    q_star = np.asarray(q_star, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mean = (rho * q_star).sum(axis=-1, keepdims=True) / rho.sum(axis=-1, keepdims=True)
    return q_star - mean


def _mobility_factor(rho: np.ndarray) -> np.ndarray:
    """R P = diag(rho) - rho rho^T / rho_tot (symmetric); batched."""
    n = rho.shape[-1]
    rho_sum = rho.sum(axis=-1)[..., None, None]
    return np.eye(n) * rho[..., :, None] - rho[..., :, None] * rho[..., None, :] / rho_sum


def onsager_from_friction(rho, theta: float, b: FrictionSpec, q_star) -> OnsagerMatrices:
    """
    Maxwell-Stefan route: M = B# R P and M_i = -theta sum_k B#_ik rho_k q*_k.

    Raises:
        ConfigurationError: If sum_i q*_i rho_i != 0 or b is invalid
        SingularityError: If the friction matrix is singular beyond its kernel
    """
    rho = np.asarray(rho, dtype=float)
    q_star = np.asarray(q_star, dtype=float)
    weighted = float(np.dot(q_star, rho))
    if abs(weighted) > ORTHOGONALITY_TOLERANCE * max(1.0, float(np.abs(q_star).max()) * rho.sum()):
        raise ConfigurationError(
            f"q_star must satisfy sum_i q*_i rho_i = 0 (got {weighted:.3e})", key_path="matrix.params.q_star"
        )
    fm = friction_matrix(rho, b, theta)
    sharp = group_inverse(fm)
    M = sharp @ _mobility_factor(rho)
    M_soret = -theta * sharp @ (rho * q_star)
    return OnsagerMatrices(M=M, M_soret=M_soret, provenance="maxwell_stefan")


def flux_equivalence_check(rho, theta: float, grad_q, grad_inv_theta: float, b: FrictionSpec, q_star) -> float:
    """
    Compare Fick-Onsager fluxes with the Maxwell-Stefan driving forces.

    J = -M grad_q - M_soret grad(1/theta); the driving forces
    d_i = rho_i grad(mu_i/theta) - rho_i/(rho theta) grad(rho theta)
          - 2 rho_i theta grad(1/theta) + q*_i rho_i grad(log theta)
    are assembled term by term from the same gradient data.

    Returns:
        ||d + B J||_inf / max(1, ||d||_inf)
    """
    rho = np.asarray(rho, dtype=float)
    grad_q = np.asarray(grad_q, dtype=float)
    q_star = np.asarray(q_star, dtype=float)
    matrices = onsager_from_friction(rho, theta, b, q_star)
    fluxes = -matrices.M @ grad_q - matrices.M_soret * grad_inv_theta

    rho_sum = rho.sum()
    grad_log_theta = -theta * grad_inv_theta
    grad_theta = -theta ** 2 * grad_inv_theta
    # q_i = log rho_i - log theta fixes the density gradients
    grad_rho = np.sum(rho * (grad_q + grad_log_theta))
    grad_pressure = theta * grad_rho + rho_sum * grad_theta
    forces = (rho * grad_q
              - rho / (rho_sum * theta) * grad_pressure
              - 2.0 * rho * theta * grad_inv_theta
              + q_star * rho * grad_log_theta)

    B = friction_matrix(rho, b, theta).B
    mismatch = np.abs(forces + B @ fluxes).max()
    return float(mismatch / max(1.0, np.abs(forces).max()))


def _complement_basis(n: int) -> np.ndarray:
    """Orthonormal basis of span{1}^perp as an (n, n-1) array."""
    return sla.null_space(np.ones((1, n)))


def _as_matrix(M: Union[OnsagerMatrices, np.ndarray]) -> np.ndarray:
    return np.asarray(M.M if isinstance(M, OnsagerMatrices) else M, dtype=float)


def certify_m2(M: Union[OnsagerMatrices, np.ndarray]) -> CoercivityCertificate:
    """
    Smallest eigenvalue of M restricted to span{1}^perp.

    A value within round-off of zero is reported as exactly 0.
    """
    matrix = _as_matrix(M)
    n = matrix.shape[0]
    basis = _complement_basis(n)
    restricted = basis.T @ (0.5 * (matrix + matrix.T)) @ basis
    eigenvalues, vectors = np.linalg.eigh(restricted)
    constant = float(eigenvalues[0])
    if abs(constant) <= INVARIANT_TOLERANCE * max(1.0, float(np.abs(matrix).max())):
        constant = 0.0
    return CoercivityCertificate(kind="M2", constant=constant, witness=basis @ vectors[:, 0])


def reduced_coercivity_check(
    M: Union[OnsagerMatrices, np.ndarray],
    c_M: float,
    samples: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> CoercivityCheck:
    """
    Check sum_{i,j<n} M_ij y_i y_j >= (c_M/n) |y|^2 on the leading (n-1) block.

    The eigenvalue test is exact; ``samples`` random vectors add a sampling
    cross-check. The first violating vector is returned as witness.
    """
    matrix = _as_matrix(M)
    n = matrix.shape[0]
    block = 0.5 * (matrix[:-1, :-1] + matrix[:-1, :-1].T)
    bound = c_M / n
    tol = INVARIANT_TOLERANCE * max(1.0, float(np.abs(matrix).max()))
    eigenvalues, vectors = np.linalg.eigh(block)
    min_eigenvalue = float(eigenvalues[0])
    if min_eigenvalue < bound - tol:
        return CoercivityCheck(passed=False, min_eigenvalue=min_eigenvalue, witness=vectors[:, 0])

    if samples:
        rng = rng or np.random.default_rng(0)
        for y in rng.standard_normal((samples, n - 1)):
            if y @ block @ y < bound * (y @ y) - tol * (y @ y):
                return CoercivityCheck(passed=False, min_eigenvalue=min_eigenvalue, witness=y)
    return CoercivityCheck(passed=True, min_eigenvalue=min_eigenvalue)


def certify_m3(
    model: Union["MatrixModel", Callable[[np.ndarray, float], Any]],
    samples: Iterable[Tuple[Sequence[float], float]],
) -> CoercivityCertificate:
    """
    Infimum over sampled states of z.Mz / sum_i rho_i (Pi z)_i^2.

    Each state is a generalized symmetric eigenproblem on span{1}^perp.
    """
    best_constant = np.inf
    best_witness = None
    for rho, theta in samples:
        rho = np.asarray(rho, dtype=float)
        matrix = _as_matrix(model(rho, theta))
        basis = _complement_basis(rho.size)
        stiffness = basis.T @ (0.5 * (matrix + matrix.T)) @ basis
        weight = basis.T @ np.diag(rho) @ basis
        eigenvalues, vectors = sla.eigh(stiffness, weight)
        if eigenvalues[0] < best_constant:
            best_constant = float(eigenvalues[0])
            best_witness = basis @ vectors[:, 0]
    if best_witness is None:
        raise ValueError("certify_m3 needs at least one sampled state")
    if abs(best_constant) <= INVARIANT_TOLERANCE:
        best_constant = 0.0
    return CoercivityCertificate(kind="M3", constant=best_constant, witness=best_witness)


class MatrixModel(ABC):
    """State-dependent (rho, theta) -> (M, M_soret), batched over nodes."""

    name: str = "custom"

    def __init__(self, n: int):
        self.n = int(n)

    @abstractmethod
    def evaluate(self, rho: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return M (N, n, n) and M_soret (N, n) for rho (N, n), theta (N,)."""

    def __call__(self, rho, theta) -> OnsagerMatrices:
        M, M_soret = self.evaluate(np.asarray(rho, dtype=float)[None, :], np.atleast_1d(float(theta)))
        return OnsagerMatrices(M=M[0], M_soret=M_soret[0], provenance=self.name)

    def derivatives(self, rho: np.ndarray, theta: np.ndarray):
        """
        Partial derivatives of (M, M_soret).

        Returns:
            dM_drho (N, n, n, n) indexed [node, i, j, m], dMs_drho (N, n, n)
            indexed [node, i, m], dM_dtheta (N, n, n), dMs_dtheta (N, n)

        The base implementation uses central differences; built-in models
        override it with exact formulas.
        """
        nodes, n = rho.shape
        dM = np.empty((nodes, n, n, n))
        dMs = np.empty((nodes, n, n))
        for m in range(n):
            step = FD_RELATIVE_STEP * rho[:, m]
            plus = rho.copy()
            minus = rho.copy()
            plus[:, m] += step
            minus[:, m] -= step
            M_plus, Ms_plus = self.evaluate(plus, theta)
            M_minus, Ms_minus = self.evaluate(minus, theta)
            dM[..., m] = (M_plus - M_minus) / (2.0 * step)[:, None, None]
            dMs[..., m] = (Ms_plus - Ms_minus) / (2.0 * step)[:, None]
        step = FD_RELATIVE_STEP * theta
        M_plus, Ms_plus = self.evaluate(rho, theta + step)
        M_minus, Ms_minus = self.evaluate(rho, theta - step)
        dM_dtheta = (M_plus - M_minus) / (2.0 * step)[:, None, None]
        dMs_dtheta = (Ms_plus - Ms_minus) / (2.0 * step)[:, None]
        return dM, dMs, dM_dtheta, dMs_dtheta

    def soret_bound(self, rho: np.ndarray, theta: np.ndarray) -> float:
        """sup over nodes of |M_j / theta|."""
        _, M_soret = self.evaluate(rho, theta)
        return float(np.abs(M_soret / theta[:, None]).max(initial=0.0))


class ConstantPiModel(MatrixModel):
    """M = c Pi and M_soret = theta Pi a for a fixed vector a."""

    name = "constant_pi"

    def __init__(self, n: int, c: float = 1.0, soret: Optional[Sequence[float]] = None):
        super().__init__(n)
        if c < 0:
            raise ConfigurationError("constant_pi needs c >= 0", key_path="matrix.params.c")
        self.c = float(c)
        self.projector = np.eye(n) - np.full((n, n), 1.0 / n)
        soret = np.zeros(n) if soret is None else np.asarray(soret, dtype=float)
        if soret.shape != (n,):
            raise ConfigurationError(f"soret needs {n} entries", key_path="matrix.params.soret")
        self.soret_direction = project_pi(soret)

    def evaluate(self, rho, theta):
        nodes = rho.shape[0]
        M = np.broadcast_to(self.c * self.projector, (nodes, self.n, self.n)).copy()
        return M, theta[:, None] * self.soret_direction

    def derivatives(self, rho, theta):
        nodes, n = rho.shape
        return (np.zeros((nodes, n, n, n)), np.zeros((nodes, n, n)),
                np.zeros((nodes, n, n)), np.broadcast_to(self.soret_direction, (nodes, n)).copy())


class DegenerateModel(MatrixModel):
    """M = c Pi diag(rho) Pi and M_soret = -s theta diag(rho) (q* projected at each state)."""

    name = "degenerate_pirhopi"

    def __init__(self, n: int, c: float = 1.0, q_star: Optional[Sequence[float]] = None, soret_scale: float = 1.0):
        super().__init__(n)
        if c < 0:
            raise ConfigurationError("degenerate_pirhopi needs c >= 0", key_path="matrix.params.c")
        self.c = float(c)
        self.soret_scale = float(soret_scale)
        self.projector = np.eye(n) - np.full((n, n), 1.0 / n)
        self.q_star = np.zeros(n) if q_star is None else np.asarray(q_star, dtype=float)
        if self.q_star.shape != (n,):
            raise ConfigurationError(f"q_star needs {n} entries", key_path="matrix.params.q_star")

    def evaluate(self, rho, theta):
        M = self.c * (self.projector @ (rho[:, :, None] * self.projector))
        M_soret = -self.soret_scale * theta[:, None] * rho * project_q_star(self.q_star, rho)
        return M, M_soret

    def derivatives(self, rho, theta):
        nodes, n = rho.shape
        column_outer = self.projector[:, None, :] * self.projector[None, :, :]
        dM = np.broadcast_to(self.c * column_outer, (nodes, n, n, n)).copy()

        rho_sum = rho.sum(axis=1)
        mean = (rho @ self.q_star) / rho_sum
        dmean = (self.q_star[None, :] - mean[:, None]) / rho_sum[:, None]
        eye = np.eye(n)
        dprojected = (eye[None] * (self.q_star - mean[:, None])[:, :, None]
                      - rho[:, :, None] * dmean[:, None, :])
        dMs = -self.soret_scale * theta[:, None, None] * dprojected
        M_soret = -self.soret_scale * theta[:, None] * rho * (self.q_star - mean[:, None])
        return dM, dMs, np.zeros((nodes, n, n)), M_soret / theta[:, None]


class MaxwellStefanModel(MatrixModel):
    """Friction route M = B# R P, M_i = -theta (B# R q*)_i with q* projected per state."""

    name = "maxwell_stefan"

    def __init__(self, n: int, friction: FrictionSpec, q_star: Optional[Sequence[float]] = None):
        super().__init__(n)
        self.friction = friction
        self.q_star = np.zeros(n) if q_star is None else np.asarray(q_star, dtype=float)
        if self.q_star.shape != (n,):
            raise ConfigurationError(f"q_star needs {n} entries", key_path="matrix.params.q_star")
        self.coefficients = None
        if friction.callback is None:
            self.coefficients = friction.matrix_at(np.ones(n), require_positive=True)
            # dB/drho_m = diag(b[:, m]) - e_m b[m, :]
            self.friction_derivative = np.stack(
                [np.diag(self.coefficients[:, m]) - np.outer(np.eye(n)[m], self.coefficients[m])
                 for m in range(n)]
            )

    def _coefficients_at(self, rho: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.coefficients is not None:
            return _friction_from_coefficients(rho, self.coefficients)
        return np.stack([
            _friction_from_coefficients(r, self.friction.matrix_at(r, t, require_positive=True))
            for r, t in zip(rho, theta)
        ])

    def evaluate(self, rho, theta):
        B = self._coefficients_at(rho, theta)
        sharp, _ = _bordered_group_inverse(B, rho)
        M = sharp @ _mobility_factor(rho)
        weighted = rho * project_q_star(self.q_star, rho)
        M_soret = -theta[:, None] * np.einsum("kij,kj->ki", sharp, weighted)
        return M, M_soret

    def derivatives(self, rho, theta):
        if self.coefficients is None:
            return super().derivatives(rho, theta)
        nodes, n = rho.shape
        B = _friction_from_coefficients(rho, self.coefficients)
        sharp, bordered = _bordered_group_inverse(B, rho)
        bordered_inverse = np.linalg.inv(bordered)
        rho_sum = rho.sum(axis=1)
        eye = np.eye(n)

        # dQ[k, m, i, j] = (delta_im - rho_i/rho_tot)/rho_tot, constant in j
        dQ_column = (eye[None, :, :] - (rho / rho_sum[:, None])[:, None, :]) / rho_sum[:, None, None]
        dQ = np.broadcast_to(dQ_column[..., None], (nodes, n, n, n))
        dA = self.friction_derivative[None] + dQ
        # d(B#) = -A^{-1} dA B# - A^{-1} dQ with A = B + Q
        dsharp = (-np.einsum("kia,kmab,kbj->kmij", bordered_inverse, dA, sharp)
                  - np.einsum("kia,kmaj->kmij", bordered_inverse, dQ))

        mobility = _mobility_factor(rho)
        outer = rho[:, :, None] * rho[:, None, :] / rho_sum[:, None, None] ** 2
        dmobility = (eye[None, :, :, None] * eye[None, :, None, :]
                     - (eye[None, :, :, None] * rho[:, None, None, :]
                        + rho[:, None, :, None] * eye[None, :, None, :]) / rho_sum[:, None, None, None]
                     + outer[:, None])
        dM = (np.einsum("kmia,kaj->kmij", dsharp, mobility)
              + np.einsum("kia,kmaj->kmij", sharp, dmobility))

        # B# rho = 0, so the per-state projection of q* drops out of the derivative
        weighted = rho * self.q_star
        dMs = -theta[:, None, None] * (np.einsum("kmij,kj->kmi", dsharp, weighted)
                                       + sharp.transpose(0, 2, 1) * self.q_star[None, :, None])
        M_soret = -theta[:, None] * np.einsum("kij,kj->ki", sharp, rho * project_q_star(self.q_star, rho))
        return (np.moveaxis(dM, 1, -1), np.swapaxes(dMs, 1, 2),
                np.zeros((nodes, n, n)), M_soret / theta[:, None])


class CustomModel(MatrixModel):
    """Wraps a user function (rho, theta) -> OnsagerMatrices or (M, M_soret)."""

    name = "custom"

    def __init__(self, n: int, function: Callable[[np.ndarray, float], Any]):
        super().__init__(n)
        self.function = function

    def evaluate(self, rho, theta):
        Ms, soret = [], []
        for r, t in zip(rho, theta):
            result = self.function(r, float(t))
            if isinstance(result, OnsagerMatrices):
                Ms.append(result.M)
                soret.append(result.M_soret)
            else:
                Ms.append(np.asarray(result[0], dtype=float))
                soret.append(np.asarray(result[1], dtype=float))
        return np.stack(Ms), np.stack(soret)


def _resolve_function(reference: Union[str, Callable]) -> Callable:
    if callable(reference):
        return reference
    module_name, _, attribute = str(reference).partition(":")
    if not attribute:
        raise ConfigurationError(
            "Custom model function must be given as 'module:function'", key_path="matrix.params.function"
        )
    try:
        return getattr(importlib.import_module(module_name), attribute)
    except (ImportError, AttributeError) as e:
        raise ConfigurationError(f"Cannot import {reference}: {e}", key_path="matrix.params.function") from e


def _friction_spec(n: int, params: Dict[str, Any]) -> FrictionSpec:
    b = params.get("b", 1.0)
    if callable(b):
        return FrictionSpec(callback=b)
    if np.isscalar(b):
        return FrictionSpec.uniform(n, float(b))
    return FrictionSpec(b=np.asarray(b, dtype=float))


_MODEL_PARAMS = {
    "constant_pi": {"c", "soret"},
    "maxwell_stefan": {"b", "q_star"},
    "degenerate_pirhopi": {"c", "q_star", "soret_scale"},
    "custom": {"function"},
}


def builtin_matrix_model(name: str, params: Optional[Dict[str, Any]], n: int) -> MatrixModel:
    """
    Instantiate a named matrix model.

    Args:
        name: constant_pi, maxwell_stefan, degenerate_pirhopi or custom
        params: Model parameters (see docs/reference/configuration.md)
        n: Number of species

    Raises:
        ConfigurationError: For unknown names or parameters
    """
    params = dict(params or {})
    if name not in _MODEL_PARAMS:
        raise ConfigurationError(
            f"Unknown matrix model '{name}'. Supported: {', '.join(MODEL_NAMES)}", key_path="matrix.model"
        )
    unknown = set(params) - _MODEL_PARAMS[name]
    if unknown:
        raise ConfigurationError(
            f"Unknown parameter(s) for {name}: {', '.join(sorted(unknown))}",
            key_path=f"matrix.params.{sorted(unknown)[0]}",
        )

    if name == "constant_pi":
        return ConstantPiModel(n, c=params.get("c", 1.0), soret=params.get("soret"))
    if name == "maxwell_stefan":
        return MaxwellStefanModel(n, _friction_spec(n, params), q_star=params.get("q_star"))
    if name == "degenerate_pirhopi":
        return DegenerateModel(n, c=params.get("c", 1.0), q_star=params.get("q_star"),
                               soret_scale=params.get("soret_scale", 1.0))
    if "function" not in params:
        raise ConfigurationError("custom model needs a function", key_path="matrix.params.function")
    return CustomModel(n, _resolve_function(params["function"]))
