"""
Thermodynamic state algebra for ideal mixtures.

Entropy, free energy and the positivity-preserving change of variables
between partial densities (rho_1..rho_n, theta) and entropy variables
(v_1..v_{n-1}, w). Every function accepts nodal arrays: the species index is
always the last axis, so a single state is just the N = 1 (or scalar) case.

Conventions:
- q_i = log(rho_i / theta) (no +1 offset; only gradients and projections
  of q enter the fluxes)
- v_i = q_i - q_n = log(rho_i / rho_n), so v_n = 0 is the gauge
- unit molar masses and unit heat capacity
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

# Below this relative gap the logarithmic mean switches to its Taylor series
LOG_MEAN_SERIES_THRESHOLD = 1e-4
# Partial-sum steps tried before a closure tie is given up
MAX_TIE_BREAKS = 4


def _check_densities(rho: np.ndarray) -> None:
    bad = ~(np.isfinite(rho) & (rho > 0))
    if bad.any():
        component = int(np.argwhere(bad)[0][-1])
        raise DomainError(
            f"Partial density rho_{component + 1} must be positive and finite",
            component=component,
        )


def _check_temperature(theta: np.ndarray) -> None:
    if not np.all(np.isfinite(theta) & (theta > 0)):
        raise DomainError("Temperature must be positive and finite", component="theta")


def total_density(rho: np.ndarray) -> np.ndarray:
    """Sum of partial densities in the order used by the rho_n closure."""
    rho = np.asarray(rho, dtype=float)
    return rho[..., :-1].sum(axis=-1) + rho[..., -1]


@dataclass(frozen=True)
class MixtureState:
    """Nodal partial densities and temperature on a grid.

    Attributes:
        rho: (N, n) partial mass densities, all > 0
        theta: (N,) temperature, > 0
        rho_total: (N,) total density, time-invariant along a run
    """
    rho: np.ndarray
    theta: np.ndarray
    rho_total: np.ndarray

    def __post_init__(self):
        if self.rho.ndim != 2 or self.rho.shape[1] < 2:
            raise DomainError("rho must be an (N, n) array with n >= 2")
        if self.theta.shape != self.rho.shape[:1] or self.rho_total.shape != self.rho.shape[:1]:
            raise DomainError("theta and rho_total must have one value per node")
        _check_densities(self.rho)
        _check_temperature(self.theta)

    @classmethod
    def from_densities(cls, rho, theta) -> "MixtureState":
        """Build a state whose rho_total is the closure sum of ``rho``."""
        rho = np.array(rho, dtype=float)
        theta = np.array(theta, dtype=float)
        return cls(rho=rho, theta=theta, rho_total=total_density(rho))

    @property
    def n(self) -> int:
        return self.rho.shape[1]

    @property
    def cells(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True)
class EntropyState:
    """The scheme unknowns: relative potentials v (N, n-1) and w = log(theta) (N,).

    ``rho_total`` travels with the state because the inverse map needs it.
    """
    v: np.ndarray
    w: np.ndarray
    rho_total: np.ndarray

    @property
    def n(self) -> int:
        return self.v.shape[1] + 1

    @property
    def cells(self) -> int:
        return self.w.shape[0]

    def as_vector(self) -> np.ndarray:
        """Stack as the node-major unknown vector (v_1..v_{n-1}, w) per node."""
        return np.concatenate([self.v, self.w[:, None]], axis=1).ravel()

    @classmethod
    def from_vector(cls, y: np.ndarray, n: int, rho_total: np.ndarray) -> "EntropyState":
        """Inverse of :meth:`as_vector`."""
        blocks = np.asarray(y, dtype=float).reshape(-1, n)
        return cls(v=blocks[:, :-1].copy(), w=blocks[:, -1].copy(), rho_total=rho_total)

    def to_mixture(self) -> MixtureState:
        """Map back to densities and temperature."""
        rho = densities_from_potentials(self.v, self.rho_total)
        return MixtureState(rho=rho, theta=np.exp(self.w), rho_total=self.rho_total)


@dataclass(frozen=True)
class PotentialSet:
    """Thermo-chemical potentials q = log(rho/theta) and their projection Pi q."""
    q: np.ndarray
    pi_q: np.ndarray


@dataclass(frozen=True)
class FreeEnergy:
    """Helmholtz free energy and derived quantities at a state."""
    psi: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    E: np.ndarray
    p: np.ndarray


def entropy_density(rho, theta) -> np.ndarray:
    """
    Mathematical entropy h = sum_i rho_i (log rho_i - 1) - rho log(theta).

    Args:
        rho: Partial densities, species on the last axis
        theta: Temperature, broadcastable against rho[..., 0]

    Returns:
        Entropy density per node

    Raises:
        DomainError: If a density or the temperature is nonpositive
    """
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_densities(rho)
    _check_temperature(theta)
    return np.sum(rho * (np.log(rho) - 1.0), axis=-1) - rho.sum(axis=-1) * np.log(theta)


def _nudged_complement(partial: np.ndarray, rho_total: np.ndarray) -> np.ndarray:
    complement = rho_total - partial
    for _ in range(2):
        total = partial + complement
        complement = np.where(total > rho_total, np.nextafter(complement, -np.inf),
                              np.where(total < rho_total, np.nextafter(complement, np.inf), complement))
    return complement


def densities_from_potentials(v, rho_total) -> np.ndarray:
    """
    Invert the entropy variables: rho_i = rho_total * softmax(v_1..v_{n-1}, 0)_i.

    The exponentials are max-shifted so |v| beyond 700 does not overflow.
    rho_n is the complement rho_total - sum_{i<n} rho_i, nudged by one ulp
    where rounding would break ``total_density(rho) == rho_total``. When the
    partial sum sits on a rounding tie that no complement can resolve, the
    largest of rho_1..rho_{n-1} moves down by one spacing of the partial sum
    and the complement is recomputed. Only when the partial sum rounds onto
    rho_total (rho_n below one ulp of rho_total) does rho_n fall back to its
    directly evaluated share, keeping it positive.

    Args:
        v: Relative potentials, shape (..., n-1)
        rho_total: Total density, shape (...)

    Returns:
        Partial densities, shape (..., n)
    """
    v = np.asarray(v, dtype=float)
    rho_total = np.asarray(rho_total, dtype=float)
    full = np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
    weights = np.exp(full - full.max(axis=-1, keepdims=True))
    shares = weights / weights.sum(axis=-1, keepdims=True)
    rho = rho_total[..., None] * shares

    direct = rho[..., -1].copy()
    head = rho[..., :-1]
    partial = head.sum(axis=-1)
    complement = _nudged_complement(partial, rho_total)
    for _ in range(MAX_TIE_BREAKS):
        missed = np.asarray(partial + complement != rho_total)
        if not missed.any():
            break
        largest = np.argmax(head, axis=-1)[..., None]
        current = np.take_along_axis(head, largest, axis=-1)
        step = np.where(missed, np.spacing(partial), 0.0)[..., None]
        np.put_along_axis(head, largest, current - step, axis=-1)
        partial = head.sum(axis=-1)
        complement = _nudged_complement(partial, rho_total)
    rho[..., -1] = np.where(complement > 0.5 * direct, complement, direct)
    return rho


def project_pi(z) -> np.ndarray:
    """Orthogonal projection onto span{1}^perp: z - mean(z) 1 along the last axis."""
    z = np.asarray(z, dtype=float)
    return z - z.mean(axis=-1, keepdims=True)


def potentials_from_densities(state: MixtureState) -> tuple[EntropyState, PotentialSet]:
    """
    Compute entropy variables and thermo-chemical potentials of a state.

    Args:
        state: Mixture state with positive densities and temperature

    Returns:
        (EntropyState, PotentialSet) with v_i = log(rho_i/rho_n), w = log(theta),
        q_i = log(rho_i/theta) and pi_q = Pi q
    """
    log_rho = np.log(state.rho)
    log_theta = np.log(state.theta)
    v = log_rho[:, :-1] - log_rho[:, -1:]
    q = log_rho - log_theta[:, None]
    entropy_state = EntropyState(v=v, w=log_theta, rho_total=state.rho_total)
    return entropy_state, PotentialSet(q=q, pi_q=project_pi(q))


def free_energy_and_derived(rho, theta) -> FreeEnergy:
    """
    Free energy psi and the quantities derived from it.

    psi = theta sum_i rho_i (log rho_i - 1) - rho theta (log theta - 1),
    s = -d psi/d theta, mu_i = theta (log(rho_i/theta) + 1), E = p = rho theta.

    Raises:
        DomainError: If a density or the temperature is nonpositive
    """
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_densities(rho)
    _check_temperature(theta)
    rho_sum = rho.sum(axis=-1)
    log_theta = np.log(theta)
    mixing = np.sum(rho * (np.log(rho) - 1.0), axis=-1)

    psi = theta * mixing - rho_sum * theta * (log_theta - 1.0)
    s = -mixing + rho_sum * log_theta
    mu = theta[..., None] * (np.log(rho / theta[..., None]) + 1.0)
    energy = rho_sum * theta
    return FreeEnergy(psi=psi, s=s, mu=mu, E=energy, p=rho_sum * theta)


def entropy_hessian(rho_prime, theta: float, rho_total: float) -> np.ndarray:
    """
    Hessian of h(rho', theta) with rho_n = rho_total - sum(rho').

    Returns:
        n x n symmetric positive definite matrix: the (n-1) x (n-1) block
        diag(1/rho_i) + 1/rho_n, then rho_total/theta^2 in the last slot

    Raises:
        DomainError: If rho_n <= 0 or any other input is nonpositive
    """
    rho_prime = np.atleast_1d(np.asarray(rho_prime, dtype=float))
    _check_densities(rho_prime)
    _check_temperature(np.asarray(theta, dtype=float))
    n = rho_prime.size + 1
    rho_n = float(rho_total) - rho_prime.sum()
    if not rho_n > 0:
        raise DomainError(f"Closure density rho_{n} = {rho_n} must be positive", component=n - 1)

    hessian = np.zeros((n, n))
    hessian[:-1, :-1] = np.diag(1.0 / rho_prime) + 1.0 / rho_n
    hessian[-1, -1] = float(rho_total) / float(theta) ** 2
    return hessian


def log_mean(a, b) -> np.ndarray:
    """Logarithmic mean (b - a)/(log b - log a), with a = b giving a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = b / a - 1.0
    small = np.abs(t) < LOG_MEAN_SERIES_THRESHOLD
    safe_t = np.where(small, 1.0, t)
    exact = a * safe_t / np.log1p(safe_t)
    series = a * (1.0 + t / 2.0 - t * t / 12.0 + t ** 3 / 24.0)
    return np.where(small, series, exact)
