"""
Structural diagnostics: entropy and temperature ledgers, conservation
series and norms.

The ledgers are recomputed from the states alone (through the grid
primitives and the constitutive models), not from the solver's residual
assembly, so a passing gate is a genuine cross-check of an accepted step.
Trajectories are any iterable of ``(t, MixtureState, StepReport | None)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import SchemeConfig
from .grid import Grid1D
from .thermo import EntropyState, MixtureState, entropy_density, project_pi

# Assembly round-off allowed below zero for each production term, per cell
PRODUCTION_ROUNDOFF = 1e-12
GATE_FACTOR = 10.0
CONSERVATION_TOLERANCE = 1e-10


@dataclass(frozen=True)
class EntropyLedger:
    """Both sides of the discrete entropy inequality for one step."""
    entropy_before: float
    entropy_after: float
    tau: float
    diffusion: float
    heat: float
    boundary: float
    reaction: float
    regularization: float
    coupling: float
    slack: float
    tolerance: float

    @property
    def total_production(self) -> float:
        return self.diffusion + self.heat + self.boundary + self.reaction + self.regularization

    @property
    def balance(self) -> float:
        """Phi_k - Phi_{k-1} + tau (production + coupling remainder); <= slack + tolerance to pass."""
        return self.entropy_after - self.entropy_before + self.tau * (self.total_production + self.coupling)

    def productions(self) -> Dict[str, float]:
        return {
            "diffusion": self.diffusion,
            "heat": self.heat,
            "boundary": self.boundary,
            "reaction": self.reaction,
            "regularization": self.regularization,
        }


@dataclass(frozen=True)
class TemperatureStep:
    """One step of the temperature estimate with its measured constants."""
    tau: float
    thermal_before: float
    thermal_after: float
    conduction: float
    theta_sq_grad: float
    boundary: float
    potential_gradient: float
    soret_bound: float
    C: float
    C_prime: float
    lhs: float
    rhs: float
    tolerance: float

    @property
    def margin(self) -> float:
        return self.rhs + self.tolerance - self.lhs

    @property
    def passed(self) -> bool:
        values = (self.lhs, self.rhs, self.conduction, self.theta_sq_grad, self.thermal_after)
        return bool(np.all(np.isfinite(values)) and self.margin >= 0)


@dataclass(frozen=True)
class TemperatureLedger:
    """Temperature functionals over a trajectory slice (one entry per step)."""
    thermal: np.ndarray
    conduction: np.ndarray
    theta_sq_grad: np.ndarray
    boundary: np.ndarray
    l16_3_norm: float
    C: float
    C_prime: float
    min_margin: float
    steps: List[TemperatureStep] = field(default_factory=list)


def entropy_functional(state: MixtureState, grid: Grid1D, theta0: float) -> float:
    """Phi = integral of h(rho, theta) + rho theta / theta0."""
    integrand = entropy_density(state.rho, state.theta) + state.rho_total * state.theta / theta0
    return float(grid.integrate(integrand))


def _log_variables(state: MixtureState):
    log_rho = np.log(state.rho)
    w = np.log(state.theta)
    v = log_rho[:, :-1] - log_rho[:, -1:]
    return log_rho, w, v


def _dufour_faces(state: MixtureState, cfg: SchemeConfig, M_soret: np.ndarray, log_rho, v) -> np.ndarray:
    """Dufour driving term D.g on interior faces for the configured flux form."""
    grid = cfg.grid
    if cfg.formulation == "potential":
        return np.einsum("fj,fj->f", grid.face_average(M_soret)[:, :-1], grid.interior_grad(v))
    if cfg.density_mean == "logarithmic":
        return np.einsum("fj,fj->f", grid.face_average(M_soret), grid.interior_grad(log_rho))
    return np.einsum("fj,fj->f", grid.face_average(M_soret / state.rho), grid.interior_grad(state.rho))


def entropy_balance(y_prev: EntropyState, y: EntropyState, cfg: SchemeConfig) -> Tuple[EntropyLedger, bool]:
    """
    Recompute the discrete entropy inequality of an accepted step.

    Pass iff every production is nonnegative up to assembly round-off and
    Phi_k - Phi_{k-1} + tau (productions + coupling) <= tau 2 eps w0^2 L + tolerance,
    where the tolerance is 10 newton.tol L scaled by the sup of the entropy test function.
    """
    grid = cfg.grid
    h = grid.h
    state_prev = y_prev.to_mixture()
    state = y.to_mixture()
    log_rho, w, v = _log_variables(state)
    theta = state.theta
    M, M_soret = cfg.matrix_model.evaluate(state.rho, theta)

    if cfg.formulation == "density" and cfg.density_mean == "arithmetic":
        ratio = grid.face_average(M / state.rho[:, None, :])[:, :-1, :]
        diffusion = h * np.einsum("fi,fij,fj->", grid.interior_grad(v), ratio, grid.interior_grad(state.rho))
    else:
        dq = grid.interior_grad(log_rho - w[:, None])
        diffusion = h * np.einsum("fi,fij,fj->", dq, grid.face_average(M), dq)

    kappa_faces = grid.face_average(cfg.kappa(theta))
    dtheta = grid.interior_grad(theta)
    du = grid.interior_grad(np.exp(-w))
    heat = -h * float(np.sum(kappa_faces * dtheta * du))

    ends = w[[0, -1]]
    boundary = 2.0 * cfg.lam * float(np.sum(np.cosh(cfg.w0 - ends) - 1.0))

    reaction = 0.0
    if cfg.reaction.active:
        reaction = cfg.reaction.c_r * h * float(np.sum(project_pi(log_rho) ** 2))

    regularization = 0.0
    if cfg.epsilon > 0:
        eps = cfg.epsilon
        bilaplacian = grid.bilaplacian_matrix
        mass_part = sum(float(v[:, i] @ (bilaplacian @ v[:, i])) for i in range(v.shape[1])) + float(np.sum(v ** 2))
        d2 = grid.second_difference_matrix
        # D2 annihilates constants, so testing with e^{-w0} - e^{-w} reduces to -e^{-w}
        hessian_part = float(np.sum(np.exp(w) * (d2 @ w) * (d2 @ (-np.exp(-w)))))
        plap_part = float(np.sum(grid.face_average(theta) * grid.interior_grad(w) ** 3 * (-du)))
        shift = w - cfg.w0
        lower_part = float(np.sum(2.0 * shift * np.sinh(shift)))
        regularization = eps * h * (mass_part + hessian_part + plap_part + lower_part)

    soret_mass = np.einsum("fi,fi->f", grid.face_average(M_soret)[:, :-1], grid.interior_grad(v))
    dufour = _dufour_faces(state, cfg, M_soret, log_rho, v)
    coupling = h * float(np.sum(du * (soret_mass - dufour)))

    L = grid.length
    test_sup = max(1.0, float(np.max(np.abs(v).sum(axis=1) + np.abs(np.exp(-cfg.w0) - np.exp(-w)))))
    ledger = EntropyLedger(
        entropy_before=entropy_functional(state_prev, grid, cfg.theta0),
        entropy_after=entropy_functional(state, grid, cfg.theta0),
        tau=cfg.tau,
        diffusion=float(diffusion),
        heat=heat,
        boundary=boundary,
        reaction=reaction,
        regularization=regularization,
        coupling=coupling,
        slack=cfg.tau * 2.0 * cfg.epsilon * cfg.w0 ** 2 * L,
        tolerance=GATE_FACTOR * cfg.newton.tol * L * test_sup,
    )
    floor = -PRODUCTION_ROUNDOFF * grid.cells * max(1.0, abs(ledger.total_production))
    nonnegative = all(value >= floor for value in ledger.productions().values())
    passed = bool(nonnegative and ledger.balance <= ledger.slack + ledger.tolerance)
    return ledger, passed


def weighted_projection_production(state: MixtureState, grid: Grid1D) -> float:
    """Sum over faces of h sum_i rho_i,f |(Pi dq)_i|^2 with face-averaged rho."""
    dq = grid.interior_grad(np.log(state.rho) - np.log(state.theta)[:, None])
    return float(grid.h * np.sum(grid.face_average(state.rho) * project_pi(dq) ** 2))


def temperature_step(state_prev: MixtureState, state: MixtureState, cfg: SchemeConfig) -> TemperatureStep:
    """
    Check (1/tau) int rho0 theta^2 + 1/2 int kappa |grad theta|^2
    <= C + (1/tau) [int rho0 theta^2]_prev + C' int |grad v|^2 for one step.
    """
    grid = cfg.grid
    h = grid.h
    L = grid.length
    theta = state.theta
    thermal_before = float(grid.integrate(state_prev.rho_total * state_prev.theta ** 2))
    thermal_after = float(grid.integrate(state.rho_total * theta ** 2))
    dtheta = grid.interior_grad(theta)
    conduction = h * float(np.sum(grid.face_average(cfg.kappa(theta)) * dtheta ** 2))
    theta_sq_grad = h * float(np.sum(grid.face_average(theta ** 2) * dtheta ** 2))
    ends = theta[[0, -1]]
    boundary = cfg.lam * float(np.sum((cfg.theta0 - ends) * ends))

    log_rho = np.log(state.rho)
    v = log_rho[:, :-1] - log_rho[:, -1:]
    potential_gradient = h * float(np.sum(grid.interior_grad(v) ** 2))
    soret_bound = cfg.matrix_model.soret_bound(state.rho, theta)
    C_prime = 2.0 * (state.n - 1) * soret_bound ** 2 / cfg.kappa.c

    C = cfg.lam * cfg.theta0 ** 2
    if cfg.epsilon > 0:
        w = np.log(theta)
        d2 = grid.second_difference_matrix
        cross = h * float(np.sum(theta * (d2 @ w) * (d2 @ theta)))
        C += cfg.epsilon * (4.0 * L * cfg.theta0 ** 2 / np.e + 2.0 * max(0.0, -cross))

    tau = cfg.tau
    return TemperatureStep(
        tau=tau,
        thermal_before=thermal_before,
        thermal_after=thermal_after,
        conduction=conduction,
        theta_sq_grad=theta_sq_grad,
        boundary=boundary,
        potential_gradient=potential_gradient,
        soret_bound=soret_bound,
        C=C,
        C_prime=C_prime,
        lhs=thermal_after / tau + 0.5 * conduction,
        rhs=C + thermal_before / tau + C_prime * potential_gradient,
        tolerance=GATE_FACTOR * cfg.newton.tol * L * max(1.0, float(theta.max())),
    )


def _unpack(trajectory: Iterable[Tuple[float, MixtureState, Any]]):
    entries = list(trajectory)
    if not entries:
        raise ValueError("Trajectory is empty")
    times = np.array([entry[0] for entry in entries], dtype=float)
    states = [entry[1] for entry in entries]
    reports = [entry[2] if len(entry) > 2 else None for entry in entries]
    return times, states, reports


def _l16_3(times: np.ndarray, states: Sequence[MixtureState], grid: Grid1D) -> float:
    """Space-time quadrature of theta^{16/3}, piecewise constant in time (right endpoint)."""
    if len(states) < 2:
        return float(grid.integrate(states[0].theta ** (16.0 / 3.0)) ** (3.0 / 16.0))
    total = sum(
        (t1 - t0) * float(grid.integrate(state.theta ** (16.0 / 3.0)))
        for t0, t1, state in zip(times[:-1], times[1:], states[1:])
    )
    return float(total ** (3.0 / 16.0))


def temperature_estimate(trajectory, cfg: SchemeConfig) -> Tuple[TemperatureLedger, bool]:
    """
    Temperature estimate over consecutive accepted steps of a trajectory slice.

    Each step is checked with its own time step (t_k - t_{k-1}).
    """
    times, states, _ = _unpack(trajectory)
    grid = cfg.grid
    steps = [
        temperature_step(prev, cur, cfg.with_tau(float(t1 - t0)))
        for t0, t1, prev, cur in zip(times[:-1], times[1:], states[:-1], states[1:])
    ]
    ledger = TemperatureLedger(
        thermal=np.array([s.thermal_after for s in steps]),
        conduction=np.array([s.conduction for s in steps]),
        theta_sq_grad=np.array([s.theta_sq_grad for s in steps]),
        boundary=np.array([s.boundary for s in steps]),
        l16_3_norm=_l16_3(times, states, grid),
        C=max((s.C for s in steps), default=0.0),
        C_prime=max((s.C_prime for s in steps), default=0.0),
        min_margin=min((s.margin for s in steps), default=0.0),
        steps=steps,
    )
    return ledger, all(s.passed for s in steps)


@dataclass(frozen=True)
class ConservationReport:
    """Mass and energy series of a trajectory."""
    times: np.ndarray
    masses: np.ndarray  # (T, n)
    energy: np.ndarray  # (T,)
    max_mass_drift: np.ndarray  # relative, per species
    max_energy_drift: float
    max_total_density_deviation: float
    flags: List[str] = field(default_factory=list)
    # max over steps of |d mass_i| / (tau eps int |v_i|); eps > 0 runs only
    regularized_drift_ratio: Optional[np.ndarray] = None


def _regularized_drift(times, states, masses, grid: Grid1D, cfg: SchemeConfig):
    """Per-step mass change against its bound tau eps int |v_i| (the eps v_i term tested with 1)."""
    n = masses.shape[1]
    ratio = np.zeros(n - 1)
    flags = []
    for k in range(1, len(states)):
        tau = times[k] - times[k - 1]
        log_rho = np.log(states[k].rho)
        v = log_rho[:, :-1] - log_rho[:, -1:]
        bound = tau * cfg.epsilon * grid.integrate(np.abs(v))
        change = np.abs(masses[k, :-1] - masses[k - 1, :-1])
        slack = tau * GATE_FACTOR * cfg.newton.tol * grid.length
        ratio = np.maximum(ratio, change / np.maximum(bound, np.finfo(float).tiny))
        for i in np.flatnonzero(change > bound + slack):
            flags.append(f"mass_{i + 1} changed by {change[i]:.3e} at t={times[k]:.6g}, "
                         f"above tau eps int|v| = {bound[i]:.3e}")
    return ratio, flags


def conservation_report(trajectory, grid: Grid1D, cfg: Optional[SchemeConfig] = None) -> ConservationReport:
    """
    Species mass and total energy series plus the pointwise closure deviation.

    With a ``cfg`` describing r = 0 and eps = 0, mass drift beyond 1e-10
    relative is flagged; energy drift is flagged too when lam = 0. With
    r = 0 and eps > 0, each step's change of mass_i (i < n) is flagged when
    it exceeds tau eps int |v_i| plus the solver tolerance.
    """
    times, states, _ = _unpack(trajectory)
    masses = np.array([grid.integrate(s.rho) for s in states])
    energy = np.array([float(grid.integrate(s.rho_total * s.theta)) for s in states])
    mass_drift = np.abs(masses - masses[0]).max(axis=0) / np.abs(masses[0])
    energy_drift = float(np.abs(energy - energy[0]).max() / abs(energy[0]))
    deviation = max(float(np.abs(s.rho[:, :-1].sum(axis=1) + s.rho[:, -1] - s.rho_total).max()) for s in states)

    flags = []
    drift_ratio = None
    if cfg is not None and not cfg.reaction.active:
        if cfg.epsilon == 0:
            for i, drift in enumerate(mass_drift):
                if drift > CONSERVATION_TOLERANCE:
                    flags.append(f"mass_{i + 1} drifted by {drift:.3e} (relative)")
            if cfg.lam == 0 and energy_drift > CONSERVATION_TOLERANCE:
                flags.append(f"energy drifted by {energy_drift:.3e} (relative)")
        else:
            drift_ratio, drift_flags = _regularized_drift(times, states, masses, grid, cfg)
            flags.extend(drift_flags)
    return ConservationReport(
        times=times,
        masses=masses,
        energy=energy,
        max_mass_drift=mass_drift,
        max_energy_drift=energy_drift,
        max_total_density_deviation=deviation,
        flags=flags,
        regularized_drift_ratio=drift_ratio,
    )


def norms_report(trajectory, grid: Grid1D) -> Dict[str, Any]:
    """Informational norms: sup_t int theta^2, int int theta^2 |grad theta|^2, L^{16/3}(theta), sup rho_i."""
    times, states, _ = _unpack(trajectory)
    theta_l2 = max(float(grid.integrate(s.theta ** 2)) for s in states)
    gradient_term = sum(
        (t1 - t0) * grid.h * float(np.sum(grid.face_average(s.theta ** 2) * grid.interior_grad(s.theta) ** 2))
        for t0, t1, s in zip(times[:-1], times[1:], states[1:])
    )
    return {
        "sup_theta_l2": theta_l2,
        "theta_sq_grad": float(gradient_term),
        "theta_l16_3": _l16_3(times, states, grid),
        "sup_rho": np.max([s.rho.max(axis=0) for s in states], axis=0),
    }
