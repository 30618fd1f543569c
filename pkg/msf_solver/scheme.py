"""
Implicit Euler step in entropy variables.

Unknowns per node k are y_k = (v_1..v_{n-1}, w), stacked node-major. The
mass rows (species 1..n-1) and the energy row are two-point flux finite
volumes with face-averaged coefficients:

    mass:   (rho_i - rho_i_prev)/tau + div J_i + eps (B v_i + v_i) - r_i
    energy: rho0 (theta - theta_prev)/tau + div J_e + eps (H + P + (theta0 + theta)(w - w0))

with J_i = -sum_j C_ij g_j - M_i,f grad(e^{-w}) and
J_e = -kappa_f grad(theta) - D.g. The driving force g is grad v
(potential form) or grad log rho (density form). Mass fluxes vanish on the
boundary faces; the energy flux there is the Robin exchange with theta0.
The eps-terms are the bilaplacian B = D2^T D2 on v, H = D2^T(e^w D2 w),
and P, the divergence of theta_f |grad w|^2 grad w.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import SchemeConfig
from .diagnostics import EntropyLedger, TemperatureStep, entropy_balance, temperature_step
from .exceptions import (
    DomainError,
    NonConvergenceError,
    SingularityError,
    SolverError,
    StructuralViolationError,
)
from .logger import get_library_logger, step_logger
from .retry_utils import calculate_retry_tau, handle_step_retry
from .thermo import EntropyState, MixtureState, densities_from_potentials, log_mean, potentials_from_densities

MAX_BACKTRACKS = 30
# Nonlinear solve failures that trigger a smaller step
_STEP_FAILURES = (NonConvergenceError, SolverError, SingularityError, DomainError)
_TRIAL_FAILURES = (SolverError, SingularityError, DomainError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class StepReport:
    """Outcome of one accepted time step."""
    t: float
    tau: float
    halvings: int
    solver: str  # "newton" or "picard"
    newton_iterations: int
    picard_iterations: int
    residual_norm: float
    entropy_before: float
    entropy_after: float
    entropy_production: float
    entropy_ledger: EntropyLedger
    entropy_pass: bool
    temperature: TemperatureStep
    masses: np.ndarray
    energy: float
    min_rho: np.ndarray
    max_rho: np.ndarray
    min_theta: float
    max_theta: float
    boundary_heat_exchange: float

    @property
    def positivity_pass(self) -> bool:
        return bool(np.all(self.min_rho > 0) and self.min_theta > 0)

    @property
    def temperature_pass(self) -> bool:
        return self.temperature.passed

    def gates(self) -> dict:
        return {
            "positivity": self.positivity_pass,
            "entropy_balance": self.entropy_pass,
            "temperature_estimate": self.temperature_pass,
        }

    def violations(self) -> List[str]:
        return [name for name, passed in self.gates().items() if not passed]


@dataclass
class Trajectory:
    """Accepted states of a run; the initial entry has no report."""
    times: List[float] = field(default_factory=list)
    states: List[MixtureState] = field(default_factory=list)
    reports: List[Optional[StepReport]] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    def append(self, t: float, state: MixtureState, report: Optional[StepReport]) -> None:
        self.times.append(t)
        self.states.append(state)
        self.reports.append(report)

    def __iter__(self) -> Iterator[Tuple[float, MixtureState, Optional[StepReport]]]:
        return iter(zip(self.times, self.states, self.reports))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> MixtureState:
        return self.states[-1]


@dataclass
class _Nodal:
    v: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    log_rho: np.ndarray
    M: np.ndarray
    M_soret: np.ndarray
    kappa: np.ndarray


class StepProblem:
    """Residual and Jacobian of one step, with the previous state fixed."""

    def __init__(self, y_prev: EntropyState, cfg: SchemeConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.n = y_prev.n
        self.nv = self.n - 1
        self.rho_total = y_prev.rho_total
        self.rho_prev = densities_from_potentials(y_prev.v, self.rho_total)
        self.theta_prev = np.exp(y_prev.w)

    def state(self, y: np.ndarray) -> EntropyState:
        return EntropyState.from_vector(y, self.n, self.rho_total)

    def _nodal(self, y: EntropyState) -> _Nodal:
        rho = densities_from_potentials(y.v, self.rho_total)
        theta = np.exp(y.w)
        M, M_soret = self.cfg.matrix_model.evaluate(rho, theta)
        return _Nodal(y.v, y.w, rho, theta, np.log(rho), M, M_soret, self.cfg.kappa(theta))

    def _driving(self, nd: _Nodal):
        """Face driving forces g, mass coefficients C and Dufour vector D."""
        grid, nv = self.grid, self.nv
        cfg = self.cfg
        if cfg.formulation == "potential":
            return (grid.interior_grad(nd.v),
                    grid.face_average(nd.M)[:, :nv, :nv],
                    grid.face_average(nd.M_soret)[:, :nv])
        if cfg.density_mean == "logarithmic":
            # grad rho_j / log-mean(rho_j) is exactly the face difference of log rho_j
            means = log_mean(nd.rho[:-1], nd.rho[1:])
            return (grid.interior_grad(nd.rho) / means,
                    grid.face_average(nd.M)[:, :nv, :],
                    grid.face_average(nd.M_soret))
        return (grid.interior_grad(nd.rho),
                grid.face_average(nd.M / nd.rho[:, None, :])[:, :nv, :],
                grid.face_average(nd.M_soret / nd.rho))

    def _assemble(self, nd: _Nodal) -> np.ndarray:
        cfg, grid, nv = self.cfg, self.grid, self.nv
        cells = grid.cells
        g, C, D = self._driving(nd)
        soret = grid.face_average(nd.M_soret)[:, :nv]
        du = grid.interior_grad(np.exp(-nd.w))

        mass_flux = np.zeros((cells + 1, nv))
        mass_flux[1:-1] = -np.einsum("fij,fj->fi", C, g) - soret * du[:, None]
        energy_flux = np.zeros(cells + 1)
        energy_flux[1:-1] = (-grid.face_average(nd.kappa) * grid.interior_grad(nd.theta)
                             - np.einsum("fj,fj->f", D, g))
        energy_flux[0] = cfg.lam * (cfg.theta0 - nd.theta[0])
        energy_flux[-1] = -cfg.lam * (cfg.theta0 - nd.theta[-1])

        R = np.empty((cells, self.n))
        R[:, :nv] = (nd.rho[:, :nv] - self.rho_prev[:, :nv]) / cfg.tau + grid.div_flux(mass_flux)
        R[:, nv] = self.rho_total * (nd.theta - self.theta_prev) / cfg.tau + grid.div_flux(energy_flux)
        if cfg.reaction.active:
            R[:, :nv] -= cfg.reaction.rates(nd.log_rho)[:, :nv]
        if cfg.epsilon > 0:
            eps = cfg.epsilon
            R[:, :nv] += eps * (grid.discrete_bilaplacian(nd.v) + nd.v)
            d2 = grid.second_difference_matrix
            hessian = d2.T @ (np.exp(nd.w) * (d2 @ nd.w))
            p_flux = np.zeros(cells + 1)
            p_flux[1:-1] = grid.face_average(nd.theta) * grid.interior_grad(nd.w) ** 3
            R[:, nv] += eps * (hessian - grid.div_flux(p_flux) + (cfg.theta0 + nd.theta) * (nd.w - cfg.w0))
        return R

    def residual(self, y: np.ndarray) -> np.ndarray:
        """
        Stacked residual vector.

        Raises:
            SolverError: If an intermediate is not finite (names the first node)
        """
        with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
            R = self._assemble(self._nodal(self.state(y)))
        bad = ~np.isfinite(R)
        if bad.any():
            node = int(np.argmax(bad.any(axis=1)))
            raise SolverError(f"Non-finite residual at node {node}", node=node)
        return R.ravel()

    def jacobian(self, y: np.ndarray, frozen: bool = False) -> sp.csr_matrix:
        """
        Analytic Jacobian of :meth:`residual`.

        With ``frozen`` the derivatives of M, M_soret and kappa (and of the
        other state-dependent coefficients) are dropped: the operator of the
        frozen-coefficient linearisation used by the Picard iteration.
        """
        cfg, grid, nv, n = self.cfg, self.grid, self.nv, self.n
        h = grid.h
        cells = grid.cells
        nd = self._nodal(self.state(y))
        eye = np.eye(n)

        shares = nd.rho / self.rho_total[:, None]
        dlog = np.zeros((cells, n, n))
        dlog[:, :, :nv] = eye[None, :, :nv] - shares[:, None, :nv]
        drho = nd.rho[:, :, None] * dlog

        if frozen:
            dM = np.zeros((cells, n, n, n))
            dMs = np.zeros((cells, n, n))
            dkappa = np.zeros(cells)
        else:
            dM_drho, dMs_drho, dM_dtheta, dMs_dtheta = cfg.matrix_model.derivatives(nd.rho, nd.theta)
            dM = np.einsum("kijm,kmc->kijc", dM_drho, drho)
            dM[..., nv] += dM_dtheta * nd.theta[:, None, None]
            dMs = np.einsum("kim,kmc->kic", dMs_drho, drho)
            dMs[..., nv] += dMs_dtheta * nd.theta[:, None]
            dkappa = cfg.kappa.derivative(nd.theta) * nd.theta

        g, C, D = self._driving(nd)
        faces = cells - 1
        if cfg.formulation == "potential":
            dg_right = np.zeros((faces, nv, n))
            dg_right[:, :, :nv] = np.eye(nv) / h
            dg_left = -dg_right
            dC = 0.5 * dM[:, :nv, :nv, :]
            dD = 0.5 * dMs[:, :nv, :]
        elif cfg.density_mean == "logarithmic":
            dg_left = -dlog[:-1] / h
            dg_right = dlog[1:] / h
            dC = 0.5 * dM[:, :nv, :, :]
            dD = 0.5 * dMs
        else:
            dg_left = -drho[:-1] / h
            dg_right = drho[1:] / h
            if frozen:
                dC = np.zeros((cells, nv, n, n))
                dD = np.zeros((cells, n, n))
            else:
                ratio = (dM / nd.rho[:, None, :, None]
                         - (nd.M / nd.rho[:, None, :] ** 2)[..., None] * drho[:, None, :, :])
                dC = 0.5 * ratio[:, :nv]
                dD = 0.5 * (dMs / nd.rho[:, :, None] - (nd.M_soret / nd.rho ** 2)[:, :, None] * drho)

        soret = grid.face_average(nd.M_soret)[:, :nv]
        dsoret = 0.5 * dMs[:, :nv, :]
        u = np.exp(-nd.w)
        du = grid.interior_grad(u)
        ddu_left = np.zeros((faces, n))
        ddu_right = np.zeros((faces, n))
        ddu_left[:, nv] = u[:-1] / h
        ddu_right[:, nv] = -u[1:] / h

        kappa_faces = grid.face_average(nd.kappa)
        dtheta = grid.interior_grad(nd.theta)
        ddtheta_left = np.zeros((faces, n))
        ddtheta_right = np.zeros((faces, n))
        ddtheta_left[:, nv] = -nd.theta[:-1] / h
        ddtheta_right[:, nv] = nd.theta[1:] / h
        dkappa_faces = np.zeros((cells, n))
        dkappa_faces[:, nv] = 0.5 * dkappa

        def face_flux_derivative(side: slice, dg, ddu, ddtheta):
            dF = np.empty((faces, n, n))
            dF[:, :nv, :] = (-np.einsum("fijc,fj->fic", dC[side], g)
                             - np.einsum("fij,fjc->fic", C, dg)
                             - dsoret[side] * du[:, None, None]
                             - soret[:, :, None] * ddu[:, None, :])
            dF[:, nv, :] = (-dkappa_faces[side] * dtheta[:, None]
                            - kappa_faces[:, None] * ddtheta
                            - np.einsum("fjc,fj->fc", dD[side], g)
                            - np.einsum("fj,fjc->fc", D, dg))
            return dF

        left, right = slice(None, -1), slice(1, None)
        dF_left = face_flux_derivative(left, dg_left, ddu_left, ddtheta_left)
        dF_right = face_flux_derivative(right, dg_right, ddu_right, ddtheta_right)

        # bands[k, d + 2] = dR_k / dy_{k+d}
        bands = np.zeros((cells, 5, n, n))
        bands[:-1, 2] += dF_left / h
        bands[:-1, 3] += dF_right / h
        bands[1:, 1] -= dF_left / h
        bands[1:, 2] -= dF_right / h

        bands[:, 2, :nv, :] += drho[:, :nv, :] / cfg.tau
        bands[:, 2, nv, nv] += self.rho_total * nd.theta / cfg.tau
        if cfg.reaction.active:
            rate = np.einsum("ij,kjc->kic", cfg.reaction.rate_jacobian(n), dlog)
            bands[:, 2, :nv, :] -= rate[:, :nv, :]
        bands[0, 2, nv, nv] += cfg.lam * nd.theta[0] / h
        bands[-1, 2, nv, nv] += cfg.lam * nd.theta[-1] / h

        if cfg.epsilon > 0:
            self._add_regularization(bands, nd, frozen)
        return _bands_to_csr(bands)

    def _add_regularization(self, bands: np.ndarray, nd: _Nodal, frozen: bool) -> None:
        cfg, grid, nv = self.cfg, self.grid, self.nv
        eps = cfg.epsilon
        h = grid.h
        species = np.arange(nv)

        _add_matrix_diagonals(bands, grid.bilaplacian_matrix, eps, species, species)
        bands[:, 2, species, species] += eps

        d2 = grid.second_difference_matrix
        weight = np.exp(nd.w)
        hessian = d2.T @ sp.diags(weight) @ d2
        if not frozen:
            hessian = hessian + d2.T @ sp.diags(weight * (d2 @ nd.w))
        _add_matrix_diagonals(bands, hessian, eps, np.array([nv]), np.array([nv]))

        dw = grid.interior_grad(nd.w)
        mean_theta = grid.face_average(nd.theta)
        if frozen:
            dp_left = -mean_theta * dw ** 2 / h
            dp_right = mean_theta * dw ** 2 / h
        else:
            dp_left = 0.5 * nd.theta[:-1] * dw ** 3 - 3.0 * mean_theta * dw ** 2 / h
            dp_right = 0.5 * nd.theta[1:] * dw ** 3 + 3.0 * mean_theta * dw ** 2 / h
        bands[:-1, 2, nv, nv] -= eps * dp_left / h
        bands[:-1, 3, nv, nv] -= eps * dp_right / h
        bands[1:, 1, nv, nv] += eps * dp_left / h
        bands[1:, 2, nv, nv] += eps * dp_right / h

        lower = cfg.theta0 + nd.theta
        if not frozen:
            lower = lower + nd.theta * (nd.w - cfg.w0)
        bands[:, 2, nv, nv] += eps * lower


def _add_matrix_diagonals(bands: np.ndarray, matrix: sp.spmatrix, scale: float,
                          rows: np.ndarray, cols: np.ndarray) -> None:
    """Scatter the five central diagonals of a nodal N x N matrix into block entries (rows, cols)."""
    cells = bands.shape[0]
    for d in range(-2, 3):
        diagonal = scale * matrix.diagonal(d)
        if d >= 0:
            bands[:cells - d, d + 2, rows, cols] += diagonal[:, None]
        else:
            bands[-d:, d + 2, rows, cols] += diagonal[:, None]


def _bands_to_csr(bands: np.ndarray) -> sp.csr_matrix:
    cells, _, n, _ = bands.shape
    rows, cols, values = [], [], []
    component = np.arange(n)
    for d in range(-2, 3):
        nodes = np.arange(max(0, -d), cells - max(0, d))
        block = bands[nodes, d + 2]
        r = nodes[:, None, None] * n + component[None, :, None]
        c = (nodes + d)[:, None, None] * n + component[None, None, :]
        rows.append(np.broadcast_to(r, block.shape).ravel())
        cols.append(np.broadcast_to(c, block.shape).ravel())
        values.append(block.ravel())
    size = cells * n
    matrix = sp.csr_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    matrix.eliminate_zeros()
    return matrix


def residual(y: EntropyState, y_prev: EntropyState, cfg: SchemeConfig) -> np.ndarray:
    """Residual of the implicit step, stacked node-major."""
    return StepProblem(y_prev, cfg).residual(y.as_vector())


def jacobian(y: EntropyState, y_prev: EntropyState, cfg: SchemeConfig, frozen: bool = False) -> sp.csr_matrix:
    """Sparse block-pentadiagonal Jacobian of :func:`residual` (block-tridiagonal when eps = 0)."""
    return StepProblem(y_prev, cfg).jacobian(y.as_vector(), frozen=frozen)


def _norm(R: np.ndarray) -> float:
    return float(np.abs(R).max())


def _linear_solve(A: sp.csr_matrix, b: np.ndarray, iteration: int, norm: float) -> np.ndarray:
    try:
        x = spla.spsolve(A.tocsc(), b)
    except (RuntimeError, np.linalg.LinAlgError) as e:
        raise NonConvergenceError(f"Linear solve failed: {e}", iterations=iteration, last_residual=norm) from e
    if not np.all(np.isfinite(x)):
        raise NonConvergenceError("Singular linearisation", iterations=iteration, last_residual=norm)
    return x


def _newton(problem: StepProblem, y0: np.ndarray) -> Tuple[np.ndarray, int, float]:
    """Damped Newton with residual-norm backtracking; returns (y, iterations, residual norm)."""
    logger = get_library_logger()
    settings = problem.cfg.newton
    y = y0.copy()
    R = problem.residual(y)
    norm = _norm(R)
    for iteration in range(settings.max_iter):
        if norm <= settings.tol:
            return y, iteration, norm
        delta = _linear_solve(problem.jacobian(y), -R, iteration, norm)

        damping = 1.0
        for _ in range(MAX_BACKTRACKS + 1):
            trial = y + damping * delta
            try:
                R_trial = problem.residual(trial)
                trial_norm = _norm(R_trial)
            except _TRIAL_FAILURES:
                trial_norm = np.inf
            if trial_norm < norm:
                break
            damping *= 0.5
            if damping < settings.damping_min:
                raise NonConvergenceError(
                    f"Line search stalled at residual {norm:.3e}", iterations=iteration + 1, last_residual=norm
                )
        else:
            raise NonConvergenceError(
                f"Line search stalled at residual {norm:.3e}", iterations=iteration + 1, last_residual=norm
            )
        logger.debug(f"Newton {iteration + 1}: |R| {norm:.3e} -> {trial_norm:.3e} (damping {damping:.3g})")
        y, R, norm = trial, R_trial, trial_norm

    if norm <= settings.tol:
        return y, settings.max_iter, norm
    raise NonConvergenceError(
        f"Newton did not converge in {settings.max_iter} iterations (|R| = {norm:.3e})",
        iterations=settings.max_iter,
        last_residual=norm,
    )


def _picard(problem: StepProblem, y0: np.ndarray) -> Tuple[np.ndarray, int, float]:
    """Frozen-coefficient fixed point y <- y - A(y)^{-1} R(y)."""
    logger = get_library_logger()
    settings = problem.cfg.newton
    y = y0.copy()
    R = problem.residual(y)
    norm = _norm(R)
    for iteration in range(settings.picard_max_iter):
        if norm <= settings.tol:
            return y, iteration, norm
        y = y - _linear_solve(problem.jacobian(y, frozen=True), R, iteration, norm)
        try:
            R = problem.residual(y)
        except SolverError as e:
            raise NonConvergenceError(str(e), iterations=iteration + 1, last_residual=norm) from e
        norm = _norm(R)
        logger.debug(f"Picard {iteration + 1}: |R| = {norm:.3e}")
    if norm <= settings.tol:
        return y, settings.picard_max_iter, norm
    raise NonConvergenceError(
        f"Picard iteration did not converge in {settings.picard_max_iter} iterations (|R| = {norm:.3e})",
        iterations=settings.picard_max_iter,
        last_residual=norm,
    )


def solve_step(y_prev: EntropyState, cfg: SchemeConfig, t: float = float("nan")) -> Tuple[EntropyState, StepReport]:
    """
    Advance one implicit Euler step of size cfg.tau.

    Damped Newton from y_prev; on failure, the frozen-coefficient Picard
    iteration when cfg.picard_fallback is set.

    Raises:
        NonConvergenceError: If no solver reaches newton.tol
    """
    logger = get_library_logger()
    problem = StepProblem(y_prev, cfg)
    start = y_prev.as_vector()
    newton_iterations = picard_iterations = 0
    solver = "newton"
    try:
        y_vec, newton_iterations, norm = _newton(problem, start)
    except NonConvergenceError as e:
        if not cfg.picard_fallback:
            raise
        logger.warning(f"Newton failed ({e}); falling back to Picard iteration")
        newton_iterations = e.iterations
        solver = "picard"
        y_vec, picard_iterations, norm = _picard(problem, start)

    y = problem.state(y_vec)
    return y, build_report(y_prev, y, cfg, t=t, solver=solver, newton_iterations=newton_iterations,
                           picard_iterations=picard_iterations, residual_norm=norm)


def build_report(y_prev: EntropyState, y: EntropyState, cfg: SchemeConfig, *, t: float, solver: str,
                 newton_iterations: int, picard_iterations: int, residual_norm: float,
                 halvings: int = 0) -> StepReport:
    """Evaluate the diagnostics gates of an accepted step."""
    grid = cfg.grid
    state = y.to_mixture()
    ledger, entropy_pass = entropy_balance(y_prev, y, cfg)
    temperature = temperature_step(y_prev.to_mixture(), state, cfg)
    ends = state.theta[[0, -1]]
    return StepReport(
        t=t,
        tau=cfg.tau,
        halvings=halvings,
        solver=solver,
        newton_iterations=newton_iterations,
        picard_iterations=picard_iterations,
        residual_norm=residual_norm,
        entropy_before=ledger.entropy_before,
        entropy_after=ledger.entropy_after,
        entropy_production=ledger.total_production,
        entropy_ledger=ledger,
        entropy_pass=entropy_pass,
        temperature=temperature,
        masses=grid.integrate(state.rho),
        energy=float(grid.integrate(state.rho_total * state.theta)),
        min_rho=state.rho.min(axis=0),
        max_rho=state.rho.max(axis=0),
        min_theta=float(state.theta.min()),
        max_theta=float(state.theta.max()),
        boundary_heat_exchange=cfg.lam * float(np.sum(cfg.theta0 - ends)),
    )


StepCallback = Callable[[float, MixtureState, Optional[StepReport]], None]


def run(
    initial: MixtureState,
    cfg: SchemeConfig,
    t_end: float,
    callbacks: Sequence[StepCallback] = (),
    strict: bool = False,
) -> Trajectory:
    """
    Integrate from t = 0 to t_end with fixed steps cfg.tau.

    A step whose solve fails is retried with tau halved, up to
    cfg.max_halvings times; the base step resumes afterwards. Callbacks
    receive (t, state, report) for the initial state (report None) and
    every accepted step. Gate failures are collected in
    ``Trajectory.violations`` and logged; they do not stop the run
    unless ``strict`` is set.

    Raises:
        AbortError: If a step fails after exhausting the halving budget
        StructuralViolationError: In strict mode, on the first failed gate
    """
    logger = get_library_logger()
    cfg.validate()
    y = potentials_from_densities(initial)[0]
    trajectory = Trajectory()
    t = 0.0
    trajectory.append(t, initial, None)
    for callback in callbacks:
        callback(t, initial, None)

    logger.info(f"Run: {initial.cells} cells, n={initial.n}, tau={cfg.tau:g}, t_end={t_end:g}")
    step = 0
    while t_end - t > 1e-10 * cfg.tau:
        base_tau = min(cfg.tau, t_end - t)
        attempt = 0
        while True:
            tau = calculate_retry_tau(attempt, base_tau)
            try:
                y_new, report = solve_step(y, cfg.with_tau(tau), t=t + tau)
                break
            except _STEP_FAILURES as e:
                attempt += 1
                handle_step_retry(attempt, t, tau, cfg.max_halvings, step_logger(step + 1, t), e)

        step += 1
        t = t + tau
        report = replace(report, t=t, halvings=attempt)
        state = y_new.to_mixture()
        for gate in report.violations():
            message = f"step {step} (t={t:.6g}): {gate} gate failed"
            step_logger(step, t).warning(f"{gate} gate failed")
            trajectory.violations.append(message)
            if strict:
                raise StructuralViolationError(message, gate=gate, step=step)
        trajectory.append(t, state, report)
        for callback in callbacks:
            callback(t, state, report)
        y = y_new

    logger.info(f"Run finished at t={t:g} after {step} steps ({len(trajectory.violations)} gate violations)")
    return trajectory
