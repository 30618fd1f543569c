import unittest
from unittest.mock import patch

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.testing import assert_allclose, assert_array_equal

from msf_solver import scheme
from msf_solver.benchmarks import benchmark_config
from msf_solver.diagnostics import conservation_report
from msf_solver.exceptions import AbortError, NonConvergenceError, SolverError, StructuralViolationError
from msf_solver.grid import Grid1D
from msf_solver.scheme import StepProblem, jacobian, residual, run, solve_step
from msf_solver.thermo import EntropyState, potentials_from_densities, total_density


def setup_step(name, overrides=None):
    run_config = benchmark_config(name, overrides)
    cfg = run_config.to_scheme_config()
    y_prev = potentials_from_densities(run_config.initial_state())[0]
    return run_config, cfg, y_prev


def finite_difference_jacobian(problem, y, step=1e-6):
    columns = []
    for c in range(y.size):
        e = np.zeros_like(y)
        e[c] = step
        columns.append((problem.residual(y + e) - problem.residual(y - e)) / (2.0 * step))
    return np.column_stack(columns)


class TestResidual(unittest.TestCase):
    def test_uniform_state_is_stationary(self):
        _, cfg, y_prev = setup_step("equilibrium")
        assert_array_equal(residual(y_prev, y_prev, cfg), 0.0)

    def test_robin_boundary_residual(self):
        _, cfg, y_prev = setup_step("equilibrium", {"initial.theta.value": 0.8})
        R = residual(y_prev, y_prev, cfg).reshape(cfg.grid.cells, 3)
        expected = -0.5 * (1.0 - 0.8) / cfg.grid.h
        self.assertAlmostEqual(R[0, 2], expected, places=12)
        self.assertAlmostEqual(R[-1, 2], expected, places=12)
        assert_allclose(R[1:-1, 2], 0.0, atol=1e-14)
        assert_allclose(R[:, :2], 0.0, atol=1e-14)

    def test_formulations_agree_facewise(self):
        overrides = {"domain.cells": 12}
        _, potential_cfg, y_prev = setup_step("soret", overrides)
        _, density_cfg, _ = setup_step("soret", dict(overrides, formulation="density"))
        rng = np.random.default_rng(4)
        y = EntropyState.from_vector(y_prev.as_vector() + 0.2 * rng.normal(size=12 * 3), 3, y_prev.rho_total)
        R_potential = residual(y, y_prev, potential_cfg)
        R_density = residual(y, y_prev, density_cfg)
        assert_allclose(R_density, R_potential, atol=1e-9 * np.abs(R_potential).max())

    def test_energy_regularization_on_affine_log_temperature(self):
        # D2 w vanishes, so only the p-Laplacian and lower-order terms remain
        eps = 1e-2
        _, cfg, y_prev = setup_step("heating", {"domain.cells": 8, "epsilon": eps})
        _, plain_cfg, _ = setup_step("heating", {"domain.cells": 8})
        grid, n = cfg.grid, y_prev.n
        y = y_prev.as_vector().reshape(grid.cells, n).copy()
        y[:, -1] = 0.1 + 0.3 * grid.x
        state = EntropyState.from_vector(y.ravel(), n, y_prev.rho_total)
        extra = (residual(state, y_prev, cfg) - residual(state, y_prev, plain_cfg)).reshape(grid.cells, n)[:, -1]

        theta = np.exp(y[:, -1])
        p = np.zeros(grid.cells + 1)
        p[1:-1] = 0.5 * (theta[:-1] + theta[1:]) * 0.3 ** 3
        expected = eps * (-(p[1:] - p[:-1]) / grid.h + (cfg.theta0 + theta) * (y[:, -1] - cfg.w0))
        assert_allclose(extra, expected, rtol=1e-9, atol=1e-12)

    def test_energy_hessian_term_on_curved_log_temperature(self):
        eps = 1e-2
        _, cfg, y_prev = setup_step("heating", {"domain.cells": 8, "epsilon": eps})
        _, plain_cfg, _ = setup_step("heating", {"domain.cells": 8})
        grid, n = cfg.grid, y_prev.n
        y = y_prev.as_vector().reshape(grid.cells, n).copy()
        w = 0.5 * grid.x ** 2
        y[:, -1] = w
        state = EntropyState.from_vector(y.ravel(), n, y_prev.rho_total)
        extra = (residual(state, y_prev, cfg) - residual(state, y_prev, plain_cfg)).reshape(grid.cells, n)[:, -1]

        theta = np.exp(w)
        second = np.zeros(grid.cells)
        second[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / grid.h ** 2
        weighted = theta * second
        hessian = np.zeros(grid.cells)
        hessian[:-2] += weighted[1:-1]
        hessian[1:-1] -= 2.0 * weighted[1:-1]
        hessian[2:] += weighted[1:-1]
        hessian /= grid.h ** 2
        dw = (w[1:] - w[:-1]) / grid.h
        p = np.zeros(grid.cells + 1)
        p[1:-1] = 0.5 * (theta[:-1] + theta[1:]) * dw ** 3
        expected = eps * (hessian - (p[1:] - p[:-1]) / grid.h + (cfg.theta0 + theta) * (w - cfg.w0))
        assert_allclose(extra, expected, rtol=1e-9, atol=1e-10)

    def test_non_finite_residual_names_node(self):
        _, cfg, y_prev = setup_step("mixing", {"domain.cells": 8})
        y = y_prev.as_vector()
        y[1] = 800.0  # w at node 0
        with self.assertRaises(SolverError) as cm:
            StepProblem(y_prev, cfg).residual(y)
        self.assertEqual(cm.exception.node, 0)


class TestJacobian(unittest.TestCase):
    CASES = [
        ("soret", {}),
        ("soret", {"formulation": "density"}),
        ("soret", {"formulation": "density", "density_mean": "arithmetic"}),
        ("dufour", {"reaction.model": "linear_pi_q", "reaction.c_r": 0.5}),
        ("dufour", {"formulation": "density", "density_mean": "arithmetic"}),
        ("degenerate", {"formulation": "density"}),
        ("cooling", {}),
        ("smooth", {"formulation": "density"}),
    ]

    def check_against_differences(self, name, overrides, epsilon, cells=8):
        settings = {"domain.cells": cells, "time.tau": 1e-2, "boundary.lambda": 0.7,
                    "boundary.theta0": 1.2, "epsilon": epsilon}
        settings.update(overrides)
        _, cfg, y_prev = setup_step(name, settings)
        problem = StepProblem(y_prev, cfg)
        rng = np.random.default_rng(7)
        y = y_prev.as_vector() + 0.1 * rng.normal(size=y_prev.as_vector().size)
        exact = problem.jacobian(y).toarray()
        numeric = finite_difference_jacobian(problem, y)
        error = np.abs(exact - numeric).max()
        self.assertLessEqual(error, 1e-6 * np.abs(exact).max(), f"{name} {overrides} eps={epsilon} cells={cells}")

    def test_matches_finite_differences(self):
        for name, overrides in self.CASES:
            for cells in (8, 16):
                for epsilon in (0.0, 1e-3):
                    with self.subTest(benchmark=name, overrides=overrides, cells=cells, epsilon=epsilon):
                        self.check_against_differences(name, overrides, epsilon, cells)

    def test_bandwidth(self):
        for epsilon, width in ((0.0, 1), (1e-3, 2)):
            _, cfg, y_prev = setup_step("soret", {"domain.cells": 10, "epsilon": epsilon})
            coo = jacobian(y_prev, y_prev, cfg).tocoo()
            self.assertEqual(int(np.abs(coo.row // 3 - coo.col // 3).max()), width)

    def test_frozen_operator_with_constant_coefficients(self):
        # constant Pi model, uniform temperature: no coefficient derivative contributes
        _, cfg, y_prev = setup_step("heating", {"domain.cells": 8})
        full = jacobian(y_prev, y_prev, cfg).toarray()
        frozen = jacobian(y_prev, y_prev, cfg, frozen=True).toarray()
        assert_allclose(frozen, full, atol=1e-12 * np.abs(full).max())


class TestSolveStep(unittest.TestCase):
    def test_newton_step_passes_gates(self):
        _, cfg, y_prev = setup_step("mixing")
        y, report = solve_step(y_prev, cfg, t=cfg.tau)
        self.assertEqual(report.solver, "newton")
        self.assertLessEqual(report.residual_norm, cfg.newton.tol)
        self.assertEqual(report.violations(), [])
        self.assertLessEqual(report.entropy_after, report.entropy_before)
        assert_array_equal(total_density(y.to_mixture().rho), y_prev.rho_total)

    def test_picard_fallback(self):
        run_config, _, y_prev = setup_step("heating", {"newton.max_iter": 1})
        cfg = run_config.to_scheme_config()
        _, report = solve_step(y_prev, cfg)
        self.assertEqual(report.solver, "picard")
        self.assertGreater(report.picard_iterations, 0)
        self.assertLessEqual(report.residual_norm, cfg.newton.tol)

    def test_without_fallback_raises(self):
        _, cfg, y_prev = setup_step("heating", {"newton.max_iter": 1, "newton.picard_fallback": False})
        with self.assertRaises(NonConvergenceError):
            solve_step(y_prev, cfg)


class TestLinearHeatOracle(unittest.TestCase):
    def test_binary_model_matches_scalar_heat_solver(self):
        run_config = benchmark_config("binary_heat")
        cfg = run_config.to_scheme_config()
        initial = run_config.initial_state()
        trajectory = run(initial, cfg, run_config.time.t_end)
        self.assertEqual(len(trajectory), 101)

        grid = cfg.grid
        cells, h, tau = grid.cells, grid.h, cfg.tau
        main = np.full(cells, -2.0)
        main[[0, -1]] = -1.0
        laplacian = sp.diags([np.ones(cells - 1), main, np.ones(cells - 1)], [-1, 0, 1]) / h ** 2
        system = (sp.identity(cells) - tau * laplacian).tocsc()  # diffusivity 1/b = 1
        u = initial.rho[:, 0].copy()
        for _ in range(100):
            u = spla.spsolve(system, u)

        final = trajectory.final_state
        assert_allclose(final.rho[:, 0], u, atol=1e-8)
        assert_allclose(final.theta, 1.0, atol=1e-12)


class TestRun(unittest.TestCase):
    def test_conservation_without_exchange(self):
        run_config = benchmark_config("mixing", {"domain.cells": 16, "time.t_end": 0.2})
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertEqual(len(trajectory), 201)
        report = conservation_report(trajectory, cfg.grid, cfg)
        self.assertEqual(report.flags, [])
        self.assertLess(report.max_mass_drift.max(), 1e-10)
        self.assertLess(report.max_energy_drift, 1e-10)
        self.assertEqual(report.max_total_density_deviation, 0.0)
        entropy = [r.entropy_after for r in trajectory.reports[1:]]
        self.assertTrue(all(b <= a + 1e-12 for a, b in zip(entropy, entropy[1:])))

    def test_conservation_over_a_thousand_steps(self):
        run_config = benchmark_config("mixing", {"domain.cells": 8, "time.tau": 1e-4, "time.t_end": 0.1})
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertEqual(len(trajectory), 1001)
        self.assertEqual(trajectory.violations, [])
        report = conservation_report(trajectory, cfg.grid, cfg)
        self.assertEqual(report.flags, [])
        self.assertLess(report.max_mass_drift.max(), 1e-10)
        self.assertLess(report.max_energy_drift, 1e-10)
        self.assertEqual(report.max_total_density_deviation, 0.0)

    def test_regularized_run(self):
        run_config = benchmark_config("heating", {"domain.cells": 16, "time.t_end": 0.05, "epsilon": 1e-3})
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertEqual(trajectory.violations, [])
        w0 = np.log(1.5)
        for t0, t1, report in zip(trajectory.times, trajectory.times[1:], trajectory.reports[1:]):
            ledger = report.entropy_ledger
            self.assertAlmostEqual(ledger.slack, (t1 - t0) * 2.0 * 1e-3 * w0 ** 2 * 1.0, places=15)
            self.assertGreaterEqual(ledger.regularization, 0.0)
            self.assertLessEqual(ledger.balance, ledger.slack + ledger.tolerance)
        conservation = conservation_report(trajectory, cfg.grid, cfg)
        self.assertEqual(conservation.flags, [])
        # v_1 changes sign across the domain, so |int v_1| < int |v_1|
        self.assertTrue(np.all(conservation.regularized_drift_ratio < 1.0))

    def test_formulations_agree_along_trajectories(self):
        overrides = {"domain.cells": 16, "time.t_end": 0.02, "newton.tol": 1e-12}
        trajectories = []
        for formulation in ("potential", "density"):
            run_config = benchmark_config("soret", dict(overrides, formulation=formulation))
            cfg = run_config.to_scheme_config()
            trajectories.append(run(run_config.initial_state(), cfg, run_config.time.t_end))
        potential, density = trajectories
        self.assertEqual(len(potential), len(density))
        for a, b in zip(potential.states, density.states):
            assert_allclose(b.rho, a.rho, rtol=0, atol=1e-8)
            assert_allclose(b.theta, a.theta, rtol=0, atol=1e-8)

    def test_robin_relaxation(self):
        run_config = benchmark_config("equilibrium", {
            "domain.cells": 8, "time.tau": 0.1, "time.t_end": 10.0,
            "boundary.lambda": 1.0, "boundary.theta0": 1.0, "initial.theta.value": 0.5,
        })
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertEqual(trajectory.violations, [])
        self.assertLess(np.abs(trajectory.final_state.theta - 1.0).max(), 1e-6)

    def test_robin_energy_exchange_is_exact(self):
        run_config = benchmark_config("equilibrium", {
            "domain.cells": 8, "time.tau": 0.05, "time.t_end": 0.5, "newton.tol": 1e-12,
            "boundary.lambda": 0.5, "boundary.theta0": 2.0, "initial.theta.value": 1.0,
        })
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        for before, after in zip(trajectory.states, trajectory.states[1:]):
            energy_change = float(cfg.grid.integrate(after.rho_total * (after.theta - before.theta)))
            exchange = cfg.tau * cfg.lam * float(np.sum(cfg.theta0 - after.theta[[0, -1]]))
            self.assertAlmostEqual(energy_change, exchange, places=10)

    def test_uniform_recursion_when_conduction_dominates(self):
        run_config = benchmark_config("equilibrium", {
            "domain.cells": 8, "time.tau": 0.01, "time.t_end": 0.1,
            "kappa.c": 1000.0, "kappa.C": 1000.0,
            "boundary.lambda": 0.5, "boundary.theta0": 1.0, "initial.theta.value": 0.5,
        })
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        length, lam, tau = cfg.grid.length, cfg.lam, cfg.tau
        mean = 0.5
        for state in trajectory.states[1:]:
            mean = (length * mean + 2.0 * tau * lam * cfg.theta0) / (length + 2.0 * tau * lam)
            self.assertAlmostEqual(float(state.theta.mean()), mean, delta=5e-5)

    def test_callbacks_see_every_state(self):
        run_config = benchmark_config("mixing", {"domain.cells": 8, "time.t_end": 0.005})
        seen = []
        run(run_config.initial_state(), run_config.to_scheme_config(), run_config.time.t_end,
            callbacks=[lambda t, state, report: seen.append((t, report is None))])
        self.assertEqual(len(seen), 6)
        self.assertTrue(seen[0][1])
        self.assertFalse(any(flag for _, flag in seen[1:]))

    def test_failed_step_is_retried_with_half_tau(self):
        run_config = benchmark_config("mixing", {"domain.cells": 8, "time.t_end": 0.002})
        cfg = run_config.to_scheme_config()
        real_solve = scheme.solve_step
        calls = []

        def flaky(y_prev, step_cfg, t=float("nan")):
            calls.append(step_cfg.tau)
            if len(calls) == 1:
                raise NonConvergenceError("forced", iterations=1, last_residual=1.0)
            return real_solve(y_prev, step_cfg, t=t)

        with patch.object(scheme, "solve_step", side_effect=flaky):
            trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertAlmostEqual(calls[1], cfg.tau / 2)
        self.assertEqual(trajectory.reports[1].halvings, 1)
        self.assertAlmostEqual(trajectory.times[1], cfg.tau / 2)
        self.assertAlmostEqual(trajectory.times[-1], run_config.time.t_end)

    def test_abort_after_halving_budget(self):
        run_config = benchmark_config("mixing", {"domain.cells": 8, "newton.max_halvings": 2})
        cfg = run_config.to_scheme_config()
        failure = NonConvergenceError("forced", iterations=1, last_residual=1.0)
        with patch.object(scheme, "solve_step", side_effect=failure) as mocked:
            with self.assertRaises(AbortError) as cm:
                run(run_config.initial_state(), cfg, run_config.time.t_end)
        self.assertEqual(mocked.call_count, 3)
        self.assertEqual(cm.exception.t, 0.0)

    def test_strict_mode_raises_on_gate_failure(self):
        run_config = benchmark_config("mixing", {"domain.cells": 8, "time.t_end": 0.002})
        cfg = run_config.to_scheme_config()
        with patch.object(scheme.StepReport, "violations", return_value=["entropy_balance"]):
            with self.assertRaises(StructuralViolationError) as cm:
                run(run_config.initial_state(), cfg, run_config.time.t_end, strict=True)
        self.assertEqual(cm.exception.gate, "entropy_balance")
        self.assertEqual(cm.exception.step, 1)


class TestGrid(unittest.TestCase):
    def test_scheme_config_on_other_grid(self):
        run_config = benchmark_config("mixing")
        cfg = run_config.to_scheme_config(grid=Grid1D(1.0, 64))
        self.assertEqual(cfg.grid.cells, 64)
        self.assertEqual(run_config.initial_state(cfg.grid).cells, 64)


if __name__ == "__main__":
    unittest.main()
