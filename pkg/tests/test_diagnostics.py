import unittest

import numpy as np
from numpy.testing import assert_allclose

from msf_solver.benchmarks import BATTERY, benchmark_config
from msf_solver.diagnostics import (
    conservation_report,
    entropy_balance,
    entropy_functional,
    norms_report,
    temperature_estimate,
    temperature_step,
    weighted_projection_production,
)
from msf_solver.grid import Grid1D
from msf_solver.scheme import run, solve_step
from msf_solver.thermo import MixtureState, potentials_from_densities


def uniform_state(cells=8, rho=(0.25, 0.75), theta=1.0):
    return MixtureState.from_densities(np.tile(rho, (cells, 1)), np.full(cells, theta))


class TestEntropyBalance(unittest.TestCase):
    def test_accepted_step_passes(self):
        run_config = benchmark_config("soret", {"domain.cells": 16})
        cfg = run_config.to_scheme_config()
        y_prev = potentials_from_densities(run_config.initial_state())[0]
        y, _ = solve_step(y_prev, cfg)
        ledger, passed = entropy_balance(y_prev, y, cfg)
        self.assertTrue(passed)
        self.assertGreater(ledger.diffusion, 0.0)
        self.assertGreater(ledger.heat, 0.0)
        self.assertEqual(ledger.boundary, 0.0)
        self.assertLessEqual(ledger.balance, ledger.slack + ledger.tolerance)

    def test_reversed_step_fails(self):
        run_config = benchmark_config("mixing", {"domain.cells": 16})
        cfg = run_config.to_scheme_config()
        y_prev = potentials_from_densities(run_config.initial_state())[0]
        y, _ = solve_step(y_prev, cfg)
        ledger, passed = entropy_balance(y, y_prev, cfg)
        self.assertFalse(passed)
        self.assertGreater(ledger.entropy_after, ledger.entropy_before)

    def test_degenerate_production_identity(self):
        run_config = benchmark_config("degenerate", {"domain.cells": 16})
        cfg = run_config.to_scheme_config()
        state = run_config.initial_state()
        y = potentials_from_densities(state)[0]
        ledger, _ = entropy_balance(y, y, cfg)
        expected = weighted_projection_production(state, cfg.grid)
        self.assertGreater(expected, 0.0)
        self.assertAlmostEqual(ledger.diffusion / expected, 1.0, places=10)

    def test_regularization_production_on_rough_temperature(self):
        run_config = benchmark_config("heating", {"domain.cells": 12, "epsilon": 1e-3})
        cfg = run_config.to_scheme_config()
        state = run_config.initial_state()
        rng = np.random.default_rng(11)
        rough = MixtureState.from_densities(state.rho, np.exp(rng.uniform(-2.0, 2.0, size=12)))
        y = potentials_from_densities(rough)[0]
        ledger, _ = entropy_balance(y, y, cfg)
        self.assertGreater(ledger.regularization, 0.0)

    def test_boundary_production(self):
        run_config = benchmark_config("equilibrium", {"initial.theta.value": 0.5})
        cfg = run_config.to_scheme_config()
        y = potentials_from_densities(run_config.initial_state())[0]
        ledger, _ = entropy_balance(y, y, cfg)
        # 2 lam sum over both ends of cosh(w0 - w) - 1
        self.assertAlmostEqual(ledger.boundary, 2.0 * 0.5 * 2.0 * (np.cosh(np.log(2.0)) - 1.0))
        self.assertEqual(ledger.diffusion, 0.0)


class TestEntropyFunctional(unittest.TestCase):
    def test_uniform_value(self):
        grid = Grid1D(2.0, 8)
        state = uniform_state(theta=2.0)
        rho = np.array([0.25, 0.75])
        density = np.sum(rho * (np.log(rho) - 1.0) - rho * np.log(2.0)) + 1.0 * 2.0 / 1.5
        self.assertAlmostEqual(entropy_functional(state, grid, 1.5), 2.0 * density)


class TestTemperatureEstimate(unittest.TestCase):
    def test_uniform_step_is_tight(self):
        cfg = benchmark_config("mixing", {"domain.cells": 8}).to_scheme_config()
        state = uniform_state()
        step = temperature_step(state, state, cfg)
        self.assertEqual(step.conduction, 0.0)
        self.assertEqual(step.C_prime, 0.0)
        self.assertAlmostEqual(step.lhs, step.rhs)
        self.assertTrue(step.passed)

    def test_heating_run(self):
        run_config = benchmark_config("heating", {"domain.cells": 16, "time.t_end": 0.05})
        cfg = run_config.to_scheme_config()
        trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
        ledger, passed = temperature_estimate(trajectory, cfg)
        self.assertTrue(passed)
        self.assertEqual(len(ledger.steps), len(trajectory) - 1)
        self.assertEqual(ledger.thermal.shape, (len(trajectory) - 1,))
        self.assertAlmostEqual(ledger.C, 1.0 * 1.5 ** 2)
        self.assertGreaterEqual(ledger.min_margin, 0.0)
        # the boundary heats the mixture
        self.assertTrue(np.all(np.diff(ledger.thermal) > 0))

    def test_empty_trajectory(self):
        cfg = benchmark_config("mixing").to_scheme_config()
        with self.assertRaises(ValueError):
            temperature_estimate([], cfg)


class TestConservationReport(unittest.TestCase):
    def setUp(self):
        self.grid = Grid1D(1.0, 8)
        self.state = uniform_state()
        self.drifted = MixtureState.from_densities(self.state.rho * [1.01, 1.0], self.state.theta)

    def test_flags_mass_drift(self):
        cfg = benchmark_config("mixing", {"domain.cells": 8}).to_scheme_config()
        report = conservation_report([(0.0, self.state), (0.1, self.drifted)], self.grid, cfg)
        self.assertEqual(len(report.flags), 2)
        self.assertTrue(report.flags[0].startswith("mass_1"))
        self.assertTrue(report.flags[1].startswith("energy"))
        assert_allclose(report.max_mass_drift, [0.01, 0.0], atol=1e-12)

    def test_no_flags_with_reactions(self):
        cfg = benchmark_config("mixing", {"domain.cells": 8, "reaction.model": "linear_pi_q",
                                          "reaction.c_r": 0.5}).to_scheme_config()
        report = conservation_report([(0.0, self.state), (0.1, self.drifted)], self.grid, cfg)
        self.assertEqual(report.flags, [])
        self.assertIsNone(report.regularized_drift_ratio)

    def test_regularized_drift_beyond_bound(self):
        cfg = benchmark_config("mixing", {"domain.cells": 8, "epsilon": 1e-3}).to_scheme_config()
        report = conservation_report([(0.0, self.state), (0.1, self.drifted)], self.grid, cfg)
        # the jump 0.0025 is far above tau eps int|v_1| ~ 1.1e-4
        self.assertEqual(len(report.flags), 1)
        self.assertTrue(report.flags[0].startswith("mass_1 changed"))
        self.assertGreater(report.regularized_drift_ratio[0], 10.0)

    def test_regularized_drift_within_bound(self):
        cfg = benchmark_config("mixing", {"domain.cells": 8, "epsilon": 1e-3}).to_scheme_config()
        v = np.log(0.25 / 0.75)
        # rho_1 - rho_1_prev = -tau eps v_1 at the new state
        previous = MixtureState.from_densities(self.state.rho + [[0.1 * 1e-3 * v, -0.1 * 1e-3 * v]], self.state.theta)
        report = conservation_report([(0.0, previous), (0.1, self.state)], self.grid, cfg)
        self.assertEqual(report.flags, [])
        self.assertAlmostEqual(report.regularized_drift_ratio[0], 1.0, places=9)
        self.assertIsNotNone(conservation_report([(0.0, self.state)], self.grid).masses)

    def test_series_shapes(self):
        report = conservation_report([(0.0, self.state), (0.1, self.state), (0.2, self.state)], self.grid)
        self.assertEqual(report.masses.shape, (3, 2))
        self.assertEqual(report.energy.shape, (3,))
        self.assertEqual(report.max_total_density_deviation, 0.0)


class TestNormsReport(unittest.TestCase):
    def test_uniform_values(self):
        grid = Grid1D(1.0, 8)
        state = uniform_state(theta=2.0)
        norms = norms_report([(0.0, state), (0.5, state)], grid)
        self.assertAlmostEqual(norms["sup_theta_l2"], 4.0)
        self.assertEqual(norms["theta_sq_grad"], 0.0)
        self.assertAlmostEqual(norms["theta_l16_3"], (0.5 * 2.0 ** (16.0 / 3.0)) ** (3.0 / 16.0))
        assert_allclose(norms["sup_rho"], [0.25, 0.75])


class TestStructuralBattery(unittest.TestCase):
    """Every battery configuration keeps all gates and conservation over its full run."""

    def test_battery(self):
        for name in BATTERY:
            with self.subTest(benchmark=name):
                run_config = benchmark_config(name)
                cfg = run_config.to_scheme_config()
                trajectory = run(run_config.initial_state(), cfg, run_config.time.t_end)
                self.assertEqual(trajectory.violations, [])
                for _, state, report in trajectory:
                    self.assertTrue(np.all(state.rho > 0))
                    self.assertTrue(np.all(state.theta > 0))
                    if report is not None:
                        self.assertTrue(report.entropy_pass)
                _, passed = temperature_estimate(trajectory, cfg)
                self.assertTrue(passed)
                self.assertEqual(conservation_report(trajectory, cfg.grid, cfg).flags, [])


if __name__ == "__main__":
    unittest.main()
