import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from msf_solver.benchmarks import benchmark_config
from msf_solver.output import (
    DiagnosticsWriter,
    FieldWriter,
    RunManifest,
    diagnostics_columns,
    fields_columns,
)
from msf_solver.scheme import run


class TestColumns(unittest.TestCase):
    def test_fields_columns(self):
        self.assertEqual(fields_columns(3), ["t", "x", "rho_1", "rho_2", "rho_3", "theta"])

    def test_diagnostics_columns(self):
        columns = diagnostics_columns(2)
        self.assertEqual(columns[:5], ["t", "entropy", "entropy_slack", "mass_1", "mass_2"])
        self.assertEqual(columns[-3:], ["diffusion_production", "heat_production", "boundary_production"])


class TestWriters(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.addCleanup(self._tmp.cleanup)
        self.run_config = benchmark_config("heating", {"domain.cells": 8, "time.t_end": 0.035})
        self.cfg = self.run_config.to_scheme_config()

    def integrate(self, *callbacks):
        return run(self.run_config.initial_state(), self.cfg, self.run_config.time.t_end, callbacks=callbacks)

    def test_field_stride_keeps_final_state(self):
        writer = FieldWriter(self.tmp / "fields.csv", self.cfg.grid, 2, stride=3)
        trajectory = self.integrate(writer)
        frame = pd.read_csv(writer.close())
        times = sorted(frame["t"].unique())
        self.assertEqual(len(trajectory), 8)
        # initial, steps 3 and 6, then the final step 7
        self.assertEqual(len(times), 4)
        self.assertAlmostEqual(times[-1], trajectory.times[-1])
        final = frame[frame["t"] == times[-1]]
        np.testing.assert_allclose(final["theta"].to_numpy(), trajectory.final_state.theta, rtol=1e-15)

    def test_diagnostics_rows(self):
        writer = DiagnosticsWriter(self.tmp / "diagnostics.csv", self.cfg.grid, 2, self.cfg.theta0)
        trajectory = self.integrate(writer)
        frame = pd.read_csv(writer.close())
        self.assertEqual(len(frame), len(trajectory))
        self.assertEqual(frame["newton_iters"].iloc[0], 0)
        self.assertTrue((frame["newton_iters"].iloc[1:] > 0).all())
        self.assertTrue((frame["boundary_production"].iloc[1:] > 0).all())
        self.assertTrue((frame["energy"].diff().dropna() > 0).all())
        self.assertTrue((frame["entropy_slack"] == 0.0).all())


class TestRunManifest(unittest.TestCase):
    def test_save_records_outcome(self):
        with tempfile.TemporaryDirectory() as tmp:
            manifest = RunManifest(config={"n": 2}, version="1.0.0", command="run")
            manifest.gates = {"positivity": 0}
            manifest.finish("completed", 0)
            path = manifest.save(tmp)
            saved = json.loads(path.read_text(encoding="utf-8"))
        self.assertEqual(saved["config"], {"n": 2})
        self.assertEqual(saved["command"], "run")
        self.assertEqual(saved["status"], "completed")
        self.assertEqual(saved["exit_code"], 0)
        self.assertEqual(saved["gates"], {"positivity": 0})
        self.assertGreaterEqual(saved["wall_clock_seconds"], 0.0)

    def test_save_to_missing_directory_raises(self):
        manifest = RunManifest(config={}, version="1.0.0", command="run")
        with self.assertRaises(OSError):
            manifest.save(Path(tempfile.gettempdir()) / "msf-missing-dir" / "nested")


if __name__ == "__main__":
    unittest.main()
