"""
The run, check-matrix and convergence commands.

Each command returns a process exit code; exceptions other than
AbortError propagate to the entry script.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .. import __version__
from ..config import RunConfig, load_config, resolve_output_dir
from ..convergence import SPATIAL_ORDER_RANGE, TEMPORAL_ORDER_RANGE, spatial_study, temporal_study
from ..diagnostics import conservation_report
from ..exceptions import AbortError
from ..logger import get_library_logger
from ..onsager import (
    MaxwellStefanModel,
    certify_m2,
    certify_m3,
    friction_matrix,
    group_inverse,
    group_inverse_via_symmetrization,
    reduced_coercivity_check,
)
from ..output import DIAGNOSTICS_FILE, FIELDS_FILE, DiagnosticsWriter, FieldWriter, RunManifest
from ..scheme import run

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_VIOLATION = 2
EXIT_ABORT = 3
EXIT_INTERRUPTED = 130

GATE_NAMES = ("positivity", "entropy_balance", "temperature_estimate")


def _gate_failures(trajectory) -> Dict[str, int]:
    counts = {name: 0 for name in GATE_NAMES}
    for _, _, report in trajectory:
        if report is None:
            continue
        for name in report.violations():
            counts[name] += 1
    return counts


def execute_run(run_config: RunConfig, out_dir: Path, command: str = "run") -> int:
    """Integrate one configuration and write fields, diagnostics and the manifest into ``out_dir``."""
    logger = get_library_logger()
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = run_config.to_scheme_config()
    grid = cfg.grid
    n = run_config.n
    manifest = RunManifest(config=run_config.resolved(), version=__version__, command=command)
    fields = FieldWriter(out_dir / FIELDS_FILE, grid, n, stride=run_config.output.stride)
    diagnostics = DiagnosticsWriter(out_dir / DIAGNOSTICS_FILE, grid, n, run_config.boundary.theta0)

    try:
        trajectory = run(run_config.initial_state(grid), cfg, run_config.time.t_end,
                         callbacks=(fields, diagnostics))
    except AbortError as e:
        logger.error(f"Run aborted: {e}")
        manifest.violations.append(str(e))
        status, exit_code = "aborted", EXIT_ABORT
    else:
        conservation = conservation_report(trajectory, grid, cfg)
        manifest.gates = _gate_failures(trajectory)
        manifest.gates["conservation"] = len(conservation.flags)
        manifest.violations.extend(trajectory.violations)
        manifest.violations.extend(conservation.flags)
        for flag in conservation.flags:
            logger.warning(f"Conservation: {flag}")
        if manifest.violations:
            status, exit_code = "violation", EXIT_VIOLATION
        else:
            status, exit_code = "completed", EXIT_OK
    finally:
        manifest.outputs = {"fields": str(fields.close()), "diagnostics": str(diagnostics.close())}

    manifest.finish(status, exit_code)
    path = manifest.save(out_dir)
    logger.info(f"Run {status}; manifest written to {path}")
    return exit_code


def cmd_run(config_path: str, out: Optional[str] = None) -> int:
    run_config = load_config(config_path)
    return execute_run(run_config, resolve_output_dir(run_config, out))


def _sweep_worker(config_path: str, out_dir: str) -> int:
    return execute_run(load_config(config_path), Path(out_dir))


def run_sweep(config_paths: List[str], out: Optional[str] = None, max_workers: Optional[int] = None) -> int:
    """
    Run several configurations in worker processes, each into ``<out>/<config stem>/``.

    Configurations are loaded up front so a bad file fails before any run
    starts. Returns the largest exit code of the individual runs.
    """
    logger = get_library_logger()
    configs = {path: load_config(path) for path in config_paths}
    root = Path(out) if out else resolve_output_dir(next(iter(configs.values())))
    exit_codes = {}
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(_sweep_worker, path, str(root / Path(path).stem)): path
            for path in config_paths
        }
        for future in as_completed(futures):
            path = futures[future]
            exit_codes[path] = future.result()
            logger.info(f"Sweep: {path} finished with exit code {exit_codes[path]}")
    return max(exit_codes.values())


def _sample_states(run_config: RunConfig) -> List:
    rng = np.random.default_rng(run_config.check.seed)
    rho = rng.uniform(0.05, 1.0, size=(run_config.check.samples, run_config.n))
    theta = rng.uniform(0.5, 2.0, size=run_config.check.samples)
    return list(zip(rho, theta))


def _group_inverse_residuals(model: MaxwellStefanModel, rho: np.ndarray, theta: float) -> Dict[str, float]:
    fm = friction_matrix(rho, model.friction, theta)
    B = fm.B
    sharp = group_inverse(fm)
    projector = np.eye(rho.size) - np.outer(rho / rho.sum(), np.ones(rho.size))
    scale = max(1.0, float(np.abs(sharp).max()))
    return {
        "B_Bsharp_B": float(np.abs(B @ sharp @ B - B).max()),
        "Bsharp_B_Bsharp": float(np.abs(sharp @ B @ sharp - sharp).max() / scale),
        "commute": float(np.abs(B @ sharp - sharp @ B).max()),
        "projector": float(np.abs(B @ sharp - projector).max()),
        "symmetrized": float(np.abs(sharp - group_inverse_via_symmetrization(fm)).max() / scale),
    }


def cmd_check_matrix(config_path: str) -> int:
    """
    Print coercivity certificates of the configured matrix model at sampled states.

    Exit 0 iff every state is free of invariant violations and every requested
    condition is certified with a positive constant at or above check.floor.
    """
    logger = get_library_logger()
    run_config = load_config(config_path)
    model = run_config.matrix_model()
    check = run_config.check
    states = _sample_states(run_config)
    rng = np.random.default_rng(check.seed)

    rows = []
    failures = []
    for k, (rho, theta) in enumerate(states):
        matrices = model(rho, theta)
        violations = matrices.invariant_violations()
        certificate = certify_m2(matrices)
        reduced = reduced_coercivity_check(matrices, certificate.constant, samples=100, rng=rng)
        row = {"state": k, "theta": theta, "c_M2": certificate.constant,
               "reduced_min_eig": reduced.min_eigenvalue, "reduced_pass": reduced.passed,
               "invariants": "ok" if not violations else "; ".join(violations)}
        if isinstance(model, MaxwellStefanModel):
            row.update(_group_inverse_residuals(model, rho, theta))
        rows.append(row)
        if violations:
            failures.append(f"state {k}: {'; '.join(violations)}")
        if not reduced.passed:
            failures.append(f"state {k}: reduced coercivity fails (witness {reduced.witness})")

    table = pd.DataFrame(rows)
    print(f"Matrix model: {run_config.matrix.model} (n={run_config.n}, {len(states)} states, seed {check.seed})")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6e}"))

    constants = {}
    if "M2" in check.conditions:
        constants["M2"] = float(table["c_M2"].min())
    if "M3" in check.conditions:
        m3 = certify_m3(model, states)
        constants["M3"] = m3.constant
        if m3.constant <= 0:
            print(f"M3 witness: {np.array2string(m3.witness, precision=6)}")
    for condition, constant in constants.items():
        print(f"{condition}: c_M = {constant:.6e} (floor {check.floor:g})")
        if constant <= 0 or constant < check.floor:
            failures.append(f"{condition} constant {constant:.3e} is below the floor {check.floor:g}")

    for failure in failures:
        logger.error(f"check-matrix: {failure}")
    return EXIT_FAILED if failures else EXIT_OK


def cmd_convergence(config_path: str, out: Optional[str] = None) -> int:
    """
    Run the refinement ladders and print error/order tables.

    Passes when errors decrease monotonically and observed orders lie in
    the expected ranges (second order in space, first order in time).
    """
    logger = get_library_logger()
    run_config = load_config(config_path)
    out_dir = resolve_output_dir(run_config, out)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures = []
    studies = (
        (spatial_study, SPATIAL_ORDER_RANGE),
        (temporal_study, TEMPORAL_ORDER_RANGE),
    )
    for study, (low, high) in studies:
        table = study(run_config)
        if table is None:
            continue
        frame = table.to_frame()
        print(f"{table.kind} convergence:")
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.6e}"))
        frame.to_csv(out_dir / f"convergence_{table.kind}.csv", index=False, float_format="%.17g")
        if not table.monotone:
            failures.append(f"{table.kind} errors are not monotonically decreasing")
        if not table.within(low, high):
            failures.append(f"{table.kind} orders {table.orders} outside [{low}, {high}]")

    for failure in failures:
        logger.error(f"convergence: {failure}")
    return EXIT_FAILED if failures else EXIT_OK
