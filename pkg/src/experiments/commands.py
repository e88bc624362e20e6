"""
Experiment commands.

Each cmd_* takes a resolved ExperimentConfig, writes its artifacts under
config.output_dir and returns a result dict:

    {"experiment": ..., "summary": {...}, "outputs": [paths], "errors": [notes]}

Commands that gate on a threshold (steady, kelvin-circular, kelvin-converge,
spectrum) raise AcceptanceError carrying the same dict after all outputs
are written, so a failing run still leaves its evidence on disk.
"""

import math
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
import structlog
from scipy.spatial.distance import pdist

from src.analysis.balance import (
    balanced_velocity, discrete_divergence_norm, random_boundary_zero_streamfunction,
    weak_balanced_velocity,
)
from src.analysis.convergence import fit_convergence
from src.analysis.spectrum import laplacian_spectrum
from src.config import ExperimentConfig
from src.dynamics.stepper import State, build_stepper, energy, run
from src.errors import AcceptanceError
from src.experiments.kelvin import ChannelKelvinWave, CircularKelvinWave
from src.mesh.build import build_disk_mesh, build_rectangle_mesh, distort_mesh
from src.mesh.mesh import Mesh, mesh_summary
from src.mesh.reader import load_mesh
from src.operators.assembly import (
    OperatorSet, assemble_operators, discrete_laplacian, export_matrix_market,
)
from src.plots import plot_convergence, plot_streamlines, plot_thickness_snapshots
from src.spaces.function_space import Field, interpolate_scalar, l2_error
from src.storage import SnapshotWriter, write_csv_timeseries, write_vtk

logger = structlog.get_logger("experiments.commands")

BOUNDARY_ZERO_TOL = 1e-10


def _result(experiment: str) -> dict:
    return {"experiment": experiment, "summary": {}, "outputs": [], "errors": []}


def build_mesh(config: ExperimentConfig, edge_length: float | None = None) -> Mesh:
    """Mesh described by the config: generated disk/rectangle or a file, then distorted."""
    h = config.edge_length if edge_length is None else edge_length
    if config.domain == "file":
        mesh = load_mesh(config.mesh_file, config.mesh_format)
    elif config.domain == "disk":
        mesh = build_disk_mesh(config.radius, h)
    else:
        mesh = build_rectangle_mesh((config.x_min, config.x_max), (config.y_min, config.y_max), h)
    if config.distortion > 0:
        mesh = distort_mesh(mesh, config.distortion, config.seed)
    logger.info("mesh_ready", domain=config.domain, **mesh_summary(mesh))
    return mesh


def _centroid(mesh: Mesh) -> np.ndarray:
    centres = mesh.corners.mean(axis=1)
    return (mesh.areas[:, None] * centres).sum(axis=0) / mesh.total_area


def _diameter(mesh: Mesh) -> float:
    return float(pdist(mesh.vertices[mesh.boundary_vertices]).max())


def _relative_change(now: np.ndarray, ref: np.ndarray) -> float:
    scale = np.abs(ref).max()
    diff = np.abs(now - ref).max()
    return float(diff / scale) if scale > 0 else float(diff)


# --- balance ---

def gaussian_streamfunction(ops: OperatorSet, center: tuple[float, float], width: float) -> Field:
    """psi = exp(-|x - c|^2 / w^2) interpolated into P2."""
    cx, cy = center

    def psi(x, y):
        return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)

    return interpolate_scalar(ops.s_space, psi)


def cmd_balance(config: ExperimentConfig) -> dict:
    """Balanced velocity from a Gaussian streamfunction; reports the divergence norm."""
    result = _result("balance")
    out = config.output_path
    system = config.system()

    mesh = build_mesh(config)
    ops = assemble_operators(mesh)

    centre = _centroid(mesh)
    cx = centre[0] if config.gaussian_x is None else config.gaussian_x
    cy = centre[1] if config.gaussian_y is None else config.gaussian_y
    width = config.gaussian_width or 0.25 * _diameter(mesh)

    psi = gaussian_streamfunction(ops, (cx, cy), width)
    boundary = ops.s_space.boundary_dofs
    boundary_max = float(np.abs(psi.coefficients[boundary]).max())

    u_raw, _ = balanced_velocity(psi, system, ops.v_space)
    div_raw = discrete_divergence_norm(u_raw, ops)

    zeroed = psi.coefficients.copy()
    zeroed[boundary] = 0.0
    psi_zero = psi.with_coefficients(zeroed)
    u_zero, _ = balanced_velocity(psi_zero, system, ops.v_space)
    div_zero = discrete_divergence_norm(u_zero, ops)

    psi_used = psi_zero if config.zero_boundary else psi
    u, h = balanced_velocity(psi_used, system, ops.v_space)
    weak_gap = float(np.abs(weak_balanced_velocity(psi_used, ops).coefficients - u.coefficients).max())

    if boundary_max > BOUNDARY_ZERO_TOL:
        result["errors"].append(
            f"gaussian is {boundary_max:.2e} on the boundary; untruncated divergence reflects that")

    result["summary"] = {
        "n_triangles": mesh.n_triangles,
        "distortion": config.distortion,
        "gaussian_center": (float(cx), float(cy)),
        "gaussian_width": float(width),
        "psi_boundary_max": boundary_max,
        "divergence_norm": div_zero if config.zero_boundary else div_raw,
        "divergence_norm_untruncated": div_raw,
        "divergence_norm_boundary_zeroed": div_zero,
        "weak_vs_pointwise_max": weak_gap,
    }

    paths = write_vtk(mesh, {"psi": psi_used, "h": h, "u": u}, out / "balance.vtk",
                      title="balanced state")
    paths.append(plot_streamlines(mesh, psi_used, out / "balance_streamlines.png"))
    paths.append(write_csv_timeseries([{k: v for k, v in result["summary"].items()
                                        if k != "gaussian_center"}], out / "balance.csv"))
    result["outputs"] = [str(p) for p in paths]
    logger.info("balance_done", divergence_norm=result["summary"]["divergence_norm"],
                untruncated=div_raw, boundary_zeroed=div_zero)
    return result


# --- steady ---

def _steady_field(config: ExperimentConfig, ops: OperatorSet, index: int) -> State:
    seed = config.seed + index
    psi = random_boundary_zero_streamfunction(ops.s_space, seed, config.smoothing)
    u, h = balanced_velocity(psi, config.system(), ops.v_space)
    if config.unbalanced:
        rng = np.random.default_rng(seed + 10_000)
        u = u.with_coefficients(rng.standard_normal(ops.v_space.n_dofs))
    return State(u=u, h=h, t=0.0)


def cmd_steady(config: ExperimentConfig) -> dict:
    """Step random balanced states and measure how far they move."""
    result = _result("steady")
    out = config.output_path
    system = config.system()

    mesh = build_mesh(config)
    ops = assemble_operators(mesh)
    stepper = build_stepper(ops, system, solver=config.solver,
                            direct_max_dofs=config.direct_max_dofs)

    rows = []
    worst_u = worst_h = worst_energy = worst_div = 0.0
    for i in range(config.n_fields):
        state0 = _steady_field(config, ops, i)
        e0 = energy(state0, ops, system)
        div0 = discrete_divergence_norm(state0.u, ops)
        worst_div = max(worst_div, div0)
        drift = {"u": 0.0, "h": 0.0, "energy": 0.0}

        def observe(n: int, state: State, i=i, state0=state0, e0=e0, drift=drift):
            du = _relative_change(state.u.coefficients, state0.u.coefficients)
            dh = _relative_change(state.h.coefficients, state0.h.coefficients)
            e = energy(state, ops, system)
            de = abs(e - e0) / e0 if e0 > 0 else abs(e)
            drift["u"] = max(drift["u"], du)
            drift["h"] = max(drift["h"], dh)
            drift["energy"] = max(drift["energy"], de)
            rows.append({"field": i, "seed": config.seed + i, "t": state.t, "energy": e,
                         "energy_drift": de, "u_drift": du, "h_drift": dh})

        run(stepper, state0, config.t_end, observer=observe)
        logger.info("steady_field_done", field=i, divergence_norm=div0, **drift)
        worst_u = max(worst_u, drift["u"])
        worst_h = max(worst_h, drift["h"])
        worst_energy = max(worst_energy, drift["energy"])

    worst = max(worst_u, worst_h)
    result["summary"] = {
        "n_fields": config.n_fields,
        "steps": int(round(config.t_end / config.dt)),
        "ro": config.ro,
        "fr": config.fr,
        "max_divergence_norm": worst_div,
        "max_u_drift": worst_u,
        "max_h_drift": worst_h,
        "max_energy_drift": worst_energy,
        "drift_tolerance": config.drift_tolerance,
        "passed": worst <= config.drift_tolerance,
    }
    result["outputs"].append(str(write_csv_timeseries(
        rows, out / "steady_timeseries.csv",
        columns=["field", "seed", "t", "energy", "energy_drift", "u_drift", "h_drift"])))

    if worst > config.drift_tolerance:
        logger.error("steady_drift_exceeded", drift=worst, tolerance=config.drift_tolerance)
        raise AcceptanceError(
            f"balanced state drifted by {worst:.3e} > {config.drift_tolerance:.1e}", result)
    return result


# --- Kelvin waves ---

def _snapshot_steps(config: ExperimentConfig) -> set[int]:
    n_total = int(round(config.t_end / config.dt))
    steps = {int(round(t / config.dt)) for t in config.snapshot_times if 0 <= t <= config.t_end + 1e-12}
    if config.snapshot_interval > 0:
        every = max(1, int(round(config.snapshot_interval / config.dt)))
        steps.update(range(0, n_total + 1, every))
    return steps


def cmd_kelvin_circular(config: ExperimentConfig) -> dict:
    """Kelvin wave around the coast of a circular basin."""
    result = _result("kelvin-circular")
    out = config.output_path
    system = config.system()

    mesh = build_mesh(config)
    ops = assemble_operators(mesh)
    stepper = build_stepper(ops, system, solver=config.solver,
                            direct_max_dofs=config.direct_max_dofs)
    wave = CircularKelvinWave(ro=config.ro, fr=config.fr, r0=config.radius)
    state0 = wave.state(ops)

    e0 = energy(state0, ops, system)
    peak0 = float(np.abs(state0.h.coefficients).max())
    snapshot_steps = _snapshot_steps(config)
    n_total = int(round(config.t_end / config.dt))
    diag_every = max(1, n_total // 200)

    writer = SnapshotWriter(out, "kelvin_circular")
    snapshots: list[tuple[float, Field]] = []
    rows = []
    worst_energy = 0.0

    def observe(n: int, state: State):
        nonlocal worst_energy
        if n in snapshot_steps:
            writer.write(mesh, {"h": state.h, "u": state.u}, state.t)
            snapshots.append((state.t, state.h))
        if n % diag_every == 0 or n == n_total:
            e = energy(state, ops, system)
            de = abs(e - e0) / e0 if e0 > 0 else abs(e)
            worst_energy = max(worst_energy, de)
            rows.append({"step": n, "t": state.t, "energy": e, "energy_drift": de,
                         "divergence_norm": discrete_divergence_norm(state.u, ops),
                         "h_max": float(np.abs(state.h.coefficients).max())})

    final = run(stepper, state0, config.t_end, observer=observe)

    peak_end = float(np.abs(final.h.coefficients).max())
    retention = peak_end / peak0 if peak0 > 0 else 1.0
    result["summary"] = {
        "n_triangles": mesh.n_triangles,
        "steps": n_total,
        "energy_drift": worst_energy,
        "energy_tolerance": config.energy_tolerance,
        "h_peak_initial": peak0,
        "h_peak_final": peak_end,
        "retention": retention,
        "retention_band": config.retention_band,
        "snapshots": writer.counter,
    }
    result["outputs"].append(str(write_csv_timeseries(rows, out / "kelvin_circular_diagnostics.csv")))
    if writer.counter:
        result["outputs"].append(str(writer.write_index()))
    if snapshots:
        result["outputs"].append(str(plot_thickness_snapshots(mesh, snapshots,
                                                              out / "kelvin_circular.png")))

    breaches = []
    if worst_energy > config.energy_tolerance:
        breaches.append(f"energy drift {worst_energy:.3e} > {config.energy_tolerance:.1e}")
    if abs(retention - 1.0) > config.retention_band:
        breaches.append(f"h peak retention {retention:.3f} outside 1 +/- {config.retention_band}")
    result["summary"]["passed"] = not breaches
    if breaches:
        logger.error("kelvin_circular_failed", breaches=breaches)
        raise AcceptanceError("; ".join(breaches), result)
    return result


def courant_time_step(config: ExperimentConfig, mesh: Mesh) -> float:
    """Largest dt <= courant * Fr * dx_min that divides t_end into whole steps."""
    dt_max = config.courant * config.fr * float(mesh.edge_lengths.min())
    n = max(1, math.ceil(config.t_end / dt_max - 1e-9))
    return config.t_end / n


def _run_level(config: ExperimentConfig, edge_length: float, dt_scale: float = 1.0) -> dict:
    mesh = build_mesh(config, edge_length)
    ops = assemble_operators(mesh)
    dt = courant_time_step(config, mesh) * dt_scale
    stepper = build_stepper(ops, config.system(dt=dt), solver=config.solver,
                            direct_max_dofs=config.direct_max_dofs)
    wave = ChannelKelvinWave(ro=config.ro, fr=config.fr, x0=config.kelvin_x0)
    final = run(stepper, wave.state(ops), config.t_end)

    row = {
        "edge_length": edge_length,
        "dt": dt,
        "n_triangles": mesh.n_triangles,
        "velocity_error": l2_error(final.u, wave.velocity(final.t)),
        "thickness_error": l2_error(final.h, wave.thickness(final.t)),
    }
    logger.info("convergence_level_done", **row)
    return row


def cmd_kelvin_converge(config: ExperimentConfig) -> dict:
    """Refinement ladder on the channel; fits the L2 error slopes."""
    result = _result("kelvin-converge")
    out = config.output_path
    levels = sorted(set(config.edge_lengths), reverse=True)

    rows = []
    if config.deterministic or config.threads <= 1:
        rows = [_run_level(config, dx) for dx in levels]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            futs = {executor.submit(_run_level, config, dx): dx for dx in levels}
            for f in as_completed(futs):
                rows.append(f.result())

    table = fit_convergence(rows, extra=("dt", "n_triangles"))
    result["summary"] = {
        "levels": len(levels),
        "velocity_slope": table.slopes["velocity"],
        "thickness_slope": table.slopes["thickness"],
        "slope_min": config.slope_min,
    }

    if config.dt_check:
        finest = table.edge_lengths[-1]
        half = _run_level(config, float(finest), dt_scale=0.5)
        ref_u = table.errors["velocity"][-1]
        ref_h = table.errors["thickness"][-1]
        result["summary"]["dt_check_velocity_change"] = abs(half["velocity_error"] - ref_u) / ref_u
        result["summary"]["dt_check_thickness_change"] = abs(half["thickness_error"] - ref_h) / ref_h

    result["outputs"].append(str(write_csv_timeseries(table.to_rows(), out / "convergence.csv")))
    result["outputs"].append(str(write_csv_timeseries(table.slope_rows(),
                                                      out / "convergence_slopes.csv")))
    if "dt_check_velocity_change" in result["summary"]:
        result["outputs"].append(str(write_csv_timeseries(
            [{k: result["summary"][k] for k in ("dt_check_velocity_change",
                                                "dt_check_thickness_change")}],
            out / "convergence_dt_check.csv")))
    result["outputs"].append(str(plot_convergence(table, out / "convergence.png")))

    low = {k: v for k, v in table.slopes.items() if v < config.slope_min}
    result["summary"]["passed"] = not low
    if low:
        logger.error("convergence_slope_low", slopes=low, slope_min=config.slope_min)
        raise AcceptanceError(
            "slope(s) below " + f"{config.slope_min}: "
            + ", ".join(f"{k}={v:.3f}" for k, v in sorted(low.items())), result)
    return result


# --- spectrum ---

def cmd_spectrum(config: ExperimentConfig) -> dict:
    """Eigenvalues of K x = lambda M_h x; exactly one near-zero mode expected."""
    result = _result("spectrum")
    out = config.output_path

    mesh = build_mesh(config)
    ops = assemble_operators(mesh)
    report = laplacian_spectrum(ops, near_zero_threshold=config.spectrum_threshold,
                                dense_cap=config.dense_cap,
                                iterative=config.iterative_eigensolver,
                                n_eigenvalues=config.n_eigenvalues)

    L = discrete_laplacian(ops.Mu, ops.G, ops.Mh)
    k_max = abs(ops.K).max()
    equivalence = float(abs(L - ops.K).max() / k_max) if k_max > 0 else 0.0

    result["summary"] = {"n_p2_dofs": ops.s_space.n_dofs, **report.summary(),
                         "laplacian_equivalence": equivalence}
    result["outputs"].append(str(write_csv_timeseries(report.to_rows(), out / "spectrum.csv",
                                                      columns=["index", "eigenvalue", "near_zero"])))
    result["outputs"].append(str(write_csv_timeseries([result["summary"]],
                                                      out / "spectrum_summary.csv")))
    result["outputs"].append(str(export_matrix_market(ops.K, out / "K.mtx", "P2 stiffness")))
    result["outputs"].append(str(export_matrix_market(ops.Mh, out / "Mh.mtx", "P2 mass")))

    result["summary"]["passed"] = report.near_zero_count == 1
    if report.near_zero_count != 1:
        logger.error("spectrum_kernel_mismatch", near_zero_count=report.near_zero_count)
        raise AcceptanceError(
            f"{report.near_zero_count} near-zero eigenvalues (expected 1)", result)
    return result


COMMANDS = {
    "balance": cmd_balance,
    "steady": cmd_steady,
    "kelvin-circular": cmd_kelvin_circular,
    "kelvin-converge": cmd_kelvin_converge,
    "spectrum": cmd_spectrum,
}
