"""Run orchestration: execute a configuration, emit summary and data files.

Artifacts per run (inside the output directory):

- summary.json   deterministic, sorted keys, embeds the defaulted config
- trace.txt      one row per Picard iteration
- field_Q.txt    '# s psi Q' triples, plot-ready (heatmap data)
- timing.txt     wall time; the one deliberately non-deterministic artifact
- error.json     machine-readable error record, written on failure only

Exit semantics: run() returns the summary dict whose "passed" entry is True
iff every check requested by the mode met its tolerance.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics, geometry as geometry_mod, oracle as oracle_mod
from .config import RunConfig
from .discretization import write_field
from .iteration import fl_leading, picard_solve

POINTWISE_PSI = (0.0, 0.5, 1.0, 2.0, 5.0)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj]
    return obj


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_json_ready(summary), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _single_solve(config: RunConfig, epsilon: float | None = None):
    """One Picard solve plus diagnostics; shared by single/sweep/crosscheck."""
    geometry = config.geometry.build(config.grid.n_s)
    grid = config.grid.build(geometry)
    forcing = config.forcing.build(geometry, epsilon)
    state, field, trace = picard_solve(
        geometry, forcing, grid,
        tol=config.solver.tol,
        max_iter=config.solver.max_iter,
        compatibility_tol=config.solver.compatibility_tol,
    )
    lead = fl_leading(forcing.f_slip, geometry)
    pde = diagnostics.pde_residual(field, state.omega0, geometry)
    compat = diagnostics.compatibility_residual(field, state.omega0, forcing,
                                                geometry)
    pointwise = diagnostics.pointwise_identity_residual(
        field, state.omega0, geometry, POINTWISE_PSI)
    summary = {
        "omega0": state.omega0,
        "omega0_leading": lead,
        "omega_err": state.omega0**2 - lead**2,
        "omega_bar": state.omega_bar,
        "omega_bar_star": state.omega_bar_star,
        "omega_bar_err": state.omega_bar_err,
        "epsilon": forcing.epsilon,
        "norm_x14": diagnostics.xkm_norm(field, diagnostics.X14),
        "norm_x250_log_compensated": diagnostics.xkm_norm(
            field, diagnostics.X250, method="log"),
        "compatibility_residual": compat,
        "pde_residual_max": pde.max_abs,
        "pde_residual_l2": pde.l2,
        "pointwise_identity_residual": {
            str(p): float(r) for p, r in zip(POINTWISE_PSI, pointwise)},
        "sup_embedding_ratio": diagnostics.sup_norm_embedding_ratio(field),
        "iterations": trace.n_iterations,
        "converged": trace.converged,
        "contraction_ratios": trace.contraction_ratios(),
        "grid": {"N_s": grid.n_s, "N_psi": grid.n_psi, "psi_max": grid.psi_max,
                 "L": geometry.L},
    }
    return summary, field, trace, (geometry, grid, forcing, state)


def _checks_single(config: RunConfig, summary: dict) -> dict:
    return {
        "converged": bool(summary["converged"]),
        "compatibility": abs(summary["compatibility_residual"])
        < config.solver.compatibility_tol,
    }


def _fit_slope(xs, ys) -> float:
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])


def run_single(config: RunConfig, out_dir: str) -> dict:
    t0 = time.perf_counter()
    summary, field, trace, _ = _single_solve(config)
    checks = _checks_single(config, summary)
    summary["checks"] = checks
    summary["passed"] = all(checks.values())
    summary["config"] = config.echo()
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    with open(os.path.join(out_dir, "trace.txt"), "w") as fh:
        fh.write(trace.to_text())
    write_field(os.path.join(out_dir, "field_Q.txt"), field)
    with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
        fh.write(f"wall_time_s {time.perf_counter() - t0:.3f}\n")
    return summary


def run_sweep(config: RunConfig, out_dir: str, workers: int = 1) -> dict:
    t0 = time.perf_counter()

    def entry(eps: float):
        sub = os.path.join(out_dir, f"eps_{eps:g}")
        os.makedirs(sub, exist_ok=True)
        summary, field, trace, _ = _single_solve(config, epsilon=eps)
        summary["checks"] = _checks_single(config, summary)
        write_summary(os.path.join(sub, "summary.json"), summary)
        with open(os.path.join(sub, "trace.txt"), "w") as fh:
            fh.write(trace.to_text())
        write_field(os.path.join(sub, "field_Q.txt"), field)
        return summary

    epsilons = list(config.sweep_epsilons)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(entry, epsilons))
    else:
        entries = [entry(e) for e in epsilons]

    slope_omega_err = _fit_slope(epsilons, [abs(e["omega_err"]) for e in entries])
    slope_norm = _fit_slope(epsilons, [e["norm_x14"] for e in entries])
    checks = {
        "all_converged": all(e["converged"] for e in entries),
        "all_compatible": all(e["checks"]["compatibility"] for e in entries),
    }
    summary = {
        "mode": "sweep",
        "entries": [{k: e[k] for k in
                     ("epsilon", "omega0", "omega0_leading", "omega_err",
                      "omega_bar_err", "norm_x14", "compatibility_residual",
                      "pde_residual_max", "iterations", "converged",
                      "contraction_ratios")}
                    for e in entries],
        "slope_omega_err_vs_eps": slope_omega_err,
        "slope_norm_x14_vs_eps": slope_norm,
        "checks": checks,
        "passed": all(checks.values()),
        "config": config.echo(),
    }
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    cols = ("epsilon", "omega0", "omega0_leading", "omega_err", "norm_x14",
            "compatibility_residual", "pde_residual_max")
    with open(os.path.join(out_dir, "sweep_table.txt"), "w") as fh:
        fh.write("# " + " ".join(cols) + "\n")
        for e in entries:
            fh.write(" ".join(f"{e[c]:.17g}" for c in cols) + "\n")
        fh.write(f"# slope log|omega_err| vs log eps: {slope_omega_err:.6f}\n")
        fh.write(f"# slope log|Q|_X14 vs log eps: {slope_norm:.6f}\n")
    with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
        fh.write(f"wall_time_s {time.perf_counter() - t0:.3f}\n")
    return summary


def run_crosscheck(config: RunConfig, out_dir: str) -> dict:
    t0 = time.perf_counter()
    summary, field, trace, (geometry, grid, forcing, state) = _single_solve(config)
    omega_oracle = oracle_mod.shoot_omega(forcing, geometry, grid,
                                          config.oracle.march_config())
    gap = abs(state.omega0 - omega_oracle)
    checks = _checks_single(config, summary)
    checks["oracle_match"] = gap < config.oracle.match_tol
    summary.update({
        "omega0_oracle": omega_oracle,
        "oracle_gap": gap,
        "checks": checks,
        "passed": all(checks.values()),
        "config": config.echo(),
    })
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    with open(os.path.join(out_dir, "trace.txt"), "w") as fh:
        fh.write(trace.to_text())
    write_field(os.path.join(out_dir, "field_Q.txt"), field)
    with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
        fh.write(f"wall_time_s {time.perf_counter() - t0:.3f}\n")
    return summary


def run_identities(config: RunConfig, out_dir: str) -> dict:
    t0 = time.perf_counter()
    geometry = config.geometry.build(config.grid.n_s)
    spec = config.identities
    if config.geometry.kind == "ellipse":
        field_fn = geometry_mod.unit_vorticity_field(config.geometry.a)
        uv = geometry_mod.verify_unit_vorticity(config.geometry.a,
                                                tol=spec.unit_vorticity_tol)
    elif config.geometry.kind == "disk":
        field_fn = geometry_mod.solid_rotation_field()
        uv = geometry_mod.verify_unit_vorticity(1.0, tol=spec.unit_vorticity_tol)
    else:
        raise geometry_mod.GeometryError(
            "identities mode needs a disk or ellipse geometry")

    study = geometry_mod.identity_convergence_orders(
        geometry, field_fn, spec.h, levels=spec.levels)
    orders_ok = {}
    for name, data in study.items():
        final = data["orders"][-1]
        orders_ok[name] = math.isfinite(final) and abs(final - 2.0) <= spec.order_band

    checks = {f"order_{name}": ok for name, ok in orders_ok.items()}
    checks["unit_vorticity"] = uv.passed
    summary = {
        "mode": "identities",
        "identity_study": study,
        "unit_vorticity": {
            "max_laplacian_residual": uv.max_laplacian_residual,
            "max_normal_slip": uv.max_normal_slip,
            "tol": uv.tol,
        },
        "checks": checks,
        "passed": all(checks.values()),
        "config": config.echo(),
    }
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
        fh.write(f"wall_time_s {time.perf_counter() - t0:.3f}\n")
    return summary


def run(config: RunConfig, output_dir: str | None = None, workers: int = 1) -> dict:
    """Execute the configured mode; returns the summary (with 'passed')."""
    out_dir = output_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if config.mode == "single":
        return run_single(config, out_dir)
    if config.mode == "sweep":
        return run_sweep(config, out_dir, workers=workers)
    if config.mode == "crosscheck":
        return run_crosscheck(config, out_dir)
    if config.mode == "identities":
        return run_identities(config, out_dir)
    raise ValueError(f"unknown mode {config.mode!r}")
