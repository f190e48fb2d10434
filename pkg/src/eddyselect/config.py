"""Run configuration: strict JSON parsing with defaults and provenance echo."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid
from .exceptions import ConfigError
from .geometry import (
    BoundaryGeometry,
    custom_geometry,
    disk_geometry,
    ellipse_geometry,
    load_geometry,
)
from .iteration import SlipForcing, slip_forcing, trig_profile
from .oracle import MarchConfig

VALID_MODES = ("single", "sweep", "crosscheck", "identities")


def _require_keys(section: dict, allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}{key!r}")


def _get_number(section: dict, key: str, default, path: str, *, integer=False):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}{key} must be a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{path}{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _get_list_of_numbers(section: dict, key: str, default, path: str):
    value = section.get(key, default)
    if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{path}{key} must be a list of numbers")
    return [float(v) for v in value]


@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "disk"
    R: float = 1.0
    a: float = 2.0
    file: str | None = None

    def build(self, n_s: int) -> BoundaryGeometry:
        if self.kind == "disk":
            return disk_geometry(self.R, n_s)
        if self.kind == "ellipse":
            return ellipse_geometry(self.a, n_s)
        return load_geometry(self.file)


@dataclass(frozen=True)
class ForcingSpec:
    epsilon: float = 0.0
    g_cos: tuple = ()
    g_sin: tuple = ()
    g_const: float = 0.0
    g_file: str | None = None

    def profile(self, geometry: BoundaryGeometry) -> np.ndarray:
        if self.g_file is not None:
            g = np.loadtxt(self.g_file)
            if g.ndim != 1 or g.size != geometry.n_s:
                raise ConfigError(
                    f"forcing.g_file must hold {geometry.n_s} samples, "
                    f"got shape {g.shape}")
            if not np.all(np.isfinite(g)):
                raise ConfigError("forcing.g_file contains non-finite samples")
            return g
        return trig_profile(geometry, self.g_cos, self.g_sin, self.g_const)

    def build(self, geometry: BoundaryGeometry,
              epsilon: float | None = None) -> SlipForcing:
        eps = self.epsilon if epsilon is None else epsilon
        return slip_forcing(geometry, eps, self.profile(geometry))


@dataclass(frozen=True)
class GridSpec:
    n_s: int = 128
    n_psi: int = 301
    psi_max: float = 30.0

    def build(self, geometry: BoundaryGeometry) -> Grid:
        return Grid.uniform(self.n_s, geometry.L, n_psi=self.n_psi,
                            psi_max=self.psi_max)


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-10
    max_iter: int = 50
    compatibility_tol: float = 1e-8


@dataclass(frozen=True)
class OracleSpec:
    enabled: bool = False
    steps_per_period: int = 512
    theta: float = 0.5
    corrector_sweeps: int = 1
    poincare_max_iters: int = 800
    min_periods: int = 160
    drift_window: int = 8
    settle_rtol: float = 0.05
    shoot_tol: float = 1e-9
    shoot_bracket: tuple | None = None
    check_monotone: bool = True
    psi_extension_factor: float = 4.0
    match_tol: float = 1e-6

    def march_config(self) -> MarchConfig:
        return MarchConfig(
            steps_per_period=self.steps_per_period,
            theta=self.theta,
            corrector_sweeps=self.corrector_sweeps,
            poincare_max_iters=self.poincare_max_iters,
            min_periods=self.min_periods,
            drift_window=self.drift_window,
            settle_rtol=self.settle_rtol,
            shoot_tol=self.shoot_tol,
            shoot_bracket=self.shoot_bracket,
            check_monotone=self.check_monotone,
            psi_extension_factor=self.psi_extension_factor,
        )


@dataclass(frozen=True)
class IdentitySpec:
    h: float = 0.01
    levels: int = 3
    order_band: float = 0.2
    unit_vorticity_tol: float = 1e-10


@dataclass(frozen=True)
class RunConfig:
    mode: str = "single"
    geometry: GeometrySpec = GeometrySpec()
    forcing: ForcingSpec = ForcingSpec()
    grid: GridSpec = GridSpec()
    solver: SolverSpec = SolverSpec()
    oracle: OracleSpec = OracleSpec()
    sweep_epsilons: tuple = ()
    identities: IdentitySpec = IdentitySpec()
    output_dir: str = "out"

    def echo(self) -> dict:
        """Fully defaulted configuration, embedded in summaries for provenance."""
        return {
            "mode": self.mode,
            "geometry": {"kind": self.geometry.kind, "R": self.geometry.R,
                         "a": self.geometry.a, "file": self.geometry.file},
            "forcing": {"epsilon": self.forcing.epsilon,
                        "g_cos": list(self.forcing.g_cos),
                        "g_sin": list(self.forcing.g_sin),
                        "g_const": self.forcing.g_const,
                        "g_file": self.forcing.g_file},
            "grid": {"N_s": self.grid.n_s, "N_psi": self.grid.n_psi,
                     "psi_max": self.grid.psi_max},
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter,
                       "compatibility_tol": self.solver.compatibility_tol},
            "oracle": {"enabled": self.oracle.enabled,
                       "steps_per_period": self.oracle.steps_per_period,
                       "theta": self.oracle.theta,
                       "corrector_sweeps": self.oracle.corrector_sweeps,
                       "poincare_max_iters": self.oracle.poincare_max_iters,
                       "min_periods": self.oracle.min_periods,
                       "drift_window": self.oracle.drift_window,
                       "settle_rtol": self.oracle.settle_rtol,
                       "shoot_tol": self.oracle.shoot_tol,
                       "shoot_bracket": (list(self.oracle.shoot_bracket)
                                         if self.oracle.shoot_bracket else None),
                       "check_monotone": self.oracle.check_monotone,
                       "psi_extension_factor": self.oracle.psi_extension_factor,
                       "match_tol": self.oracle.match_tol},
            "sweep": {"epsilons": list(self.sweep_epsilons)},
            "identities": {"h": self.identities.h,
                           "levels": self.identities.levels,
                           "order_band": self.identities.order_band,
                           "unit_vorticity_tol": self.identities.unit_vorticity_tol},
            "output_dir": self.output_dir,
        }


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate a JSON run configuration (strict: unknown keys rejected)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(raw, {"mode", "geometry", "forcing", "grid", "solver",
                        "oracle", "sweep", "identities", "output_dir"}, "")

    mode = raw.get("mode", "single")
    if mode not in VALID_MODES:
        raise ConfigError(f"mode must be one of {VALID_MODES}, got {mode!r}")

    geo_raw = raw.get("geometry", {})
    if not isinstance(geo_raw, dict):
        raise ConfigError("geometry must be an object")
    _require_keys(geo_raw, {"kind", "R", "a", "file"}, "geometry.")
    kind = geo_raw.get("kind", "disk")
    if kind not in ("disk", "ellipse", "custom"):
        raise ConfigError(f"geometry.kind must be disk|ellipse|custom, got {kind!r}")
    geo_file = geo_raw.get("file")
    if kind == "custom":
        if not geo_file:
            raise ConfigError("geometry.kind = custom requires geometry.file")
        geo_file = os.path.join(base_dir, geo_file)
        if not os.path.exists(geo_file):
            raise ConfigError(f"geometry.file does not exist: {geo_file}")
    R = _get_number(geo_raw, "R", 1.0, "geometry.")
    a = _get_number(geo_raw, "a", 2.0, "geometry.")
    if R <= 0:
        raise ConfigError("geometry.R must be positive")
    if a <= 0:
        raise ConfigError("geometry.a must be positive")
    geometry = GeometrySpec(kind, R, a, geo_file)

    force_raw = raw.get("forcing", {})
    if not isinstance(force_raw, dict):
        raise ConfigError("forcing must be an object")
    _require_keys(force_raw, {"epsilon", "g_cos", "g_sin", "g_const", "g_file"},
                  "forcing.")
    epsilon = _get_number(force_raw, "epsilon", 0.0, "forcing.")
    if epsilon < 0:
        raise ConfigError("epsilon must be nonnegative")
    g_file = force_raw.get("g_file")
    if g_file is not None:
        g_file = os.path.join(base_dir, g_file)
        if not os.path.exists(g_file):
            raise ConfigError(f"forcing.g_file does not exist: {g_file}")
    forcing = ForcingSpec(
        epsilon=epsilon,
        g_cos=tuple(_get_list_of_numbers(force_raw, "g_cos", [], "forcing.")),
        g_sin=tuple(_get_list_of_numbers(force_raw, "g_sin", [], "forcing.")),
        g_const=_get_number(force_raw, "g_const", 0.0, "forcing."),
        g_file=g_file,
    )

    grid_raw = raw.get("grid", {})
    if not isinstance(grid_raw, dict):
        raise ConfigError("grid must be an object")
    _require_keys(grid_raw, {"N_s", "N_psi", "psi_max"}, "grid.")
    grid = GridSpec(
        n_s=_get_number(grid_raw, "N_s", 128, "grid.", integer=True),
        n_psi=_get_number(grid_raw, "N_psi", 301, "grid.", integer=True),
        psi_max=_get_number(grid_raw, "psi_max", 30.0, "grid."),
    )
    if grid.n_s < 8 or grid.n_s % 2:
        raise ConfigError("grid.N_s must be even and >= 8")

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigError("solver must be an object")
    _require_keys(solver_raw, {"tol", "max_iter", "compatibility_tol"}, "solver.")
    solver = SolverSpec(
        tol=_get_number(solver_raw, "tol", 1e-10, "solver."),
        max_iter=_get_number(solver_raw, "max_iter", 50, "solver.", integer=True),
        compatibility_tol=_get_number(solver_raw, "compatibility_tol", 1e-8,
                                      "solver."),
    )
    if solver.tol <= 0 or solver.compatibility_tol <= 0 or solver.max_iter < 1:
        raise ConfigError("solver tolerances must be positive, max_iter >= 1")

    oracle_raw = raw.get("oracle", {})
    if not isinstance(oracle_raw, dict):
        raise ConfigError("oracle must be an object")
    _require_keys(oracle_raw, {"enabled", "steps_per_period", "theta",
                               "corrector_sweeps", "poincare_max_iters",
                               "min_periods", "drift_window", "settle_rtol",
                               "shoot_tol", "shoot_bracket", "check_monotone",
                               "psi_extension_factor", "match_tol"}, "oracle.")
    enabled = oracle_raw.get("enabled", False)
    check_monotone = oracle_raw.get("check_monotone", True)
    for name, val in (("enabled", enabled), ("check_monotone", check_monotone)):
        if not isinstance(val, bool):
            raise ConfigError(f"oracle.{name} must be true or false")
    bracket = oracle_raw.get("shoot_bracket")
    if bracket is not None:
        bracket = tuple(_get_list_of_numbers({"b": bracket}, "b", None, "oracle.shoot_bracket"))
        if len(bracket) != 2 or bracket[0] >= bracket[1]:
            raise ConfigError("oracle.shoot_bracket must be [lo, hi] with lo < hi")
    oracle = OracleSpec(
        enabled=enabled,
        steps_per_period=_get_number(oracle_raw, "steps_per_period", 512,
                                     "oracle.", integer=True),
        theta=_get_number(oracle_raw, "theta", 0.5, "oracle."),
        corrector_sweeps=_get_number(oracle_raw, "corrector_sweeps", 1,
                                     "oracle.", integer=True),
        poincare_max_iters=_get_number(oracle_raw, "poincare_max_iters", 800,
                                       "oracle.", integer=True),
        min_periods=_get_number(oracle_raw, "min_periods", 160, "oracle.",
                                integer=True),
        drift_window=_get_number(oracle_raw, "drift_window", 8, "oracle.",
                                 integer=True),
        settle_rtol=_get_number(oracle_raw, "settle_rtol", 0.05, "oracle."),
        shoot_tol=_get_number(oracle_raw, "shoot_tol", 1e-9, "oracle."),
        shoot_bracket=bracket,
        check_monotone=check_monotone,
        psi_extension_factor=_get_number(oracle_raw, "psi_extension_factor", 4.0,
                                         "oracle."),
        match_tol=_get_number(oracle_raw, "match_tol", 1e-6, "oracle."),
    )

    sweep_raw = raw.get("sweep", {})
    if not isinstance(sweep_raw, dict):
        raise ConfigError("sweep must be an object")
    _require_keys(sweep_raw, {"epsilons"}, "sweep.")
    epsilons = tuple(_get_list_of_numbers(sweep_raw, "epsilons", [], "sweep."))
    if any(e < 0 for e in epsilons):
        raise ConfigError("epsilon must be nonnegative")
    if mode == "sweep" and not epsilons:
        raise ConfigError("sweep mode requires a non-empty sweep.epsilons list")

    ident_raw = raw.get("identities", {})
    if not isinstance(ident_raw, dict):
        raise ConfigError("identities must be an object")
    _require_keys(ident_raw, {"h", "levels", "order_band", "unit_vorticity_tol"},
                  "identities.")
    identities = IdentitySpec(
        h=_get_number(ident_raw, "h", 0.01, "identities."),
        levels=_get_number(ident_raw, "levels", 3, "identities.", integer=True),
        order_band=_get_number(ident_raw, "order_band", 0.2, "identities."),
        unit_vorticity_tol=_get_number(ident_raw, "unit_vorticity_tol", 1e-10,
                                       "identities."),
    )

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")

    for name, value in (("epsilon", epsilon),):
        if not math.isfinite(value):
            raise ConfigError(f"{name} must be finite")

    return RunConfig(mode=mode, geometry=geometry, forcing=forcing, grid=grid,
                     solver=solver, oracle=oracle, sweep_epsilons=epsilons,
                     identities=identities, output_dir=output_dir)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
