"""Independent cross-check: march the nonlinear layer equation in s.

Treating s as time, d_s Q = q(Q) d_psi^2 Q is a nonlinear heat equation on
the truncated half line, forced through the Dirichlet wall value
Q(s, 0) = b(s; omega).  One period of the march is a Poincare map on
psi-profiles.  Its oscillating transients contract; what remains is a
per-period zero-mode drift r(omega) that vanishes exactly when omega is the
selected vorticity, so omega is recovered by root-finding on r.  The method
shares nothing with the spectral/Green's-function route: theta-scheme in s,
tridiagonal solves in psi, root bracketing in omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .discretization import Grid, dft_s, trig_eval
from .exceptions import DegenerateLayerError, OracleBracketError, OracleError
from .geometry import BoundaryGeometry
from .iteration import SlipForcing, fl_leading

DEFAULT_SHOOT_TOL = 1e-10


@dataclass(frozen=True)
class MarchConfig:
    """Knobs of the marching oracle.

    theta = 0.5 is the trapezoidal scheme (second order in the step),
    theta = 1 fully implicit.  corrector_sweeps > 0 re-centers the lagged
    diffusion coefficient, restoring second order for theta = 0.5.
    The drift is read after the defect profile stops changing shape
    (relative change below settle_rtol per period) and is averaged over
    drift_window further periods.
    """

    steps_per_period: int = 512
    theta: float = 0.5
    corrector_sweeps: int = 1
    poincare_max_iters: int = 800
    min_periods: int = 160
    drift_window: int = 8
    settle_rtol: float = 0.05
    shoot_tol: float = 1e-9
    shoot_bracket: tuple[float, float] | None = None
    check_monotone: bool = True
    psi_extension_factor: float = 4.0

    def __post_init__(self):
        if self.steps_per_period < 64:
            raise ValueError("steps_per_period must be at least 64")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        if self.corrector_sweeps < 0:
            raise ValueError("corrector_sweeps must be >= 0")
        if self.psi_extension_factor < 1.0:
            raise ValueError("psi_extension_factor must be >= 1")


class _MarchOperator:
    """Precomputed one-period stepper for fixed (omega, forcing, geometry, grid)."""

    def __init__(self, omega: float, forcing: SlipForcing,
                 geometry: BoundaryGeometry, grid: Grid, config: MarchConfig):
        self.omega = float(omega)
        self.config = config
        self.psi = grid.psi_nodes
        n = self.psi.size
        m = config.steps_per_period
        self.ds = geometry.L / m

        # slip data at the march substeps and midpoints, by trig interpolation
        qe_modes = dft_s(geometry.q_e)
        g_modes = dft_s(forcing.g)
        s_new = (np.arange(m) + 1.0) * self.ds
        s_mid = (np.arange(m) + 0.5) * self.ds
        qe_new = trig_eval(qe_modes, geometry.L, s_new)
        g_new = trig_eval(g_modes, geometry.L, s_new)
        f_new = qe_new + forcing.epsilon * g_new
        self.b_new = f_new**2 - omega**2 * qe_new**2
        self.qe_mid_sq = trig_eval(qe_modes, geometry.L, s_mid) ** 2

        # interior second-difference weights (general nodes)
        h1 = self.psi[1:-1] - self.psi[:-2]
        h2 = self.psi[2:] - self.psi[1:-1]
        self.wm = 2.0 / (h1 * (h1 + h2))
        self.wc = -2.0 / (h1 * h2)
        self.wp = 2.0 / (h2 * (h1 + h2))
        self.n = n

    def _d2(self, v: np.ndarray) -> np.ndarray:
        return self.wm * v[:-2] + self.wc * v[1:-1] + self.wp * v[2:]

    def _step(self, v: np.ndarray, step_index: int) -> np.ndarray:
        cfg = self.config
        theta = cfg.theta
        ds = self.ds
        c_sq = self.omega**2 * self.qe_mid_sq[step_index]
        b_next = self.b_new[step_index]
        v_new = v
        for sweep in range(cfg.corrector_sweeps + 1):
            v_mid = v if sweep == 0 else 0.5 * (v + v_new)
            q_sq = c_sq + v_mid[1:-1]
            if np.any(q_sq <= 0.0):
                raise DegenerateLayerError(
                    "stagnant layer during march: omega^2 q_e^2 + Q <= 0 "
                    f"(omega = {self.omega})"
                )
            q = np.sqrt(q_sq)
            rhs = np.empty(self.n)
            rhs[1:-1] = v[1:-1] + (1.0 - theta) * ds * q * self._d2(v)
            rhs[0] = b_next
            rhs[-1] = 0.0
            ab = np.zeros((3, self.n))
            ab[0, 2:] = -theta * ds * q * self.wp     # superdiagonal
            ab[1, 0] = ab[1, -1] = 1.0
            ab[1, 1:-1] = 1.0 - theta * ds * q * self.wc
            ab[2, :-2] = -theta * ds * q * self.wm    # subdiagonal
            v_new = solve_banded((1, 1), ab, rhs)
        return v_new

    def one_period(self, v: np.ndarray) -> np.ndarray:
        out = np.array(v, dtype=float)
        for m in range(self.config.steps_per_period):
            out = self._step(out, m)
        return out


def march_period(q_init: np.ndarray, omega: float, forcing: SlipForcing,
                 geometry: BoundaryGeometry, grid: Grid,
                 config: MarchConfig = MarchConfig()) -> np.ndarray:
    """Advance a psi-profile from s = 0 to s = L."""
    q_init = np.asarray(q_init, dtype=float)
    if q_init.shape != (grid.n_psi,):
        raise ValueError("q_init must be a profile on the grid's psi nodes")
    return _MarchOperator(omega, forcing, geometry, grid, config).one_period(q_init)


def _extended_grid(grid: Grid, factor: float) -> Grid:
    """Continue the psi nodes past psi_max (same last spacing), factor x taller.

    The period map's slow zero-mode dynamics needs more head room than the
    direct solver: the Dirichlet lid at psi_max biases the drift root at
    O((pi/psi_max)^2), so the oracle marches in a taller box.
    """
    if factor <= 1.0:
        return grid
    nodes = grid.psi_nodes
    h_last = nodes[-1] - nodes[-2]
    n_extra = int(math.ceil((factor - 1.0) * nodes[-1] / h_last))
    extra = nodes[-1] + h_last * np.arange(1, n_extra + 1)
    return Grid(grid.n_s, np.concatenate([nodes, extra]), grid.s_period)


@dataclass(frozen=True)
class PoincareResult:
    profile: np.ndarray          # profile at s = 0 after the last period
    psi_nodes: np.ndarray        # nodes the profile lives on (extended box)
    drift: float                 # q_e-weighted per-period zero-mode drift r(omega)
    periods: int
    settled: bool
    defect_norm: float           # sup norm of the last per-period defect


def poincare_fixed_point(omega: float, forcing: SlipForcing,
                         geometry: BoundaryGeometry, grid: Grid,
                         config: MarchConfig = MarchConfig()) -> PoincareResult:
    """Iterate the period map from the zero profile and read the drift.

    The defect d_k = P(v_k) - v_k loses its fast (oscillating) content
    within a few periods; once its shape stops changing, what is left is the
    slow zero-mode drift whose amplitude is proportional to the selection
    defect of omega.  The reported drift is

        r(omega) = <q_e> * int_0^psi_max d(psi) dpsi,

    averaged over ``drift_window`` periods after settling.
    """
    grid = _extended_grid(grid, config.psi_extension_factor)
    op = _MarchOperator(omega, forcing, geometry, grid, config)
    qe_mean = geometry.mean_slip
    scale = max(float(np.max(np.abs(op.b_new))), 1e-30)
    settle_atol = 1e-13 * scale

    v = np.zeros(grid.n_psi)
    v[0] = op.b_new[-1]  # wall value at s = 0 (= s = L by periodicity)
    defect_prev = None
    settled_at = None
    for k in range(1, config.poincare_max_iters + 1):
        v_next = op.one_period(v)
        defect = v_next - v
        v = v_next
        if defect_prev is not None and k >= config.min_periods:
            change = float(np.max(np.abs(defect - defect_prev)))
            size = float(np.max(np.abs(defect)))
            if change <= config.settle_rtol * size + settle_atol:
                settled_at = k
                break
        defect_prev = defect
    if settled_at is None:
        raise OracleError(
            f"period map defect did not settle within {config.poincare_max_iters} "
            f"periods at omega = {omega}"
        )

    drifts = [qe_mean * float(np.trapezoid(defect, grid.psi_nodes))]
    for _ in range(config.drift_window - 1):
        v_next = op.one_period(v)
        defect = v_next - v
        v = v_next
        drifts.append(qe_mean * float(np.trapezoid(defect, grid.psi_nodes)))
    return PoincareResult(
        profile=v,
        psi_nodes=grid.psi_nodes,
        drift=float(np.mean(drifts)),
        periods=settled_at + config.drift_window - 1,
        settled=True,
        defect_norm=float(np.max(np.abs(defect))),
    )


def shoot_omega(forcing: SlipForcing, geometry: BoundaryGeometry, grid: Grid,
                config: MarchConfig = MarchConfig()) -> float:
    """Select omega as the root of the period-map drift r(omega).

    The bracket starts a few multiples of the theoretical O(eps^2) error
    band around the leading-order value and expands geometrically (up to
    +-5*eps relative) until r changes sign; r is strictly decreasing in
    omega near the root, which is probed before root-finding when
    ``check_monotone`` is set.
    """
    lead = fl_leading(forcing.f_slip, geometry)

    def drift(om: float) -> float:
        return poincare_fixed_point(om, forcing, geometry, grid, config).drift

    eps = forcing.epsilon
    if config.shoot_bracket is not None:
        lo, hi = config.shoot_bracket
        r_lo, r_hi = drift(lo), drift(hi)
        if r_lo == 0.0:
            return lo
        if r_hi == 0.0:
            return hi
        if np.sign(r_lo) == np.sign(r_hi):
            raise OracleBracketError(
                f"no sign change of the drift on [{lo}, {hi}]: "
                f"r(lo) = {r_lo:.3e}, r(hi) = {r_hi:.3e}",
                r_lo=r_lo, r_hi=r_hi)
    else:
        half = max(2e-3 * eps * lead, 10.0 * config.shoot_tol, 1e-7)
        half_max = max(5.0 * eps * lead, 4.0 * half)
        while True:
            lo, hi = lead - half, lead + half
            r_lo, r_hi = drift(lo), drift(hi)
            if np.sign(r_lo) != np.sign(r_hi):
                break
            if half >= half_max:
                raise OracleBracketError(
                    f"no sign change of the drift on [{lo}, {hi}]: "
                    f"r(lo) = {r_lo:.3e}, r(hi) = {r_hi:.3e}",
                    r_lo=r_lo, r_hi=r_hi)
            half = min(4.0 * half, half_max)

    if config.check_monotone:
        r_mid = drift(0.5 * (lo + hi))
        triple = [r_lo, r_mid, r_hi]
        if not (triple[0] > triple[1] > triple[2]):
            raise OracleError(
                "drift is not strictly decreasing across the bracket "
                f"[{lo}, {hi}]: r = {triple}; refusing to bisect blindly")

    root = brentq(drift, lo, hi, xtol=config.shoot_tol, rtol=1e-15)
    return float(root)
