"""Vorticity selection and the outer Picard loop.

One step of the staggered scheme, starting from (Q_{n-1}, omega_{n-1}) with
Q_{-1} = 0 and omega_{-1} = 1:

1. the scalar update picks omega_n so that the linear problem below is
   solvable with decaying zero mode,

       omega_n^2 = [ int q_e f^2 ds
                     + (1/omega_{n-1}) int_0^inf y int_0^L f(Q_{n-1}) ds dy ]
                   / int q_e^3 ds ;

2. the boundary data b_n = f^2 - omega_n^2 q_e^2 is rebuilt from omega_n;
3. Q_n solves  d_s Q_n - omega_{n-1} q_e d_psi^2 Q_n = f(Q_{n-1}, s; omega_{n-1})
   with data b_n (note the deliberate stagger: the diffusion coefficient
   lags the data by one step).

The update repeats until ||Q_n - Q_{n-1}||_{X_{1,4}} + |omega_n - omega_{n-1}|
falls below the tolerance.  The y-moment in step 1 uses the same repeated
tail-trapezoid as the zero-mode reconstruction, which keeps the in-loop
compatibility defect at round-off level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import diagnostics
from .discretization import Field, Grid, integrate_s, tail_double_integral
from .exceptions import ConvergenceError
from .geometry import BoundaryGeometry
from .linear_solver import DEFAULT_COMPAT_TOL, LinearProblem, solve_linear
from .nonlinearity import big_N, nonlinearity_f

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


# ---------------------------------------------------------------------------
# forcing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlipForcing:
    """Slip data f = q_e + epsilon * g on the geometry's s-grid."""

    epsilon: float
    g: np.ndarray
    f_slip: np.ndarray

    def __post_init__(self):
        for name in ("g", "f_slip"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if np.any(self.f_slip <= 0):
            raise ValueError(
                "composite slip f = q_e + epsilon*g must stay positive; "
                "reduce epsilon"
            )


def slip_forcing(geometry: BoundaryGeometry, epsilon: float, g) -> SlipForcing:
    g = np.asarray(g, dtype=float)
    if g.shape != (geometry.n_s,):
        raise ValueError("g must have one sample per s grid point")
    return SlipForcing(float(epsilon), g, geometry.q_e + epsilon * g)


def trig_profile(geometry: BoundaryGeometry, cos_coeffs=(), sin_coeffs=(),
                 const: float = 0.0) -> np.ndarray:
    """g(s) = const + sum_j cos_j cos(2 pi j s/L) + sin_j sin(2 pi j s/L), j >= 1."""
    s = geometry.s_grid
    out = np.full(geometry.n_s, float(const))
    for j, c in enumerate(cos_coeffs, start=1):
        out += c * np.cos(2.0 * np.pi * j * s / geometry.L)
    for j, c in enumerate(sin_coeffs, start=1):
        out += c * np.sin(2.0 * np.pi * j * s / geometry.L)
    return out


# ---------------------------------------------------------------------------
# vorticity state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VorticityState:
    """Selected vorticity and its split 1 - omega0^2 = eps*(bar_star + bar_err)."""

    omega0: float
    omega_bar: float
    omega_bar_star: float
    omega_bar_err: float
    epsilon: float

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive (sign fixed by q_e > 0)")
        lhs = 1.0 - self.omega0**2
        rhs = self.epsilon * self.omega_bar
        if abs(lhs - rhs) > 1e-9 * max(1.0, abs(lhs)):
            raise ValueError("inconsistent state: 1 - omega0^2 != eps*omega_bar")
        if abs(self.omega_bar - self.omega_bar_star - self.omega_bar_err) > 1e-9 * max(
                1.0, abs(self.omega_bar)):
            raise ValueError("inconsistent state: omega_bar != star + err parts")


# ---------------------------------------------------------------------------
# closed-form and leading-order selections
# ---------------------------------------------------------------------------

def wood_disk(f_slip, radius: float) -> float:
    """Disk selection: omega0 = sqrt(mean(f^2)) / (R/2)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    f = np.asarray(f_slip, dtype=float)
    return math.sqrt(float(np.mean(f**2))) / (radius / 2.0)


def fl_leading(f_slip, geometry: BoundaryGeometry) -> float:
    """Leading-order selection omega0 = sqrt(int q_e f^2 / int q_e^3).

    Exact on the disk (where it reduces to :func:`wood_disk`); on other
    domains the converged answer differs from it at second order in epsilon.
    """
    f = np.asarray(f_slip, dtype=float)
    qe = geometry.q_e
    num = integrate_s(qe * f**2, geometry.L)
    den = integrate_s(qe**3, geometry.L)
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# the scalar update and boundary data
# ---------------------------------------------------------------------------

def fl_update(Q_prev: Field | None, omega_prev: float, forcing: SlipForcing,
              geometry: BoundaryGeometry, F_prev: Field | None = None) -> VorticityState:
    """Select omega_n from the previous iterate (Q_prev = None means Q = 0).

    F_prev may carry a precomputed f(Q_prev, s; omega_prev) to avoid
    re-evaluating the nonlinearity.
    """
    qe = geometry.q_e
    f = forcing.f_slip
    eps = forcing.epsilon
    int_qf2 = integrate_s(qe * f**2, geometry.L)
    int_q3 = integrate_s(qe**3, geometry.L)

    y_moment = 0.0
    if Q_prev is not None:
        if F_prev is None:
            F_prev = nonlinearity_f(Q_prev, omega_prev, geometry)
        phi = np.asarray(integrate_s(F_prev.values, geometry.L))
        y_moment = float(tail_double_integral(phi, Q_prev.grid.psi_nodes)[0])

    omega_sq = (int_qf2 + y_moment / omega_prev) / int_q3
    if omega_sq <= 0:
        raise ValueError(
            f"vorticity update produced omega^2 = {omega_sq:.6e} <= 0; "
            "the forcing is far outside the perturbative regime"
        )
    omega0 = math.sqrt(omega_sq)

    bar_star = -(2.0 * integrate_s(forcing.g * qe**2, geometry.L)
                 + eps * integrate_s(forcing.g**2 * qe, geometry.L)) / int_q3
    if eps > 0:
        bar = (1.0 - omega_sq) / eps
        bar_err = bar - bar_star
    else:
        bar, bar_err = bar_star, 0.0
    return VorticityState(omega0, bar, bar_star, bar_err, eps)


def boundary_data(state: VorticityState, forcing: SlipForcing,
                  geometry: BoundaryGeometry) -> np.ndarray:
    """b(s) = f^2 - omega0^2 q_e^2, cross-checked against the epsilon form."""
    qe = geometry.q_e
    eps = forcing.epsilon
    form1 = forcing.f_slip**2 - state.omega0**2 * qe**2
    form2 = (eps * state.omega_bar * qe**2 + 2.0 * eps * forcing.g * qe
             + eps**2 * forcing.g**2)
    gap = float(np.max(np.abs(form1 - form2)))
    if gap > 1e-12:
        raise ValueError(
            f"inconsistent vorticity state: boundary-data forms differ by {gap:.3e}")
    return form1


# ---------------------------------------------------------------------------
# iteration trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    n: int
    omega0: float
    omega_bar: float
    q_norm: float
    dq_norm: float
    domega: float
    domega_bar: float
    compat_residual: float
    pde_residual: float


@dataclass
class IterationTrace:
    rows: list = dataclass_field(default_factory=list)
    converged: bool = False

    @property
    def n_iterations(self) -> int:
        return len(self.rows)

    def contraction_ratios(self) -> list:
        """dq_norm ratios, reported from n >= 2 onward."""
        out = []
        for prev, cur in zip(self.rows[1:], self.rows[2:]):
            if prev.dq_norm > 0:
                out.append(cur.dq_norm / prev.dq_norm)
        return out

    def omega_converged_at(self, tol: float) -> int | None:
        """First iteration whose omega moved by less than tol."""
        for row in self.rows:
            if row.n >= 1 and row.domega < tol:
                return row.n
        return None

    def to_text(self) -> str:
        header = (f"{'n':>3s} {'omega0':>20s} {'|Q|_X14':>13s} {'|dQ|_X14':>13s} "
                  f"{'|domega|':>13s} {'|domega_bar|':>13s} {'compat':>13s} "
                  f"{'pde_res':>13s}")
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r.n:3d} {r.omega0:20.16f} {r.q_norm:13.6e} {r.dq_norm:13.6e} "
                f"{r.domega:13.6e} {abs(r.domega_bar):13.6e} "
                f"{r.compat_residual:13.6e} {r.pde_residual:13.6e}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def epsilon_guard(forcing: SlipForcing, geometry: BoundaryGeometry) -> float:
    """Heuristic small-forcing bound 0.05*min(q_e)^2/max|g| (inf when g = 0)."""
    gmax = float(np.max(np.abs(forcing.g)))
    if gmax == 0.0:
        return math.inf
    return 0.05 * float(np.min(geometry.q_e)) ** 2 / gmax


def picard_solve(geometry: BoundaryGeometry, forcing: SlipForcing, grid: Grid,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 compatibility_tol: float = DEFAULT_COMPAT_TOL,
                 ) -> tuple[VorticityState, Field, IterationTrace]:
    """Run the staggered iteration to a fixed point (omega0, Q).

    Raises ConvergenceError (with the trace attached) when max_iter is
    exhausted.  Warns when epsilon exceeds the small-forcing heuristic; the
    hard failure modes in that regime are layer degeneracy or a failed
    update, both raised from the inner operations.
    """
    if grid.n_s != geometry.n_s:
        raise ValueError("grid and geometry disagree on the number of s samples")
    bound = epsilon_guard(forcing, geometry)
    if forcing.epsilon > bound:
        warnings.warn(
            f"epsilon = {forcing.epsilon} exceeds the small-forcing heuristic "
            f"{bound:.3e}; convergence is not guaranteed",
            stacklevel=2,
        )

    trace = IterationTrace()
    q_prev: Field | None = None
    omega_prev = 1.0
    bar_prev = 0.0

    for n in range(max_iter):
        f_prev = (nonlinearity_f(q_prev, omega_prev, geometry)
                  if q_prev is not None else Field.zeros(grid))
        state = fl_update(q_prev, omega_prev, forcing, geometry,
                          F_prev=f_prev if q_prev is not None else None)
        b = boundary_data(state, forcing, geometry)
        problem = LinearProblem(geometry, omega_prev, f_prev, b)
        q_new = solve_linear(problem, grid, compatibility_tol=compatibility_tol)

        delta = Field(grid, q_new.values - (q_prev.values if q_prev is not None
                                            else 0.0))
        dq_norm = diagnostics.xkm_norm(delta, diagnostics.X14)
        domega = abs(state.omega0 - omega_prev)
        trace.rows.append(TraceRow(
            n=n,
            omega0=state.omega0,
            omega_bar=state.omega_bar,
            q_norm=diagnostics.xkm_norm(q_new, diagnostics.X14),
            dq_norm=dq_norm,
            domega=domega,
            domega_bar=state.omega_bar - bar_prev,
            compat_residual=diagnostics.compatibility_residual(
                q_new, state.omega0, forcing, geometry),
            pde_residual=diagnostics.pde_residual(
                q_new, state.omega0, geometry).max_abs,
        ))

        q_prev, omega_prev, bar_prev = q_new, state.omega0, state.omega_bar
        if dq_norm + domega < tol:
            trace.converged = True
            return state, q_new, trace

    err = ConvergenceError(
        f"Picard iteration did not converge in {max_iter} iterations "
        f"(last update {trace.rows[-1].dq_norm + trace.rows[-1].domega:.3e}, "
        f"tol {tol:.1e})")
    err.trace = trace
    raise err
