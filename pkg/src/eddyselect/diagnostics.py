"""Weighted Sobolev norms and residual diagnostics.

Sign conventions: integrating the layer equation over one period gives

    d^2/dpsi^2 int_0^L q_e Q ds = -N^omega[Q](psi),

so with decay at infinity

    int_0^L q_e Q(s, psi) ds = -int_psi^inf (y - psi) N^omega[Q](y) dy,

and at psi = 0 the selection condition

    int_0^L q_e (f^2 - omega^2 q_e^2) ds + int_0^inf y N^omega[Q](y) dy = 0.

The residuals below are the left-hand sides of these identities; their tail
integrals use the same repeated-trapezoid rule as the vorticity update, so a
converged solve satisfies them to round-off rather than to quadrature error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discretization import (
    Field,
    d2_dpsi2,
    d_dpsi,
    d_ds,
    integrate_s,
    tail_double_integral,
)
from .geometry import BoundaryGeometry
from .nonlinearity import big_N, layer_speed_squared

# direct summation is safe while max weight^2 * values stay in range;
# beyond this exponent the log-compensated path takes over
_LOG_PATH_EXPONENT = 600.0


@dataclass(frozen=True)
class NormSpec:
    """X_{k,m}: k s-derivatives, polynomial psi-weights up to <psi>^m."""

    k: int
    m: int

    def __post_init__(self):
        if not 0 <= self.k <= 2:
            raise ValueError(f"k must be in 0..2, got {self.k}")
        if not 0 <= self.m <= 50:
            raise ValueError(f"m must be in 0..50, got {self.m}")


X14 = NormSpec(1, 4)
X250 = NormSpec(2, 50)


def _term_families(field: Field, k: int):
    """For each k' <= k: [d_s^k' f, d_s^(k'+1) f, d_psi d_s^k' f, d_psi^2 d_s^k' f]."""
    vals = field.values
    psi = field.grid.psi_nodes
    period = field.grid.s_period
    ds_powers = [vals]
    for _ in range(k + 1):
        ds_powers.append(d_ds(ds_powers[-1], period))
    for kp in range(k + 1):
        base = ds_powers[kp]
        yield [base, ds_powers[kp + 1], d_dpsi(base, psi), d2_dpsi2(base, psi)]


def xkm_norm(field: Field, spec: NormSpec, method: str = "auto") -> float:
    """The weighted norm ||f||_{X_{k,m}} on the discrete grid.

    method: "direct" accumulates floats, "log" accumulates logarithms of the
    squared terms (for weights too large to square safely), "auto" picks.
    """
    grid = field.grid
    psi = grid.psi_nodes
    log_weight = np.log1p(psi)
    if method == "auto":
        method = "direct" if 2 * spec.m * log_weight[-1] < _LOG_PATH_EXPONENT else "log"

    # trapezoid weights in psi, rectangle in s
    w_psi = np.zeros_like(psi)
    dpsi = np.diff(psi)
    w_psi[:-1] += 0.5 * dpsi
    w_psi[1:] += 0.5 * dpsi
    ds = grid.s_period / grid.n_s

    tail_region = psi >= psi[-1] - 0.05 * psi[-1]

    if method == "direct":
        total = 0.0
        tail_part = 0.0
        for family in _term_families(field, spec.k):
            sq_profiles = [ds * (fam**2).sum(axis=0) for fam in family]
            for mp in range(spec.m + 1):
                weight = w_psi * np.exp(2 * mp * log_weight)
                for prof in sq_profiles:
                    total += float(weight @ prof)
                    tail_part += float(weight[tail_region] @ prof[tail_region])
        norm = math.sqrt(total)
    elif method == "log":
        logs = []
        tail_logs = []
        log_wpsi = np.where(w_psi > 0, np.log(np.maximum(w_psi, 1e-300)), -np.inf)
        for family in _term_families(field, spec.k):
            for fam in family:
                sq = ds * (fam**2).sum(axis=0)
                pos = sq > 0
                if not np.any(pos):
                    continue
                base_log = np.log(sq[pos]) + log_wpsi[pos]
                lw = log_weight[pos]
                tails = tail_region[pos]
                for mp in range(spec.m + 1):
                    contrib = base_log + 2 * mp * lw
                    logs.append(contrib)
                    if np.any(tails):
                        tail_logs.append(contrib[tails])
        if not logs:
            return 0.0
        from scipy.special import logsumexp

        log_total = logsumexp(np.concatenate(logs))
        norm = math.exp(0.5 * log_total)
        total = math.exp(log_total) if log_total < 700 else math.inf
        tail_part = (math.exp(logsumexp(np.concatenate(tail_logs)))
                     if tail_logs else 0.0)
    else:
        raise ValueError(f"unknown method {method!r}")

    if total > 0 and tail_part > 1e-6 * total:
        warnings.warn(
            f"psi_max = {psi[-1]} may be too small for X_{{{spec.k},{spec.m}}}: "
            f"the outermost 5% of the psi range carries {tail_part / total:.2e} "
            "of the squared norm",
            stacklevel=2,
        )
    return norm


def sup_norm_embedding_ratio(field: Field) -> float:
    """max|f| / ||f||_{X_{1,0}} (finite by the Sobolev embedding; sanity metric)."""
    denom = xkm_norm(field, NormSpec(1, 0))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(field.values))) / denom


class PdeResidual(NamedTuple):
    max_abs: float
    l2: float


def pde_residual(Q: Field, omega: float, geometry: BoundaryGeometry) -> PdeResidual:
    """Residual of d_s Q - q d_psi^2 Q with q = sqrt(omega^2 q_e^2 + Q), interior nodes."""
    q = np.sqrt(layer_speed_squared(Q, omega, geometry))
    res = d_ds(Q.values, geometry.L) - q * d2_dpsi2(Q.values, Q.grid.psi_nodes)
    interior = res[:, 1:-1]
    psi_in = Q.grid.psi_nodes[1:-1]
    sq_profile = integrate_s(interior**2, geometry.L)
    l2 = math.sqrt(float(np.trapezoid(sq_profile, psi_in)))
    return PdeResidual(float(np.max(np.abs(interior))), l2)


def compatibility_residual(Q: Field, omega: float, forcing,
                           geometry: BoundaryGeometry) -> float:
    """Signed defect of the vorticity selection condition at psi = 0."""
    qe = geometry.q_e
    f = forcing.f_slip
    lhs = integrate_s(qe * (f**2 - omega**2 * qe**2), geometry.L)
    n_profile = big_N(Q, omega, geometry)
    y_moment = tail_double_integral(n_profile, Q.grid.psi_nodes)[0]
    return float(lhs + y_moment)


def pointwise_identity_residual(Q: Field, omega: float, geometry: BoundaryGeometry,
                                psi_samples) -> np.ndarray:
    """Residual of int q_e Q ds + int_psi^inf (y-psi) N dy over given psi values."""
    psi = Q.grid.psi_nodes
    lhs = integrate_s(geometry.q_e[:, None] * Q.values, geometry.L)
    rhs = tail_double_integral(big_N(Q, omega, geometry), psi)
    profile = lhs + rhs
    return np.interp(np.asarray(psi_samples, dtype=float), psi, profile)
