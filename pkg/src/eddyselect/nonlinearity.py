"""The quasilinear right-hand side of the layer equation and its s-average."""

from __future__ import annotations

import numpy as np

from .discretization import Field, d_ds, integrate_s
from .exceptions import DegenerateLayerError
from .geometry import BoundaryGeometry


def layer_speed_squared(Q: Field, omega: float, geometry: BoundaryGeometry) -> np.ndarray:
    """q^2 = omega^2 q_e^2 + Q; raises when the layer stagnates."""
    q_sq = (omega * geometry.q_e[:, None]) ** 2 + Q.values
    if np.any(q_sq <= 0.0):
        raise DegenerateLayerError(
            "stagnant layer: omega^2 q_e^2 + Q is not positive everywhere "
            f"(min = {float(q_sq.min()):.6e}); the small-forcing regime is left"
        )
    return q_sq


def nonlinearity_f(Q: Field, omega: float, geometry: BoundaryGeometry) -> Field:
    """f(Q, s; omega) = (1 - omega*q_e / sqrt(omega^2 q_e^2 + Q)) * d_s Q.

    The prefactor is evaluated in the rationalized form
    Q / (sqrt(c^2+Q) (sqrt(c^2+Q) + c)), c = omega*q_e, which is exact for
    small Q instead of cancelling; d_s Q is spectral.
    """
    q_sq = layer_speed_squared(Q, omega, geometry)
    c = omega * geometry.q_e[:, None]
    root = np.sqrt(q_sq)
    prefactor = Q.values / (root * (root + c))
    return Field(Q.grid, prefactor * d_ds(Q.values, geometry.L))


def big_N(Q: Field, omega: float, geometry: BoundaryGeometry) -> np.ndarray:
    """N^omega[Q](psi) = (1/omega) * int_0^L f(Q, s; omega) ds, a psi-profile.

    Vanishes identically (to aliasing level for smooth fields) when q_e is
    constant, because the integrand is then a total s-derivative.
    """
    f = nonlinearity_f(Q, omega, geometry)
    return np.asarray(integrate_s(f.values, geometry.L)) / omega
