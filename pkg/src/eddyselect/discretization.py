"""Shared numerical kernels on the periodic-strip grid.

Conventions used throughout the package:

- The boundary coordinate s lives on a uniform periodic grid
  s_i = i * period / n_s, i = 0..n_s-1.  Transforms in s are plain DFTs;
  mode k multiplies exp(2*pi*1j*k*s/period).
- The wall-normal coordinate psi lives on a strictly increasing node set
  psi_nodes with psi_nodes[0] == 0 and psi_nodes[-1] == psi_max (a
  truncation of the half line).  Derivatives in psi use three-point
  stencils (second order on uniform nodes, exact on quadratics on any
  nodes); integrals use the trapezoid rule.
- Two-dimensional fields are stored dense, shape (n_s, n_psi), row i
  holding the profile at fixed s_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .exceptions import NonMonotoneMapError

DEFAULT_N_PSI = 301
DEFAULT_PSI_MAX = 30.0


@dataclass(frozen=True)
class Grid:
    """Tensor grid for fields: n_s periodic samples x psi_nodes on [0, psi_max].

    ``s_period`` is the length of the periodic direction (the boundary
    length of the geometry the grid is paired with); it is stored here so
    a Field is self-contained.
    """

    n_s: int
    psi_nodes: np.ndarray
    s_period: float

    def __post_init__(self):
        nodes = np.array(self.psi_nodes, dtype=float)
        object.__setattr__(self, "psi_nodes", nodes)
        if self.n_s < 8 or self.n_s % 2 != 0:
            raise ValueError(f"n_s must be even and >= 8, got {self.n_s}")
        if self.s_period <= 0:
            raise ValueError("s_period must be positive")
        if nodes.ndim != 1 or nodes.size < 5:
            raise ValueError("psi_nodes must be a 1-D array with at least 5 nodes")
        if nodes[0] != 0.0:
            raise ValueError("first psi node must be exactly 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("psi_nodes must be strictly increasing")
        if nodes[-1] < 20.0:
            raise ValueError(
                f"psi_max = {nodes[-1]} is too small; the far-field truncation "
                "must satisfy psi_max >= 20"
            )
        nodes.flags.writeable = False

    @property
    def n_psi(self) -> int:
        return self.psi_nodes.size

    @property
    def psi_max(self) -> float:
        return float(self.psi_nodes[-1])

    @property
    def s_nodes(self) -> np.ndarray:
        return np.arange(self.n_s) * (self.s_period / self.n_s)

    @classmethod
    def uniform(cls, n_s: int, s_period: float, n_psi: int = DEFAULT_N_PSI,
                psi_max: float = DEFAULT_PSI_MAX) -> "Grid":
        return cls(n_s, np.linspace(0.0, psi_max, n_psi), s_period)


@dataclass
class Field:
    """Real-valued function sampled on a Grid (rows: fixed s, columns: psi)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_s, self.grid.n_psi):
            raise ValueError(
                f"field shape {vals.shape} does not match grid "
                f"({self.grid.n_s}, {self.grid.n_psi})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        self.values = vals

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros((grid.n_s, grid.n_psi)))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def d_dpsi(self) -> "Field":
        return Field(self.grid, d_dpsi(self.values, self.grid.psi_nodes))

    def d2_dpsi2(self) -> "Field":
        return Field(self.grid, d2_dpsi2(self.values, self.grid.psi_nodes))

    def d_ds(self) -> "Field":
        return Field(self.grid, d_ds(self.values, self.grid.s_period))


# ---------------------------------------------------------------------------
# DFT in the periodic direction
# ---------------------------------------------------------------------------

def dft_s(values: np.ndarray) -> np.ndarray:
    """Complex mode coefficients along axis 0; mode k multiplies exp(2*pi*1j*k*s/L)."""
    values = np.asarray(values)
    return np.fft.fft(values, axis=0) / values.shape[0]


def idft_s(modes: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft_s` for real-valued data."""
    modes = np.asarray(modes)
    return np.fft.ifft(modes * modes.shape[0], axis=0).real


def fourier_wavenumbers(n: int, period: float) -> np.ndarray:
    """Physical wavenumbers xi_k = 2*pi*k/period in FFT layout."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)


def d_ds(values: np.ndarray, period: float) -> np.ndarray:
    """Spectral derivative along axis 0 of periodic samples."""
    values = np.asarray(values, dtype=float)
    xi = fourier_wavenumbers(values.shape[0], period)
    if values.ndim > 1:
        xi = xi.reshape((-1,) + (1,) * (values.ndim - 1))
    return np.fft.ifft(1j * xi * np.fft.fft(values, axis=0), axis=0).real


def trig_eval(modes: np.ndarray, period: float, targets: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of real data at arbitrary points.

    ``modes`` are :func:`dft_s` coefficients (full FFT layout, length n along
    axis 0).  Returns the real part, which for real source data is the
    standard symmetric interpolant (the Nyquist mode is treated as a pure
    cosine).  Output shape: targets.shape + modes.shape[1:].
    """
    modes = np.asarray(modes)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    xi = fourier_wavenumbers(modes.shape[0], period)
    phase = np.exp(1j * np.outer(targets, xi))
    return np.tensordot(phase, modes, axes=(1, 0)).real


def trig_interp_matrix(n: int, period: float, targets: np.ndarray) -> np.ndarray:
    """Real matrix R with (R @ samples) = trig interpolant evaluated at targets."""
    targets = np.asarray(targets, dtype=float)
    xi = fourier_wavenumbers(n, period)
    s_src = np.arange(n) * (period / n)
    phase = np.exp(1j * np.outer(targets, xi))
    inverse = np.exp(-1j * np.outer(xi, s_src)) / n
    return (phase @ inverse).real


# ---------------------------------------------------------------------------
# psi derivatives (three-point stencils, general nodes)
# ---------------------------------------------------------------------------

def _fornberg_weights(x0: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 from nodes x.

    Fornberg's recursive algorithm (Math. Comp. 51, 1988).
    """
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _psi_diff(values: np.ndarray, nodes: np.ndarray, order: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if n < 5:
        raise ValueError("need at least 5 psi nodes for the difference stencils")
    if values.shape[-1] != n:
        raise ValueError("last axis of values must match psi_nodes")
    out = np.empty_like(values)

    # interior: centered three-point stencil (exact on quadratics)
    h1 = nodes[1:-1] - nodes[:-2]
    h2 = nodes[2:] - nodes[1:-1]
    if order == 1:
        wm = -h2 / (h1 * (h1 + h2))
        wc = (h2 - h1) / (h1 * h2)
        wp = h1 / (h2 * (h1 + h2))
    else:
        wm = 2.0 / (h1 * (h1 + h2))
        wc = -2.0 / (h1 * h2)
        wp = 2.0 / (h2 * (h1 + h2))
    out[..., 1:-1] = (wm * values[..., :-2] + wc * values[..., 1:-1]
                      + wp * values[..., 2:])

    # one-sided boundary stencils, second order (4 points for the second
    # derivative, 3 for the first)
    npts = 3 if order == 1 else 4
    w_left = _fornberg_weights(nodes[0], nodes[:npts], order)
    w_right = _fornberg_weights(nodes[-1], nodes[-npts:], order)
    out[..., 0] = values[..., :npts] @ w_left
    out[..., -1] = values[..., -npts:] @ w_right
    return out


def d_dpsi(values: np.ndarray, psi_nodes: np.ndarray) -> np.ndarray:
    """First psi-derivative along the last axis."""
    return _psi_diff(values, psi_nodes, 1)


def d2_dpsi2(values: np.ndarray, psi_nodes: np.ndarray) -> np.ndarray:
    """Second psi-derivative along the last axis."""
    return _psi_diff(values, psi_nodes, 2)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def integrate_s(values: np.ndarray, period: float) -> np.ndarray | float:
    """Rectangle rule over one period along axis 0 (spectrally accurate)."""
    values = np.asarray(values, dtype=float)
    out = values.mean(axis=0) * period
    return float(out) if np.ndim(out) == 0 else out


def integrate_psi(values: np.ndarray, psi_nodes: np.ndarray,
                  weight_power: int = 0) -> np.ndarray | float:
    """Trapezoid rule along the last axis with optional weight (1 + psi)^m."""
    if weight_power < 0:
        raise ValueError("weight_power must be >= 0")
    values = np.asarray(values, dtype=float)
    psi_nodes = np.asarray(psi_nodes, dtype=float)
    if weight_power:
        values = values * (1.0 + psi_nodes) ** weight_power
    out = np.trapezoid(values, psi_nodes, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def tail_integral(values: np.ndarray, psi_nodes: np.ndarray) -> np.ndarray:
    """Profile of int_psi^psi_max values dy (trapezoid), along the last axis."""
    values = np.asarray(values, dtype=float)
    cum = cumulative_trapezoid(values, psi_nodes, axis=-1, initial=0.0)
    return cum[..., -1:] - cum


def tail_double_integral(values: np.ndarray, psi_nodes: np.ndarray) -> np.ndarray:
    """Profile of int_psi^inf int_{psi'}^inf values dy dpsi'.

    Equals int_psi^inf (y - psi) * values(y) dy in the continuum; the
    repeated tail-trapezoid form below is the one used consistently by the
    zero-mode reconstruction and the vorticity update so that the two agree
    to round-off.
    """
    return tail_integral(tail_integral(values, psi_nodes), psi_nodes)


# ---------------------------------------------------------------------------
# monotone periodic maps and resampling
# ---------------------------------------------------------------------------

class MonotonePeriodicMap:
    """Strictly increasing map t = J(s) with periodic derivative J'(s).

    Built from uniform samples of J' > 0 on one period.  J(s) =
    mean(J') * s + (oscillatory antiderivative), evaluated spectrally, so
    forward/inverse values are accurate to the smoothness of J'.  Maps
    [0, period_in) onto [0, period_out) with period_out = mean(J') * period_in.
    """

    def __init__(self, derivative_samples: np.ndarray, period: float):
        d = np.asarray(derivative_samples, dtype=float)
        if d.ndim != 1:
            raise ValueError("derivative samples must be 1-D")
        if np.any(d <= 0):
            raise NonMonotoneMapError(
                "non-monotone map: derivative samples must be strictly positive"
            )
        self.period_in = float(period)
        self.derivative_samples = d
        self.n = d.size
        self.mean_speed = float(d.mean())
        self.period_out = self.mean_speed * self.period_in

        osc_modes = dft_s(d - self.mean_speed)
        xi = fourier_wavenumbers(self.n, self.period_in)
        anti = np.zeros_like(osc_modes)
        anti[1:] = osc_modes[1:] / (1j * xi[1:])
        self._anti_modes = anti
        self._anti_at_zero = float(trig_eval(anti, self.period_in, 0.0)[0])
        self._deriv_modes = dft_s(d)
        s_nodes = np.arange(self.n) * (self.period_in / self.n)
        self.forward_grid = self.forward(s_nodes)
        self.forward_grid.flags.writeable = False
        # cached resampling matrices, built lazily
        self._to_uniform_out = None
        self._to_uniform_in = None

    def forward(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        osc = trig_eval(self._anti_modes, self.period_in, s) - self._anti_at_zero
        return self.mean_speed * s + osc

    def derivative(self, s: np.ndarray) -> np.ndarray:
        return trig_eval(self._deriv_modes, self.period_in, s)

    def inverse(self, t: np.ndarray, tol: float = 1e-14, max_iter: int = 60) -> np.ndarray:
        """Solve J(s) = t by Newton iteration on the spectral representation."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = t / self.mean_speed
        for _ in range(max_iter):
            res = self.forward(s) - t
            if np.max(np.abs(res)) < tol * max(1.0, self.period_out):
                break
            s = s - res / self.derivative(s)
        return s

    def _matrix_to_uniform_out(self) -> np.ndarray:
        if self._to_uniform_out is None:
            t_nodes = np.arange(self.n) * (self.period_out / self.n)
            preimages = self.inverse(t_nodes)
            self._to_uniform_out = trig_interp_matrix(self.n, self.period_in, preimages)
        return self._to_uniform_out

    def _matrix_to_uniform_in(self) -> np.ndarray:
        # a fresh forward-style evaluation of the t-interpolant at J(s_i);
        # each direction is a stable interpolation (inverting the forward
        # matrix instead would be an exponentially ill-conditioned
        # nonuniform-Fourier inversion)
        if self._to_uniform_in is None:
            self._to_uniform_in = trig_interp_matrix(self.n, self.period_out,
                                                     self.forward_grid)
        return self._to_uniform_in


def resample_s(values: np.ndarray, mapping: MonotonePeriodicMap,
               direction: str = "forward") -> np.ndarray:
    """Resample periodic data between the uniform s-grid and the uniform t-grid.

    direction "forward": values sampled on the uniform s-grid are returned
    sampled on the uniform grid of t = J(s) (trigonometric interpolation at
    the preimages).  direction "inverse" undoes it.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != mapping.n:
        raise ValueError("axis 0 of values must match the map's sample count")
    if direction == "forward":
        return mapping._matrix_to_uniform_out() @ values
    if direction == "inverse":
        return mapping._matrix_to_uniform_in() @ values
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# field dump format
# ---------------------------------------------------------------------------

FIELD_HEADER = "# s psi Q"


def write_field(path, field: Field) -> None:
    """Write a field as '# s psi Q' triples, row-major, 17 significant digits."""
    s_nodes = field.grid.s_nodes
    psi = field.grid.psi_nodes
    with open(path, "w") as fh:
        fh.write(FIELD_HEADER + "\n")
        for i in range(field.grid.n_s):
            for j in range(field.grid.n_psi):
                fh.write(f"{s_nodes[i]:.17g} {psi[j]:.17g} {field.values[i, j]:.17g}\n")


def read_field(path) -> Field:
    """Reread a field dump written by :func:`write_field` (bit-exact values)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != FIELD_HEADER:
            raise ValueError(f"bad field dump header: {header!r}")
        data = np.loadtxt(fh)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("field dump must contain s psi Q triples")
    s_vals = np.unique(data[:, 0])
    psi_vals = data[: np.searchsorted(data[:, 0], s_vals[1]) if s_vals.size > 1
                    else data.shape[0], 1]
    n_s, n_psi = s_vals.size, psi_vals.size
    if n_s * n_psi != data.shape[0]:
        raise ValueError("field dump is not a complete tensor grid")
    values = data[:, 2].reshape(n_s, n_psi)
    period = n_s * (s_vals[1] - s_vals[0]) if n_s > 1 else 1.0
    grid = Grid(n_s, psi_vals, period)
    return Field(grid, values)
