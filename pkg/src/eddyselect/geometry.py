"""Boundary geometry: slip data, curvature, and collar-coordinate checks.

Conventions
-----------
The boundary is parametrized counterclockwise by arc length s in [0, L).
With x(s) the boundary point, tau(s) = x'(s) the unit tangent and
n(s) = (-tau_2, tau_1) the *inward* unit normal, the collar map is

    x(s, z) = x(s) + z * n(s),        0 <= z < delta,

with Jacobian factor J(z, s) = 1 + z * gamma(s), where the signed curvature

    gamma(s) = x_1''(s) x_2'(s) - x_1'(s) x_2''(s)

is NEGATIVE on convex domains traversed counterclockwise (gamma = -1/R on a
disk of radius R).  With these choices the Frenet relations are
n'(s) = gamma * tau and tau'(s) = -gamma * n.  Other texts use the opposite
sign for the curvature (kappa = tau . grad n . tau); everything in this
package uses gamma as defined above.

The slip q_e(s) is the tangential trace of the unit-vorticity flow
u_* = grad^perp psi_*, where psi_* solves Laplace(psi_*) = 1 with psi_*
constant on the boundary.  On the disk of radius R, u_* is solid rotation
x^perp / 2 and q_e = R/2; on the ellipse x^2/a^2 + y^2 = 1,

    psi_*(x, y) = a^2 / (2 (1 + a^2)) * (x^2/a^2 + y^2),
    q_e(theta)  = a * sqrt(a^2 sin^2 theta + cos^2 theta) / (1 + a^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretization import MonotonePeriodicMap
from .exceptions import GeometryError


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

class DiskEmbedding:
    """Arc-length embedding of the circle of radius R, counterclockwise."""

    def __init__(self, radius: float):
        if radius <= 0:
            raise GeometryError("disk radius must be positive")
        self.radius = float(radius)
        self.length = 2.0 * math.pi * self.radius

    def point(self, s):
        th = np.asarray(s, dtype=float) / self.radius
        return np.stack([self.radius * np.cos(th), self.radius * np.sin(th)], axis=-1)

    def tangent(self, s):
        th = np.asarray(s, dtype=float) / self.radius
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def inward_normal(self, s):
        th = np.asarray(s, dtype=float) / self.radius
        return np.stack([-np.cos(th), -np.sin(th)], axis=-1)

    def curvature(self, s):
        return np.full(np.shape(np.asarray(s)), -1.0 / self.radius)


class EllipseEmbedding:
    """Arc-length embedding of x^2/a^2 + y^2 = 1, counterclockwise.

    The angle parameter theta(s) is recovered by Newton iteration on the
    spectral antiderivative of the speed w(theta) = sqrt(a^2 sin^2 + cos^2),
    so points, tangents and curvature are available at arbitrary s.
    """

    def __init__(self, a: float, n_theta: int = 512):
        if a <= 0:
            raise GeometryError("ellipse axis ratio must be positive")
        self.a = float(a)
        theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
        self._arc = MonotonePeriodicMap(self._speed(theta), 2.0 * math.pi)
        self.length = self._arc.period_out

    def _speed(self, theta):
        return np.sqrt(self.a**2 * np.sin(theta) ** 2 + np.cos(theta) ** 2)

    def theta_of_s(self, s):
        return self._arc.inverse(np.asarray(s, dtype=float))

    def point(self, s):
        th = self.theta_of_s(s)
        return np.stack([self.a * np.cos(th), np.sin(th)], axis=-1)

    def tangent(self, s):
        th = self.theta_of_s(s)
        w = self._speed(th)
        return np.stack([-self.a * np.sin(th) / w, np.cos(th) / w], axis=-1)

    def inward_normal(self, s):
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def curvature(self, s):
        th = self.theta_of_s(s)
        return -self.a / self._speed(th) ** 3

    def slip(self, s):
        th = self.theta_of_s(s)
        return self.a * self._speed(th) / (1.0 + self.a**2)


# ---------------------------------------------------------------------------
# geometry container and constructors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryGeometry:
    """Periodic boundary data: length, uniform arc-length grid, slip, curvature."""

    L: float
    s_grid: np.ndarray
    q_e: np.ndarray
    curvature: np.ndarray | None = None
    embedding: object | None = None

    def __post_init__(self):
        s = np.array(self.s_grid, dtype=float)
        q = np.array(self.q_e, dtype=float)
        n = s.size
        if n < 8 or n % 2 != 0:
            raise GeometryError(f"need an even number >= 8 of samples, got {n}")
        if q.shape != s.shape:
            raise GeometryError("q_e and s_grid must have the same length")
        if not np.all(np.isfinite(q)):
            raise GeometryError("q_e samples must be finite")
        if np.any(q <= 0):
            raise GeometryError("slip vanishes: q_e must be positive everywhere")
        expected = np.arange(n) * (self.L / n)
        if not np.array_equal(s, expected):
            raise GeometryError("s_grid must be exactly uniform, s_i = i*L/N_s")
        for name, arr in (("s_grid", s), ("q_e", q)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.curvature is not None:
            c = np.array(self.curvature, dtype=float)
            if c.shape != s.shape:
                raise GeometryError("curvature must match the sample count")
            c.flags.writeable = False
            object.__setattr__(self, "curvature", c)

    @property
    def n_s(self) -> int:
        return self.s_grid.size

    @property
    def mean_slip(self) -> float:
        return float(self.q_e.mean())


def _check_samples(n_s: int) -> None:
    if n_s < 8 or n_s % 2 != 0:
        raise GeometryError(f"sample count must be even and >= 8, got {n_s}")


def disk_geometry(radius: float, n_s: int) -> BoundaryGeometry:
    """Disk of radius R: L = 2*pi*R, q_e = R/2, gamma = -1/R."""
    if radius <= 0:
        raise GeometryError("disk radius must be positive")
    _check_samples(n_s)
    emb = DiskEmbedding(radius)
    L = emb.length
    s = np.arange(n_s) * (L / n_s)
    return BoundaryGeometry(
        L=L,
        s_grid=s,
        q_e=np.full(n_s, radius / 2.0),
        curvature=np.full(n_s, -1.0 / radius),
        embedding=emb,
    )


def ellipse_geometry(a: float, n_s: int) -> BoundaryGeometry:
    """Ellipse x^2/a^2 + y^2 = 1 resampled on a uniform arc-length grid."""
    if a <= 0:
        raise GeometryError("ellipse axis ratio must be positive")
    _check_samples(n_s)
    emb = EllipseEmbedding(a, n_theta=max(256, 2 * n_s))
    L = emb.length
    s = np.arange(n_s) * (L / n_s)
    return BoundaryGeometry(
        L=L,
        s_grid=s,
        q_e=emb.slip(s),
        curvature=emb.curvature(s),
        embedding=emb,
    )


def custom_geometry(L: float, q_e_samples) -> BoundaryGeometry:
    """Geometry from tabulated slip; carries no curvature or embedding."""
    if L <= 0:
        raise GeometryError("boundary length must be positive")
    q = np.asarray(q_e_samples, dtype=float)
    _check_samples(q.size)
    s = np.arange(q.size) * (L / q.size)
    return BoundaryGeometry(L=L, s_grid=s, q_e=q)


def load_geometry(path) -> BoundaryGeometry:
    """Load a tabulated geometry: header line 'L <value>', one q_e sample per line."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise GeometryError(f"{path}: empty geometry file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "L":
        raise GeometryError(f"{path}: first line must be 'L <value>', got {lines[0]!r}")
    try:
        L = float(head[1])
    except ValueError as exc:
        raise GeometryError(f"{path}: cannot parse boundary length {head[1]!r}") from exc
    if not math.isfinite(L) or L <= 0:
        raise GeometryError(f"{path}: boundary length must be finite and positive")
    samples = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            v = float(ln)
        except ValueError as exc:
            raise GeometryError(f"{path}:{lineno}: cannot parse sample {ln!r}") from exc
        if not math.isfinite(v):
            raise GeometryError(f"{path}:{lineno}: non-finite sample rejected")
        samples.append(v)
    return custom_geometry(L, samples)


# ---------------------------------------------------------------------------
# unit-vorticity stream function checks
# ---------------------------------------------------------------------------

def ellipse_stream_function(a: float):
    """psi_* with Laplace(psi_*) = 1, constant on x^2/a^2 + y^2 = 1."""
    c = a**2 / (2.0 * (1.0 + a**2))

    def psi(x, y):
        return c * (x**2 / a**2 + y**2)

    return psi


def unit_vorticity_field(a: float):
    """u_* = grad^perp psi_* as a callable on points of shape (..., 2)."""
    c = 1.0 / (1.0 + a**2)

    def u(x):
        x = np.asarray(x, dtype=float)
        return np.stack([-(a**2) * c * x[..., 1], c * x[..., 0]], axis=-1)

    return u


def solid_rotation_field():
    """u(x) = x^perp / 2, the unit-vorticity flow on any disk."""

    def u(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.stack([-x[..., 1], x[..., 0]], axis=-1)

    return u


@dataclass(frozen=True)
class UnitVorticityReport:
    max_laplacian_residual: float
    max_normal_slip: float
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.max_laplacian_residual, self.max_normal_slip)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol


def verify_unit_vorticity(a: float, tol: float = 1e-8, step: float = 0.05,
                          n_boundary: int = 128, n_interior: int = 17) -> UnitVorticityReport:
    """Check Laplace(psi_*) = 1 and u_* tangent to the boundary by finite differences.

    psi_* is quadratic, so the centered five-point Laplacian and centered
    gradients are exact up to rounding; residuals measure the formulas, not
    the stencils.  A shrinking step only amplifies rounding, hence the
    moderate default.
    """
    if a <= 0:
        raise GeometryError("ellipse axis ratio must be positive")
    psi = ellipse_stream_function(a)

    theta = np.linspace(0.0, 2.0 * math.pi, n_boundary, endpoint=False)
    bx, by = a * np.cos(theta), np.sin(theta)
    xs = np.linspace(-0.9 * a, 0.9 * a, n_interior)
    ys = np.linspace(-0.9, 0.9, n_interior)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    keep = gx**2 / a**2 + gy**2 <= 0.81
    px = np.concatenate([bx, gx[keep]])
    py = np.concatenate([by, gy[keep]])

    h = step
    lap = (psi(px + h, py) + psi(px - h, py) + psi(px, py + h) + psi(px, py - h)
           - 4.0 * psi(px, py)) / h**2
    lap_res = float(np.max(np.abs(lap - 1.0)))

    ux = -(psi(bx, by + h) - psi(bx, by - h)) / (2.0 * h)
    uy = (psi(bx + h, by) - psi(bx - h, by)) / (2.0 * h)
    nx, ny = 2.0 * bx / a**2, 2.0 * by
    norm = np.hypot(nx, ny)
    slip_res = float(np.max(np.abs((ux * nx + uy * ny) / norm)))

    return UnitVorticityReport(lap_res, slip_res, tol)


# ---------------------------------------------------------------------------
# collar-coordinate operator identities
# ---------------------------------------------------------------------------

IDENTITY_NAMES = ("advection_tau", "advection_n", "laplacian_tau",
                  "divergence", "perp_divergence")


def tubular_width(geometry: BoundaryGeometry) -> float:
    """Safe collar depth: a tenth of the minimal radius of curvature."""
    if geometry.embedding is None:
        raise GeometryError("identity checks need a geometry with an embedding")
    s_dense = np.linspace(0.0, geometry.L, 512, endpoint=False)
    gamma = np.asarray(geometry.embedding.curvature(s_dense))
    return 0.1 / float(np.max(np.abs(gamma)))


def curvilinear_identity_check(geometry: BoundaryGeometry, vector_field, h: float,
                               scalar_field=None) -> dict[str, float]:
    """Max discrepancy, per operator identity, between Cartesian and collar forms.

    Both sides are discretized with second-order stencils tied to the single
    spacing ``h`` (Cartesian steps, z steps, and the s lattice), so each
    reported discrepancy shrinks at O(h^2) for smooth fields.  The collar
    forms, with J = 1 + z*gamma:

        (u.grad u).tau  = (u_t/J) d_s u_t + u_n d_z u_t + (gamma/J) u_t u_n
        (u.grad u).n    = (u_t/J) d_s u_n + u_n d_z u_n - (gamma/J) u_t^2
        (Lap u).tau     = (1/J) d_z(J d_z u_t)
                          + (1/J) d_s[(1/J)(d_s u_t + gamma u_n)]
                          + (gamma/J^2)(d_s u_n - gamma u_t)
        div u           = (1/J)(d_s u_t + gamma u_n) + d_z u_n
        curl u          = (1/J)(d_s u_n - gamma u_t) - d_z u_t
    """
    emb = geometry.embedding
    if emb is None:
        raise GeometryError("identity checks need a geometry with an embedding")
    delta = tubular_width(geometry)
    if h >= delta / 4:
        raise GeometryError(
            f"spacing h = {h} too coarse for the collar width delta = {delta}")

    L = geometry.L
    n_lat = int(round(L / h))
    n_lat += n_lat % 2
    n_lat = max(n_lat, 16)
    ds = L / n_lat
    s = np.arange(n_lat) * ds

    z_lo, z_hi = 0.2 * delta, 0.8 * delta
    n_z = max(7, int(round((z_hi - z_lo) / h)) + 1)
    z = np.linspace(z_lo, z_hi, n_z)
    dz = z[1] - z[0]

    tau = emb.tangent(s)
    nrm = emb.inward_normal(s)
    gamma = np.asarray(emb.curvature(s))[:, None]
    pts = emb.point(s)[:, None, :] + z[None, :, None] * nrm[:, None, :]
    J = 1.0 + z[None, :] * gamma

    u = np.asarray(vector_field(pts), dtype=float)
    u_t = np.einsum("szc,sc->sz", u, tau)
    u_n = np.einsum("szc,sc->sz", u, nrm)

    def d_s(w):
        return (np.roll(w, -1, axis=0) - np.roll(w, 1, axis=0)) / (2.0 * ds)

    def d_z(w):
        out = np.empty_like(w)
        out[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2.0 * dz)
        out[:, 0] = (-3.0 * w[:, 0] + 4.0 * w[:, 1] - w[:, 2]) / (2.0 * dz)
        out[:, -1] = (3.0 * w[:, -1] - 4.0 * w[:, -2] + w[:, -3]) / (2.0 * dz)
        return out

    # Cartesian reference values by centered stencils of spacing h
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    du_dx = (np.asarray(vector_field(pts + ex)) - np.asarray(vector_field(pts - ex))) / (2.0 * h)
    du_dy = (np.asarray(vector_field(pts + ey)) - np.asarray(vector_field(pts - ey))) / (2.0 * h)
    lap_u = (np.asarray(vector_field(pts + ex)) + np.asarray(vector_field(pts - ex))
             + np.asarray(vector_field(pts + ey)) + np.asarray(vector_field(pts - ey))
             - 4.0 * u) / h**2
    adv = u[..., 0:1] * du_dx + u[..., 1:2] * du_dy

    cart = {
        "advection_tau": np.einsum("szc,sc->sz", adv, tau),
        "advection_n": np.einsum("szc,sc->sz", adv, nrm),
        "laplacian_tau": np.einsum("szc,sc->sz", lap_u, tau),
        "divergence": du_dx[..., 0] + du_dy[..., 1],
        "perp_divergence": du_dx[..., 1] - du_dy[..., 0],
    }

    ds_ut, dz_ut = d_s(u_t), d_z(u_t)
    ds_un, dz_un = d_s(u_n), d_z(u_n)
    collar = {
        "advection_tau": u_t / J * ds_ut + u_n * dz_ut + gamma / J * u_t * u_n,
        "advection_n": u_t / J * ds_un + u_n * dz_un - gamma / J * u_t**2,
        "laplacian_tau": (d_z(J * dz_ut) / J
                          + d_s((ds_ut + gamma * u_n) / J) / J
                          + gamma / J**2 * (ds_un - gamma * u_t)),
        "divergence": (ds_ut + gamma * u_n) / J + dz_un,
        "perp_divergence": (ds_un - gamma * u_t) / J - dz_ut,
    }

    # nested z-derivatives (laplacian) inherit O(h) pollution from the
    # one-sided first-pass rows; drop two layers there, one elsewhere
    inner = slice(1, -1)
    inner2 = slice(2, -2)
    report = {}
    for name in IDENTITY_NAMES:
        sl = inner2 if name == "laplacian_tau" else inner
        report[name] = float(np.max(np.abs(cart[name][:, sl] - collar[name][:, sl])))

    if scalar_field is not None:
        f = np.asarray(scalar_field(pts), dtype=float)
        df_dx = (np.asarray(scalar_field(pts + ex)) - np.asarray(scalar_field(pts - ex))) / (2.0 * h)
        df_dy = (np.asarray(scalar_field(pts + ey)) - np.asarray(scalar_field(pts - ey))) / (2.0 * h)
        grad_tau_cart = tau[:, None, 0] * df_dx + tau[:, None, 1] * df_dy
        grad_n_cart = nrm[:, None, 0] * df_dx + nrm[:, None, 1] * df_dy
        report["gradient_tau"] = float(np.max(np.abs(
            (grad_tau_cart - d_s(f) / J)[:, inner])))
        report["gradient_n"] = float(np.max(np.abs(
            (grad_n_cart - d_z(f))[:, inner])))
    return report


def identity_convergence_orders(geometry: BoundaryGeometry, vector_field,
                                h: float, levels: int = 3,
                                scalar_field=None) -> dict[str, list]:
    """Residuals at h, h/2, ... and the observed orders between levels."""
    spacings = [h / 2**k for k in range(levels)]
    reports = [curvilinear_identity_check(geometry, vector_field, hh,
                                          scalar_field=scalar_field)
               for hh in spacings]
    orders = {}
    for name in reports[0]:
        res = [rep[name] for rep in reports]
        obs = [math.log2(res[i] / res[i + 1]) if res[i + 1] > 0 else float("inf")
               for i in range(len(res) - 1)]
        orders[name] = {"h": spacings, "residuals": res, "orders": obs}
    return orders
