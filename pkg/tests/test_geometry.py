import math

import numpy as np
import pytest
from scipy.special import ellipe

from eddyselect import geometry as geo
from eddyselect.exceptions import GeometryError


class TestDisk:
    def test_unit_disk(self):
        g = geo.disk_geometry(1.0, 64)
        assert abs(g.L - 2 * math.pi) < 1e-14
        assert np.max(np.abs(g.q_e - 0.5)) == 0.0
        assert np.max(np.abs(g.curvature + 1.0)) == 0.0

    def test_radius_two_scaling(self):
        g = geo.disk_geometry(2.0, 64)
        assert np.max(np.abs(g.q_e - 1.0)) == 0.0
        assert abs(g.L - 4 * math.pi) < 1e-14

    def test_bad_inputs(self):
        with pytest.raises(GeometryError):
            geo.disk_geometry(-1.0, 64)
        with pytest.raises(GeometryError):
            geo.disk_geometry(1.0, 6)
        with pytest.raises(GeometryError):
            geo.disk_geometry(1.0, 63)


class TestEllipse:
    def test_degenerates_to_disk(self):
        ge = geo.ellipse_geometry(1.0, 64)
        gd = geo.disk_geometry(1.0, 64)
        assert np.max(np.abs(ge.q_e - gd.q_e)) < 1e-12
        assert abs(ge.L - gd.L) < 1e-12

    def test_slip_extremes(self):
        g = geo.ellipse_geometry(2.0, 128)
        # independent evaluation of grad^perp(psi_*) . tau at the axis points
        assert abs(np.min(g.q_e) - 0.4) < 1e-10
        assert abs(np.max(g.q_e) - 0.8) < 1e-10
        # min at theta = 0 (s = 0), max at theta = pi/2
        assert np.argmin(g.q_e) == 0

    def test_perimeter_against_elliptic_integral(self):
        g = geo.ellipse_geometry(2.0, 128)
        exact = 8.0 * ellipe(0.75)  # 4*a*E(1 - 1/a^2), a = 2
        assert abs(g.L - exact) < 1e-3
        # refinement does not move the perimeter at quadrature level
        g2 = geo.ellipse_geometry(2.0, 256)
        assert abs(g2.L - g.L) < 1e-10

    def test_numeric_slip_matches_stored(self):
        # independent route: centered differences of psi_* for u_*, exact
        # boundary tangent; compare to the stored q_e samples
        a = 2.0
        g = geo.ellipse_geometry(a, 64)
        emb = g.embedding
        psi = geo.ellipse_stream_function(a)
        h = 1e-6
        pts = emb.point(g.s_grid)
        ux = -(psi(pts[:, 0], pts[:, 1] + h) - psi(pts[:, 0], pts[:, 1] - h)) / (2 * h)
        uy = (psi(pts[:, 0] + h, pts[:, 1]) - psi(pts[:, 0] - h, pts[:, 1])) / (2 * h)
        tau = emb.tangent(g.s_grid)
        q_num = ux * tau[:, 0] + uy * tau[:, 1]
        assert np.max(np.abs(q_num - g.q_e)) < 1e-8


class TestCustomGeometry:
    def test_matches_disk_for_constant_slip(self):
        g = geo.custom_geometry(2 * math.pi, np.full(64, 0.5))
        gd = geo.disk_geometry(1.0, 64)
        assert np.array_equal(g.q_e, gd.q_e)
        assert g.curvature is None and g.embedding is None

    def test_accepts_varying_positive_slip(self):
        s = np.arange(64) * (2 * math.pi / 64)
        g = geo.custom_geometry(2 * math.pi, 0.5 + 0.1 * np.cos(s))
        assert abs(np.min(g.q_e) - 0.4) < 1e-12

    def test_vanishing_slip_rejected(self):
        samples = np.full(64, 0.5)
        samples[10] = 0.0
        with pytest.raises(GeometryError, match="slip vanishes"):
            geo.custom_geometry(2 * math.pi, samples)

    def test_bad_counts_rejected(self):
        with pytest.raises(GeometryError):
            geo.custom_geometry(1.0, np.full(7, 0.5))


class TestGeometryFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "geom.txt"
        samples = 0.5 + 0.1 * np.cos(np.arange(16) * (2 * math.pi / 16))
        lines = [f"L {2 * math.pi:.17g}"] + [f"{v:.17g}" for v in samples]
        path.write_text("\n".join(lines) + "\n")
        g = geo.load_geometry(path)
        assert np.max(np.abs(g.q_e - samples)) == 0.0

    def test_rejects_nan(self, tmp_path):
        path = tmp_path / "geom.txt"
        path.write_text("L 6.28\n0.5\nnan\n" + "0.5\n" * 6)
        with pytest.raises(GeometryError, match="non-finite"):
            geo.load_geometry(path)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "geom.txt"
        path.write_text("length 6.28\n0.5\n")
        with pytest.raises(GeometryError, match="first line"):
            geo.load_geometry(path)


class TestUnitVorticity:
    def test_disk_case_exact(self):
        rep = geo.verify_unit_vorticity(1.0, tol=1e-8)
        assert rep.max_residual < 1e-11
        assert rep.passed

    def test_ellipse_laplacian(self):
        rep = geo.verify_unit_vorticity(2.0, tol=1e-8)
        assert rep.max_laplacian_residual < 1e-10

    def test_tangency_a3(self):
        rep = geo.verify_unit_vorticity(3.0, tol=1e-10)
        assert rep.max_normal_slip < 1e-10
        assert rep.passed


def _generic_field(x):
    x = np.asarray(x)
    return np.stack(
        [np.sin(x[..., 0]) * np.cos(x[..., 1]) + 0.3 * x[..., 1] ** 2,
         np.cos(2 * x[..., 0]) + x[..., 0] * x[..., 1]], axis=-1)


class TestCurvilinearIdentities:
    def test_disk_solid_rotation_trivial(self):
        g = geo.disk_geometry(1.0, 64)
        rep = geo.curvilinear_identity_check(g, geo.solid_rotation_field(), h=0.01)
        assert rep["divergence"] < 1e-12
        assert rep["perp_divergence"] < 1e-10
        assert rep["advection_tau"] < 1e-12

    def test_gradient_identity_second_order(self):
        # tau.grad f versus (1/J) d_s f for f = x1^2: halving h quarters the gap
        g = geo.disk_geometry(1.0, 64)
        scalar = lambda p: np.asarray(p)[..., 0] ** 2
        r1 = geo.curvilinear_identity_check(g, geo.solid_rotation_field(),
                                            h=0.02, scalar_field=scalar)
        r2 = geo.curvilinear_identity_check(g, geo.solid_rotation_field(),
                                            h=0.01, scalar_field=scalar)
        ratio = r1["gradient_tau"] / r2["gradient_tau"]
        assert 3.0 < ratio < 5.2

    def test_unit_vorticity_field_has_unit_curl_both_ways(self):
        g = geo.ellipse_geometry(2.0, 64)
        rep = geo.curvilinear_identity_check(g, geo.unit_vorticity_field(2.0), h=0.005)
        # both evaluations equal 1; their gap shrinks at O(h^2)
        assert rep["perp_divergence"] < 1e-4

    @pytest.mark.parametrize("make", [lambda: geo.disk_geometry(1.0, 64),
                                      lambda: geo.ellipse_geometry(2.0, 64)])
    def test_all_identities_second_order(self, make):
        g = make()
        study = geo.identity_convergence_orders(g, _generic_field, h=0.008, levels=3)
        for name in geo.IDENTITY_NAMES:
            for order in study[name]["orders"]:
                assert abs(order - 2.0) < 0.2, (name, study[name])

    def test_custom_geometry_rejected(self):
        g = geo.custom_geometry(2 * math.pi, np.full(64, 0.5))
        with pytest.raises(GeometryError, match="embedding"):
            geo.curvilinear_identity_check(g, _generic_field, h=0.01)

    def test_coarse_spacing_rejected(self):
        g = geo.disk_geometry(1.0, 64)
        with pytest.raises(GeometryError, match="collar"):
            geo.curvilinear_identity_check(g, _generic_field, h=0.1)
