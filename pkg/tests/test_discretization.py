import numpy as np
import pytest

from eddyselect import discretization as dz
from eddyselect.exceptions import NonMonotoneMapError


@pytest.fixture
def psi301():
    return np.linspace(0.0, 30.0, 301)


class TestDft:
    def test_constant_profile_is_mode_zero(self):
        modes = dz.dft_s(np.full(64, 3.25))
        assert abs(modes[0] - 3.25) < 1e-14
        assert np.max(np.abs(modes[1:])) < 1e-14

    def test_pure_harmonic_splits_into_half_modes(self):
        L = 2 * np.pi
        s = np.arange(64) * (L / 64)
        modes = dz.dft_s(np.cos(2 * np.pi * s / L))
        assert abs(modes[1] - 0.5) < 1e-14
        assert abs(modes[-1] - 0.5) < 1e-14
        others = np.delete(modes, [1, 63])
        assert np.max(np.abs(others)) < 1e-14

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(128)
        assert np.max(np.abs(dz.idft_s(dz.dft_s(x)) - x)) < 1e-13

    def test_parseval(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(256)
        modes = dz.dft_s(x)
        lhs = np.sum(x**2)
        rhs = 256 * np.sum(np.abs(modes) ** 2)
        assert abs(lhs - rhs) < 1e-12 * lhs

    def test_spectral_derivative_of_harmonic(self):
        L = 5.0
        s = np.arange(32) * (L / 32)
        d = dz.d_ds(np.sin(2 * np.pi * s / L), L)
        expected = (2 * np.pi / L) * np.cos(2 * np.pi * s / L)
        assert np.max(np.abs(d - expected)) < 1e-12


class TestPsiDerivatives:
    def test_second_derivative_exact_on_quadratic(self, psi301):
        out = dz.d2_dpsi2(psi301**2, psi301)
        assert np.max(np.abs(out - 2.0)) < 1e-9

    def test_first_derivative_second_order(self):
        errs = []
        for n in (301, 601):
            p = np.linspace(0, 30, n)
            errs.append(np.max(np.abs(dz.d_dpsi(np.exp(-p), p) + np.exp(-p))))
        ratio = errs[0] / errs[1]
        assert 3.3 < ratio < 4.7

    def test_constant_has_zero_derivatives(self, psi301):
        c = np.full(301, 4.0)
        assert np.max(np.abs(dz.d_dpsi(c, psi301))) < 1e-12
        assert np.max(np.abs(dz.d2_dpsi2(c, psi301))) < 1e-12

    def test_nonuniform_nodes_exact_on_quadratic(self):
        rng = np.random.default_rng(3)
        nodes = np.sort(np.concatenate([[0.0], rng.uniform(0.1, 24.9, 48), [25.0]]))
        vals = 3 * nodes**2 - nodes + 2
        assert np.max(np.abs(dz.d2_dpsi2(vals, nodes) - 6.0)) < 1e-8
        assert np.max(np.abs(dz.d_dpsi(vals, nodes) - (6 * nodes - 1))) < 1e-8

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError, match="at least 5"):
            dz.d_dpsi(np.zeros(4), np.array([0.0, 1.0, 2.0, 3.0]))


class TestQuadrature:
    def test_integrate_s_of_harmonic_vanishes(self):
        L = 2 * np.pi
        s = np.arange(64) * (L / 64)
        assert abs(dz.integrate_s(np.cos(2 * np.pi * s / L), L)) < 1e-13

    def test_integrate_psi_exponential(self, psi301):
        # trapezoid with h = 0.1: Euler-Maclaurin error (h^2/12)*|f'(0)| ~ 8.3e-4
        got = dz.integrate_psi(np.exp(-psi301), psi301)
        assert abs(got - (1.0 - np.exp(-30.0))) < 1e-3

    def test_integrate_psi_weighted_equals_moment(self, psi301):
        # weight (1+psi)^1 against e^-psi equals int (1+psi)e^-psi = 2 - tail
        got = dz.integrate_psi(np.exp(-psi301), psi301, weight_power=1)
        assert abs(got - 2.0) < 2e-3

    def test_psi_moment_of_exponential(self, psi301):
        got = dz.integrate_psi(psi301 * np.exp(-psi301), psi301)
        exact = 1.0 - 31.0 * np.exp(-30.0)
        assert abs(got - exact) < 1e-3

    def test_monotone(self, psi301):
        rng = np.random.default_rng(5)
        f = rng.uniform(0.0, 1.0, psi301.size)
        assert dz.integrate_psi(f, psi301) >= 0.0

    def test_tail_double_integral_matches_kernel_form(self, psi301):
        # int_psi^inf (y-psi) e^-y dy = e^-psi; two stacked trapezoids carry
        # twice the h^2/12 Euler-Maclaurin constant, ~1.7e-3 at h = 0.1
        out = dz.tail_double_integral(np.exp(-psi301), psi301)
        assert np.max(np.abs(out - np.exp(-psi301))) < 2.5e-3


class TestResampling:
    def test_constant_speed_map_is_identity(self):
        L = 2 * np.pi
        s = np.arange(64) * (L / 64)
        mp = dz.MonotonePeriodicMap(np.full(64, 0.5), L)
        assert abs(mp.period_out - np.pi) < 1e-14
        assert np.max(np.abs(mp.forward_grid - s / 2)) < 1e-14
        v = np.cos(2 * np.pi * s / L)
        assert np.max(np.abs(dz.resample_s(v, mp, "forward") - v)) < 1e-13

    def test_smooth_round_trip_on_varying_map(self):
        # measured aliasing floor for the a=2 slip map at n=128 is ~4e-8;
        # doubling n pushes it far below
        for n, tol in ((128, 1e-7), (256, 1e-11)):
            L = 9.688448220547677
            s = np.arange(n) * (L / n)
            mp = dz.MonotonePeriodicMap(0.4 + 0.2 * np.cos(2 * np.pi * s / L), L)
            v = np.cos(2 * np.pi * s / L) + 0.3 * np.sin(4 * np.pi * s / L)
            rt = dz.resample_s(dz.resample_s(v, mp, "forward"), mp, "inverse")
            assert np.max(np.abs(rt - v)) < tol

    def test_mean_preserved_for_band_limited_profiles(self):
        L = 7.0
        n = 128
        s = np.arange(n) * (L / n)
        mp = dz.MonotonePeriodicMap(0.5 + 0.15 * np.sin(2 * np.pi * s / L), L)
        v = 2.0 + np.cos(2 * np.pi * s / L)
        fwd = dz.resample_s(v, mp, "forward")
        assert abs(np.mean(fwd) - np.mean(v)) < 1e-10

    def test_flat_spot_rejected(self):
        speed = np.ones(64)
        speed[10] = 0.0
        with pytest.raises(NonMonotoneMapError, match="non-monotone"):
            dz.MonotonePeriodicMap(speed, 2 * np.pi)

    def test_inverse_is_spectrally_exact(self):
        L = 4.0
        n = 96
        s = np.arange(n) * (L / n)
        mp = dz.MonotonePeriodicMap(1.0 + 0.3 * np.cos(2 * np.pi * s / L), L)
        t = mp.forward(s)
        assert np.max(np.abs(mp.inverse(t) - s)) < 1e-12


class TestFieldIO:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(17)
        grid = dz.Grid.uniform(8, 2 * np.pi, n_psi=6, psi_max=25.0)
        field = dz.Field(grid, rng.standard_normal((8, 6)))
        path = tmp_path / "field.txt"
        dz.write_field(path, field)
        back = dz.read_field(path)
        assert np.array_equal(back.values, field.values)
        assert np.array_equal(back.grid.psi_nodes, grid.psi_nodes)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("nonsense\n0 0 0\n")
        with pytest.raises(ValueError, match="header"):
            dz.read_field(path)


class TestGridValidation:
    def test_psi_max_floor(self):
        with pytest.raises(ValueError, match="psi_max"):
            dz.Grid.uniform(16, 1.0, n_psi=101, psi_max=10.0)

    def test_first_node_zero(self):
        with pytest.raises(ValueError, match="exactly 0"):
            dz.Grid(16, np.linspace(0.5, 30.0, 100), 1.0)

    def test_odd_n_s_rejected(self):
        with pytest.raises(ValueError, match="even"):
            dz.Grid.uniform(15, 1.0)
