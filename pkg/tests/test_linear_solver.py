import numpy as np
import pytest

from eddyselect import discretization as dz
from eddyselect import geometry as geo
from eddyselect import linear_solver as ls
from eddyselect.exceptions import CompatibilityError


@pytest.fixture(scope="module")
def ellipse():
    return geo.ellipse_geometry(2.0, 128)


@pytest.fixture(scope="module")
def disk():
    return geo.disk_geometry(1.0, 64)


def _grid(geometry, n_psi=301):
    return dz.Grid.uniform(geometry.n_s, geometry.L, n_psi=n_psi)


class TestTMap:
    def test_disk_map_is_half_speed(self, disk):
        tm = ls.build_t_map(disk, 1.0)
        assert abs(tm.L_t - np.pi) < 1e-14
        assert np.max(np.abs(tm.J_samples - disk.s_grid / 2)) < 1e-13

    def test_negative_omega_rejected(self, disk):
        with pytest.raises(ValueError, match="parabolicity"):
            ls.build_t_map(disk, -1.0)

    def test_ellipse_endpoint(self, ellipse):
        tm = ls.build_t_map(ellipse, 1.0)
        assert np.all(np.diff(tm.J_samples) > 0)
        expected_end = ellipse.mean_slip * ellipse.L
        assert abs(tm.mapping.forward(np.array([ellipse.L]))[0] - expected_end) < 1e-10


class TestSolveMode:
    def test_pure_data_kernel_modulus(self):
        psi = np.linspace(0, 30, 301)
        v = ls.solve_mode(1.0, 1.0, np.zeros(301, complex), psi)
        assert np.max(np.abs(np.abs(v) - np.exp(-psi / np.sqrt(2)))) < 1e-10
        for p in (1.0, 5.0, 10.0):
            j = int(round(p / 0.1))
            assert abs(abs(v[j]) - np.exp(-psi[j] / np.sqrt(2))) < 1e-12

    def test_zero_data_zero_source(self):
        psi = np.linspace(0, 30, 301)
        v = ls.solve_mode(4.0, 0.0, np.zeros(301, complex), psi)
        assert np.max(np.abs(v)) == 0.0

    def test_manufactured_solution_second_order(self):
        errs = []
        for n in (151, 301, 601):
            psi = np.linspace(0, 30, n)
            exact = psi * np.exp(-psi)
            source = 1j * exact - (psi - 2) * np.exp(-psi)
            got = ls.solve_mode(1.0, 0.0, source, psi)
            errs.append(np.max(np.abs(got - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 2.0) < 0.2)

    def test_boundary_value_exact(self):
        psi = np.linspace(0, 25, 251)
        rng = np.random.default_rng(0)
        h = rng.standard_normal(251) * np.exp(-psi) + 0j
        v = ls.solve_mode(2.5, 0.7 - 0.2j, h, psi)
        assert v[0] == 0.7 - 0.2j

    def test_zero_mode_rejected(self):
        psi = np.linspace(0, 30, 301)
        with pytest.raises(ValueError, match="zero mode"):
            ls.solve_mode(0.0, 1.0, np.zeros(301, complex), psi)

    def test_negative_wavenumber_conjugate_symmetry(self):
        psi = np.linspace(0, 30, 301)
        h = (np.exp(-psi) * (1 + 0.5j)).astype(complex)
        vp = ls.solve_mode(3.0, 0.4 + 0.1j, h, psi)
        vm = ls.solve_mode(-3.0, 0.4 - 0.1j, np.conj(h), psi)
        assert np.max(np.abs(vm - np.conj(vp))) < 1e-14


class TestSolveZeroMode:
    def test_all_zero(self, disk):
        grid = _grid(disk)
        out = ls.solve_zero_mode(None, None, disk, 1.0, dz.Field.zeros(grid))
        assert np.max(np.abs(out)) == 0.0

    def test_constant_slip_kills_cross_term(self, disk):
        grid = _grid(disk)
        osc = np.cos(2 * np.pi * disk.s_grid / disk.L)[:, None] * np.exp(-grid.psi_nodes)
        out = ls.solve_zero_mode(None, None, disk, 1.0, dz.Field(grid, osc))
        assert np.max(np.abs(out)) < 1e-15

    def test_manufactured_s_independent_source(self, ellipse):
        # F = e^{-psi} constant in s: Q0 = -L e^{-psi} / (omega * int q_e ds)
        grid = _grid(ellipse)
        psi = grid.psi_nodes
        omega = 1.2
        F = dz.Field(grid, np.broadcast_to(np.exp(-psi), (ellipse.n_s, grid.n_psi)).copy())
        out = ls.solve_zero_mode(F, None, ellipse, omega, dz.Field.zeros(grid))
        qe_sum = dz.integrate_s(ellipse.q_e, ellipse.L)
        exact = -ellipse.L * np.exp(-psi) / (omega * qe_sum)
        assert np.max(np.abs(out - exact)) < 3e-3 * np.max(np.abs(exact))

    def test_incompatible_data_raises(self, ellipse):
        grid = _grid(ellipse)
        b = ellipse.q_e.copy()  # int q_e b = int q_e^2 != 0 while sources vanish
        with pytest.raises(CompatibilityError, match="Feynman-Lagerstrom"):
            ls.solve_zero_mode(dz.Field.zeros(grid), None, ellipse, 1.0,
                               dz.Field.zeros(grid), b=b)
        try:
            ls.solve_zero_mode(dz.Field.zeros(grid), None, ellipse, 1.0,
                               dz.Field.zeros(grid), b=b)
        except CompatibilityError as err:
            assert abs(err.residual - dz.integrate_s(ellipse.q_e**2, ellipse.L)) < 1e-12


def _manufactured_problem(geometry, grid, omega=1.1):
    psi = grid.psi_nodes
    s = grid.s_nodes
    q_man = np.exp(-psi)[None, :] * (1 + 0.5 * np.cos(2 * np.pi * s / geometry.L))[:, None]
    dq_ds = np.exp(-psi)[None, :] * (
        -0.5 * (2 * np.pi / geometry.L) * np.sin(2 * np.pi * s / geometry.L))[:, None]
    F = dq_ds - omega * geometry.q_e[:, None] * q_man  # d2/dpsi2 e^-psi = e^-psi
    b = q_man[:, 0].copy()
    problem = ls.LinearProblem(geometry, omega, dz.Field(grid, F), b)
    mismatch = ls.compatibility_mismatch(problem)
    b_fixed = b - mismatch * geometry.q_e / dz.integrate_s(geometry.q_e**2, geometry.L)
    return ls.LinearProblem(geometry, omega, dz.Field(grid, F), b_fixed), q_man


class TestSolveLinear:
    def test_zero_problem(self, ellipse):
        grid = _grid(ellipse)
        out = ls.solve_linear(ls.LinearProblem(ellipse, 1.0, dz.Field.zeros(grid),
                                               np.zeros(ellipse.n_s)))
        assert np.max(np.abs(out.values)) == 0.0

    def test_single_harmonic_matches_direct_kernel(self, disk):
        grid = _grid(disk)
        beta = 0.3
        b = beta * np.cos(2 * np.pi * disk.s_grid / disk.L)
        out = ls.solve_linear(ls.LinearProblem(disk, 1.0, dz.Field.zeros(grid), b))
        # t = s/2, L_t = pi: data mode 1 has xi = 2, coefficient beta/2
        mode = ls.solve_mode(2.0, beta / 2, np.zeros(grid.n_psi, complex),
                             grid.psi_nodes)
        recon = 2 * np.real(mode[None, :] * np.exp(1j * disk.s_grid)[:, None])
        assert np.max(np.abs(out.values - recon)) < 1e-13

    def test_manufactured_solution_second_order(self, ellipse):
        errs = []
        for n_psi in (151, 301, 601):
            grid = _grid(ellipse, n_psi)
            problem, q_man = _manufactured_problem(ellipse, grid)
            out = ls.solve_linear(problem)
            errs.append(np.max(np.abs(out.values - q_man)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 2.0) < 0.2), (errs, orders)

    def test_boundary_and_far_field(self, ellipse):
        grid = _grid(ellipse)
        problem, _ = _manufactured_problem(ellipse, grid)
        out = ls.solve_linear(problem)
        assert np.max(np.abs(out.values[:, 0] - problem.b)) < 1e-10
        assert np.max(np.abs(out.values[:, -1])) < 1e-8

    def test_linearity(self, ellipse):
        grid = _grid(ellipse)
        psi = grid.psi_nodes
        s = grid.s_nodes
        # compatible pieces: b orthogonal to q_e, F with zero s-mean per psi
        def make(kind):
            if kind == 0:
                b = np.cos(2 * np.pi * s / ellipse.L)
                F = dz.Field.zeros(grid)
            else:
                b = np.sin(4 * np.pi * s / ellipse.L)
                F = dz.Field(grid, np.exp(-psi)[None, :]
                             * np.sin(2 * np.pi * s / ellipse.L)[:, None])
            b = b - (dz.integrate_s(ellipse.q_e * b, ellipse.L)
                     / dz.integrate_s(ellipse.q_e**2, ellipse.L)) * ellipse.q_e
            return ls.LinearProblem(ellipse, 1.05, F, b)

        p1, p2 = make(0), make(1)
        alpha, beta = 0.7, -1.3
        combined = ls.LinearProblem(
            ellipse, 1.05,
            dz.Field(grid, alpha * p1.F.values + beta * p2.F.values),
            alpha * p1.b + beta * p2.b)
        q_comb = ls.solve_linear(combined)
        q1 = ls.solve_linear(p1)
        q2 = ls.solve_linear(p2)
        gap = q_comb.values - alpha * q1.values - beta * q2.values
        assert np.max(np.abs(gap)) < 1e-10

    def test_mode_decoupling_on_constant_slip(self, disk):
        grid = _grid(disk)
        b = 0.2 * np.cos(3 * disk.s_grid)  # L = 2 pi, harmonic k = 3
        out = ls.solve_linear(ls.LinearProblem(disk, 1.0, dz.Field.zeros(grid), b))
        modes = dz.dft_s(out.values)
        energy = np.max(np.abs(modes), axis=1)
        keep = np.zeros(disk.n_s, dtype=bool)
        keep[[3, disk.n_s - 3]] = True
        assert np.max(energy[~keep]) < 1e-12 * np.max(energy)

    def test_deterministic(self, ellipse):
        grid = _grid(ellipse)
        problem, _ = _manufactured_problem(ellipse, grid)
        a = ls.solve_linear(problem)
        b = ls.solve_linear(problem)
        assert np.array_equal(a.values, b.values)

    def test_g_source_round_trip(self, ellipse):
        # manufactured with G: d_s Q - w qe d2 Q = F + d2 G for
        # Q = e^-psi cos, G = 0.3 e^-psi cos  -> fold d2 G = G into F exactly
        grid = _grid(ellipse)
        psi = grid.psi_nodes
        s = grid.s_nodes
        omega = 1.1
        cosr = np.cos(2 * np.pi * s / ellipse.L)
        q_man = np.exp(-psi)[None, :] * (1 + 0.5 * cosr)[:, None]
        dq_ds = np.exp(-psi)[None, :] * (
            -0.5 * (2 * np.pi / ellipse.L) * np.sin(2 * np.pi * s / ellipse.L))[:, None]
        G = dz.Field(grid, 0.3 * np.exp(-psi)[None, :] * cosr[:, None])
        F = dz.Field(grid, dq_ds - omega * ellipse.q_e[:, None] * q_man - G.values)
        problem = ls.LinearProblem(ellipse, omega, F, q_man[:, 0].copy(), G=G)
        mismatch = ls.compatibility_mismatch(problem)
        b_fixed = problem.b - mismatch * ellipse.q_e / dz.integrate_s(
            ellipse.q_e**2, ellipse.L)
        problem = ls.LinearProblem(ellipse, omega, F, b_fixed, G=G)
        out = ls.solve_linear(problem)
        assert np.max(np.abs(out.values - q_man)) < 5e-3

    def test_non_decaying_source_rejected(self, ellipse):
        grid = _grid(ellipse)
        bad = dz.Field(grid, np.ones((ellipse.n_s, grid.n_psi)))
        with pytest.raises(ValueError, match="decay"):
            ls.LinearProblem(ellipse, 1.0, bad, np.zeros(ellipse.n_s))
