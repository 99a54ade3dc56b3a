import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kinlaw import goursat
from kinlaw.errors import DegenerateStripError, GridError, GridMismatchError, StripError
from kinlaw.systems import get_chart


@pytest.fixture(scope="module")
def p_grid(psystem):
    grid = goursat.make_grid(psystem, 33)
    return grid, goursat.compute_gh(psystem, grid)


def test_gh_against_adaptive_quadrature(psystem, p_grid):
    grid, gh = p_grid

    def integrand_g(y, w):
        l1, l2 = psystem.speeds_wz(w, y)
        _, l1z, _, _ = psystem.speed_derivatives_wz(w, y)
        return -l1z / (l1 - l2)

    def integrand_h(y, z):
        l1, l2 = psystem.speeds_wz(y, z)
        _, _, l2w, _ = psystem.speed_derivatives_wz(y, z)
        return l2w / (l1 - l2)

    for i, j in ((5, 20), (32, 32), (17, 3)):
        w, z = grid.w[i], grid.z[j]
        g_ref = np.exp(quad(integrand_g, grid.z[0], z, args=(w,),
                            epsabs=1e-13)[0])
        h_ref = np.exp(quad(integrand_h, grid.w[0], w, args=(z,),
                            epsabs=1e-13)[0])
        assert abs(gh.g[i, j] - g_ref) < 1e-7
        assert abs(gh.h[i, j] - h_ref) < 1e-7
    assert np.all(gh.g[:, 0] == 1) and np.all(gh.h[0, :] == 1)


def test_goursat_data_on_characteristics(psystem, p_grid):
    grid, gh = p_grid
    sol = goursat.solve_goursat(psystem, gh, grid.w[10])
    k = sol.xi_index
    assert np.allclose(sol.theta[:, 0], 1.0)
    assert np.allclose(sol.theta[k, :], gh.g[k, :])


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linear_in_boundary_data(alpha, beta):
    chart = get_chart("p-system")
    grid = goursat.make_grid(chart, 17)
    gh = goursat.compute_gh(chart, grid, subintervals=16)
    xi = grid.w[6]
    f1 = lambda w: np.cos(w)
    f2 = lambda w: w**2
    th1 = goursat.solve_goursat(chart, gh, xi, f1).theta
    th2 = goursat.solve_goursat(chart, gh, xi, f2).theta
    both = goursat.solve_goursat(
        chart, gh, xi, alpha * f1(grid.w) + beta * f2(grid.w)).theta
    assert np.allclose(both, alpha * th1 + beta * th2, atol=1e-11)


def _pde_residual(chart, n):
    grid = goursat.make_grid(chart, n + 1)
    gh = goursat.compute_gh(chart, grid)
    sol = goursat.solve_goursat(chart, gh, grid.w[0])
    th = sol.theta
    dw, dz = grid.dw, grid.dz
    t_wz = (th[2:, 2:] - th[2:, :-2] - th[:-2, 2:] + th[:-2, :-2]) / (4 * dw * dz)
    t_w = (th[2:, 1:-1] - th[:-2, 1:-1]) / (2 * dw)
    t_z = (th[1:-1, 2:] - th[1:-1, :-2]) / (2 * dz)
    acoef, bcoef = goursat.goursat_coefficients(chart, grid.w, grid.z)
    res = t_wz - acoef[1:-1, 1:-1] * t_w - bcoef[1:-1, 1:-1] * t_z
    return np.abs(res).max()


def test_goursat_solves_the_entropy_equation(psystem):
    r1, r2 = _pde_residual(psystem, 32), _pde_residual(psystem, 64)
    assert r2 < r1 / 3


def test_uncut_pair_is_entropy_pair(p_family):
    # Xi_w = lambda1 Theta_w and Xi_z = lambda2 Theta_z
    fam = p_family
    g = fam.grid
    ww, zz = np.meshgrid(g.w, g.z, indexing="ij")
    l1, l2 = fam.chart.speeds_wz(ww, zz)
    k = fam.xi.size // 2
    th, xi_flux = fam.theta[k], fam.flux[k]
    dth_w, dth_z = np.gradient(th, g.w, g.z)
    dxi_w, dxi_z = np.gradient(xi_flux, g.w, g.z)
    sl = (slice(2, -2), slice(2, -2))
    scale = np.abs(dth_w).max() + np.abs(dth_z).max()
    assert np.abs(dxi_w - l1 * dth_w)[sl].max() < 2e-2 * scale
    assert np.abs(dxi_z - l2 * dth_z)[sl].max() < 2e-2 * scale


def test_decoupled_family_oracle(dec_family):
    fam = dec_family
    mask = fam.hypograph_mask()
    assert np.abs(fam.theta - 1).max() < 1e-12
    assert np.abs(fam.psi - fam.xi[:, None, None] * mask).max() < 1e-12
    assert np.isclose(fam.r_bar, 2.0) and np.isclose(fam.c, 0.9)


def test_strip_constants_psystem(p_family):
    chi_min, d_min = goursat.strip_minima(p_family)
    assert p_family.r_bar > 0 and p_family.c > 0
    assert chi_min >= p_family.c and d_min >= p_family.c


def test_degenerate_field_has_no_strip():
    chart = get_chart("degenerate")
    with pytest.raises(DegenerateStripError):
        goursat.family_for_chart(chart, 17)


def test_kinetic_speed_decoupled(dec_family):
    w = np.array([0.5, 0.2])
    z = np.array([0.0, 0.1])
    lam, clamped = goursat.kinetic_speed(dec_family, [0.25, 0.1], w, z)
    assert np.allclose(lam, [0.25, 0.1]) and not clamped.any()
    lam, clamped = goursat.kinetic_speed(dec_family, 0.8, 0.5, 0.0)
    assert clamped and np.isclose(lam, 0.5)
    with pytest.raises(StripError):
        goursat.kinetic_speed(dec_family, 0.8, 0.5, 0.0, strict=True)
    lam, clamped = goursat.kinetic_speed(dec_family, 0.8, 0.5, 0.0, side="min")
    assert not clamped and np.isclose(lam, 0.8)


def test_snap_cut_far_value():
    with pytest.raises(GridError):
        goursat.snap_cut(np.linspace(0, 1, 11), 1.5)


def test_reconstruction_decoupled_quadratic(decoupled):
    errs = []
    for n in (33, 65):
        fam = goursat.family_for_chart(decoupled, n)
        g = fam.grid
        ww, zz = np.meshgrid(g.w, g.z, indexing="ij")
        exact = 0.5 * (ww**2 - g.w[0] ** 2) + 0.5 * (zz**2 - g.z[0] ** 2)
        rec = goursat.reconstruct_entropy(fam, fam.xi, fam.zeta)
        errs.append(np.abs(rec.eta - exact).max())
    assert errs[1] < 0.6 * errs[0] and errs[1] < 0.05
    with pytest.raises(GridMismatchError):
        goursat.reconstruct_entropy(fam, fam.xi[:-1], fam.zeta)


def test_family_round_trip(tmp_path, p_family):
    goursat.save_family(p_family, tmp_path / "fam")
    back = goursat.load_family(tmp_path / "fam")
    assert np.array_equal(back.theta, p_family.theta)
    assert np.array_equal(back.flux_z, p_family.flux_z)
    assert back.r_bar == p_family.r_bar and back.c == p_family.c
