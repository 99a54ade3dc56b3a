import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlaw import diagnostics as D
from kinlaw import kinetic
from kinlaw.errors import BoundaryError
from kinlaw.kinetic import MeasureEstimate
from kinlaw.viscous import GridSolution


def _measure(masses, dx=0.01, dt=0.01):
    return MeasureEstimate(kind="test", masses=masses, widths=(2, 2),
                           t_offset=0, dt=dt, dx=dx)


def _line_measure(nt=64, nx=128, col=40, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    m = noise * rng.random((nt, nx))
    m[:, col] += 1.0
    return m


def test_disk_sums_match_brute_force():
    rng = np.random.default_rng(1)
    m = rng.random((12, 20))
    dt, dx, r = 0.1, 0.1, 0.25
    got = D.disk_sums(m, r, dt, dx)
    ref = np.zeros_like(m)
    for n in range(12):
        for k in range(20):
            for a in range(12):
                for b in range(20):
                    db = min(abs(b - k), 20 - abs(b - k))
                    if ((a - n) * dt) ** 2 + (db * dx) ** 2 <= r * r + 1e-12:
                        ref[n, k] += m[a, b]
    assert np.allclose(got, ref)


def test_radii_validation():
    nu = _measure(np.ones((16, 16)))
    for bad in ([0.02, 0.04], [0.02, 0.05, 0.1], [0.005, 0.01, 0.02]):
        with pytest.raises(ValueError):
            D.jump_set(nu, radii=bad)


def test_constant_or_zero_measure_gives_empty_mask():
    for masses in (np.zeros((32, 32)), np.full((32, 32), 1e-17)):
        mask = D.jump_set(_measure(masses))
        assert mask.theta == np.inf and mask.area_cells == 0


def test_default_threshold_formula():
    masses = _line_measure(noise=1e-3)
    live = masses[masses > 1e-14]
    expected = 10 * np.median(live) / 0.01
    assert np.isclose(D.jump_set(_measure(masses)).theta, expected)


def test_line_measure_is_detected():
    nu = _measure(_line_measure(noise=1e-4))
    ratio = D.jump_set(nu).ratio
    mask = D.jump_set(nu, theta=0.99 * D.ridge_level(ratio))
    # disks are truncated near the ends of the time window
    assert mask.mask[4:-4, 40].all()
    assert mask.row_widths().max() <= 3
    far = np.r_[0:36, 45:128]
    assert not mask.mask[:, far].any()


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1.01, 5.0))
def test_mask_shrinks_as_threshold_grows(theta, factor):
    nu = _measure(_line_measure(noise=0.05, seed=3))
    low = D.jump_set(nu, theta=theta).mask
    high = D.jump_set(nu, theta=theta * factor).mask
    assert np.all(high <= low)
    assert not D.jump_set(nu, theta=np.inf).mask.any()


def test_ridge_level_skips_edges():
    ratio = np.ones((20, 5))
    ratio[0] = ratio[-1] = 100.0
    assert D.ridge_level(ratio) == 1.0


def _solution(u, dt, dx):
    nt, _, nx = u.shape
    return GridSolution(chart=None, x=dx * np.arange(nx), t=dt * np.arange(nt),
                        u=u, epsilon=0.0, period=dx * nx)


def test_oscillation_of_affine_field_halves_with_radius():
    nt, nx, h = 200, 200, 0.005
    t = h * np.arange(nt)[:, None]
    x = h * np.arange(nx)[None, :]
    u = np.stack([0.3 * t + 0.7 * x + 0 * t, np.zeros((nt, nx))], axis=1)
    sol = _solution(u, h, h)
    prof = D.vmo_profile(sol, (100, 100), [4 * h, 8 * h, 16 * h])
    # r^-2 int_{B_r} |grad . y| scales like r
    assert np.allclose(prof.decay_ratios(), 2.0, rtol=0.05)
    assert prof.decays()


def test_oscillation_of_step_matches_half_disk_plateau():
    nt, nx, h = 400, 400, 0.0025
    u = np.zeros((nt, 2, nx))
    u[:, 0, nx // 2:] = 1.2
    sol = _solution(u, h, h)
    prof = D.vmo_profile(sol, (200, nx // 2), [16 * h, 32 * h, 64 * h])
    plateau = D.half_disk_plateau(1.2)
    assert np.allclose(prof.oscillation, plateau, rtol=0.06)
    assert not prof.decays()


def test_constant_field_has_zero_oscillation(constant_solution):
    sol = constant_solution
    radii = sol.dx * np.array([1, 2, 4])
    prof = D.vmo_profile(sol, (sol.nt // 2, 3), radii)
    assert np.abs(prof.oscillation).max() < 1e-12
    assert prof.decays()


def test_boundary_error(smooth_solution):
    sol = smooth_solution
    with pytest.raises(BoundaryError):
        D.vmo_profile(sol, (1, 0), [0.02, 0.04, 0.08])
    with pytest.raises(BoundaryError):
        D.sample_points(sol, [1.0])
    pts = D.sample_points(sol, [0.02, 0.04], n_t=4, n_x=8)
    for p in pts:
        D.vmo_profile(sol, p, [0.02, 0.04])


def test_shock_ridge_sits_on_the_shock(shock_solution, dec_family):
    sol, _ = shock_solution
    nu = kinetic.nu_sup(sol, kinetic.entropy_bank(dec_family, n=4), (2, 2))
    ratio = D.jump_set(nu, radii=sol.dx * np.array([2, 4, 8])).ratio
    theta = 0.99 * D.ridge_level(ratio)
    mask = D.jump_set(nu, radii=sol.dx * np.array([2, 4, 8]), theta=theta)
    n = mask.mask.shape[0] // 2
    cols = np.flatnonzero(mask.mask[n])
    t = sol.t[n + mask.t_offset]
    x_shock = 0.25 + 0.2 * t
    assert cols.size > 0
    assert np.min(np.abs(sol.x[cols] - x_shock)) < 4 * sol.dx


def test_persistence(tmp_path):
    mask = D.jump_set(_measure(_line_measure()))
    D.save_mask(mask, tmp_path / "mask.csv")
    rows = (tmp_path / "mask.csv").read_text().splitlines()
    assert len(rows) == 1 + mask.area_cells
    prof = D.VmoProfile(center=(0, 0), radii=np.array([1.0, 2.0]),
                        oscillation=np.array([0.1, 0.2]))
    D.save_profile(prof, tmp_path / "p.csv")
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 3
