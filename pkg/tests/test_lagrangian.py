import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlaw import goursat, lagrangian as L, viscous
from kinlaw.errors import EmptyBandError, GeometryError, WindowExitError


@pytest.fixture(scope="module")
def smooth_band(smooth_solution):
    return L.BandSpec.from_solution(smooth_solution)


@pytest.fixture(scope="module")
def psystem_run():
    sol, _ = viscous.simulate({
        "chart": {"id": "p-system"}, "nx": 256, "T": 0.1, "epsilon": 0.002,
        "snapshots": 64, "initial": {"rule": "sine", "amp": [0.1, 0.1]}})
    return sol


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.1, 0.3))
def test_constant_state_gives_straight_lines(constant_solution, dec_family,
                                             x0, xi):
    c = L.trace(constant_solution, dec_family, x0, 0.0, xi)
    expected = x0 + xi * c.t_samples
    assert np.abs(c.x_samples - expected).max() < 1e-12
    assert not c.clamp_flags.any()


def test_decoupled_max_band_speed_is_the_level(smooth_solution, dec_family):
    # w is transported with speed w, so a level below w moves with speed xi
    c = L.trace(smooth_solution, dec_family, 0.3, 0.0, 0.0)
    assert np.abs(c.x_samples - (0.3 + 0.0 * c.t_samples)).max() < 1e-12


def test_time_stepping_is_second_order(psystem_run, p_family):
    w = psystem_run.riemann()[0]
    xi = float(np.median(w[0]))
    ends = [L.trace(psystem_run, p_family, 0.3, 0.0, xi,
                    substeps=s).x_samples[-1] for s in (1, 2, 4, 32)]
    errs = np.abs(np.array(ends[:-1]) - ends[-1])
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders > 1.7)


def test_backward_trace_returns_to_start(psystem_run, p_family):
    xi = float(np.median(psystem_run.riemann()[0][0]))
    fwd = L.trace(psystem_run, p_family, 0.4, 0.0, xi, substeps=8)
    back = L.trace(psystem_run, p_family, fwd.x_samples[-1],
                   float(psystem_run.t[-1]), xi, direction=-1, substeps=8)
    assert abs(back.x_samples[-1] - 0.4) < 1e-7


def test_leaving_the_window_carries_the_partial_curve(smooth_solution,
                                                      dec_family):
    with pytest.raises(WindowExitError) as info:
        L.trace(smooth_solution, dec_family, 0.2, 0.0, 0.0, t_end=10.0)
    curve = info.value.curve
    assert np.isclose(curve.t_samples[-1], smooth_solution.t[-1])
    with pytest.raises(WindowExitError):
        L.trace(smooth_solution, dec_family, 0.2, -1.0, 0.0)


def test_band_spec_validation():
    with pytest.raises(ValueError):
        L.BandSpec(w_min=0.0, w_max=1.0, r=0.6, b=0.9)
    with pytest.raises(ValueError):
        L.BandSpec(w_min=0.0, w_max=1.0, r=0.2, b=0.5)
    band = L.BandSpec(w_min=0.0, w_max=1.0, r=0.2, b=0.9)
    assert np.isclose(band.a, 0.8) and np.isclose(band.min_top, 0.2)


def test_empty_min_band(constant_solution, dec_family):
    # w is identically 0.3, above the top of the min band
    band = L.BandSpec(w_min=-0.5, w_max=0.3, r=0.2, b=0.25)
    with pytest.raises(EmptyBandError):
        L.seed_bundle(constant_solution, dec_family, band, 64, kind="min")
    with pytest.raises(ValueError):
        L.seed_bundle(constant_solution, dec_family, band, 10)


def test_bundle_reconstructs_the_band_at_start(smooth_solution, dec_family,
                                               smooth_band):
    n = 256
    bundle = L.seed_bundle(smooth_solution, dec_family, smooth_band, n)
    assert len(bundle.curves) == n
    assert bundle.band_violation_fraction() == 0
    err = L.reconstruction_error(smooth_solution, dec_family, bundle, 0)
    assert err <= 2 / np.sqrt(n)


def _bundle(paths, kind):
    t = np.linspace(0, 1, paths.shape[0])
    curves = [L.Curve(xi=0.0, t_samples=t, x_samples=paths[:, j], band=kind,
                      clamp_flags=np.zeros(t.size, bool),
                      w_samples=np.zeros(t.size))
              for j in range(paths.shape[1])]
    return L.CurveBundle(band=kind, curves=curves, seeds_x=paths[0],
                         seeds_xi=np.zeros(paths.shape[1]),
                         weights=np.ones(paths.shape[1]))


def test_crossing_detector():
    t = np.linspace(0, 1, 11)[:, None]
    fast = _bundle(0.1 + 0.5 * t, "max")
    slow = _bundle(np.hstack([0.5 + 0 * t, 0.9 + 0 * t]), "min")
    rep = L.crossing_check(fast, slow)
    # the fast curve overtakes the slow curve at 0.5 but not the one at 0.9
    assert rep.n_pairs == 2 and rep.n_violations == 1
    assert rep.pairs.tolist() == [[0, 0]]
    # counting periodic images gives the same answer here
    assert L.crossing_check(fast, slow, period=1.0).n_violations == 1
    assert L.crossing_check(fast, fast).n_violations == 0


def test_q_ledger_balances(smooth_solution, dec_family, smooth_band):
    g, s = L.distinguished_curves(smooth_solution, dec_family, smooth_band)
    led = L.q_functional(smooth_solution, dec_family, g, s, smooth_band)
    tol = L.slab_tolerance(smooth_solution, dec_family, 1024)
    mismatch = led.increments() + led.f_out - led.f_in
    assert np.abs(mismatch).max() <= tol
    assert np.all(led.f_in == 0)
    assert np.all(led.increments() <= tol)


def test_q_functional_requires_ordered_curves(smooth_solution, dec_family,
                                              smooth_band):
    g, s = L.distinguished_curves(smooth_solution, dec_family, smooth_band)
    with pytest.raises(GeometryError):
        L.q_functional(smooth_solution, dec_family, s, g, smooth_band)


def test_persistence(tmp_path, smooth_solution, dec_family, smooth_band):
    bundle = L.seed_bundle(smooth_solution, dec_family, smooth_band, 64)
    L.save_bundle(bundle, tmp_path / "curves.csv")
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert len(lines) == 1 + 64 * smooth_solution.nt
    g, s = L.distinguished_curves(smooth_solution, dec_family, smooth_band)
    led = L.q_functional(smooth_solution, dec_family, g, s, smooth_band)
    L.save_qledger(led, tmp_path / "q.csv")
    assert (tmp_path / "q.json").exists()
