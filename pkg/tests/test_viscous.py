import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlaw import viscous
from kinlaw.errors import ConfigError, StabilityError

BASE = {"chart": {"id": "decoupled"}, "nx": 128, "T": 0.1, "epsilon": 0.01,
        "snapshots": 20}


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_constant_state_is_steady(a, b):
    sol, ledger = viscous.simulate(
        {**BASE, "initial": {"rule": "constant", "value": [a, b]}})
    assert np.abs(sol.u - sol.u[0]).max() < 1e-14
    assert ledger.total < 1e-25


def test_conservation_and_dissipation_sign(shock_solution):
    sol, ledger = shock_solution
    mass = sol.u.sum(axis=2) * sol.dx
    assert np.abs(mass - mass[0]).max() < 1e-12
    assert np.all(ledger.dissipation >= 0)
    # the convex entropy decreases by the dissipated amount (up to time error)
    eta, _ = sol.chart.convex_entropy()
    drop = (eta(sol.u[0]).sum() - eta(sol.u[-1]).sum()) * sol.dx
    assert abs(drop - ledger.total) < 0.02 * ledger.total


def test_shock_moves_with_rankine_hugoniot_speed(shock_solution):
    sol, _ = shock_solution
    w = sol.u[-1, 0]
    mid = 0.5 * (0.8 - 0.4)
    # first downward crossing of the mid value after x = 0.25
    idx = np.flatnonzero((w[:-1] >= mid) & (w[1:] < mid))
    x_cross = sol.x[idx] + sol.dx * (w[idx] - mid) / (w[idx] - w[idx + 1])
    x_expected = 0.25 + 0.2 * sol.t[-1]
    assert np.min(np.abs(x_cross - x_expected)) < 3 * sol.dx


def test_post_hoc_budget_matches_in_step_ledger(shock_solution):
    sol, ledger = shock_solution
    post = viscous.energy_budget(sol, ledger.window)
    # the initial jump makes dissipation singular at t = 0, where the
    # snapshot trapezoid rule is inaccurate; compare after that layer
    late = sol.t[1:] > 0.05
    a = post.dissipation[late].sum()
    b = ledger.dissipation[late].sum()
    assert abs(a - b) < 0.02 * b
    assert abs(post.total - ledger.total) < 0.1 * ledger.total
    assert post.cone_initial_entropy == ledger.cone_initial_entropy


def test_vanishing_viscosity_approaches_classical_solution(decoupled):
    init = {"rule": "sine", "amp": [0.3, 0.2]}
    exact = viscous.exact_decoupled_solution(decoupled, init, 256, 0.2, 10)
    errs = []
    for eps in (4e-3, 2e-3, 1e-3):
        sol, _ = viscous.simulate({"chart": {"id": "decoupled"}, "nx": 256,
                                   "T": 0.2, "epsilon": eps, "snapshots": 10,
                                   "initial": init})
        errs.append(np.abs(sol.u[-1] - exact.u[-1]).sum() * sol.dx)
    assert errs[0] > errs[1] > errs[2]
    assert 1.5 < errs[0] / errs[1] < 2.5


def test_exact_solution_solves_burgers(decoupled, smooth_solution):
    sol = smooth_solution
    w = sol.u[:, 0]
    w_t = (w[2:, :] - w[:-2, :]) / (2 * sol.dt_snap)
    w_x = (np.roll(w, -1, 1) - np.roll(w, 1, 1)) / (2 * sol.dx)
    res = w_t + w[1:-1] * w_x[1:-1]
    assert np.abs(res).max() < 0.05 * np.abs(w_t).max()


def test_exact_solution_refuses_shocks(decoupled):
    with pytest.raises(ConfigError):
        viscous.exact_decoupled_solution(
            decoupled, {"rule": "sine", "amp": [0.5, 0.0]}, 64, 1.0, 10)


def test_step_stability_guard(decoupled):
    u = np.zeros((2, 16))
    with pytest.raises(StabilityError):
        viscous.step(decoupled, u, 1.0, 0.1, 1 / 16)


def test_config_errors():
    with pytest.raises(ConfigError):
        viscous.simulate({"chart": {"id": "decoupled"}, "nx": 64})
    with pytest.raises(ConfigError):
        viscous.simulate({**BASE, "initial": {"rule": "zigzag"}})
    with pytest.raises(ConfigError):
        viscous.simulate({**BASE, "initial": {"rule": "constant",
                                              "value": [3.0, 0.0]}})


def test_solution_round_trip(tmp_path, shock_solution):
    sol, ledger = shock_solution
    viscous.save_solution(sol, tmp_path / "run", ledger)
    back = viscous.load_solution(tmp_path / "run")
    assert np.array_equal(back.u, sol.u) and np.array_equal(back.t, sol.t)
    assert back.epsilon == sol.epsilon


def test_simulation_is_deterministic():
    cfg = {**BASE, "initial": {"rule": "sine", "amp": [0.3, 0.1]}}
    a, _ = viscous.simulate(cfg)
    b, _ = viscous.simulate(cfg)
    assert a.u.tobytes() == b.u.tobytes()
