import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlaw import kinetic, viscous
from kinlaw.errors import ChartMismatchError


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.floats(1e-3, 1.0))
def test_hat_kernels_integrate_affine_functions_exactly(half, h):
    mass, deriv = kinetic.hat_kernels(half, h)
    nodes = h * np.arange(-half, half + 1)
    # int a = H h, int a' = 0, int a x = 0, int a' x = -int a = -H h
    assert np.isclose(mass.sum(), half * h)
    assert abs(deriv.sum()) < 1e-12
    assert abs(mass @ nodes) < 1e-12 * h
    assert np.isclose(deriv @ nodes, -half * h)


def test_hats_form_a_partition():
    half = 5
    vals = kinetic.hat_values(half)[1:-1]
    total = np.zeros(40)
    for c in range(40):
        for i, v in enumerate(vals):
            total[(c + i - half) % 40] += v
    assert np.allclose(total, half)


def test_weak_residual_vanishes_for_transport_under_refinement():
    errs = []
    for n in (64, 128):
        t = np.linspace(0, 0.5, n // 3 + 1)
        x = np.arange(n) / n
        rho = np.sin(2 * np.pi * (x[None] - t[:, None]))
        res = kinetic.weak_residual(rho, rho, t[1] - t[0], 1 / n, (4, 4))
        errs.append(np.abs(res).sum())
    assert errs[1] < errs[0] / 4


def test_constant_state_has_zero_residual(constant_solution, dec_family):
    field = kinetic.assemble(constant_solution, dec_family)
    est = kinetic.kinetic_residual(field, split=False)
    assert est.total_variation < 1e-12
    assert field.support_violations() == 0


def test_exact_solution_residual_shrinks(decoupled, dec_family):
    init = {"rule": "sine", "amp": [0.5, 0.3]}
    tv = []
    for nx in (64, 128):
        sol = viscous.exact_decoupled_solution(decoupled, init, nx, 0.25, nx // 2)
        est = kinetic.kinetic_residual(kinetic.assemble(sol, dec_family))
        tv.append(est.total_variation)
    assert tv[1] < tv[0] / 2


def test_tilde_variant_support(smooth_solution, dec_family):
    field = kinetic.assemble(smooth_solution, dec_family, "chi_tilde",
                             t_index=slice(0, 4))
    assert field.support_violations() == 0
    assert field.values.shape[:2] == (4, smooth_solution.nx)
    with pytest.raises(ValueError):
        kinetic.assemble(smooth_solution, dec_family, "omega")


def test_chart_mismatch(smooth_solution, p_family):
    with pytest.raises(ChartMismatchError):
        kinetic.assemble(smooth_solution, p_family)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_split_is_nonnegative_and_exact(vals):
    masses = np.array(vals, float).reshape(1, 1, 6)
    mu1, mu0 = kinetic.split_residual(masses)
    assert np.all(mu1 >= 0)
    d = mu1.copy()
    d[..., 1:] -= mu1[..., :-1]
    assert np.allclose(d + mu0, masses)


def test_split_recovers_pure_derivative():
    target = np.array([0.0, 1.0, 2.0, 1.0, 0.0])
    masses = np.diff(np.concatenate([[0.0], target]))[None, None]
    mu1, mu0 = kinetic.split_residual(masses)
    assert np.allclose(mu1[0, 0], target)
    assert np.abs(mu0).max() < 1e-12


def test_shock_dissipation_is_negative_and_localised(shock_solution):
    sol, _ = shock_solution
    est = kinetic.dissipation_measure(sol, sol.chart.convex_entropy())
    assert est.total < 0
    mag = np.abs(est.masses)
    top = mag.max(axis=1)
    # the row maximum dominates the typical cell away from the shock
    assert np.median(top) > 50 * np.median(mag)


def test_mu1_nonnegative_and_below_bound(shock_solution, dec_family):
    sol, _ = shock_solution
    est = kinetic.mu1_from_viscous(sol, dec_family)
    assert est.masses.min() >= 0
    assert est.total <= est.extra["bound"]


def test_entropy_bank_is_unit_normalised(dec_family):
    bank = kinetic.entropy_bank(dec_family, n=8)
    assert len(bank) == 8
    for rec in bank:
        assert np.isclose(kinetic._c2_norm(rec.eta, dec_family.grid), 1.0)


def test_nu_sup_dominates_each_member(shock_solution, dec_family):
    sol, _ = shock_solution
    bank = kinetic.entropy_bank(dec_family, n=4)
    sup = kinetic.nu_sup(sol, bank)
    for rec in bank:
        single = np.abs(kinetic.dissipation_measure(sol, rec).masses)
        assert np.all(sup.masses >= single)


def test_save_measure(tmp_path, smooth_solution, dec_family):
    field = kinetic.assemble(smooth_solution, dec_family)
    est = kinetic.kinetic_residual(field)
    kinetic.save_measure(est, tmp_path, name="a")
    kinetic.save_measure(est, tmp_path, name="b", threshold=1e-6)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert set(man["measures"]) == {"a", "b"}
    assert np.isclose(man["measures"]["a"]["total"], est.total)
    rows = (tmp_path / "a.csv").read_text().splitlines()
    assert rows[0].startswith("t_idx")
    assert len(rows) - 1 == np.count_nonzero(est.masses)
