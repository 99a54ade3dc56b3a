import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlaw.errors import ConfigError, DomainError, NotGnlError
from kinlaw.systems import (
    check_hyperbolic_gnl,
    eigen_structure,
    eval_flux,
    from_riemann,
    get_chart,
    to_riemann,
)

unit = st.floats(0.0, 1.0)


def _p_state(psystem, s, t):
    w_lo, w_hi, z_lo, z_hi = psystem.rect
    return psystem.inverse(w_lo + s * (w_hi - w_lo), z_lo + t * (z_hi - z_lo))


def test_decoupled_flux_and_speeds(decoupled):
    u = np.array([[0.5, -0.2], [0.1, 0.3]])
    f = eval_flux(decoupled, u)
    assert np.allclose(f[0], 0.5 * u[0] ** 2)
    assert np.allclose(f[1], 0.5 * u[1] ** 2 + 4 * u[1])
    l1, l2 = decoupled.speeds(u)
    assert np.allclose(l1, u[0])
    assert np.allclose(l2, u[1] + 4)


def test_psystem_flux_value(psystem):
    u = np.array([0.5, 0.2])
    f = eval_flux(psystem, u)
    assert np.allclose(f, [-0.2, -(0.5 + 0.125)])
    l1, l2 = psystem.speeds(u)
    assert np.isclose(l2, np.sqrt(1.75)) and np.isclose(l1, -np.sqrt(1.75))


def test_outside_domain(decoupled, psystem):
    with pytest.raises(DomainError):
        eval_flux(decoupled, np.array([2.0, 0.0]))
    with pytest.raises(DomainError):
        to_riemann(psystem, np.array([-0.5, 0.0]))
    with pytest.raises(DomainError):
        from_riemann(decoupled, 1.5, 0.0)


@settings(max_examples=40, deadline=None)
@given(unit, unit)
def test_psystem_round_trip(s, t):
    chart = get_chart("p-system")
    u = _p_state(chart, s, t)
    w, z = to_riemann(chart, u)
    back = from_riemann(chart, w, z)
    assert np.allclose(back, u, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(unit, unit)
def test_riemann_gradients_are_left_eigenvectors(s, t):
    chart = get_chart("p-system")
    u = _p_state(chart, s, t)
    eig = eigen_structure(chart, u)
    grad = chart.forward_grad(u)
    # grad w is parallel to l1, grad z to l2
    for g, left in ((grad[0], eig.l1), (grad[1], eig.l2)):
        cross = g[0] * left[1] - g[1] * left[0]
        assert abs(cross) < 1e-8 * np.linalg.norm(g) * np.linalg.norm(left)
    assert np.allclose([eig.l1 @ eig.r1, eig.l1 @ eig.r2], [1, 0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(unit, unit)
def test_entropy_pair_compatibility(s, t):
    # grad q = grad eta . Df, checked by centered differences
    for name in ("decoupled", "p-system"):
        chart = get_chart(name)
        u = _p_state(chart, s, t) if name == "p-system" else \
            np.array([-0.9 + 1.8 * s, -0.9 + 1.8 * t])
        eta, q = chart.convex_entropy()
        h = 1e-6
        ge = np.array([(eta(u + h * e) - eta(u - h * e)) / (2 * h)
                       for e in np.eye(2)])
        gq = np.array([(q(u + h * e) - q(u - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.allclose(gq, ge @ chart.jacobian(u), atol=1e-6)


def test_gnl_certificates(decoupled, psystem):
    cert = check_hyperbolic_gnl(decoupled)
    assert np.isclose(cert.c_bar, 0.9) and np.isclose(cert.gap, 2.0)
    cert = check_hyperbolic_gnl(psystem)
    assert 0.3 < cert.c_bar < 0.4 and cert.gap > 2
    for name in ("linear", "degenerate"):
        with pytest.raises(NotGnlError):
            check_hyperbolic_gnl(get_chart(name))


def test_chart_registry_errors():
    with pytest.raises(ConfigError):
        get_chart("nope")
    with pytest.raises(ConfigError):
        get_chart("decoupled", {"bogus": 1})
