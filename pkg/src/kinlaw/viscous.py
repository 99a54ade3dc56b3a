"""
Viscous approximation ``u_t + f(u)_x = eps u_xx`` on a periodic grid.

The scheme is explicit: second-order central differences for the flux and
the diffusion, and the two-stage (Heun) Runge-Kutta method in time.  Fields
are stored component-first, ``u[n]`` having shape ``(2, nx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, DomainError, StabilityError
from .systems import get_chart

STABILITY_LIMIT = 0.4
DEFAULT_CFL = 0.35


# {{{ data types

@dataclass
class GridSolution:
    """Space-time samples of a solution on a uniform periodic grid."""

    chart: object
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    epsilon: float
    period: float
    dt: float = float("nan")
    scheme: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def nx(self):
        return self.x.size

    @property
    def nt(self):
        return self.t.size

    @property
    def dx(self):
        return self.period / self.nx

    @property
    def dt_snap(self):
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def riemann(self):
        """``(w, z)`` arrays of shape ``(nt, nx)``."""
        w, z = self.chart.forward(np.moveaxis(self.u, 1, 0))
        return np.asarray(w), np.asarray(z)


@dataclass
class EnergyLedger:
    """Slab-wise viscous dissipation against the initial entropy."""

    t_edges: np.ndarray
    dissipation: np.ndarray
    window_dissipation: np.ndarray
    window: tuple
    initial_entropy: float
    cone_initial_entropy: float
    cone_speed: float
    entropy_id: str = "convex-riemann-quadratic"

    @property
    def total(self):
        return float(self.dissipation.sum())

    @property
    def window_total(self):
        return float(self.window_dissipation.sum())

    @property
    def constant(self):
        """Measured ratio of windowed dissipation to cone initial entropy."""
        if self.cone_initial_entropy == 0:
            return 0.0
        return self.window_total / self.cone_initial_entropy

# }}}


# {{{ initial data

def _smooth_periodic_bump(x, x1, x2, period):
    """0 -> 1 cosine rise on [x1, x2], cosine fall on [x2, x1 + period]."""
    s = np.mod(x - x1, period)
    rise = x2 - x1
    fall = period - rise
    up = 0.5 - 0.5 * np.cos(np.pi * np.clip(s / rise, 0, 1))
    down = 0.5 + 0.5 * np.cos(np.pi * np.clip((s - rise) / fall, 0, 1))
    return np.where(s <= rise, up, down)


def initial_state(chart, spec, x, period=1.0):
    """Initial field ``(2, nx)`` from an initial-data rule.

    Rules (Riemann coordinates unless ``coords == "state"``):

    ``constant``  ``value``
    ``sine``      ``amp = [Aw, Az]``, ``mode``, optional ``center``
    ``two_jump``  ``left``, ``right``, ``positions = [xa, xb]``; ``right`` on
                  ``[xa, xb)``, ``left`` elsewhere
    ``ramp``      ``low``, ``high``, ``rise = [x1, x2]``
    """
    rule = spec.get("rule")
    coords = spec.get("coords", "riemann")
    center = spec.get("center", list(chart.center_wz))
    ones = np.ones_like(x)
    if rule == "constant":
        val = spec.get("value", center)
        a, b = val[0] * ones, val[1] * ones
    elif rule == "sine":
        amp = spec.get("amp", [0.1, 0.0])
        k = spec.get("mode", 1)
        s = np.sin(2 * np.pi * k * x / period + spec.get("phase", 0.0))
        a = center[0] + amp[0] * s
        b = center[1] + amp[1] * s
    elif rule == "two_jump":
        xa, xb = spec.get("positions", [0.25 * period, 0.75 * period])
        left, right = spec["left"], spec["right"]
        inner = (x >= xa) & (x < xb)
        a = np.where(inner, right[0], left[0]) * ones
        b = np.where(inner, right[1], left[1]) * ones
    elif rule == "ramp":
        x1, x2 = spec.get("rise", [0.1 * period, 0.7 * period])
        lo, hi = spec["low"], spec["high"]
        s = _smooth_periodic_bump(x, x1, x2, period)
        a = lo[0] + (hi[0] - lo[0]) * s
        b = lo[1] + (hi[1] - lo[1]) * s
    else:
        raise ConfigError(f"unknown initial-data rule {rule!r}")
    if coords == "state":
        u = np.stack([a, b]).astype(float)
    elif coords == "riemann":
        u = chart.inverse(a, b)
    else:
        raise ConfigError(f"unknown coordinates {coords!r}")
    if not np.all(chart.inside(u)):
        raise ConfigError("initial data leave the chart domain")
    return u

# }}}


# {{{ time stepping

def _rhs(chart, u, epsilon, dx):
    f = chart.flux(u)
    out = -(np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * dx)
    if epsilon:
        out += epsilon * (np.roll(u, -1, axis=-1) - 2 * u
                          + np.roll(u, 1, axis=-1)) / dx**2
    return out


def stability_numbers(chart, u, epsilon, dt, dx):
    l1, l2 = chart.speeds(u)
    speed = float(max(np.abs(l1).max(), np.abs(l2).max()))
    return speed * dt / dx, epsilon * dt / dx**2


def step(chart, u, epsilon, dt, dx):
    """One Heun step of the central scheme on a periodic grid."""
    adv, dif = stability_numbers(chart, u, epsilon, dt, dx)
    if adv > STABILITY_LIMIT + 1e-12 or dif > STABILITY_LIMIT + 1e-12:
        raise StabilityError(
            f"advective number {adv:.3f} / diffusive number {dif:.3f} "
            f"exceed {STABILITY_LIMIT}")
    stage = u + dt * _rhs(chart, u, epsilon, dx)
    if not np.all(chart.inside(stage)):
        raise DomainError("intermediate stage left the state domain")
    new = 0.5 * (u + stage + dt * _rhs(chart, stage, epsilon, dx))
    if not np.all(chart.inside(new)):
        raise DomainError("state left the domain during a step")
    return new


def _dissipation_density(u, epsilon, dx):
    """``eps * |u_x|^2`` on the cell faces (forward differences)."""
    ux = (np.roll(u, -1, axis=-1) - u) / dx
    return epsilon * np.sum(ux**2, axis=0)

# }}}


# {{{ simulate

def _window_mask(x, window, period):
    if window is None:
        return np.ones_like(x, dtype=bool)
    lo, hi = window
    s = np.mod(x - lo, period)
    return s <= (hi - lo)


def _face_positions(x, dx):
    return x + 0.5 * dx


def resolve_time_step(chart, nx, period, T, epsilon, n_snap, cfl=DEFAULT_CFL):
    dx = period / nx
    limit = dx / chart.max_speed
    if epsilon > 0:
        limit = min(limit, dx**2 / epsilon)
    dt0 = cfl * limit
    per = max(1, math.ceil(T / (dt0 * n_snap)))
    n_steps = per * n_snap
    return T / n_steps, n_steps, per


def simulate(config):
    """Run a viscous simulation described by a config mapping.

    Keys: ``chart`` (``{"id", "params"}``), ``nx``, ``T``, ``epsilon``,
    ``initial`` (rule mapping), optional ``period`` (1.0), ``snapshots``
    (number of slabs, default 100), ``cfl`` (0.35) and ``window``
    (``[x_lo, x_hi]`` for the windowed ledger).
    """
    cfg = dict(config)
    chart_spec = cfg.get("chart", {"id": "decoupled"})
    chart = get_chart(chart_spec.get("id"), chart_spec.get("params"))
    try:
        nx = int(cfg["nx"])
        T = float(cfg["T"])
        epsilon = float(cfg["epsilon"])
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
    if nx < 8 or T <= 0 or epsilon < 0:
        raise ConfigError("need nx >= 8, T > 0 and epsilon >= 0")
    period = float(cfg.get("period", 1.0))
    n_snap = int(cfg.get("snapshots", 100))
    cfl = float(cfg.get("cfl", DEFAULT_CFL))
    if not 0 < cfl <= STABILITY_LIMIT:
        raise ConfigError(f"cfl must lie in (0, {STABILITY_LIMIT}]")
    window = cfg.get("window")
    dx = period / nx
    x = np.arange(nx) * dx
    u = initial_state(chart, cfg.get("initial", {"rule": "constant"}), x, period)
    dt, n_steps, per = resolve_time_step(chart, nx, period, T, epsilon,
                                         n_snap, cfl)

    snaps = np.empty((n_snap + 1, 2, nx))
    snaps[0] = u
    diss = np.zeros(n_snap)
    wdiss = np.zeros(n_snap)
    wmask = _window_mask(_face_positions(x, dx), window, period)
    for n in range(n_snap):
        for _ in range(per):
            if epsilon:
                dens = _dissipation_density(u, epsilon, dx)
                diss[n] += dt * dx * dens.sum()
                wdiss[n] += dt * dx * dens[wmask].sum()
            u = step(chart, u, epsilon, dt, dx)
        snaps[n + 1] = u

    sol = GridSolution(
        chart=chart, x=x, t=np.linspace(0.0, T, n_snap + 1), u=snaps,
        epsilon=epsilon, period=period, dt=dt,
        scheme={"name": "central-heun", "steps": n_steps, "stride": per,
                "cfl_advective": chart.max_speed * dt / dx,
                "cfl_diffusive": epsilon * dt / dx**2},
        config=cfg)
    e0, e_cone, speed = _initial_entropy(sol, window)
    ledger = EnergyLedger(t_edges=sol.t.copy(), dissipation=diss,
                          window_dissipation=wdiss,
                          window=tuple(window) if window else (0.0, period),
                          initial_entropy=e0, cone_initial_entropy=e_cone,
                          cone_speed=speed)
    return sol, ledger


def _initial_entropy(sol, window):
    """Initial entropy over the whole period and over the cone base."""
    eta, _ = sol.chart.convex_entropy()
    dens = eta(sol.u[0])
    total = float(dens.sum() * sol.dx)
    # cone speed: max |lambda| over the rectangle
    speed = sol.chart.max_speed
    if window is None:
        return total, total, speed
    lo, hi = window
    T = float(sol.t[-1] - sol.t[0])
    base = (lo - speed * T, hi + speed * T)
    if base[1] - base[0] >= sol.period:
        return total, total, speed
    mask = _window_mask(sol.x, base, sol.period)
    return total, float(dens[mask].sum() * sol.dx), speed


def energy_budget(solution, window=None):
    """Post-hoc ledger from stored snapshots (trapezoid in time)."""
    if solution.epsilon == 0:
        zeros = np.zeros(max(solution.nt - 1, 0))
        e0, e_cone, speed = _initial_entropy(solution, window)
        return EnergyLedger(solution.t.copy(), zeros, zeros.copy(),
                            tuple(window) if window else (0.0, solution.period),
                            e0, e_cone, speed)
    dx = solution.dx
    wmask = _window_mask(_face_positions(solution.x, dx), window,
                         solution.period)
    dens = np.stack([_dissipation_density(u, solution.epsilon, dx)
                     for u in solution.u])
    full = dens.sum(axis=1) * dx
    part = dens[:, wmask].sum(axis=1) * dx
    dt = np.diff(solution.t)
    e0, e_cone, speed = _initial_entropy(solution, window)
    return EnergyLedger(
        t_edges=solution.t.copy(),
        dissipation=0.5 * dt * (full[1:] + full[:-1]),
        window_dissipation=0.5 * dt * (part[1:] + part[:-1]),
        window=tuple(window) if window else (0.0, solution.period),
        initial_entropy=e0, cone_initial_entropy=e_cone, cone_speed=speed)


def vanishing_sequence(config, eps_list):
    """L1 distances between final states of consecutive viscosities."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps_list must be strictly decreasing with >= 3 entries")
    finals = []
    for eps in eps_list:
        sol, _ = simulate({**config, "epsilon": eps})
        finals.append(sol.u[-1])
        dx = sol.dx
    dist = [float(np.abs(a - b).sum() * dx) for a, b in zip(finals, finals[1:])]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(dist, dist[1:])]
    return {"epsilon": eps_list, "distances": dist, "ratios": ratios,
            "decreasing": all(b <= a for a, b in zip(dist, dist[1:]))}

# }}}


# {{{ exact classical solutions for the decoupled chart

def exact_decoupled_solution(chart, initial, nx, T, nt, period=1.0):
    """Classical solution of a decoupled chart by characteristics.

    Each component solves ``u_t + (u + c)u_x = 0`` with ``c`` the chart's
    shift (zero for the first component); the implicit relation
    ``u = u0(x - t (u + c))`` is solved by Newton iteration.  Valid before
    the first gradient catastrophe, which is checked.
    """
    if chart.id != "decoupled":
        raise ConfigError("exact solutions are only available for 'decoupled'")
    dx = period / nx
    x = np.arange(nx) * dx
    t = np.linspace(0.0, T, nt + 1)
    u0 = initial_state(chart, initial, x, period)
    out = np.empty((nt + 1, 2, nx))
    h = 1e-6
    for comp, shift in ((0, 0.0), (1, chart.shift)):
        def u0f(y):
            return initial_state(chart, initial, np.mod(y, period), period)[comp]

        def du0f(y):
            return (u0f(y + h) - u0f(y - h)) / (2 * h)

        slope_min = np.min(du0f(x))
        if slope_min < 0 and T * (-slope_min) >= 1:
            raise ConfigError("exact solution requested past shock formation")
        for n, tn in enumerate(t):
            guess = u0[comp].copy() if n == 0 else out[n - 1, comp]
            v = guess
            for _ in range(50):
                arg = x - tn * (v + shift)
                res = v - u0f(arg)
                jac = 1 + tn * du0f(arg)
                dv = res / jac
                v = v - dv
                if np.max(np.abs(dv)) < 1e-14:
                    break
            out[n, comp] = v
    return GridSolution(chart=chart, x=x, t=t, u=out, epsilon=0.0,
                        period=period, dt=float(t[1] - t[0]),
                        scheme={"name": "characteristics"},
                        config={"initial": initial, "nx": nx, "T": T})


# }}}


# {{{ persistence

def save_solution(sol, directory, ledger=None):
    """Manifest plus one binary per snapshot (``t`` then x-major pairs)."""
    directory = Path(directory)
    for n in range(sol.nt):
        rec = np.concatenate([[sol.t[n]], sol.u[n].T.ravel()])
        io.write_field(directory / f"snapshot_{n:05d}.bin", rec, ["record"],
                       extra={"layout": "t, then (u1, u2) per x"})
    payload = {
        "kind": "grid_solution", "chart": sol.chart.describe(),
        "nx": sol.nx, "nt": sol.nt, "period": sol.period,
        "epsilon": sol.epsilon, "dt": sol.dt, "scheme": sol.scheme,
        "config": sol.config,
    }
    if ledger is not None:
        payload["ledger"] = {
            "t_edges": ledger.t_edges, "dissipation": ledger.dissipation,
            "window_dissipation": ledger.window_dissipation,
            "window": list(ledger.window),
            "initial_entropy": ledger.initial_entropy,
            "cone_initial_entropy": ledger.cone_initial_entropy,
            "cone_speed": ledger.cone_speed, "entropy_id": ledger.entropy_id,
            "constant": ledger.constant,
        }
    io.write_manifest(directory, payload)
    return directory


def load_solution(directory):
    directory = Path(directory)
    man = io.read_manifest(directory)
    chart = get_chart(man["chart"]["id"], man["chart"]["params"])
    nx, nt = int(man["nx"]), int(man["nt"])
    t = np.empty(nt)
    u = np.empty((nt, 2, nx))
    for n in range(nt):
        rec = io.read_field(directory / f"snapshot_{n:05d}.bin",
                            {"record": 1 + 2 * nx})
        t[n] = rec[0]
        u[n] = rec[1:].reshape(nx, 2).T
    period = float(man["period"])
    return GridSolution(chart=chart, x=np.arange(nx) * period / nx, t=t, u=u,
                        epsilon=float(man["epsilon"]), period=period,
                        dt=float(man["dt"]), scheme=man.get("scheme", {}),
                        config=man.get("config", {}))

# }}}
