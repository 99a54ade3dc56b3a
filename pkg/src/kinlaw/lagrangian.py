"""
Characteristic curves with a frozen kinetic value.

A curve ``x(t)`` carrying the level ``xi`` solves ``x' = lambda1[xi](u(t, x))``
with ``u`` interpolated bilinearly in space-time.  Curves tagged ``max``
live under the graph of ``w`` (``w - r <= xi <= w``), curves tagged ``min``
above it.  Bundles of curves are seeded deterministically so that their
weighted empirical measure approximates the band-restricted kinetic mass;
the interaction functional between two distinguished curves is tracked
together with its boundary fluxes.

Positions are unwrapped: a curve may leave ``[0, period)`` and keep going.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import io
from .errors import EmptyBandError, GeometryError, WindowExitError
from .goursat import bilinear, kinetic_speed


# {{{ data types

@dataclass
class Curve:
    """One traced characteristic.

    ``clamp_flags[n]`` is true when the kinetic speed at sample ``n`` had to
    be clamped onto the strip.  ``w_samples`` holds ``w(t, x(t))``.
    """

    xi: float
    t_samples: np.ndarray
    x_samples: np.ndarray
    band: str = "max"
    clamp_flags: np.ndarray = None
    w_samples: np.ndarray = None
    weight: float = 1.0

    def band_violations(self, r, tol=0.0):
        """Number of samples breaking the band law for width ``r``."""
        w = self.w_samples
        if self.band == "max":
            bad = (self.xi > w + tol) | (self.xi < w - r - tol)
        else:
            bad = (self.xi < w - tol) | (self.xi > w + r + tol)
        return int(bad.sum())

    def max_increment(self):
        return float(np.abs(np.diff(self.x_samples)).max(initial=0.0))


@dataclass
class CurveBundle:
    """Curves traced from weighted seeds; ``weights`` sum to the band mass."""

    band: str
    curves: list
    seeds_x: np.ndarray
    seeds_xi: np.ndarray
    weights: np.ndarray
    spec: object = None

    @property
    def t_samples(self):
        return self.curves[0].t_samples

    def positions(self):
        """Array ``(n_t, n_curves)`` of unwrapped positions."""
        return np.stack([c.x_samples for c in self.curves], axis=1)

    def xis(self):
        return np.array([c.xi for c in self.curves])

    def clamp_fraction(self):
        flags = np.stack([c.clamp_flags for c in self.curves])
        return float(flags.mean())

    def band_violation_fraction(self, tol=0.0):
        r = self.spec.r
        total = sum(c.band_violations(r, tol) for c in self.curves)
        return total / (len(self.curves) * self.t_samples.size)


@dataclass(frozen=True)
class BandSpec:
    """Essential range of ``w`` and the band constants.

    The max band is ``a <= xi <= w`` with ``a = w_max - r``; the min band is
    ``w <= xi <= w_min + r``.  ``b`` is the level of the distinguished fast
    curve.
    """

    w_min: float
    w_max: float
    r: float
    b: float

    def __post_init__(self):
        if not self.w_min + self.r < self.w_max - self.r:
            raise ValueError("band width too large: need w_min + r < w_max - r")
        if not self.a < self.b <= self.w_max:
            raise ValueError("need a < b <= w_max")

    @property
    def a(self):
        return self.w_max - self.r

    @property
    def min_top(self):
        return self.w_min + self.r

    @classmethod
    def from_solution(cls, solution, r_frac=0.25, b_frac=0.75, q=1e-3):
        """Quantile-clipped range of ``w`` with ``r = r_frac * (w_max - w_min)``."""
        w, _ = solution.riemann()
        w_min, w_max = (float(v) for v in np.quantile(w, [q, 1 - q]))
        r = r_frac * (w_max - w_min)
        return cls(w_min=w_min, w_max=w_max, r=r, b=w_max - r + b_frac * r)


@dataclass
class QLedger:
    """Interaction functional and its boundary fluxes per slab."""

    t_grid: np.ndarray
    q_values: np.ndarray
    f_out: np.ndarray
    f_in: np.ndarray
    constants: dict = field(default_factory=dict)
    crossed_at: float = None

    @property
    def predicted_rate(self):
        c = self.constants["c"]
        a, b = self.constants["a"], self.constants["b"]
        return c**2 * (b - a) ** 2 / 2

    def increments(self):
        return np.diff(self.q_values)

    def slab_durations(self):
        return np.diff(self.t_grid)

# }}}


# {{{ sampling the solution

def _state_at(solution, t, x):
    """Riemann coordinates at arbitrary ``(t, x)``, bilinear in ``u``."""
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    ts = solution.t
    if ts.size > 1:
        pos = (t - ts[0]) / solution.dt_snap
        n = np.clip(np.floor(pos).astype(int), 0, ts.size - 2)
        ft = np.clip(pos - n, 0.0, 1.0)
    else:
        n = np.zeros(np.shape(t), int)
        ft = np.zeros(np.shape(t))
    xr = (x - solution.x[0]) / solution.dx
    m = np.floor(xr).astype(int)
    fx = xr - m
    m0 = np.mod(m, solution.nx)
    m1 = np.mod(m + 1, solution.nx)
    u = solution.u
    n1 = np.minimum(n + 1, ts.size - 1)
    val = ((1 - ft) * ((1 - fx) * u[n, :, m0].T + fx * u[n, :, m1].T)
           + ft * ((1 - fx) * u[n1, :, m0].T + fx * u[n1, :, m1].T))
    w, z = solution.chart.forward(val)
    return np.asarray(w), np.asarray(z)


def _speed(solution, family, t, x, xi, side):
    w, z = _state_at(solution, t, x)
    grid = family.grid
    wc = np.clip(w, grid.w[0], grid.w[-1])
    zc = np.clip(z, grid.z[0], grid.z[-1])
    lam, clamped = kinetic_speed(family, xi, wc, zc, side=side)
    return lam, clamped, w

# }}}


# {{{ tracing

def _trace_many(solution, family, x0, xi, t0, t_end, side, substeps=1):
    """Heun integration of many curves at once.

    Returns ``(t, x, clamped, w)`` with sample arrays of shape
    ``(n_t, n_curves)``; samples coincide with snapshot times (refined by
    ``substeps``).
    """
    direction = 1.0 if t_end >= t0 else -1.0
    step = solution.dt_snap / substeps
    n_steps = int(round(abs(t_end - t0) / step))
    times = t0 + direction * step * np.arange(n_steps + 1)
    x0 = np.atleast_1d(np.asarray(x0, float))
    xi = np.broadcast_to(np.asarray(xi, float), x0.shape)
    xs = np.empty((n_steps + 1, x0.size))
    flags = np.zeros_like(xs, dtype=bool)
    ws = np.empty_like(xs)
    xs[0] = x0
    x = x0.copy()
    lam, cl, w = _speed(solution, family, times[0], x, xi, side)
    flags[0], ws[0] = cl, w
    h = direction * step
    for n in range(n_steps):
        pred = x + h * lam
        lam_p, cl_p, _ = _speed(solution, family, times[n + 1], pred, xi, side)
        x = x + 0.5 * h * (lam + lam_p)
        lam, cl, w = _speed(solution, family, times[n + 1], x, xi, side)
        xs[n + 1] = x
        flags[n + 1] = cl | cl_p
        ws[n + 1] = w
    return times, xs, flags, ws


def _window(solution):
    return float(solution.t[0]), float(solution.t[-1])


def trace(solution, family, x0, t0, xi, direction=1, t_end=None, band="max",
          substeps=1):
    """Trace one curve carrying the level ``xi`` from ``(t0, x0)``.

    The curve runs forward (``direction=1``) or backward (``-1``) until
    ``t_end`` (default: the end of the solution window in that direction).
    A ``t_end`` outside the window raises :class:`WindowExitError` carrying
    the curve traced up to the window edge.
    """
    t_lo, t_hi = _window(solution)
    tol = 1e-12 * max(1.0, abs(t_hi))
    if not t_lo - tol <= t0 <= t_hi + tol:
        raise WindowExitError(f"start time {t0} outside [{t_lo}, {t_hi}]")
    edge = t_hi if direction > 0 else t_lo
    if t_end is None:
        t_end = edge
    exits = (t_end > t_hi + tol) if direction > 0 else (t_end < t_lo - tol)
    stop = edge if exits else t_end
    side = "max" if band == "max" else "min"
    t, x, fl, w = _trace_many(solution, family, [x0], [xi], t0, stop, side,
                              substeps)
    curve = Curve(xi=float(xi), t_samples=t, x_samples=x[:, 0], band=band,
                  clamp_flags=fl[:, 0], w_samples=w[:, 0])
    if exits:
        raise WindowExitError(
            f"curve left the window at t = {stop}", curve=curve)
    return curve

# }}}


# {{{ seeding

def _halton(n, seed_skip=1):
    gen = qmc.Halton(d=2, scramble=False)
    gen.fast_forward(seed_skip)
    return gen.random(n)


def _slice_bounds(w0, band, kind):
    if kind == "max":
        lo = np.full_like(w0, band.a)
        hi = np.clip(w0, band.a, band.w_max)
    else:
        lo = np.clip(w0, band.w_min, band.min_top)
        hi = np.full_like(w0, band.min_top)
    return lo, hi


def _inverse_cdf(x_nodes, dens, period, u):
    """Sample positions from a piecewise-linear periodic density."""
    nxt = np.roll(dens, -1)
    dx = period / x_nodes.size
    cell = 0.5 * (dens + nxt) * dx
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    total = cdf[-1]
    target = u * total
    m = np.clip(np.searchsorted(cdf, target, side="right") - 1, 0,
                x_nodes.size - 1)
    rem = target - cdf[m]
    d0, d1 = dens[m], nxt[m]
    slope = (d1 - d0) / dx
    # solve d0 s + slope s^2 / 2 = rem on the cell
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = (-d0 + np.sqrt(np.maximum(d0**2 + 2 * slope * rem, 0))) / slope
    lin = np.where(d0 > 0, rem / np.where(d0 > 0, d0, 1), 0.5 * dx)
    s = np.where(np.abs(slope) > 1e-14, quad, lin)
    return x_nodes[m] + np.clip(s, 0, dx), total


def _theta_at(family, xi, w, z, side):
    """Uncut table value ``Theta[xi](w, z)`` interpolated linearly in ``xi``."""
    grid = family.grid
    wc = np.clip(w, grid.w[0], grid.w[-1])
    zc = np.clip(z, grid.z[0], grid.z[-1])
    pos = np.clip((xi - family.xi[0]) / family.dxi, 0, family.xi.size - 1)
    k = np.minimum(np.floor(pos).astype(int), family.xi.size - 2)
    f = pos - k
    return ((1 - f) * bilinear(family.theta, k, wc, zc, grid)
            + f * bilinear(family.theta, k + 1, wc, zc, grid))


def seed_bundle(solution, family, band, n_curves, kind="max", substeps=1):
    """Seed ``n_curves`` curves on the max (or min) band and trace them.

    Seeds ``(x, xi)`` come from a Halton sequence mapped through the
    inverse distribution of the band slice length in ``x`` and spread
    uniformly over the slice in ``xi``.  Weights are the table values times
    the slice mass over ``n_curves``, so the bundle reproduces
    ``int chi`` over the band.
    """
    if n_curves < 64:
        raise ValueError("need at least 64 curves")
    w0, z0 = (a[0] for a in solution.riemann())
    lo, hi = _slice_bounds(w0, band, kind)
    length = hi - lo
    if not np.any(length > 0):
        raise EmptyBandError(f"the {kind} band carries no kinetic mass")
    pts = _halton(n_curves)
    xs, total = _inverse_cdf(solution.x, length, solution.period, pts[:, 0])
    w_s, z_s = _state_at(solution, np.full(xs.shape, solution.t[0]), xs)
    lo_s, hi_s = _slice_bounds(w_s, band, kind)
    xi = lo_s + pts[:, 1] * (hi_s - lo_s)
    theta = _theta_at(family, xi, w_s, z_s, kind)
    weights = theta * total / n_curves
    side = "max" if kind == "max" else "min"
    t, x, fl, w = _trace_many(solution, family, xs, xi, solution.t[0],
                              solution.t[-1], side, substeps)
    curves = [Curve(xi=float(xi[j]), t_samples=t, x_samples=x[:, j],
                    band=kind, clamp_flags=fl[:, j], w_samples=w[:, j],
                    weight=float(weights[j]))
              for j in range(n_curves)]
    return CurveBundle(band=kind, curves=curves, seeds_x=xs, seeds_xi=xi,
                       weights=weights, spec=band)

# }}}


# {{{ reconstruction

def band_box_masses(solution, family, band, t_index, x_edges, xi_edges,
                    kind="max", n_sub=16):
    """``int chi^band`` over boxes ``x_edges x xi_edges`` at a snapshot.

    The kinetic integral is done per node with ``n_sub`` midpoints per box
    row and exact cuts; the ``x`` integral uses the nodes inside each box.
    """
    w, z = solution.riemann()
    w, z = w[t_index], z[t_index]
    lo, hi = _slice_bounds(w, band, kind)
    out = np.zeros((x_edges.size - 1, xi_edges.size - 1))
    x = solution.x
    for j in range(xi_edges.size - 1):
        e0, e1 = xi_edges[j], xi_edges[j + 1]
        s_lo = np.clip(lo, e0, e1)
        s_hi = np.clip(hi, e0, e1)
        span = np.maximum(s_hi - s_lo, 0)
        acc = np.zeros_like(w)
        for i in range(n_sub):
            q = s_lo + (i + 0.5) / n_sub * span
            acc += _theta_at(family, q, w, z, kind)
        col = acc / n_sub * span * solution.dx
        idx = np.clip(np.searchsorted(x_edges, x, side="right") - 1, 0,
                      x_edges.size - 2)
        inside = (x >= x_edges[0]) & (x < x_edges[-1])
        out[:, j] = np.bincount(idx[inside], weights=col[inside],
                                minlength=x_edges.size - 1)
    return out


def bundle_box_masses(bundle, t_index, x_edges, xi_edges, period):
    """Weighted curve counts in the same boxes (positions taken modulo)."""
    pos = np.mod(bundle.positions()[t_index], period)
    hist, _, _ = np.histogram2d(pos, bundle.xis(), bins=[x_edges, xi_edges],
                                weights=bundle.weights)
    return hist


def reconstruction_error(solution, family, bundle, t_index, n_boxes=(8, 8)):
    """Relative L1 box discrepancy between the bundle and the field."""
    band = bundle.spec
    x_edges = np.linspace(0, solution.period, n_boxes[0] + 1)
    if bundle.band == "max":
        xi_edges = np.linspace(band.a, band.w_max, n_boxes[1] + 1)
    else:
        xi_edges = np.linspace(band.w_min, band.min_top, n_boxes[1] + 1)
    ref = band_box_masses(solution, family, band, t_index, x_edges, xi_edges,
                          bundle.band)
    emp = bundle_box_masses(bundle, t_index, x_edges, xi_edges,
                            solution.period)
    return float(np.abs(emp - ref).sum() / np.abs(ref).sum())

# }}}


# {{{ non-crossing

@dataclass
class CrossingReport:
    n_pairs: int
    n_violations: int
    pairs: np.ndarray

    @property
    def fraction(self):
        return self.n_violations / self.n_pairs if self.n_pairs else 0.0


def crossing_check(bundle_max, bundle_min, period=None, max_list=1000):
    """Count pairs ``(gamma, sigma)`` whose ordering flips over the window.

    With a ``period`` the comparison is against every periodic image of
    ``sigma``: a violation is any change of ``floor((gamma - sigma)/period)``.
    """
    g = bundle_max.positions()
    s = bundle_min.positions()
    if g.shape[0] != s.shape[0]:
        raise ValueError("bundles are sampled at different times")

    def sector(n):
        diff = g[n][:, None] - s[n][None, :]
        if period is None:
            return diff >= 0
        return np.floor(diff / period)

    first = sector(0)
    flipped = np.zeros(first.shape, dtype=bool)
    for n in range(1, g.shape[0]):
        flipped |= sector(n) != first
    ii, jj = np.nonzero(flipped)
    pairs = np.stack([ii, jj], axis=1)[:max_list]
    return CrossingReport(n_pairs=flipped.size, n_violations=int(flipped.sum()),
                          pairs=pairs)

# }}}


# {{{ interaction functional

def distinguished_curves(solution, family, band, substeps=1):
    """Fast curve at level ``b`` from the top of ``w`` and slow curve at
    ``w_min + r/2`` from the bottom, ordered so that ``gamma(0) < sigma(0)``."""
    w0 = solution.riemann()[0][0]
    x_g = solution.x[int(np.argmax(w0))]
    x_s = solution.x[int(np.argmin(w0))]
    if x_s <= x_g:
        x_s += solution.period
    if w0.max() < band.b:
        raise GeometryError("no starting point with w >= b for the fast curve")
    if w0.min() > band.w_min + 0.5 * band.r:
        raise GeometryError("no starting point below the slow curve level")
    gamma = trace(solution, family, x_g, solution.t[0], band.b, band="max",
                  substeps=substeps)
    sigma = trace(solution, family, x_s, solution.t[0],
                  band.w_min + 0.5 * band.r, band="min", substeps=substeps)
    return gamma, sigma


def _band_column(family, band, w, z, n_sub=32):
    """``int_a^b chi[xi](u) dxi`` per state (midpoint rule, exact cut)."""
    top = np.clip(w, band.a, band.b)
    span = top - band.a
    acc = np.zeros_like(w)
    for i in range(n_sub):
        q = band.a + (i + 0.5) / n_sub * span
        acc += _theta_at(family, q, w, z, "max")
    return acc / n_sub * span


def _interval_integral(solution, column, x_left, x_right):
    """Integral of a periodic nodal function over ``[x_left, x_right]``."""
    x0 = solution.x[0]
    dx = solution.dx
    nx = solution.nx
    ext = np.concatenate([column, column[:1]])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ext[:-1] + ext[1:]) * dx)])
    total = cum[-1]

    def prim(x):
        s = (x - x0) / dx
        laps = np.floor(s / nx)
        s = s - laps * nx
        m = np.minimum(np.floor(s).astype(int), nx - 1)
        f = s - m
        c0, c1 = ext[m], ext[m + 1]
        part = dx * (c0 * f + 0.5 * (c1 - c0) * f**2)
        return laps * total + cum[m] + part

    return prim(x_right) - prim(x_left)


def _boundary_flux(solution, family, band, t, x, speed, n_sub=32):
    """``int_a^b chi[xi](u)(speed - lambda1[xi](u)) dxi`` at ``(t, x)``."""
    w, z = _state_at(solution, np.array([t]), np.array([x]))
    top = np.clip(w, band.a, band.b)
    span = top - band.a
    acc = 0.0
    for i in range(n_sub):
        q = band.a + (i + 0.5) / n_sub * span
        th = _theta_at(family, q, w, z, "max")
        lam, _ = kinetic_speed(family, q, *_clip_grid(family, w, z))
        acc = acc + th * (speed - lam)
    return float((acc / n_sub * span)[0])


def _clip_grid(family, w, z):
    g = family.grid
    return np.clip(w, g.w[0], g.w[-1]), np.clip(z, g.z[0], g.z[-1])


def q_functional(solution, family, gamma_bar, sigma_bar, band):
    """Interaction functional between a fast and a slow curve.

    ``Q(t)`` integrates ``chi`` over ``a <= xi <= b`` between the curves.
    Per slab, ``F_out`` is the outflow through the fast curve and ``F_in``
    the inflow through the slow one (trapezoid in time).  If the curves
    cross, the ledger up to that time is attached to the raised
    :class:`GeometryError`.
    """
    if not gamma_bar.x_samples[0] < sigma_bar.x_samples[0]:
        raise GeometryError("need gamma(0) < sigma(0)")
    t = gamma_bar.t_samples
    w, z = solution.riemann()
    n_t = min(t.size, solution.nt)
    q_vals, out_rate, in_rate = [], [], []
    crossed = None
    lam_g, _ = kinetic_speed(family, gamma_bar.xi,
                             *_clip_grid(family, *_state_at(
                                 solution, t, gamma_bar.x_samples)))
    lam_s, _ = kinetic_speed(family, sigma_bar.xi,
                             *_clip_grid(family, *_state_at(
                                 solution, t, sigma_bar.x_samples)), side="min")
    for n in range(n_t):
        xg, xs = gamma_bar.x_samples[n], sigma_bar.x_samples[n]
        if xs <= xg:
            crossed = float(t[n])
            break
        col = _band_column(family, band, w[n], z[n])
        q_vals.append(float(_interval_integral(solution, col, xg, xs)))
        out_rate.append(_boundary_flux(solution, family, band, t[n], xg,
                                       lam_g[n]))
        in_rate.append(-_boundary_flux(solution, family, band, t[n], xs,
                                       lam_s[n]))
    m = len(q_vals)
    tg = t[:m]
    dts = np.diff(tg)
    out_rate, in_rate = np.array(out_rate), np.array(in_rate)
    f_out = 0.5 * (out_rate[:-1] + out_rate[1:]) * dts
    f_in = 0.5 * (in_rate[:-1] + in_rate[1:]) * dts
    ledger = QLedger(t_grid=tg, q_values=np.array(q_vals), f_out=f_out,
                     f_in=f_in,
                     constants={"a": band.a, "b": band.b, "r": band.r,
                                "w_min": band.w_min, "w_max": band.w_max,
                                "c": family.c, "r_bar": family.r_bar},
                     crossed_at=crossed)
    if crossed is not None:
        err = GeometryError(f"curves cross at t = {crossed}")
        err.ledger = ledger
        raise err
    return ledger


def slab_tolerance(solution, family, n_curves, c_disc=0.01):
    """``c_disc * (dx + dxi + 1/sqrt(n_curves))``."""
    return c_disc * (solution.dx + family.dxi + 1 / np.sqrt(n_curves))

# }}}


# {{{ persistence

def save_bundle(bundle, path):
    rows = []
    for cid, c in enumerate(bundle.curves):
        for n in range(c.t_samples.size):
            rows.append([cid, c.t_samples[n], c.x_samples[n], c.xi,
                         int(c.clamp_flags[n])])
    return io.write_csv(path, ["curve", "t", "x", "xi", "clamped"], rows)


def save_qledger(ledger, path):
    rows = []
    for n, t in enumerate(ledger.t_grid):
        fo = ledger.f_out[n - 1] if n else 0.0
        fi = ledger.f_in[n - 1] if n else 0.0
        rows.append([t, ledger.q_values[n], fo, fi])
    out = io.write_csv(path, ["t", "Q", "F_out", "F_in"], rows)
    meta = dict(ledger.constants, predicted_rate=ledger.predicted_rate,
                crossed_at=ledger.crossed_at)
    side = out.with_suffix(".json")
    side.write_text(json.dumps(io._jsonable(meta), indent=1))
    return out

# }}}
