"""
Singular entropy families built from Goursat problems in Riemann coordinates.

Every smooth entropy ``eta(w, z)`` of a 2x2 system solves

.. math::

    \\eta_{wz} = A\\,\\eta_w + B\\,\\eta_z, \\qquad
    A = -\\frac{\\lambda_{1,z}}{\\lambda_1 - \\lambda_2}, \\quad
    B = \\frac{\\lambda_{2,w}}{\\lambda_1 - \\lambda_2}.

With ``g = exp(int A dz)`` and ``h = exp(int B dw)`` (both equal to one on
their data edges) the cut entropy ``Theta[xi]`` is the solution with data
``Theta(w, z_lo) = b0(w)`` and ``Theta(xi, z) = b0(xi) g(xi, z)``.  The
companion flux satisfies ``Xi_w = lambda1 Theta_w`` and is anchored so that
``Xi = lambda1 Theta`` on the cut line.  Truncating by ``1{w >= xi}`` (or
``1{w <= xi}``) gives the kinetic building blocks ``chi``, ``psi`` (and the
tilde variants).  The symmetric family in ``zeta`` swaps the roles of the
coordinates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    DegenerateStripError,
    GridError,
    GridMismatchError,
    QuadratureError,
    StripError,
)
from .systems import get_chart, riemann_nodes

STRIP_DROP = 0.5
STRIP_SAFETY = 0.9
GH_MIN_SUBINTERVALS = 4096


def thread_count():
    """Worker cap taken from ``KINLAW_THREADS`` (default: CPU count)."""
    env = os.environ.get("KINLAW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


# {{{ grid and coefficients

@dataclass(frozen=True)
class RiemannGrid:
    w: np.ndarray
    z: np.ndarray

    @property
    def shape(self):
        return (self.w.size, self.z.size)

    @property
    def dw(self):
        return float(self.w[1] - self.w[0])

    @property
    def dz(self):
        return float(self.z[1] - self.z[0])


def make_grid(chart, n_w, n_z=None):
    """Uniform node grid with ``n_w x n_z`` nodes covering the rectangle."""
    if n_w < 3 or (n_z is not None and n_z < 3):
        raise GridError("need at least 3 nodes per axis")
    return RiemannGrid(*riemann_nodes(chart, n_w, n_z))


def goursat_coefficients(chart, w, z):
    """``(A, B)`` coefficient tables of the entropy equation."""
    ww, zz = np.meshgrid(w, z, indexing="ij")
    l1, l2 = chart.speeds_wz(ww, zz)
    l1w, l1z, l2w, l2z = chart.speed_derivatives_wz(ww, zz)
    gap = l1 - l2
    return -l1z / gap, l2w / gap

# }}}


# {{{ g, h

@dataclass(frozen=True)
class GhTables:
    g: np.ndarray
    h: np.ndarray
    grid: RiemannGrid
    subintervals: int


def _cumulative_exp_integral(chart, outer, inner, which, n_sub):
    """``exp`` of cumulative trapezoid integrals along the ``inner`` axis."""
    n_in = inner.size
    fine = np.concatenate([
        np.linspace(inner[i], inner[i + 1], n_sub + 1)[:-1]
        for i in range(n_in - 1)] + [inner[-1:]])
    if which == "g":
        ww, yy = np.meshgrid(outer, fine, indexing="ij")
        l1, l2 = chart.speeds_wz(ww, yy)
        _, l1z, _, _ = chart.speed_derivatives_wz(ww, yy)
        integrand = -l1z / (l1 - l2)
    else:
        yy, zz = np.meshgrid(fine, outer, indexing="ij")
        l1, l2 = chart.speeds_wz(yy, zz)
        _, _, l2w, _ = chart.speed_derivatives_wz(yy, zz)
        integrand = (l2w / (l1 - l2)).T
    if not np.all(np.isfinite(integrand)):
        raise QuadratureError("non-finite integrand in g/h quadrature")
    step = np.diff(fine)
    cum = np.zeros_like(integrand)
    cum[:, 1:] = np.cumsum(0.5 * (integrand[:, 1:] + integrand[:, :-1]) * step,
                           axis=1)
    coarse = cum[:, ::n_sub]
    out = np.exp(coarse)
    out[:, 0] = 1.0
    return out


def compute_gh(chart, grid, subintervals=None):
    """Tabulate ``g`` and ``h`` on ``grid`` by composite trapezoid.

    Each grid cell is split into ``subintervals`` pieces (default: enough for
    at least 4096 pieces along an axis) so that the tabulated values are
    accurate well beyond the grid's own second-order error.
    """
    n = max(grid.w.size, grid.z.size) - 1
    if subintervals is None:
        subintervals = max(1, math.ceil(GH_MIN_SUBINTERVALS / n))
    g = _cumulative_exp_integral(chart, grid.w, grid.z, "g", subintervals)
    h = _cumulative_exp_integral(chart, grid.z, grid.w, "h", subintervals).T
    if not (np.all(g > 0) and np.all(h > 0)):
        raise QuadratureError("g or h lost positivity")
    return GhTables(g=g, h=h, grid=grid, subintervals=subintervals)

# }}}


# {{{ marching

def _march(col, row, acoef, bcoef, dw, dz):
    """March the Goursat scheme away from the two data lines.

    Arrays carry a leading batch axis.  ``col`` (b, nz) holds data on the cut
    line, ``row`` (b, nm) data on the first ``z`` line, ``acoef``/``bcoef``
    (b, nm, nz) the equation coefficients in marching order and ``dw``
    (b, nm - 1) the signed steps away from the cut.

    Each cell integrates the equation over its area with the trapezoidal
    rule.  The update is a predictor followed by two Picard corrector
    sweeps; it is linear in the unknown corner, so the three stages are
    collapsed into one affine map per cell.
    """
    b, nm, nz = acoef.shape
    th = np.empty((b, nm, nz))
    th[:, 0, :] = col
    th[:, :, 0] = row
    for j in range(nz - 1):
        a0, a1 = acoef[:, :, j], acoef[:, :, j + 1]
        b0, b1 = bcoef[:, :, j], bcoef[:, :, j + 1]
        p = 0.25 * dz[j] * (a0[:, :-1] + a0[:, 1:])
        pp = 0.25 * dz[j] * (a1[:, :-1] + a1[:, 1:])
        q = 0.25 * dw * (b0[:, :-1] + b1[:, :-1])
        qq = 0.25 * dw * (b0[:, 1:] + b1[:, 1:])
        t_a = th[:, :-1, j]
        t_b = th[:, 1:, j]
        diff = t_b - t_a
        m = pp + qq
        known = (1 + p) * diff - q * t_a - qq * t_b
        alpha = (1 + m) * (1 - pp + q) + m * m
        beta = (1 + m) * known + m * m * diff
        x = th[:, 0, j + 1]
        for i in range(nm - 1):
            x = alpha[:, i] * x + beta[:, i]
            th[:, i + 1, j + 1] = x
    return th


def _solve_cuts(acoef, bcoef, data, axis_nodes, other_nodes, cut_idx, b0_vals):
    """Full-rectangle solutions for a batch of cuts along the first axis.

    ``data[k]`` holds the cut-line factor (``g`` or ``h``) on the cut, and
    ``b0_vals`` the boundary profile sampled on the first axis.
    Returns an array ``(len(cut_idx), n_axis, n_other)``.
    """
    n = axis_nodes.size
    cut_idx = np.asarray(cut_idx)
    nb = cut_idx.size
    out = np.empty((nb, n, other_nodes.size))
    dz = np.diff(other_nodes)
    m = np.arange(n)
    for sign in (1, -1):
        idx = np.clip(cut_idx[:, None] + sign * m[None, :], 0, n - 1)
        dw = axis_nodes[idx[:, 1:]] - axis_nodes[idx[:, :-1]]
        col = b0_vals[cut_idx][:, None] * data[cut_idx]
        row = b0_vals[idx]
        th = _march(col, row, acoef[idx], bcoef[idx], dw, dz)
        for bi, k in enumerate(cut_idx):
            if sign > 0:
                out[bi, k:] = th[bi, :n - k]
            else:
                out[bi, :k + 1] = th[bi, :k + 1][::-1]
    return out


def _anchored_flux(speed, dspeed, theta, nodes, cut_idx):
    """``speed*Theta - int_cut^x dspeed*Theta`` along the first table axis."""
    integrand = dspeed[None] * theta
    step = np.diff(nodes)[None, :, None]
    cum = np.zeros_like(theta)
    cum[:, 1:] = np.cumsum(0.5 * (integrand[:, 1:] + integrand[:, :-1]) * step,
                           axis=1)
    anchor = cum[np.arange(len(cut_idx)), cut_idx][:, None, :]
    return speed[None] * theta - (cum - anchor)

# }}}


# {{{ single solve

@dataclass(frozen=True)
class GoursatSolution:
    xi: float
    xi_index: int
    theta: np.ndarray
    xi_flux: np.ndarray
    b0: str = "1"


def snap_cut(nodes, value):
    """Index of the grid line nearest to ``value``.

    Raises :class:`GridError` when ``value`` is more than one cell away from
    every node.
    """
    nodes = np.asarray(nodes)
    k = int(np.argmin(np.abs(nodes - value)))
    cell = float(nodes[1] - nodes[0])
    if abs(nodes[k] - value) > cell:
        raise GridError(f"cut value {value} is not within one cell of the grid")
    return k


def _b0_values(b0, nodes):
    if b0 is None:
        return np.ones_like(nodes), "1"
    if callable(b0):
        vals = np.asarray(b0(nodes), dtype=float) * np.ones_like(nodes)
        return vals, getattr(b0, "__name__", "callable")
    vals = np.asarray(b0, dtype=float)
    if vals.ndim == 0:
        return np.full_like(nodes, float(vals)), repr(float(vals))
    if vals.shape != nodes.shape:
        raise GridMismatchError("b0 samples do not match the w grid")
    return vals, "samples"


def solve_goursat(chart, gh, xi, b0=None):
    """Solve the Goursat problem for ``Theta[xi, b0]`` on the whole rectangle.

    ``b0`` may be ``None`` (constant one), a scalar, a callable of ``w`` or
    samples on the ``w`` nodes.  The flux ``Xi`` is returned alongside.
    """
    grid = gh.grid
    k = snap_cut(grid.w, xi)
    b0_vals, label = _b0_values(b0, grid.w)
    acoef, bcoef = goursat_coefficients(chart, grid.w, grid.z)
    theta = _solve_cuts(acoef, bcoef, gh.g, grid.w, grid.z, [k], b0_vals)
    sol = GoursatSolution(xi=float(grid.w[k]), xi_index=k, theta=theta[0],
                          xi_flux=np.empty(0), b0=label)
    return GoursatSolution(xi=sol.xi, xi_index=k, theta=sol.theta,
                           xi_flux=entropy_flux(chart, sol, grid), b0=label)


def entropy_flux(chart, sol, grid):
    """Flux ``Xi`` of a Goursat solution, anchored on the cut line."""
    ww, zz = np.meshgrid(grid.w, grid.z, indexing="ij")
    l1, _ = chart.speeds_wz(ww, zz)
    l1w, _, _, _ = chart.speed_derivatives_wz(ww, zz)
    flux = _anchored_flux(l1, l1w, sol.theta[None], grid.w, [sol.xi_index])[0]
    if not np.all(np.isfinite(flux)):
        raise QuadratureError("non-finite entropy flux")
    return flux

# }}}


# {{{ family

@dataclass
class EntropyFamily:
    """Tabulated cut entropies for b0 = 1 over a Riemann grid.

    ``theta[k]``/``flux[k]`` are the uncut tables for the cut
    ``xi = w[xi_index[k]]``; ``theta_z[l]``/``flux_z[l]`` the symmetric family
    for ``zeta = z[zeta_index[l]]``.  The cut tables ``chi``, ``psi`` (and
    variants) are produced on demand by masking.
    """

    chart: object
    grid: RiemannGrid
    xi_index: np.ndarray
    zeta_index: np.ndarray
    theta: np.ndarray
    flux: np.ndarray
    theta_z: np.ndarray
    flux_z: np.ndarray
    gh: GhTables
    r_bar: float = float("nan")
    c: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def xi(self):
        return self.grid.w[self.xi_index]

    @property
    def zeta(self):
        return self.grid.z[self.zeta_index]

    @property
    def dxi(self):
        return float(self.xi[1] - self.xi[0])

    @property
    def dzeta(self):
        return float(self.zeta[1] - self.zeta[0])

    def hypograph_mask(self):
        """``1{w >= xi_k}`` with shape (N_xi, N_w, 1)."""
        return (self.grid.w[None, :] >= self.xi[:, None])[:, :, None]

    def epigraph_mask(self):
        return (self.grid.w[None, :] <= self.xi[:, None])[:, :, None]

    def zeta_mask(self):
        """``1{z >= zeta_l}`` with shape (N_zeta, 1, N_z)."""
        return (self.grid.z[None, :] >= self.zeta[:, None])[:, None, :]

    def zeta_epigraph_mask(self):
        return (self.grid.z[None, :] <= self.zeta[:, None])[:, None, :]

    @property
    def chi(self):
        return self.theta * self.hypograph_mask()

    @property
    def psi(self):
        return self.flux * self.hypograph_mask()

    @property
    def chi_tilde(self):
        return self.theta * self.epigraph_mask()

    @property
    def psi_tilde(self):
        return self.flux * self.epigraph_mask()

    @property
    def upsilon(self):
        return self.theta_z * self.zeta_mask()

    @property
    def varphi(self):
        return self.flux_z * self.zeta_mask()

    @property
    def upsilon_tilde(self):
        return self.theta_z * self.zeta_epigraph_mask()

    @property
    def varphi_tilde(self):
        return self.flux_z * self.zeta_epigraph_mask()

    def speed_table(self):
        """Uncut ``Xi/Theta`` for every cut (meaningful on the strip)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.flux / self.theta


def _check_uniform(idx, name):
    idx = np.asarray(idx, dtype=int)
    if idx.size < 3:
        raise GridError(f"{name} grid needs at least 3 cuts")
    step = np.diff(idx)
    if not np.all(step == step[0]) or step[0] <= 0:
        raise GridError(f"{name} grid must be uniform and increasing")
    return idx


def _batched(fn, idx, chunk):
    """Run ``fn`` over chunks of ``idx`` on up to KINLAW_THREADS threads."""
    parts = [idx[i:i + chunk] for i in range(0, idx.size, chunk)]
    workers = min(thread_count(), len(parts))
    if workers <= 1:
        return np.concatenate([fn(p) for p in parts])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(fn, parts)))


def build_family(chart, gh, xi_grid=None, zeta_grid=None, strip=True):
    """Solve all Goursat problems (b0 = 1) for both cut families.

    ``xi_grid``/``zeta_grid`` are cut values (snapped to the nodes) and
    default to every node.  Strip constants are attached unless
    ``strip=False``.
    """
    grid = gh.grid
    xi_idx = (np.arange(grid.w.size) if xi_grid is None
              else np.array([snap_cut(grid.w, x) for x in xi_grid]))
    zeta_idx = (np.arange(grid.z.size) if zeta_grid is None
                else np.array([snap_cut(grid.z, x) for x in zeta_grid]))
    xi_idx = _check_uniform(xi_idx, "xi")
    zeta_idx = _check_uniform(zeta_idx, "zeta")

    ww, zz = np.meshgrid(grid.w, grid.z, indexing="ij")
    l1, l2 = chart.speeds_wz(ww, zz)
    l1w, l1z, l2w, l2z = chart.speed_derivatives_wz(ww, zz)
    acoef, bcoef = -l1z / (l1 - l2), l2w / (l1 - l2)
    chunk = max(1, 2**21 // (grid.w.size * grid.z.size))

    ones_w = np.ones(grid.w.size)
    ones_z = np.ones(grid.z.size)

    def xi_part(ks):
        th = _solve_cuts(acoef, bcoef, gh.g, grid.w, grid.z, ks, ones_w)
        return np.stack([th, _anchored_flux(l1, l1w, th, grid.w, ks)])

    def zeta_part(ls):
        th = _solve_cuts(bcoef.T, acoef.T, gh.h.T, grid.z, grid.w, ls, ones_z)
        fl = _anchored_flux(l2.T, l2z.T, th, grid.z, ls)
        return np.stack([th.transpose(0, 2, 1), fl.transpose(0, 2, 1)])

    xi_tabs = _batched(lambda ks: xi_part(ks).transpose(1, 0, 2, 3),
                       xi_idx, chunk).transpose(1, 0, 2, 3)
    zeta_tabs = _batched(lambda ls: zeta_part(ls).transpose(1, 0, 2, 3),
                         zeta_idx, chunk).transpose(1, 0, 2, 3)
    for tab in (xi_tabs, zeta_tabs):
        if not np.all(np.isfinite(tab)):
            raise QuadratureError("non-finite entries in the entropy family")
    fam = EntropyFamily(chart=chart, grid=grid, xi_index=xi_idx,
                        zeta_index=zeta_idx, theta=xi_tabs[0],
                        flux=xi_tabs[1], theta_z=zeta_tabs[0],
                        flux_z=zeta_tabs[1], gh=gh)
    if strip:
        fam.r_bar, fam.c = strip_constants(fam)
    return fam


def family_for_chart(chart, n, strip=True):
    """Convenience: grid with ``n`` nodes per axis, g/h and full family."""
    grid = make_grid(chart, n)
    return build_family(chart, compute_gh(chart, grid), strip=strip)

# }}}


# {{{ kinetic speed and strip constants

def speed_derivative_table(family):
    """Centered differences of the kinetic speed in ``xi``.

    Returns ``(k_lo, table)`` where ``table[k - k_lo]`` approximates
    ``d lambda1[xi]/d xi`` at cut ``k`` for interior cuts.
    """
    lam = family.speed_table()
    return 1, (lam[2:] - lam[:-2]) / (2 * family.dxi)


def _running_strip_min(values, cut_nodes, n_w, k_offset=0):
    """``out[k, j] = min_{w-index in [cut_k, cut_k + j]}`` of ``values[k]``.

    ``values`` has shape (K, N_w) (already minimised over z).  Entries whose
    strip reaches the edge of the rectangle are truncated there.
    """
    K = values.shape[0]
    out = np.empty((K, n_w))
    for k in range(K):
        start = cut_nodes[k + k_offset]
        seg = np.minimum.accumulate(values[k, start:])
        out[k, :seg.size] = seg
        out[k, seg.size:] = seg[-1]
    return out


def strip_constants(family):
    """Width ``r_bar`` and bound ``c`` for positivity and monotonicity.

    Strip widths are multiples of the ``w`` step.  The width is the largest
    one for which the strip minima of ``chi[xi]`` and of the centered
    ``d lambda1[xi]/d xi`` both stay at least half of their values at one
    step; ``c`` is 0.9 times the smaller of the two minima at that width.
    """
    grid = family.grid
    n_w = grid.w.size
    step = grid.dw
    chi_min = _running_strip_min(family.theta.min(axis=2), family.xi_index, n_w)
    k_lo, dlam = speed_derivative_table(family)
    with np.errstate(invalid="ignore"):
        dmin_z = np.where(np.isfinite(dlam), dlam, -np.inf).min(axis=2)
    d_min = _running_strip_min(dmin_z, family.xi_index, n_w, k_offset=k_lo)
    m_chi = chi_min.min(axis=0)
    m_d = d_min.min(axis=0)
    base_chi, base_d = m_chi[1], m_d[1]
    if not (base_chi > 0 and base_d > 0):
        raise DegenerateStripError(
            f"strip minima at one step: chi {base_chi:.3e}, dlambda {base_d:.3e}")
    ok = (m_chi >= STRIP_DROP * base_chi) & (m_d >= STRIP_DROP * base_d)
    ok[0] = True
    bad = np.flatnonzero(~ok)
    j = (bad[0] - 1) if bad.size else n_w - 1
    if j < 2:
        raise DegenerateStripError("no strip of at least two steps qualifies")
    c = STRIP_SAFETY * min(m_chi[j], m_d[j])
    return j * step, float(c)


def strip_minima(family, r_bar=None):
    """Strip minima ``(min chi, min d lambda/d xi)`` for a given width."""
    r_bar = family.r_bar if r_bar is None else r_bar
    j = int(round(r_bar / family.grid.dw))
    n_w = family.grid.w.size
    chi_min = _running_strip_min(family.theta.min(axis=2), family.xi_index, n_w)
    k_lo, dlam = speed_derivative_table(family)
    d_min = _running_strip_min(dlam.min(axis=2), family.xi_index, n_w,
                               k_offset=k_lo)
    return float(chi_min[:, j].min()), float(d_min[:, j].min())


def _interp_index(nodes, x):
    """Lower cell index and fraction for uniform ``nodes``."""
    h = nodes[1] - nodes[0]
    s = (np.asarray(x, dtype=float) - nodes[0]) / h
    i = np.clip(np.floor(s).astype(int), 0, nodes.size - 2)
    return i, s - i


def bilinear(tables, k, w, z, grid):
    """Bilinear interpolation of ``tables[k]`` at ``(w, z)`` (arrays)."""
    i, fw = _interp_index(grid.w, w)
    j, fz = _interp_index(grid.z, z)
    t = tables
    return ((1 - fw) * (1 - fz) * t[k, i, j] + fw * (1 - fz) * t[k, i + 1, j]
            + (1 - fw) * fz * t[k, i, j + 1] + fw * fz * t[k, i + 1, j + 1])


def kinetic_speed(family, xi, w, z, strict=False, side="max"):
    """``lambda1[xi](w, z) = psi/chi`` on the strip ``xi <= w <= xi + r_bar``.

    With ``side="min"`` the epigraph strip ``w <= xi <= w + r_bar`` is used
    instead.  Off-strip queries are answered with ``xi`` clamped to the
    strip (and to the family range) unless ``strict``; the returned boolean
    array flags clamped entries.
    """
    xi, w, z = np.broadcast_arrays(np.asarray(xi, float),
                                   np.asarray(w, float), np.asarray(z, float))
    r_bar = family.r_bar if np.isfinite(family.r_bar) else np.inf
    if side == "max":
        lo = np.maximum(w - r_bar, family.xi[0])
        hi = np.minimum(w, family.xi[-1])
    elif side == "min":
        lo = np.maximum(w, family.xi[0])
        hi = np.minimum(w + r_bar, family.xi[-1])
    else:
        raise ValueError(f"unknown side {side!r}")
    tol = 1e-12
    clamped = (xi < lo - tol) | (xi > hi + tol)
    if strict and np.any(clamped):
        raise StripError("kinetic speed requested off the strip")
    x = np.clip(xi, lo, hi)
    k, f = _interp_index(family.xi, x)
    vals = []
    for kk in (k, k + 1):
        th = bilinear(family.theta, kk, w, z, family.grid)
        fl = bilinear(family.flux, kk, w, z, family.grid)
        vals.append(fl / th)
    return (1 - f) * vals[0] + f * vals[1], clamped

# }}}


# {{{ representation formula

@dataclass(frozen=True)
class ReconstructedEntropy:
    eta: np.ndarray
    q: np.ndarray
    grid: RiemannGrid

    def __call__(self, w, z):
        """Bilinear evaluation of ``(eta, q)`` at Riemann coordinates."""
        stack = np.stack([self.eta, self.q])
        zero = np.zeros(np.shape(w), dtype=int)
        return (bilinear(stack, zero, w, z, self.grid),
                bilinear(stack, zero + 1, w, z, self.grid))


def trapezoid_weights(n, h):
    wts = np.full(n, h)
    wts[0] = wts[-1] = 0.5 * h
    return wts


def reconstruct_entropy(family, rho1, rho2, xi_grid=None, zeta_grid=None):
    """Entropy pair from edge derivatives via the representation formula.

    ``rho1`` samples ``d eta(xi, z_lo)/d xi`` on the family's ``xi`` grid and
    ``rho2`` samples ``d eta(w_lo, zeta)/d zeta`` on its ``zeta`` grid.  The
    integrals are trapezoid sums over the family grids with the cut taken
    as a plain indicator, so the result is first order in the cut spacing.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if rho1.shape != family.xi.shape or rho2.shape != family.zeta.shape:
        raise GridMismatchError("edge samples do not match the family grids")
    for given, own, name in ((xi_grid, family.xi, "xi"),
                             (zeta_grid, family.zeta, "zeta")):
        if given is not None and (np.shape(given) != own.shape
                                  or not np.allclose(given, own, atol=1e-12)):
            raise GridMismatchError(f"{name} sample grid differs from the family")
    w1 = trapezoid_weights(family.xi.size, family.dxi) * rho1
    w2 = trapezoid_weights(family.zeta.size, family.dzeta) * rho2
    eta = (np.einsum("k,kij->ij", w1, family.chi)
           + np.einsum("l,lij->ij", w2, family.upsilon))
    q = (np.einsum("k,kij->ij", w1, family.psi)
         + np.einsum("l,lij->ij", w2, family.varphi))
    return ReconstructedEntropy(eta=eta, q=q, grid=family.grid)

# }}}


# {{{ persistence

def save_family(family, directory, config=None):
    """Manifest plus one binary table per cut and per quantity."""
    directory = Path(directory)
    n_w, n_z = family.grid.shape
    axes = ["w", "z"]
    for name, tabs in (("theta_xi", family.theta), ("flux_xi", family.flux),
                       ("theta_zeta", family.theta_z),
                       ("flux_zeta", family.flux_z)):
        for k, tab in enumerate(tabs):
            io.write_field(directory / f"{name}_{k:04d}.bin", tab, axes)
    io.write_field(directory / "g.bin", family.gh.g, axes)
    io.write_field(directory / "h.bin", family.gh.h, axes)
    io.write_manifest(directory, {
        "kind": "entropy_family",
        "chart": family.chart.describe(),
        "w": family.grid.w, "z": family.grid.z,
        "xi_index": family.xi_index, "zeta_index": family.zeta_index,
        "r_bar": family.r_bar, "c": family.c,
        "gh_subintervals": family.gh.subintervals,
        "shape": [n_w, n_z], "b0": "1",
        "config": config or {},
    })
    return directory


def load_family(directory):
    directory = Path(directory)
    man = io.read_manifest(directory)
    chart = get_chart(man["chart"]["id"], man["chart"]["params"])
    grid = RiemannGrid(np.array(man["w"]), np.array(man["z"]))
    expect = {"w": grid.w.size, "z": grid.z.size}
    xi_idx = np.array(man["xi_index"], dtype=int)
    zeta_idx = np.array(man["zeta_index"], dtype=int)

    def stack(name, count):
        return np.stack([io.read_field(directory / f"{name}_{k:04d}.bin", expect)
                         for k in range(count)])

    gh = GhTables(g=io.read_field(directory / "g.bin", expect),
                  h=io.read_field(directory / "h.bin", expect), grid=grid,
                  subintervals=int(man["gh_subintervals"]))
    return EntropyFamily(
        chart=chart, grid=grid, xi_index=xi_idx, zeta_index=zeta_idx,
        theta=stack("theta_xi", xi_idx.size), flux=stack("flux_xi", xi_idx.size),
        theta_z=stack("theta_zeta", zeta_idx.size),
        flux_z=stack("flux_zeta", zeta_idx.size), gh=gh,
        r_bar=float(man["r_bar"]), c=float(man["c"]))

# }}}
