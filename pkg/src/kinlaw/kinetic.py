"""
Kinetic fields of a sampled solution and the measures they generate.

All measures are estimated as weak residuals against tensor-product hat
test functions.  A hat of half-width ``H`` cells centred at every interior
node forms a partition of ``H`` (the hats sum to ``H``), so dividing a
pairing by the product of the half-widths turns it into a cell mass whose
sum approximates the total mass of the measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

from . import io
from .errors import ChartMismatchError
from .goursat import bilinear, reconstruct_entropy, trapezoid_weights

VARIANTS = ("chi", "chi_tilde", "upsilon", "upsilon_tilde")


# {{{ hat functionals

def hat_values(half_width):
    i = np.arange(-half_width - 1, half_width + 2)
    return np.clip(1 - np.abs(i) / half_width, 0, None)


def hat_kernels(half_width, h):
    """Weights of ``int a f`` and ``int a' f`` for piecewise-linear ``f``.

    ``a`` is the hat of the given half-width (in cells) and ``h`` the node
    spacing.  Both kernels have length ``2 * half_width + 1`` and act on the
    nodes ``-H..H`` around the centre.
    """
    a = hat_values(half_width)
    mass = h / 6 * (a[:-2] + 4 * a[1:-1] + a[2:])
    deriv = 0.5 * (a[2:] - a[:-2])
    return mass, deriv


def _apply_periodic(arr, kernel, axis):
    half = kernel.size // 2
    out = np.zeros_like(arr)
    for i, c in enumerate(kernel):
        if c != 0:
            out += c * np.roll(arr, -(i - half), axis=axis)
    return out


def _apply_valid(arr, kernel, axis):
    """Correlate along ``axis`` keeping only fully supported centres."""
    half = kernel.size // 2
    n = arr.shape[axis]
    m = n - 2 * half
    if m <= 0:
        raise ValueError("window too short for the test-function width")
    out = 0
    for i, c in enumerate(kernel):
        if c != 0:
            out = out + c * np.take(arr, np.arange(i, i + m), axis=axis)
    return out


def weak_residual(density, flux, dt, dx, widths):
    """Pairing ``-int (phi_t density + phi_x flux)`` for all hat centres.

    ``density`` and ``flux`` have shape ``(nt, nx, ...)``; the ``x`` axis is
    periodic and only time centres with fully supported hats are kept.
    """
    ht, hx = widths
    mt, dtk = hat_kernels(ht, dt)
    mx, dxk = hat_kernels(hx, dx)
    part_t = _apply_valid(_apply_periodic(density, mx, 1), dtk, 0)
    part_x = _apply_valid(_apply_periodic(flux, dxk, 1), mt, 0)
    return -(part_t + part_x)

# }}}


# {{{ data types

@dataclass
class MeasureEstimate:
    """Cell masses of a measure on the space-time(-kinetic) grid.

    ``masses`` covers time centres ``t_offset .. t_offset + masses.shape[0]``
    and, when present, kinetic centres starting at ``k_offset``.
    """

    kind: str
    masses: np.ndarray
    widths: tuple
    t_offset: int
    k_offset: int = 0
    dt: float = float("nan")
    dx: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def total(self):
        return float(self.masses.sum())

    @property
    def total_variation(self):
        return float(np.abs(self.masses).sum())

    def spacetime(self):
        """Masses summed over the kinetic variable."""
        if self.masses.ndim == 3:
            return self.masses.sum(axis=2)
        return self.masses


@dataclass
class KineticField:
    """Kinetic function and flux of a solution over ``(t, x, kinetic)``.

    ``theta_nodes``/``flux_nodes`` hold the uncut family values at each
    sample state; ``values``/``flux_values`` apply the exact indicator.
    """

    variant: str
    kinetic_nodes: np.ndarray
    cut: np.ndarray
    theta_nodes: np.ndarray
    flux_nodes: np.ndarray
    dt: float
    dx: float
    solution: object = None

    def indicator(self):
        k = self.kinetic_nodes[None, None, :]
        c = self.cut[:, :, None]
        if self.variant in ("chi", "upsilon"):
            return c >= k
        return c <= k

    @property
    def values(self):
        return self.theta_nodes * self.indicator()

    @property
    def flux_values(self):
        return self.flux_nodes * self.indicator()

    def support_violations(self):
        """Fraction of cells whose nonzero value sits on the wrong side."""
        vals = self.values
        k = self.kinetic_nodes[None, None, :]
        c = self.cut[:, :, None]
        if self.variant in ("chi", "upsilon"):
            wrong = (vals != 0) & (k > c)
        else:
            wrong = (vals != 0) & (k < c)
        return float(wrong.mean())

# }}}


# {{{ assembly

def _same_chart(solution, family):
    if solution.chart.describe() != family.chart.describe():
        raise ChartMismatchError(
            f"solution chart {solution.chart.describe()} differs from family "
            f"chart {family.chart.describe()}")


def assemble(solution, family, variant="chi", t_index=None, k_index=None):
    """Evaluate the family along the solution.

    The tables are interpolated bilinearly in ``(w, z)``; the cut is the
    exact indicator against ``w(t, x)`` (or ``z`` for the upsilon variants).
    ``t_index``/``k_index`` optionally restrict snapshots and cuts.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    _same_chart(solution, family)
    w, z = solution.riemann()
    if t_index is not None:
        w, z = w[t_index], z[t_index]
    if variant.startswith("chi"):
        nodes, theta, flux, cut = family.xi, family.theta, family.flux, w
    else:
        nodes, theta, flux, cut = family.zeta, family.theta_z, family.flux_z, z
    ks = np.arange(nodes.size) if k_index is None else np.asarray(k_index)
    wl = np.clip(w, family.grid.w[0], family.grid.w[-1])
    zl = np.clip(z, family.grid.z[0], family.grid.z[-1])
    th = np.empty(w.shape + (ks.size,))
    fl = np.empty_like(th)
    for out_k, k in enumerate(ks):
        kk = np.full(w.shape, k)
        th[..., out_k] = bilinear(theta, kk, wl, zl, family.grid)
        fl[..., out_k] = bilinear(flux, kk, wl, zl, family.grid)
    dt = solution.dt_snap
    return KineticField(variant=variant, kinetic_nodes=nodes[ks], cut=cut,
                        theta_nodes=th, flux_nodes=fl, dt=dt, dx=solution.dx,
                        solution=solution)

# }}}


# {{{ kinetic residual

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


def _cell_moments(field):
    """Exact cell integrals of the cut tables against linear basis pieces.

    Inside each ``x`` cell the cut variable is linear and the tables are
    bilinear in ``(x, kinetic)``.  The indicator boundary splits a cell into
    at most three pieces in ``x`` on which the integrand is a polynomial of
    degree five, integrated by three-point Gauss rules.  Returns ``dens``
    with shape ``(nt, nx, K - 1, 2, 2)`` (axes: cell, kinetic interval,
    left/right ``x`` weight, lower/upper kinetic weight) and ``flux`` with
    shape ``(nt, nx, K - 1, 2)``.  Cell ``m`` spans nodes ``m`` and ``m + 1``
    (periodically).
    """
    nodes = field.kinetic_nodes
    h = nodes[1] - nodes[0]
    dx = field.dx
    tilde = field.variant.endswith("tilde")
    cut0 = field.cut[:, :, None]
    cut1 = np.roll(field.cut, -1, axis=1)[:, :, None]
    slope = cut1 - cut0
    lo = nodes[None, None, :-1]
    safe = np.where(slope == 0, 1.0, slope)
    sa = np.where(slope == 0, 0.0, (lo - cut0) / safe)
    sb = np.where(slope == 0, 0.0, (lo + h - cut0) / safe)
    p1 = np.clip(np.minimum(sa, sb), 0, 1)
    p2 = np.clip(np.maximum(sa, sb), 0, 1)
    pieces = ((0.0, p1), (p1, p2), (p2, 1.0))

    def corners(tab):
        nxt = np.roll(tab, -1, axis=1)
        return tab[..., :-1], nxt[..., :-1], tab[..., 1:], nxt[..., 1:]

    th = corners(field.theta_nodes)
    fl = corners(field.flux_nodes)
    dens = np.zeros(field.cut.shape + (nodes.size - 1, 2, 2))
    flux = np.zeros(field.cut.shape + (nodes.size - 1, 2))
    for left, right in pieces:
        span = right - left
        for gx, gw in zip(_GAUSS_X, _GAUSS_W):
            s = left + 0.5 * (gx + 1) * span
            wt = 0.5 * gw * span * dx
            u = np.clip((cut0 + s * slope - lo) / h, 0, 1)
            a = u - u**2 + u**3 / 3
            b = u**2 / 2 - u**3 / 3
            c = u**3 / 3
            if tilde:
                a, b, c = 1 / 3 - a, 1 / 6 - b, 1 / 3 - c
            for tab, out in ((th, dens), (fl, flux)):
                t00, t10, t01, t11 = tab
                lower = t00 * (1 - s) + t10 * s
                upper = t01 * (1 - s) + t11 * s
                n0 = h * (lower * a + upper * b) * wt
                n1 = h * (lower * b + upper * c) * wt
                if out is dens:
                    out[..., 0, 0] += (1 - s) * n0
                    out[..., 0, 1] += (1 - s) * n1
                    out[..., 1, 0] += s * n0
                    out[..., 1, 1] += s * n1
                else:
                    out[..., 0] += n0
                    out[..., 1] += n1
    return dens, flux


def kinetic_residual(field, test_widths=(4, 4, 4), split=None):
    """Weak residual of the kinetic equation against hat test functions.

    For each test function ``phi(t, x) rho(k)`` the pairing
    ``-int (phi_t chi + phi_x psi) rho`` is computed and converted to a cell
    mass.  The least-squares split into ``d_k mu1 + mu0`` with ``mu1 >= 0``
    is attached when ``split`` is true (default: for viscous solutions).
    """
    ht, hx, hk = test_widths
    if min(test_widths) < 2:
        raise ValueError("test widths must be at least 2 cells")
    nodes = field.kinetic_nodes
    n_k = nodes.size
    centres = np.arange(hk, n_k - hk)
    prof = np.zeros((n_k, centres.size))
    hv = hat_values(hk)[1:-1]
    for col, k in enumerate(centres):
        prof[k - hk:k + hk + 1, col] = hv
    dens_m, flux_m = _cell_moments(field)
    # kinetic test profiles
    dens_m = (np.swapaxes(dens_m[..., 0], 2, 3) @ prof[:-1]
              + np.swapaxes(dens_m[..., 1], 2, 3) @ prof[1:])
    flux_m = flux_m[..., 0] @ prof[:-1] + flux_m[..., 1] @ prof[1:]
    # x hats: cell m contributes to centre i with node values a(m - i),
    # a(m + 1 - i)
    hx_vals = hat_values(hx)[1:-1]
    dens = np.zeros(flux_m.shape)
    flux = np.zeros_like(dens)
    slopes = np.diff(np.concatenate([[0.0], hx_vals, [0.0]])) / field.dx
    for off in range(-hx - 1, hx + 1):
        aw0 = hat_values(hx)[off + hx + 1]
        aw1 = hat_values(hx)[off + hx + 2]
        grad = slopes[off + hx + 1]
        if aw0 == 0 and aw1 == 0 and grad == 0:
            continue
        cell_d = aw0 * dens_m[:, :, 0] + aw1 * dens_m[:, :, 1]
        dens += np.roll(cell_d, -off, axis=1)
        flux += grad * np.roll(flux_m, -off, axis=1)
    mt, dtk = hat_kernels(ht, field.dt)
    pair = -(_apply_valid(dens, dtk, 0) + _apply_valid(flux, mt, 0))
    masses = pair / (ht * hx * hk)
    est = MeasureEstimate(kind="kinetic_residual", masses=masses,
                          widths=tuple(test_widths), t_offset=ht, k_offset=hk,
                          dt=field.dt, dx=field.dx,
                          extra={"variant": field.variant})
    sol = field.solution
    if split is None:
        split = sol is not None and sol.epsilon > 0
    if split:
        mu1, mu0 = split_residual(masses)
        est.extra["mu1"] = mu1
        est.extra["mu0"] = mu0
    return est


def split_residual(masses, rel_tol=1e-12):
    """Split ``T = D mu1 + mu0`` along the kinetic axis with ``mu1 >= 0``.

    ``D`` is the backward difference (``mu1`` vanishing below the first
    node); ``mu1`` minimises ``|T - D mu1|`` subject to nonnegativity.  This
    is one canonical representative; the split is not unique.
    """
    nt, nx, nk = masses.shape
    mu1 = np.zeros_like(masses)
    scale = np.abs(masses).max() if masses.size else 0.0
    active = np.abs(masses).max(axis=2) > rel_tol * max(scale, 1e-300)
    diff = np.eye(nk) - np.eye(nk, k=-1)
    for n, m in zip(*np.nonzero(active)):
        mu1[n, m], _ = nnls(diff, masses[n, m])
    d_mu1 = mu1.copy()
    d_mu1[..., 1:] -= mu1[..., :-1]
    return mu1, masses - d_mu1

# }}}


# {{{ entropy dissipation

def _entropy_values(solution, eta_spec):
    if hasattr(eta_spec, "grid"):
        w, z = solution.riemann()
        g = eta_spec.grid
        return eta_spec(np.clip(w, g.w[0], g.w[-1]), np.clip(z, g.z[0], g.z[-1]))
    eta, q = eta_spec
    u = np.moveaxis(solution.u, 1, 0)
    return eta(u), q(u)


def dissipation_measure(solution, eta_spec, widths=(4, 4)):
    """Cell masses of ``eta(u)_t + q(u)_x`` as a weak residual.

    ``eta_spec`` is a pair of callables ``(eta, q)`` acting on states, or a
    reconstructed entropy evaluated in Riemann coordinates.
    """
    e, q = _entropy_values(solution, eta_spec)
    pair = weak_residual(e, q, solution.dt_snap, solution.dx, widths)
    return MeasureEstimate(kind="mu_eta", masses=pair / (widths[0] * widths[1]),
                           widths=tuple(widths), t_offset=widths[0],
                           dt=solution.dt_snap, dx=solution.dx)


def entropy_bank(family, n=32):
    """Bank of reconstructed entropies with unit-bounded C2 norm.

    Profiles alternate sinusoidal modes and Gaussian bumps on either edge.
    Each entropy is scaled so that the maximum of its table and of its
    first and second differences in Riemann coordinates is one.
    """
    xi, zeta = family.xi, family.zeta
    bank = []
    for i in range(n):
        edge = i % 2
        kind = (i // 2) % 2
        level = i // 4 + 1
        s = xi if edge == 0 else zeta
        span = s[-1] - s[0]
        y = (s - s[0]) / span
        if kind == 0:
            prof = np.sin(np.pi * level * y)
        else:
            centre = (level - 0.5) / (n // 4)
            prof = np.exp(-0.5 * ((y - centre) / 0.15) ** 2)
        rho1 = prof if edge == 0 else np.zeros_like(xi)
        rho2 = prof if edge == 1 else np.zeros_like(zeta)
        rec = reconstruct_entropy(family, rho1, rho2)
        norm = _c2_norm(rec.eta, family.grid)
        bank.append(type(rec)(eta=rec.eta / norm, q=rec.q / norm, grid=rec.grid))
    return bank


def _c2_norm(table, grid):
    dw, dz = np.gradient(table, grid.w, grid.z, edge_order=2)
    dww, dwz = np.gradient(dw, grid.w, grid.z, edge_order=2)
    _, dzz = np.gradient(dz, grid.w, grid.z, edge_order=2)
    return max(float(np.abs(a).max()) for a in (table, dw, dz, dww, dwz, dzz))


def nu_sup(solution, entropy_sample, widths=(4, 4)):
    """Cellwise maximum of ``|mu_eta|`` over a finite entropy sample."""
    best = None
    for spec in entropy_sample:
        est = dissipation_measure(solution, spec, widths)
        mag = np.abs(est.masses)
        best = mag if best is None else np.maximum(best, mag)
    return MeasureEstimate(kind="nu_sup", masses=best, widths=tuple(widths),
                           t_offset=widths[0], dt=solution.dt_snap,
                           dx=solution.dx, extra={"bank_size": len(entropy_sample)})

# }}}


# {{{ viscous source

def mu1_from_viscous(solution, family):
    """Pushforward of ``Theta[w](u) eps w_x^2`` onto ``(t, x, xi = w)``.

    On the cut line ``Theta[w](w, z) = g(w, z)``.  Time integration is the
    trapezoid rule over snapshots; ``w_x`` is a centered difference and each
    mass goes to the ``xi`` node nearest to ``w``.  The returned estimate
    records the ledger bound ``sup|Theta| sup|grad w|^2 * dissipation``
    computed with the same quadrature (forward differences for ``u_x``).
    """
    _same_chart(solution, family)
    eps = solution.epsilon
    dx = solution.dx
    w, z = solution.riemann()
    grid = family.grid
    nt, nx = w.shape
    k_xi = np.clip(np.rint((w - family.xi[0]) / family.dxi).astype(int), 0,
                   family.xi.size - 1)
    gvals = bilinear(family.gh.g[None], np.zeros(w.shape, dtype=int),
                     np.clip(w, grid.w[0], grid.w[-1]),
                     np.clip(z, grid.z[0], grid.z[-1]), grid)
    wx = (np.roll(w, -1, axis=1) - np.roll(w, 1, axis=1)) / (2 * dx)
    tw = trapezoid_weights(nt, solution.dt_snap) if nt > 1 else np.ones(1)
    dens = gvals * eps * wx**2 * dx * tw[:, None]
    masses = np.zeros((nt, nx, family.xi.size))
    np.put_along_axis(masses, k_xi[..., None], dens[..., None], axis=2)

    ux = (np.roll(solution.u, -1, axis=2) - solution.u) / dx
    diss = float((eps * (ux**2).sum(axis=1) * dx * tw[:, None]).sum())
    ww, zz = np.meshgrid(grid.w, grid.z, indexing="ij")
    grad = solution.chart.forward_grad(solution.chart.inverse(ww, zz))[0]
    sup_grad2 = float((grad**2).sum(axis=0).max())
    sup_theta = float(max(np.abs(family.theta).max(), np.abs(family.gh.g).max()))
    return MeasureEstimate(
        kind="mu1_eps", masses=masses, widths=(1, 1, 1), t_offset=0,
        dt=solution.dt_snap, dx=dx,
        extra={"dissipation": diss, "sup_theta": sup_theta,
               "sup_grad_w2": sup_grad2,
               "bound": sup_theta * sup_grad2 * diss})

# }}}


# {{{ persistence

def save_measure(est, directory, name=None, threshold=0.0, config=None):
    """Sparse CSV ``(t_idx, x_idx, xi_idx, mass)`` plus a JSON manifest."""
    directory = Path(directory)
    name = name or est.kind
    masses = est.masses if est.masses.ndim == 3 else est.masses[..., None]
    idx = np.argwhere(np.abs(masses) > threshold)
    rows = ((int(n) + est.t_offset, int(m), int(k) + est.k_offset,
             float(masses[n, m, k])) for n, m, k in idx)
    io.write_csv(directory / f"{name}.csv", ["t_idx", "x_idx", "xi_idx", "mass"],
                 rows)
    meta = {"kind": est.kind, "widths": list(est.widths),
            "t_offset": est.t_offset, "k_offset": est.k_offset,
            "dt": est.dt, "dx": est.dx, "shape": list(est.masses.shape),
            "total": est.total, "total_variation": est.total_variation,
            "config": config or {}}
    meta.update({k: v for k, v in est.extra.items()
                 if not isinstance(v, np.ndarray)})
    io.write_manifest(directory, {"measures": {name: meta}}
                      if not (directory / "manifest.json").exists()
                      else _merge_manifest(directory, name, meta))
    return directory


def _merge_manifest(directory, name, meta):
    man = io.read_manifest(directory)
    man.setdefault("measures", {})[name] = meta
    return man

# }}}
