"""
2x2 strictly hyperbolic systems and their Riemann-invariant charts.

States are stored component-first: an array ``u`` of shape ``(2, ...)``.
Riemann coordinates are returned as a pair ``(w, z)`` of arrays with the
trailing shape of ``u``.  Every chart maps its state domain onto a closed
rectangle ``[w_lo, w_hi] x [z_lo, z_hi]`` in Riemann coordinates.

Built-in charts
---------------

``decoupled``
    Two independent Burgers-type laws ``f = (u1^2/2, u2^2/2 + 4 u2)`` on
    ``(-1, 1)^2``.  Riemann coordinates are the identity.
``p-system``
    ``f(a, v) = (-v, -sigma(a))`` with ``sigma(a) = a + a^3``.
``linear``
    Linear advection ``f = (c1 u1, c2 u2)`` (not genuinely nonlinear).
``degenerate``
    ``f = (c1 u1, u2^2/2 + 4 u2)``: first field linearly degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    HyperbolicityError,
    NotGnlError,
)

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
GAP_TOL = 1e-8
GNL_SAFETY = 0.9


# {{{ data types

@dataclass(frozen=True)
class EigenStructure:
    """Eigenpairs of the flux Jacobian, sorted so that ``lambda1 < lambda2``.

    Right eigenvectors are unit vectors stored component-first; left
    eigenvectors are the rows of the inverse right-eigenvector matrix so
    that ``l_i . r_j = delta_ij``.
    """

    lambda1: np.ndarray
    lambda2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    l1: np.ndarray
    l2: np.ndarray


@dataclass(frozen=True)
class GnlCertificate:
    c_bar: float
    gap: float
    samples: int


@dataclass(frozen=True)
class SystemChart:
    """Base chart.  Subclasses implement the analytic rules."""

    id: str = "base"
    params: dict = field(default_factory=dict)

    # -- rectangle in Riemann coordinates
    @property
    def rect(self):
        """``(w_lo, w_hi, z_lo, z_hi)``."""
        raise NotImplementedError

    @property
    def center_wz(self):
        w_lo, w_hi, z_lo, z_hi = self.rect
        return 0.5 * (w_lo + w_hi), 0.5 * (z_lo + z_hi)

    # -- analytic rules
    def flux(self, u):
        raise NotImplementedError

    def jacobian(self, u):
        """Flux Jacobian with shape ``(2, 2, ...)``."""
        raise NotImplementedError

    def forward(self, u):
        raise NotImplementedError

    def forward_grad(self, u):
        """Gradients of ``(w, z)``; ``out[i, j] = d phi_i / d u_j``."""
        raise NotImplementedError

    def inverse(self, w, z):
        return _newton_inverse(self, w, z)

    def inside(self, u):
        """Pointwise membership of ``u`` in the state domain."""
        w, z = self.forward(u)
        w_lo, w_hi, z_lo, z_hi = self.rect
        tol = 1e-12
        return ((w >= w_lo - tol) & (w <= w_hi + tol)
                & (z >= z_lo - tol) & (z <= z_hi + tol))

    def speeds(self, u):
        """Ordered eigenvalues ``(lambda1, lambda2)`` at states ``u``."""
        jac = self.jacobian(u)
        tr = jac[0, 0] + jac[1, 1]
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        disc = 0.25 * tr**2 - det
        root = np.sqrt(np.maximum(disc, 0.0))
        return 0.5 * tr - root, 0.5 * tr + root

    def speeds_wz(self, w, z):
        return self.speeds(self.inverse(w, z))

    def speed_derivatives_wz(self, w, z, step=1e-5):
        """Derivatives of the speeds along the Riemann coordinates.

        Returns ``(l1w, l1z, l2w, l2z)``.  The default uses centered
        differences; charts with closed forms override it.
        """
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        w_lo, w_hi, z_lo, z_hi = self.rect
        lw_p = self.speeds_wz(np.clip(w + step, w_lo, w_hi), z)
        lw_m = self.speeds_wz(np.clip(w - step, w_lo, w_hi), z)
        lz_p = self.speeds_wz(w, np.clip(z + step, z_lo, z_hi))
        lz_m = self.speeds_wz(w, np.clip(z - step, z_lo, z_hi))
        dw = np.clip(w + step, w_lo, w_hi) - np.clip(w - step, w_lo, w_hi)
        dz = np.clip(z + step, z_lo, z_hi) - np.clip(z - step, z_lo, z_hi)
        return ((lw_p[0] - lw_m[0]) / dw, (lz_p[0] - lz_m[0]) / dz,
                (lw_p[1] - lw_m[1]) / dw, (lz_p[1] - lz_m[1]) / dz)

    @property
    def max_speed(self):
        """Upper bound of ``|lambda|`` over the rectangle (sampled)."""
        w_lo, w_hi, z_lo, z_hi = self.rect
        ww, zz = np.meshgrid(np.linspace(w_lo, w_hi, 33),
                             np.linspace(z_lo, z_hi, 33), indexing="ij")
        l1, l2 = self.speeds_wz(ww, zz)
        return float(max(np.abs(l1).max(), np.abs(l2).max()))

    def convex_entropy(self):
        """Built-in uniformly convex entropy pair ``(eta, q)`` as callables."""
        raise NotImplementedError

    def describe(self):
        return {"id": self.id, "params": dict(self.params)}

# }}}


# {{{ newton inverse

def _newton_inverse(chart, w, z):
    """Damped Newton for ``forward(u) = (w, z)`` seeded at the centre state."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    w, z = np.broadcast_arrays(w, z)
    target = np.stack([w, z])
    seed = chart.center_state
    u = np.empty((2,) + w.shape)
    u[0] = seed[0]
    u[1] = seed[1]
    for _ in range(NEWTON_MAX_ITER):
        res = np.stack(chart.forward(u)) - target
        err = np.max(np.abs(res)) if res.size else 0.0
        if err <= NEWTON_TOL:
            return u
        jac = chart.forward_grad(u)
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        du0 = (jac[1, 1] * res[0] - jac[0, 1] * res[1]) / det
        du1 = (-jac[1, 0] * res[0] + jac[0, 0] * res[1]) / det
        step = np.stack([du0, du1])
        # damping: halve until the residual does not grow
        lam = np.ones(w.shape)
        old = np.abs(res).max(axis=0)
        for _ in range(30):
            trial = u - lam * step
            ok = chart.admissible(trial)
            new = np.full(w.shape, np.inf)
            if np.any(ok):
                r = np.stack(chart.forward(np.where(ok, trial, u))) - target
                new = np.where(ok, np.abs(r).max(axis=0), np.inf)
            bad = new > old * (1 - 1e-4 * lam) + NEWTON_TOL
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
        u = u - lam * step
    res = np.stack(chart.forward(u)) - target
    if res.size and np.max(np.abs(res)) > NEWTON_TOL:
        raise ConvergenceError(
            f"Riemann inverse did not converge: residual {np.max(np.abs(res)):.3e}")
    return u

# }}}


# {{{ concrete charts

@dataclass(frozen=True)
class DecoupledChart(SystemChart):
    """Two uncoupled scalar laws ``f1 = u1^2/2``, ``f2 = u2^2/2 + shift*u2``."""

    id: str = "decoupled"
    shift: float = 4.0
    half_width: float = 1.0

    @property
    def rect(self):
        a = self.half_width
        return (-a, a, -a, a)

    @property
    def center_state(self):
        return np.zeros(2)

    def admissible(self, u):
        return np.ones(np.shape(u)[1:], dtype=bool)

    def flux(self, u):
        return np.stack([0.5 * u[0]**2, 0.5 * u[1]**2 + self.shift * u[1]])

    def jacobian(self, u):
        zero = np.zeros_like(u[0])
        return np.array([[u[0], zero], [zero, u[1] + self.shift]])

    def forward(self, u):
        return np.array(u[0], dtype=float), np.array(u[1], dtype=float)

    def forward_grad(self, u):
        one = np.ones_like(u[0])
        zero = np.zeros_like(u[0])
        return np.array([[one, zero], [zero, one]])

    def inverse(self, w, z):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        return np.stack([w, z])

    def speeds(self, u):
        return np.asarray(u[0], float), np.asarray(u[1], float) + self.shift

    def speeds_wz(self, w, z):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        return w.copy(), z + self.shift

    def speed_derivatives_wz(self, w, z, step=None):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        one = np.ones_like(w)
        zero = np.zeros_like(w)
        return one, zero, zero, one.copy()

    def convex_entropy(self):
        w0, z0 = self.center_wz
        s = self.shift

        def eta(u):
            return 0.5 * (u[0] - w0)**2 + 0.5 * (u[1] - z0)**2

        def q(u):
            a, b = u[0], u[1]
            return (a**3 / 3 - w0 * a**2 / 2
                    + b**3 / 3 + (s - z0) * b**2 / 2 - s * z0 * b)

        return eta, q

    def describe(self):
        return {"id": self.id,
                "params": {"shift": self.shift, "half_width": self.half_width}}


@dataclass(frozen=True)
class PSystemChart(SystemChart):
    """p-system ``a_t - v_x = 0``, ``v_t - sigma(a)_x = 0``, ``sigma = a + a^3``.

    Riemann invariants are ``w = -v - Phi(a)`` and ``z = -v + Phi(a)`` with
    ``Phi(a) = int_0^a sqrt(sigma'(s)) ds``.  The overall sign makes both
    ``d lambda1 / dw`` and ``d lambda2 / dz`` positive.  The Riemann rectangle
    is the square of half-width ``half_width`` centred at ``v = 0`` and the
    midpoint of ``Phi`` over ``a_range``.
    """

    id: str = "p-system"
    a_range: tuple = (0.2, 1.0)
    v_range: tuple = (-0.5, 0.5)
    half_width: float = 0.45

    def __post_init__(self):
        lo, hi = self.a_range
        room = 0.5 * (self.Phi(hi) - self.Phi(lo))
        vroom = 0.5 * (self.v_range[1] - self.v_range[0])
        if not (0 < self.half_width < min(room, vroom)):
            raise ConfigError(
                f"p-system half_width must lie in (0, {min(room, vroom):.4f})")

    @staticmethod
    def sigma(a):
        return a + a**3

    @staticmethod
    def dsigma(a):
        return 1.0 + 3.0 * a**2

    @staticmethod
    def ddsigma(a):
        return 6.0 * a

    @staticmethod
    def Phi(a):
        s3 = np.sqrt(3.0)
        return 0.5 * a * np.sqrt(1.0 + 3.0 * a**2) + np.arcsinh(s3 * a) / (2 * s3)

    @property
    def _phi_mid(self):
        lo, hi = self.a_range
        return 0.5 * (self.Phi(lo) + self.Phi(hi))

    @property
    def _v_mid(self):
        return 0.5 * (self.v_range[0] + self.v_range[1])

    @property
    def rect(self):
        pm, vm, d = self._phi_mid, self._v_mid, self.half_width
        return (-vm - pm - d, -vm - pm + d, -vm + pm - d, -vm + pm + d)

    @property
    def center_state(self):
        # Phi is monotone; invert the midpoint with a few Newton steps
        target = self._phi_mid
        a = 0.5 * sum(self.a_range)
        for _ in range(60):
            a = a - (self.Phi(a) - target) / np.sqrt(self.dsigma(a))
        return np.array([a, self._v_mid])

    def admissible(self, u):
        return (u[0] > self.a_range[0] * 0.5) & (u[0] < 2 * self.a_range[1])

    def inside(self, u):
        a, v = u[0], u[1]
        box = ((a > self.a_range[0]) & (a < self.a_range[1])
               & (v > self.v_range[0]) & (v < self.v_range[1]))
        return box & super().inside(u)

    def flux(self, u):
        return np.stack([-np.asarray(u[1], float), -self.sigma(u[0])])

    def jacobian(self, u):
        zero = np.zeros_like(u[0], dtype=float)
        return np.array([[zero, zero - 1.0], [-self.dsigma(u[0]), zero]])

    def forward(self, u):
        a, v = u[0], u[1]
        p = self.Phi(a)
        return -v - p, -v + p

    def forward_grad(self, u):
        s = np.sqrt(self.dsigma(u[0]))
        one = np.ones_like(s)
        return np.array([[-s, -one], [s, -one]])

    def speeds(self, u):
        s = np.sqrt(self.dsigma(np.asarray(u[0], float)))
        return -s, s

    def _a_of_wz(self, w, z):
        return self.inverse(w, z)[0]

    def speed_derivatives_wz(self, w, z, step=None):
        a = self._a_of_wz(w, z)
        k = self.ddsigma(a) / (4.0 * self.dsigma(a))
        return k, -k, -k, k.copy()

    def convex_entropy(self):
        """Mechanical energy relative to the centre state.

        ``eta = v^2/2 + int sigma``, ``q = -v sigma(a)``; subtracting the
        tangent plane at the centre keeps the pair an entropy pair.
        """
        a0, v0 = self.center_state
        sig = self.sigma

        def _eta(a, v):
            return 0.5 * v**2 + 0.5 * a**2 + 0.25 * a**4

        def _q(a, v):
            return -v * sig(a)

        e0 = _eta(a0, v0)
        q0 = _q(a0, v0)
        g = np.array([sig(a0), v0])
        f0 = np.array([-v0, -sig(a0)])

        def eta(u):
            a, v = u[0], u[1]
            return _eta(a, v) - e0 - g[0] * (a - a0) - g[1] * (v - v0)

        def q(u):
            a, v = u[0], u[1]
            return (_q(a, v) - q0 - g[0] * (-v - f0[0])
                    - g[1] * (-sig(a) - f0[1]))

        return eta, q

    def describe(self):
        return {"id": self.id,
                "params": {"a_range": list(self.a_range),
                           "v_range": list(self.v_range),
                           "half_width": self.half_width}}


@dataclass(frozen=True)
class LinearChart(SystemChart):
    """Linear advection ``f = (c1 u1, c2 u2)`` with ``c1 < c2``."""

    id: str = "linear"
    c1: float = 0.5
    c2: float = 1.0
    half_width: float = 1.0

    def __post_init__(self):
        if not self.c1 < self.c2:
            raise ConfigError("linear chart needs c1 < c2")

    @property
    def rect(self):
        a = self.half_width
        return (-a, a, -a, a)

    @property
    def center_state(self):
        return np.zeros(2)

    def admissible(self, u):
        return np.ones(np.shape(u)[1:], dtype=bool)

    def flux(self, u):
        return np.stack([self.c1 * np.asarray(u[0], float),
                         self.c2 * np.asarray(u[1], float)])

    def jacobian(self, u):
        zero = np.zeros_like(u[0], dtype=float)
        return np.array([[zero + self.c1, zero], [zero, zero + self.c2]])

    def forward(self, u):
        return np.array(u[0], dtype=float), np.array(u[1], dtype=float)

    def forward_grad(self, u):
        one = np.ones_like(u[0], dtype=float)
        return np.array([[one, 0 * one], [0 * one, one]])

    def inverse(self, w, z):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        return np.stack([w, z])

    def convex_entropy(self):
        c1, c2 = self.c1, self.c2
        return (lambda u: 0.5 * (u[0]**2 + u[1]**2),
                lambda u: 0.5 * (c1 * u[0]**2 + c2 * u[1]**2))

    def describe(self):
        return {"id": self.id, "params": {"c1": self.c1, "c2": self.c2,
                                          "half_width": self.half_width}}


@dataclass(frozen=True)
class DegenerateChart(DecoupledChart):
    """First field linear (``f1 = c1 u1``), second Burgers-type."""

    id: str = "degenerate"
    c1: float = 1.0

    def flux(self, u):
        return np.stack([self.c1 * np.asarray(u[0], float),
                         0.5 * u[1]**2 + self.shift * u[1]])

    def jacobian(self, u):
        zero = np.zeros_like(u[0], dtype=float)
        return np.array([[zero + self.c1, zero], [zero, u[1] + self.shift]])

    def speeds(self, u):
        return (np.zeros_like(np.asarray(u[0], float)) + self.c1,
                np.asarray(u[1], float) + self.shift)

    def speeds_wz(self, w, z):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        return np.zeros_like(w) + self.c1, z + self.shift

    def speed_derivatives_wz(self, w, z, step=None):
        w, z = np.broadcast_arrays(np.asarray(w, float), np.asarray(z, float))
        zero = np.zeros_like(w)
        return zero, zero.copy(), zero.copy(), np.ones_like(w)

    def convex_entropy(self):
        c1, s = self.c1, self.shift
        return (lambda u: 0.5 * (u[0]**2 + u[1]**2),
                lambda u: 0.5 * c1 * u[0]**2 + u[1]**3 / 3 + s * u[1]**2 / 2)

    def describe(self):
        return {"id": self.id, "params": {"c1": self.c1, "shift": self.shift,
                                          "half_width": self.half_width}}


_REGISTRY = {
    "decoupled": DecoupledChart,
    "p-system": PSystemChart,
    "linear": LinearChart,
    "degenerate": DegenerateChart,
}


def get_chart(chart_id, params=None):
    """Build a chart from its string id and a JSON parameter block."""
    try:
        cls = _REGISTRY[chart_id]
    except KeyError:
        raise ConfigError(f"unknown chart id {chart_id!r}") from None
    params = dict(params or {})
    for key in ("a_range", "v_range"):
        if key in params:
            params[key] = tuple(params[key])
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for chart {chart_id!r}: {exc}") from None

# }}}


# {{{ public operations

def _as_state(u):
    u = np.asarray(u, dtype=float)
    if u.shape[0] != 2:
        raise ValueError("states must have leading dimension 2")
    return u


def _check_domain(chart, u):
    if not np.all(chart.inside(u)):
        raise DomainError(f"state outside the domain of chart {chart.id!r}")


def eval_flux(chart, u):
    """Flux ``f(u)``; raises :class:`DomainError` outside the state domain."""
    u = _as_state(u)
    _check_domain(chart, u)
    return chart.flux(u)


def eigen_structure(chart, u):
    """Sorted eigenpairs of ``Df(u)`` with normalized left eigenvectors."""
    u = _as_state(u)
    _check_domain(chart, u)
    jac = np.moveaxis(chart.jacobian(u), (0, 1), (-2, -1))
    lam, vec = np.linalg.eig(jac)
    if np.any(np.abs(lam.imag) > 0):
        raise HyperbolicityError("complex eigenvalues")
    lam = lam.real
    vec = vec.real
    order = np.argsort(lam, axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    vec = np.take_along_axis(vec, order[..., None, :], axis=-1)
    if np.any(lam[..., 1] - lam[..., 0] < GAP_TOL):
        raise HyperbolicityError("eigenvalue gap below tolerance")
    left = np.linalg.inv(vec)
    return EigenStructure(
        lambda1=lam[..., 0], lambda2=lam[..., 1],
        r1=np.moveaxis(vec[..., :, 0], -1, 0),
        r2=np.moveaxis(vec[..., :, 1], -1, 0),
        l1=np.moveaxis(left[..., 0, :], -1, 0),
        l2=np.moveaxis(left[..., 1, :], -1, 0))


def to_riemann(chart, u):
    u = _as_state(u)
    _check_domain(chart, u)
    return chart.forward(u)


def from_riemann(chart, w, z):
    w_lo, w_hi, z_lo, z_hi = chart.rect
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    tol = 1e-12
    if (np.any(w < w_lo - tol) or np.any(w > w_hi + tol)
            or np.any(z < z_lo - tol) or np.any(z > z_hi + tol)):
        raise DomainError("Riemann coordinates outside the rectangle")
    return chart.inverse(w, z)


def riemann_nodes(chart, n_w, n_z=None):
    """Uniform node vectors covering the Riemann rectangle."""
    n_z = n_w if n_z is None else n_z
    w_lo, w_hi, z_lo, z_hi = chart.rect
    return np.linspace(w_lo, w_hi, n_w), np.linspace(z_lo, z_hi, n_z)


def check_hyperbolic_gnl(chart, n_samples=32):
    """Certificate of strict hyperbolicity and genuine nonlinearity.

    Derivatives of the speeds along the Riemann coordinates are taken by
    centered differences on an ``n_samples``-square node grid (one-sided at
    the edges); ``c_bar`` is 0.9 times the smaller grid minimum.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    wn, zn = riemann_nodes(chart, n_samples)
    ww, zz = np.meshgrid(wn, zn, indexing="ij")
    l1, l2 = chart.speeds_wz(ww, zz)
    gap = float(np.min(l2 - l1))
    if not gap > 0:
        raise HyperbolicityError(f"eigenvalue gap {gap:.3e} on the sample grid")
    d1 = np.gradient(l1, wn, axis=0, edge_order=2)
    d2 = np.gradient(l2, zn, axis=1, edge_order=2)
    low = float(min(d1.min(), d2.min()))
    if not low > 0:
        raise NotGnlError(f"grid minimum of speed derivatives is {low:.3e}")
    return GnlCertificate(c_bar=GNL_SAFETY * low, gap=gap, samples=n_samples)

# }}}
