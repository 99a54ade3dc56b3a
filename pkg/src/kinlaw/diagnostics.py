"""
Jump set and mean-oscillation diagnostics on space-time samples.

Both act on disks in the ``(t, x)`` plane measured in physical units; the
``x`` direction is periodic, time is truncated at the window edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import BoundaryError


def _disk_offsets(radius, dt, dx):
    nt = int(np.floor(radius / dt)) if dt > 0 else 0
    nx = int(np.floor(radius / dx))
    it, ix = np.meshgrid(np.arange(-nt, nt + 1), np.arange(-nx, nx + 1),
                         indexing="ij")
    inside = (it * dt) ** 2 + (ix * dx) ** 2 <= radius**2 * (1 + 1e-12)
    return it[inside], ix[inside]


def _check_radii(radii, dx):
    radii = np.sort(np.asarray(radii, float))
    if radii.size < 3:
        raise ValueError("need at least three radii")
    ratios = radii[1:] / radii[:-1]
    if not np.allclose(ratios, 2.0):
        raise ValueError("radii must be dyadic")
    if radii[0] < 2 * dx * (1 - 1e-12):
        raise ValueError("radii must be at least two cells")
    return radii


# {{{ jump set

@dataclass
class JumpSetMask:
    mask: np.ndarray
    radii: np.ndarray
    theta: float
    ratio: np.ndarray
    t_offset: int
    source: str = ""

    @property
    def area_cells(self):
        return int(self.mask.sum())

    def cells(self):
        return np.argwhere(self.mask)

    def row_widths(self):
        return self.mask.sum(axis=1)


def disk_sums(masses, radius, dt, dx):
    """Sum of cell masses over the disk of the given radius around each cell."""
    it, ix = _disk_offsets(radius, dt, dx)
    out = np.zeros_like(masses)
    nt = masses.shape[0]
    for a, b in zip(it, ix):
        shifted = np.roll(masses, -b, axis=1)
        if a >= 0:
            out[:nt - a] += shifted[a:]
        else:
            out[-a:] += shifted[:nt + a]
    return out


def default_theta(masses, dx, floor=1e-12, atol=1e-14):
    """Ten times the median cell mass per unit length.

    Cells at round-off level (below ``atol`` or ``floor`` times the largest
    mass) are left out of the median; otherwise the median of a measure
    concentrated on a curve is zero.  Without such cells the threshold is
    infinite and the mask empty.
    """
    mag = np.abs(masses)
    top = mag.max() if mag.size else 0.0
    live = mag[mag > max(atol, floor * top)]
    if live.size == 0:
        return np.inf
    return 10 * float(np.median(live)) / dx


def ridge_level(ratio, margin=0.05):
    """Median over time rows of the row maximum of ``ratio``.

    Rows within ``margin`` of either end (as a fraction of the rows) are
    skipped.  Useful to place the threshold relative to the ridge of a
    single dominant shock.
    """
    nt = ratio.shape[0]
    cut = int(margin * nt)
    rows = ratio[cut:nt - cut] if nt - 2 * cut > 0 else ratio
    return float(np.median(rows.max(axis=1)))


def jump_set(nu, radii=None, theta=None):
    """Cells where ``max_r nu(B_r)/r >= theta``."""
    dx, dt = nu.dx, nu.dt
    if radii is None:
        radii = 2 * dx * np.array([1, 2, 4])
    radii = _check_radii(radii, dx)
    masses = np.abs(nu.spacetime())
    if theta is None:
        theta = default_theta(masses, dx)
    ratio = np.zeros_like(masses)
    for r in radii:
        ratio = np.maximum(ratio, disk_sums(masses, r, dt, dx) / r)
    return JumpSetMask(mask=ratio >= theta, radii=radii, theta=float(theta),
                       ratio=ratio, t_offset=nu.t_offset, source=nu.kind)

# }}}


# {{{ mean oscillation

@dataclass
class VmoProfile:
    """Mean oscillation ``r^-2 int_{B_r} |u - avg|`` at dyadic radii."""

    center: tuple
    radii: np.ndarray
    oscillation: np.ndarray
    zoom: list = field(default_factory=list)

    def decay_ratios(self):
        osc = self.oscillation
        with np.errstate(divide="ignore", invalid="ignore"):
            return osc[1:] / osc[:-1]

    def decays(self, factor=1.5, floor=1e-10):
        """True if the value drops by ``factor`` from the second-smallest to
        the smallest radius; values below ``floor`` count as zero."""
        big, small = self.oscillation[1], self.oscillation[0]
        if big <= floor:
            return True
        return bool(big >= factor * small)


def _disk_values(solution, n, m, radius):
    it, ix = _disk_offsets(radius, solution.dt_snap, solution.dx)
    return solution.u[n + it, :, (m + ix) % solution.nx]


def vmo_profile(solution, point, radii, keep_zoom=False):
    """Oscillation profile at snapshot/cell indices ``point = (n, m)``.

    The disk average is recomputed for every radius; ``|.|`` is the
    Euclidean norm of the state.  ``keep_zoom`` stores the rescaled samples
    ``u(t0 + r s, x0 + r y)`` on each disk.
    """
    n, m = point
    radii = np.sort(np.asarray(radii, float))
    reach = int(np.floor(radii[-1] / solution.dt_snap))
    if n - reach < 0 or n + reach >= solution.nt:
        raise BoundaryError(f"point {point} closer than {radii[-1]} to the "
                            "time boundary")
    area = solution.dt_snap * solution.dx
    osc = np.empty(radii.size)
    zoom = []
    for i, r in enumerate(radii):
        vals = _disk_values(solution, n, m, r)
        avg = vals.mean(axis=0)
        dev = np.sqrt(((vals - avg) ** 2).sum(axis=1))
        osc[i] = dev.sum() * area / r**2
        if keep_zoom:
            zoom.append(vals)
    return VmoProfile(center=(int(n), int(m)), radii=radii, oscillation=osc,
                      zoom=zoom)


def sample_points(solution, radii, n_t=16, n_x=64):
    """Lattice of interior sample points clear of the time boundary."""
    reach = int(np.ceil(np.max(radii) / solution.dt_snap)) + 1
    if solution.nt - 2 * reach < 1:
        raise BoundaryError("window too short for the radii")
    ns = np.unique(np.linspace(reach, solution.nt - 1 - reach, n_t).astype(int))
    ms = np.unique(np.linspace(0, solution.nx - 1, n_x).astype(int))
    return [(int(a), int(b)) for a in ns for b in ms]


def half_disk_plateau(jump):
    """Mean oscillation of a straight vertical jump centred in the disk.

    Half the disk carries ``u_l`` and half ``u_r``; the average is the
    midpoint, so ``r^-2 int |u - avg| = (pi/2) |u_l - u_r|``.
    """
    return 0.5 * np.pi * float(jump)

# }}}


# {{{ persistence

def save_mask(mask, path):
    rows = [[int(n + mask.t_offset), int(m), float(mask.ratio[n, m])]
            for n, m in mask.cells()]
    return io.write_csv(path, ["t_index", "x_index", "ratio"], rows)


def save_profile(profile, path):
    rows = list(zip(profile.radii, profile.oscillation))
    return io.write_csv(path, ["r", "oscillation"], rows)

# }}}
