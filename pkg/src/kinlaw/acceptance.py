"""
Acceptance suite: twelve end-to-end checks with tolerances and time limits.

Every check returns a :class:`CriterionResult`.  The shock-based checks read
their setup from an experiment config (see ``configs/decoupled_shock.json``);
the others use fixed smooth setups.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, goursat, kinetic, lagrangian, viscous
from .systems import get_chart

SMOOTH_INITIAL = {"rule": "sine", "amp": [0.5, 0.3]}
SMOOTH_T = 0.25

DEFAULT_SHOCK = {
    "chart": {"id": "decoupled"},
    "nx": 1024,
    "T": 0.4,
    "epsilon": 0.005,
    "snapshots": 400,
    "initial": {"rule": "two_jump", "left": [0.8, 0.0], "right": [-0.4, 0.0],
                "positions": [0.25, 0.75]},
    "window": [0.15, 0.45],
    "epsilon_list": [0.02, 0.01, 0.005],
    "dissipation_window": {"t_start": 0.1, "half_width": 0.1},
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime: float
    limit: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.passed and self.runtime <= self.limit

    def line(self):
        tag = "PASS" if self.ok else "FAIL"
        info = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return (f"[{tag}] {self.number:2d} {self.name}: {info} "
                f"({self.runtime:.1f}s / {self.limit:.0f}s)")

    def as_dict(self):
        return {"number": self.number, "name": self.name, "passed": self.ok,
                "criterion_met": self.passed, "runtime": self.runtime,
                "limit": self.limit, "details": self.details}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _timed(number, name, limit, fn):
    start = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number=number, name=name, passed=bool(passed),
                           runtime=time.perf_counter() - start, limit=limit,
                           details=details)


def shock_config(config=None):
    cfg = dict(DEFAULT_SHOCK)
    if config:
        cfg.update(config)
    return cfg


def _shock_oracle(cfg):
    """Speed and entropy production rate of the ``w`` shock for
    ``eta = w^2/2``, ``q = w^3/3``."""
    ul = cfg["initial"]["left"][0]
    ur = cfg["initial"]["right"][0]
    speed = 0.5 * (ul + ur)
    jump_eta = 0.5 * ur**2 - 0.5 * ul**2
    jump_q = ur**3 / 3 - ul**3 / 3
    return speed, -speed * jump_eta + jump_q


def _simulation_config(cfg, **over):
    keys = ("chart", "nx", "T", "epsilon", "snapshots", "initial", "window",
            "period", "cfl")
    out = {k: cfg[k] for k in keys if k in cfg}
    out.update(over)
    return out


# {{{ 1-4: entropy families

def criterion_1():
    def run():
        chart = get_chart("decoupled")
        fam = goursat.family_for_chart(chart, 128)
        mask = fam.hypograph_mask()
        xi = fam.xi[:, None, None]
        errs = {
            "theta": np.abs(fam.theta - 1).max(),
            "chi": np.abs(fam.chi - mask).max(),
            "psi": np.abs(fam.psi - xi * mask).max(),
            "lambda": np.abs(fam.speed_table() - xi).max(),
        }
        errs = {k: float(v) for k, v in errs.items()}
        return max(errs.values()) <= 1e-10, errs
    return _timed(1, "decoupled Goursat oracle", 10, run)


def criterion_2():
    def run():
        chart = get_chart("p-system")
        sols = []
        for n in (64, 128, 256):
            grid = goursat.make_grid(chart, n + 1)
            gh = goursat.compute_gh(chart, grid)
            xi = 0.5 * (grid.w[0] + grid.w[-1])
            sols.append(goursat.solve_goursat(chart, gh, xi).theta)
        e1 = np.abs(sols[0] - sols[1][::2, ::2]).max()
        e2 = np.abs(sols[1][::2, ::2] - sols[2][::4, ::4]).max()
        order = float(np.log2(e1 / e2))
        return abs(order - 2.0) <= 0.3, {"order": order, "e1": float(e1),
                                          "e2": float(e2)}
    return _timed(2, "p-system Goursat self-convergence", 60, run)


def criterion_3():
    def run():
        chart = get_chart("p-system")
        fam = goursat.family_for_chart(chart, 64)
        chi_min, d_min = goursat.strip_minima(fam)
        ok = fam.r_bar > 0 and fam.c > 0 and chi_min >= fam.c and d_min >= fam.c
        return ok, {"r_bar": fam.r_bar, "c": fam.c, "chi_min": chi_min,
                    "dlambda_min": d_min}
    return _timed(3, "local speed strip constants", 120, run)


def _reconstruction_error(chart, n):
    fam = goursat.family_for_chart(chart, n)
    eta, _ = chart.convex_entropy()
    g = fam.grid
    ww, zz = np.meshgrid(g.w, g.z, indexing="ij")
    exact = eta(chart.inverse(ww, zz))
    exact = exact - exact[0, 0]
    rho1 = np.gradient(exact[:, 0], g.w, edge_order=2)
    rho2 = np.gradient(exact[0, :], g.z, edge_order=2)
    rec = goursat.reconstruct_entropy(fam, rho1, rho2)
    return float(np.abs(rec.eta - exact).max())


def criterion_4():
    def run():
        chart = get_chart("p-system")
        e64 = _reconstruction_error(chart, 64)
        e128 = _reconstruction_error(chart, 128)
        ratio = e64 / e128
        ok = e64 <= 5e-3 and 2 / 1.3 <= ratio <= 2 * 1.3
        return ok, {"err64": e64, "err128": e128, "ratio": ratio}
    return _timed(4, "entropy representation formula", 60, run)

# }}}


# {{{ 5-8: kinetic fields and dissipation

def criterion_5():
    def run():
        chart = get_chart("decoupled")
        totals = []
        const = []
        for nx, nt, n in ((128, 64, 33), (256, 128, 65)):
            fam = goursat.family_for_chart(chart, n)
            sol = viscous.exact_decoupled_solution(chart, SMOOTH_INITIAL, nx,
                                                   SMOOTH_T, nt)
            totals.append(kinetic.kinetic_residual(
                kinetic.assemble(sol, fam)).total_variation)
            flat = viscous.exact_decoupled_solution(
                chart, {"rule": "constant", "value": [0.3, -0.2]}, nx,
                SMOOTH_T, nt)
            const.append(kinetic.kinetic_residual(
                kinetic.assemble(flat, fam)).total_variation)
        ratio = totals[0] / totals[1]
        ok = ratio >= 1.8 and max(const) <= 1e-12
        return ok, {"residuals": totals, "ratio": ratio,
                    "constant": max(const)}
    return _timed(5, "kinetic residual convergence", 120, run)


def _shock_run(cfg):
    return viscous.simulate(_simulation_config(cfg))


def criterion_6(config=None):
    cfg = shock_config(config)

    def run():
        sol, _ = _shock_run(cfg)
        speed, rate = _shock_oracle(cfg)
        eta = (lambda u: 0.5 * u[0] ** 2, lambda u: u[0] ** 3 / 3)
        est = kinetic.dissipation_measure(sol, eta)
        win = cfg["dissipation_window"]
        tc = sol.t[est.t_offset:est.t_offset + est.masses.shape[0]]
        x_shock = cfg["initial"]["positions"][0] + speed * tc
        dist = np.abs((sol.x[None, :] - x_shock[:, None] + 0.5 * sol.period)
                      % sol.period - 0.5 * sol.period)
        rows = tc >= win["t_start"]
        sel = rows[:, None] & (dist < win["half_width"])
        measured = float(est.masses[sel].sum() / (rows.sum() * sol.dt_snap))
        rel = abs(measured - rate) / abs(rate)
        return rel <= 0.05, {"measured": measured, "oracle": rate,
                             "rel_err": rel}
    return _timed(6, "shock entropy dissipation", 180, run)


def criterion_7(config=None):
    cfg = shock_config(config)

    def run():
        consts = []
        for eps in cfg["epsilon_list"]:
            _, ledger = viscous.simulate(_simulation_config(cfg, epsilon=eps))
            consts.append(float(ledger.constant))
        mean = float(np.mean(consts))
        spread = float(np.max(np.abs(np.array(consts) / mean - 1)))
        return spread <= 0.15, {"constants": consts, "max_rel_dev": spread}
    return _timed(7, "energy bound across epsilon", 180, run)


def criterion_8(config=None):
    cfg = shock_config(config)

    def run():
        sol, _ = _shock_run(cfg)
        fam = goursat.family_for_chart(sol.chart, 32)
        est = kinetic.mu1_from_viscous(sol, fam)
        lo = float(est.masses.min())
        total = est.total
        bound = est.extra["bound"]
        return lo >= 0 and total <= bound, {"min_mass": lo, "total": total,
                                            "bound": bound}
    return _timed(8, "mu1 positivity and ledger bound", 60, run)

# }}}


# {{{ 9-11: curves

def _smooth_setup(nx, nt, n_family):
    chart = get_chart("decoupled")
    sol = viscous.exact_decoupled_solution(chart, SMOOTH_INITIAL, nx,
                                           SMOOTH_T, nt)
    fam = goursat.family_for_chart(chart, n_family)
    return sol, fam, lagrangian.BandSpec.from_solution(sol)


def criterion_9():
    def run():
        sol, fam, band = _smooth_setup(256, 128, 65)
        n = 4096
        bundle = lagrangian.seed_bundle(sol, fam, band, n)
        tol = 3 / np.sqrt(n) + 2 * sol.dx
        errs = [lagrangian.reconstruction_error(sol, fam, bundle, k)
                for k in (0, sol.nt // 2, sol.nt - 1)]
        return max(errs) <= tol, {"errors": errs, "tol": tol}
    return _timed(9, "bundle superposition consistency", 120, run)


def _swapped_counterexample(sol, fam, band):
    """Fast curves seeded left of slow curves that sit where ``w`` is high."""
    xs = np.linspace(0.15, 0.2, 8)
    fast = [lagrangian.trace(sol, fam, x, sol.t[0], band.b) for x in xs]
    slow = [lagrangian.trace(sol, fam, x + 0.12, sol.t[0],
                             band.w_min + 0.5 * band.r) for x in xs]

    def bundle(curves, kind):
        return lagrangian.CurveBundle(
            band=kind, curves=curves, seeds_x=xs,
            seeds_xi=np.array([c.xi for c in curves]),
            weights=np.ones(len(curves)), spec=band)

    return lagrangian.crossing_check(bundle(fast, "max"), bundle(slow, "min"),
                                     period=sol.period)


def criterion_10():
    def run():
        fractions = []
        for nx, nt, nf in ((256, 128, 65), (512, 256, 129)):
            sol, fam, band = _smooth_setup(nx, nt, nf)
            bmax = lagrangian.seed_bundle(sol, fam, band, 1024)
            bmin = lagrangian.seed_bundle(sol, fam, band, 1024, kind="min")
            rep = lagrangian.crossing_check(bmax, bmin, period=sol.period)
            fractions.append(rep.fraction)
        counter = _swapped_counterexample(sol, fam, band)
        ok = (fractions[0] <= 0.01 and fractions[1] <= fractions[0]
              and counter.n_violations > 0)
        return ok, {"fractions": fractions,
                    "counterexample_violations": counter.n_violations}
    return _timed(10, "non-crossing of max and min curves", 60, run)


def criterion_11():
    def run():
        sol, fam, band = _smooth_setup(256, 128, 65)
        gamma, sigma = lagrangian.distinguished_curves(sol, fam, band)
        led = lagrangian.q_functional(sol, fam, gamma, sigma, band)
        tol = lagrangian.slab_tolerance(sol, fam, 4096)
        inc = led.increments()
        rate = led.f_out / led.slab_durations()
        ok_mono = bool(np.all(inc <= tol))
        f_out, f_in = float(led.f_out.sum()), float(led.f_in.sum())
        ok_in = f_in <= 0.05 * f_out
        floor = 0.5 * led.predicted_rate
        ok_rate = bool(rate.min() >= floor)
        return ok_mono and ok_in and ok_rate, {
            "max_increment": float(inc.max()), "tol_slab": tol,
            "F_in": f_in, "F_out": f_out, "min_rate": float(rate.min()),
            "rate_floor": floor}
    return _timed(11, "interaction functional", 120, run)

# }}}


# {{{ 12: jump set and VMO

def criterion_12(config=None):
    cfg = shock_config(config)

    def run():
        nx = cfg["nx"]
        dx = 1.0 / nx
        sharp = _simulation_config(cfg, epsilon=0.5 * dx,
                                   snapshots=int(round(cfg["T"] / dx)))
        sharp.pop("window", None)
        sol, _ = viscous.simulate(sharp)
        fam = goursat.family_for_chart(sol.chart, 32)
        nu = kinetic.nu_sup(sol, kinetic.entropy_bank(fam, 8), widths=(2, 2))
        trial = diagnostics.jump_set(nu)
        theta = 0.99 * diagnostics.ridge_level(trial.ratio)
        mask = diagnostics.jump_set(nu, theta=theta)
        radii = dx * np.array([8.0, 16.0, 32.0])
        reach = int(np.ceil(radii[-1] / sol.dt_snap)) + 1

        speed, _ = _shock_oracle(cfg)
        rows = np.arange(mask.mask.shape[0])
        tc = sol.t[rows + mask.t_offset]
        x_shock = cfg["initial"]["positions"][0] + speed * tc
        interior = (rows + mask.t_offset >= reach) & (
            rows + mask.t_offset < sol.nt - reach)
        widths = mask.row_widths()[interior]
        cells = mask.cells()
        off = np.abs((sol.x[cells[:, 1]] - x_shock[cells[:, 0]]
                      + 0.5) % 1.0 - 0.5) / dx
        tube = bool(widths.max() <= 3 and widths.min() >= 1 and off.max() <= 3)

        masked_fail = 0
        masked = 0
        for n, m in cells:
            big_n = n + mask.t_offset
            if not reach <= big_n < sol.nt - reach:
                continue
            masked += 1
            masked_fail += not diagnostics.vmo_profile(
                sol, (big_n, m), radii).decays()
        passed = 0
        unmasked = 0
        smooth_ratios = []
        for big_n, m in diagnostics.sample_points(sol, radii):
            n = big_n - mask.t_offset
            if 0 <= n < mask.mask.shape[0] and mask.mask[n, m]:
                continue
            prof = diagnostics.vmo_profile(sol, (big_n, m), radii)
            unmasked += 1
            passed += prof.decays()
            if prof.oscillation[0] > 1e-6:
                smooth_ratios.append(prof.oscillation[1] / prof.oscillation[0])
        frac = passed / unmasked
        smooth = np.array(smooth_ratios)
        linear = float(np.median(smooth)) if smooth.size else 2.0
        ok = (tube and masked > 0 and masked_fail == masked and frac >= 0.95
              and 1.5 <= linear <= 2.5)
        return ok, {"tube_width_max": int(widths.max()),
                    "tube_offset_max": float(off.max()),
                    "masked": masked, "masked_fail": masked_fail,
                    "unmasked_pass_fraction": frac,
                    "median_decay_ratio": linear, "theta": theta}
    return _timed(12, "jump set and VMO consistency", 120, run)

# }}}


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
            9: criterion_9, 10: criterion_10, 11: criterion_11,
            12: criterion_12}
SHOCK_CRITERIA = {6, 7, 8, 12}


def run_criterion(number, config=None):
    fn = CRITERIA[number]
    if number in SHOCK_CRITERIA:
        return fn(config)
    return fn()


def run_all(config=None, numbers=None, report=print):
    results = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(k, config)
        if report:
            report(res.line())
        results.append(res)
    return results
