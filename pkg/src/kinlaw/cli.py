"""
Command-line experiment runner.

Every subcommand reads a JSON experiment config, recomputes what it needs
deterministically and writes its outputs plus a manifest into ``--out``.
Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure
(a diagnostic JSON is written), 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import acceptance, diagnostics, goursat, io, kinetic, lagrangian, viscous
from .errors import ConfigError, FormatError, NumericalError
from .systems import get_chart

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3

SUBCOMMANDS = ("simulate", "family", "kinetic", "trace", "qfunc", "jumpset",
               "vmo", "report", "verify")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


# {{{ config

def resolve_config_path(path):
    """Return an existing config path; bare names fall back to the bundled
    configs (so ``examples/decoupled_shock.json`` works from anywhere)."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("kinlaw") / "configs" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file {path} not found")


def load_config(path):
    p = resolve_config_path(path)
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    validate_config(cfg)
    cfg["_source"] = str(p)
    return cfg


def validate_config(cfg):
    """Check keys and that the initial data lie in the chart domain."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    chart_spec = cfg.get("chart", {"id": "decoupled"})
    chart = get_chart(chart_spec.get("id"), chart_spec.get("params"))
    for key in ("nx", "T"):
        if key not in cfg:
            raise ConfigError(f"missing config key {key!r}")
    if int(cfg["nx"]) < 8 or float(cfg["T"]) <= 0:
        raise ConfigError("need nx >= 8 and T > 0")
    if float(cfg.get("epsilon", 0.0)) < 0:
        raise ConfigError("epsilon must be nonnegative")
    x = np.arange(int(cfg["nx"])) * float(cfg.get("period", 1.0)) / int(cfg["nx"])
    viscous.initial_state(chart, cfg.get("initial", {"rule": "constant"}), x,
                          float(cfg.get("period", 1.0)))
    return chart


def _section(cfg, name):
    return dict(cfg.get(name) or {})

# }}}


# {{{ shared pipeline

def _solution(cfg):
    chart_spec = cfg.get("chart", {"id": "decoupled"})
    chart = get_chart(chart_spec.get("id"), chart_spec.get("params"))
    if cfg.get("exact") or float(cfg.get("epsilon", 0.0)) == 0.0:
        if chart.id != "decoupled":
            raise ConfigError("epsilon = 0 needs the exact decoupled solver")
        sol = viscous.exact_decoupled_solution(
            chart, cfg["initial"], int(cfg["nx"]), float(cfg["T"]),
            int(cfg.get("snapshots", 100)), float(cfg.get("period", 1.0)))
        return sol, None
    return viscous.simulate({k: v for k, v in cfg.items()
                             if not k.startswith("_")})


def _family(cfg, chart):
    n = int(_section(cfg, "family").get("n", 64))
    return goursat.family_for_chart(chart, n)


def _band(cfg, sol):
    spec = _section(cfg, "band")
    return lagrangian.BandSpec.from_solution(
        sol, r_frac=spec.get("r_frac", 0.25), b_frac=spec.get("b_frac", 0.75))


def _radii(cfg, sol):
    cells = _section(cfg, "diagnostics").get("radii_cells", [8, 16, 32])
    return sol.dx * np.asarray(cells, float)


def _nu(cfg, sol, fam):
    diag = _section(cfg, "diagnostics")
    bank = kinetic.entropy_bank(fam, int(diag.get("bank_size", 8)))
    return kinetic.nu_sup(sol, bank, widths=tuple(diag.get("nu_widths", [2, 2])))


def _public(cfg):
    return {k: v for k, v in cfg.items() if not k.startswith("_")}

# }}}


# {{{ subcommands

def cmd_simulate(cfg, out):
    sol, ledger = _solution(cfg)
    viscous.save_solution(sol, out / "solution", ledger)
    summary = {"nx": sol.nx, "nt": sol.nt, "epsilon": sol.epsilon}
    if ledger is not None:
        summary["dissipation"] = ledger.total
        summary["energy_constant"] = ledger.constant
    return summary


def cmd_family(cfg, out):
    chart = validate_config(cfg)
    fam = _family(cfg, chart)
    goursat.save_family(fam, out / "family", _public(cfg))
    return {"r_bar": fam.r_bar, "c": fam.c, "n_xi": int(fam.xi.size)}


def cmd_kinetic(cfg, out):
    sol, _ = _solution(cfg)
    fam = _family(cfg, sol.chart)
    mdir = out / "measures"
    summary = {}
    eta = sol.chart.convex_entropy()
    mu = kinetic.dissipation_measure(sol, eta)
    kinetic.save_measure(mu, mdir, "mu_eta", config=_public(cfg))
    summary["mu_eta_total"] = mu.total
    res = kinetic.kinetic_residual(kinetic.assemble(sol, fam), split=False)
    kinetic.save_measure(res, mdir, "kinetic_residual", threshold=1e-14,
                         config=_public(cfg))
    summary["kinetic_residual_tv"] = res.total_variation
    if sol.epsilon > 0:
        mu1 = kinetic.mu1_from_viscous(sol, fam)
        kinetic.save_measure(mu1, mdir, "mu1_eps", threshold=0.0,
                             config=_public(cfg))
        summary["mu1_total"] = mu1.total
        summary["mu1_bound"] = mu1.extra["bound"]
    nu = _nu(cfg, sol, fam)
    kinetic.save_measure(nu, mdir, "nu_sup", threshold=1e-14,
                         config=_public(cfg))
    summary["nu_total"] = nu.total
    return summary


def cmd_trace(cfg, out):
    sol, _ = _solution(cfg)
    fam = _family(cfg, sol.chart)
    band = _band(cfg, sol)
    n = int(_section(cfg, "curves").get("n", 1024))
    bmax = lagrangian.seed_bundle(sol, fam, band, n)
    bmin = lagrangian.seed_bundle(sol, fam, band, n, kind="min")
    lagrangian.save_bundle(bmax, out / "bundle_max.csv")
    lagrangian.save_bundle(bmin, out / "bundle_min.csv")
    rep = lagrangian.crossing_check(bmax, bmin, period=sol.period)
    return {"n_curves": n, "crossing_fraction": rep.fraction,
            "band_violations_max": bmax.band_violation_fraction(),
            "band_violations_min": bmin.band_violation_fraction(),
            "clamp_fraction": bmax.clamp_fraction(),
            "reconstruction_error_end": lagrangian.reconstruction_error(
                sol, fam, bmax, sol.nt - 1)}


def cmd_qfunc(cfg, out):
    sol, _ = _solution(cfg)
    fam = _family(cfg, sol.chart)
    band = _band(cfg, sol)
    gamma, sigma = lagrangian.distinguished_curves(sol, fam, band)
    try:
        led = lagrangian.q_functional(sol, fam, gamma, sigma, band)
    except NumericalError as exc:
        led = getattr(exc, "ledger", None)
        if led is None:
            raise
    lagrangian.save_qledger(led, out / "qledger.csv")
    return {"Q_start": float(led.q_values[0]), "Q_end": float(led.q_values[-1]),
            "F_out": float(led.f_out.sum()), "F_in": float(led.f_in.sum()),
            "predicted_rate": led.predicted_rate, "crossed_at": led.crossed_at}


def _mask(cfg, sol):
    fam = _family(cfg, sol.chart)
    nu = _nu(cfg, sol, fam)
    theta = _section(cfg, "diagnostics").get("theta")
    cells = _section(cfg, "diagnostics").get("jump_radii_cells", [2, 4, 8])
    return diagnostics.jump_set(nu, radii=sol.dx * np.asarray(cells, float),
                                theta=theta)


def cmd_jumpset(cfg, out):
    sol, _ = _solution(cfg)
    mask = _mask(cfg, sol)
    diagnostics.save_mask(mask, out / "jumpset.csv")
    return {"theta": mask.theta, "cells": mask.area_cells}


def cmd_vmo(cfg, out):
    sol, _ = _solution(cfg)
    radii = _radii(cfg, sol)
    rows = []
    for n, m in diagnostics.sample_points(sol, radii):
        prof = diagnostics.vmo_profile(sol, (n, m), radii)
        rows.append([n, m, *prof.oscillation, int(prof.decays())])
    header = ["t_index", "x_index"] + [f"osc_r{k}" for k in range(radii.size)]
    io.write_csv(out / "vmo.csv", header + ["decays"], rows)
    flags = np.array([r[-1] for r in rows])
    return {"points": len(rows), "decay_fraction": float(flags.mean())}


def cmd_report(cfg, out):
    """Collect existing outputs of ``out`` into ``report.md`` + ``summary.csv``."""
    if not out.exists():
        raise ConfigError(f"output directory {out} does not exist")
    lines = ["# kinlaw report", ""]
    rows = []
    summaries = out / "summaries.json"
    if summaries.exists():
        data = json.loads(summaries.read_text())
        lines += ["## Runs", ""]
        for cmd, summ in sorted(data.items()):
            lines.append(f"- `{cmd}`: " + ", ".join(
                f"{k} = {v}" for k, v in summ.items()))
            rows += [[cmd, k, v] for k, v in summ.items()]
        lines.append("")
    qfile = out / "qledger.csv"
    if qfile.exists():
        header, body = io.read_csv(qfile)
        lines += ["## Interaction functional", "", "| t | Q | F_out | F_in |",
                  "|---|---|---|---|"]
        step = max(1, len(body) // 10)
        lines += [f"| {r[0]} | {r[1]} | {r[2]} | {r[3]} |" for r in body[::step]]
        lines.append("")
    man = out / "measures" / "manifest.json"
    if man.exists():
        meas = json.loads(man.read_text()).get("measures", {})
        lines += ["## Measures", "", "| measure | total | total variation |",
                  "|---|---|---|"]
        for name, meta in sorted(meas.items()):
            lines.append(f"| {name} | {meta['total']:.6g} | "
                         f"{meta['total_variation']:.6g} |")
            rows.append(["measure", name, meta["total"]])
        lines.append("")
    vfile = out / "vmo.csv"
    if vfile.exists():
        header, body = io.read_csv(vfile)
        flags = [int(r[-1]) for r in body]
        lines += ["## VMO flags", "",
                  f"{sum(flags)} of {len(flags)} sample points decay.", ""]
        rows.append(["vmo", "decay_fraction", sum(flags) / max(len(flags), 1)])
    (out / "report.md").write_text("\n".join(lines) + "\n")
    io.write_csv(out / "summary.csv", ["section", "key", "value"], rows)
    (out / "plot_template.py").write_text(PLOT_TEMPLATE)
    return {"report": str(out / "report.md")}


PLOT_TEMPLATE = '''"""Plot Q(t) from a kinlaw output directory (edit to taste)."""
import csv
import sys

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] + "/qledger.csv")))
plt.plot([float(r["t"]) for r in rows], [float(r["Q"]) for r in rows])
plt.xlabel("t")
plt.ylabel("Q")
plt.savefig(sys.argv[1] + "/qledger.png")
'''


def cmd_verify(cfg, out, numbers=None):
    shock = {k: v for k, v in _public(cfg).items()
             if k in acceptance.DEFAULT_SHOCK}
    results = acceptance.run_all(shock, numbers=numbers)
    payload = {"config": cfg.get("_source"),
               "criteria": [r.as_dict() for r in results],
               "passed": all(r.ok for r in results)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(io._jsonable(payload), indent=1))
    print(json.dumps({"passed": payload["passed"],
                      "failed": [r.number for r in results if not r.ok]}))
    return payload

# }}}


def build_parser():
    parser = _Parser(prog="kinlaw", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="subcommand",
                                parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "report")
        p.add_argument("--out", default="kinlaw_out")
        if name == "verify":
            p.add_argument("--only", type=int, nargs="*",
                           help="run only these criteria")
    return parser


def _record(out, name, summary):
    path = out / "summaries.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data[name] = summary
    path.write_text(json.dumps(io._jsonable(data), indent=1, sort_keys=True))


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.command == "verify":
            payload = cmd_verify(cfg, out, args.only)
            return 0 if payload["passed"] else EXIT_ACCEPTANCE
        if args.command != "report":
            out.mkdir(parents=True, exist_ok=True)
            io.write_manifest(out, {"command": args.command,
                                    "config": _public(cfg)})
        summary = globals()[f"cmd_{args.command}"](cfg, out)
        if args.command != "report":
            _record(out, args.command, summary)
        print(json.dumps(io._jsonable(summary)))
        return 0
    except (ConfigError, ValueError) as exc:
        # invalid parameter values surface as ValueError from the library
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FormatError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "command": args.command}
        print(json.dumps(diag), file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(diag, indent=1))
        except OSError:
            pass
        return EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
