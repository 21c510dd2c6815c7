"""Command-line front end.

Five commands, one shared invocation shape:

    wanebif <command> --config <path> [--out <dir>] [--beta-s <v>] [--bar-beta <v>]

* summary     threshold quantities and branch curvature at the crossing
* equilibria  all endemic equilibria at the configured coupling
* branch      endemic branch over the configured R0 window, with folds
* simulate    one time-domain run from the configured initial state
* bistab      several seedings, each classified by its endpoint

Delimited outputs are written with 12 significant digits and Unix line
endings so repeated runs are byte-identical; each report command renders a
PNG figure next to its tables.  Any library error surfaces as a one-line
diagnostic on stderr and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

from . import continuation, core, reduction, simulate
from .config import RunConfig, load_config, with_overrides
from .errors import ConfigError, WanebifError
from .equilibrium import find_equilibria, verify_equilibrium

COMMANDS = ("summary", "equilibria", "branch", "simulate", "bistab")

__all__ = ["main", "run_command", "emit_outputs", "COMMANDS"]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x == 0:
        return "0"
    return "%.12g" % x


def _write_csv(path: str, header: str, rows: List[Sequence]) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload: Dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_outputs(command: str, payload: Dict, out_dir: str) -> List[str]:
    """Write the delimited outputs (and figures) for one command's results.

    Returns the list of paths written.  Formatting is fixed: 12 significant
    digits, comma delimiter, LF line endings, JSON keys sorted.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []

    def path_of(name: str) -> str:
        full = os.path.join(out_dir, name)
        written.append(full)
        return full

    if command == "summary":
        _write_json(path_of("summary.json"), payload["summary"])
    elif command == "equilibria":
        _write_csv(
            path_of("equilibria.csv"),
            "lambda,S,E,A,I,r_at_zero,R_total,N,residual_norm",
            payload["rows"],
        )
    elif command == "branch":
        from .plots import branch_figure

        branch = payload["branch"]
        rows = [
            (bp.bar_beta, bp.r0_value, bp.eq.lam, bp.eq.S, bp.eq.E, bp.eq.A,
             bp.eq.I, bp.eq.R_total, bp.eq.N, bp.stability)
            for bp in branch.points
        ]
        _write_csv(path_of("branch.csv"),
                   "bar_beta,R0,lambda,S,E,A,I,R_total,N,stability", rows)
        fold_rows = [(f.r0_value, f.lam, f.eq.I) for f in branch.folds]
        _write_csv(path_of("branch.folds.csv"), "R0,lambda,I", fold_rows)
        branch_figure(branch, path_of("branch.png"))
    elif command == "simulate":
        from .plots import trajectory_figure

        snaps, dtau = payload["snaps"], payload["dtau"]
        rows = []
        for s in snaps:
            resv = s.immune_total(dtau)
            n = s.S + s.E + s.A + s.I + resv
            lam = (payload["theta"] * s.E + payload["epsilon"] * s.A + s.I) / n
            rows.append((s.t, s.S, s.E, s.A, s.I, resv, n, lam))
        _write_csv(path_of("trajectory.csv"), "t,S,E,A,I,R_total,N,lambda", rows)
        trajectory_figure(snaps, dtau, path_of("trajectory.png"))
    elif command == "bistab":
        from .plots import bistab_figure

        runs = payload["runs"]
        rows = [(r.init_I, r.label, r.distance, r.final.E, r.final.A, r.final.I)
                for r in runs]
        _write_csv(path_of("bistab.csv"),
                   "init_I,label,distance,final_E,final_A,final_I", rows)
        bistab_figure(runs, path_of("bistab.png"))
    else:
        raise ConfigError(f"unknown command {command}")
    return written


def run_command(command: str, rc: RunConfig, out_dir: str = ".") -> List[str]:
    """Execute one CLI command against a loaded configuration.

    Prints the human-readable report to stdout and returns the list of
    files written.
    """
    p, quad = rc.params, rc.quad

    if command == "summary":
        summary = core.classify(p, quad)
        a_ls = reduction.coeff_a_ls(p, quad)
        trans = reduction.transversality(p, quad)
        flat = {
            "R0": summary.r0_value,
            "beta_s": p.beta_s,
            "bar_beta": p.bar_beta,
            "beta_star": summary.beta_star,
            "a_coeff": summary.a_coeff,
            "a_coeff_ls": a_ls,
            "criticality": summary.criticality,
            "transversality": trans,
        }
        for key in ("R0", "beta_star", "a_coeff", "a_coeff_ls",
                    "criticality", "transversality"):
            print(f"{key} = {_fmt(flat[key])}")
        return emit_outputs(command, {"summary": flat}, out_dir)

    if command == "equilibria":
        eqs = find_equilibria(p, p.bar_beta, quad)
        rows = [
            (eq.lam, eq.S, eq.E, eq.A, eq.I, eq.r_at_zero, eq.R_total, eq.N,
             verify_equilibrium(eq, p, p.bar_beta, quad))
            for eq in eqs
        ]
        print(f"endemic equilibria at bar_beta = {_fmt(p.bar_beta)}: {len(eqs)}")
        for eq in eqs:
            print(f"  lam = {_fmt(eq.lam)}  I = {_fmt(eq.I)}  N = {_fmt(eq.N)}")
        return emit_outputs(command, {"rows": rows}, out_dir)

    if command == "branch":
        if rc.r0_lo is None or rc.r0_hi is None:
            raise ConfigError("branch command needs r0_lo and r0_hi in the config")
        branch = continuation.trace_branch(p, rc.r0_lo, rc.r0_hi,
                                           n_steps=rc.n_steps, cfg=quad)
        branch = continuation.detect_folds(branch, p, quad)
        if rc.label_stability:
            branch = continuation.label_stability(branch, p, quad)
        print(f"branch points: {len(branch.points)}  folds: {len(branch.folds)}")
        for f in branch.folds:
            print(f"  fold at R0 = {_fmt(f.r0_value)}  lam = {_fmt(f.lam)}  I = {_fmt(f.eq.I)}")
        return emit_outputs(command, {"branch": branch}, out_dir)

    if command == "simulate":
        sim_cfg = rc.sim
        start = simulate.state_from_totals(p, sim_cfg, S=rc.init_S, E=rc.init_E,
                                           A=rc.init_A, I=rc.init_I)
        snaps = simulate.integrate(p, p.bar_beta, start, sim_cfg, record=True)
        final = snaps[-1]
        print(f"simulated {_fmt(sim_cfg.t_end)} days in {len(snaps)} snapshots")
        print(f"  final: S = {_fmt(final.S)}  E = {_fmt(final.E)}"
              f"  A = {_fmt(final.A)}  I = {_fmt(final.I)}")
        payload = {"snaps": snaps, "dtau": sim_cfg.dt,
                   "theta": p.theta, "epsilon": p.epsilon}
        return emit_outputs(command, payload, out_dir)

    if command == "bistab":
        if not rc.bistab_I0:
            raise ConfigError("bistab command needs bistab_I0 in the config")
        runs = simulate.bistability_experiment(p, p.bar_beta, rc.bistab_I0,
                                               sim_cfg=rc.sim, cfg=quad,
                                               keep_series=True)
        for r in runs:
            print(f"I(0) = {_fmt(r.init_I)}  ->  {r.label}"
                  f"  (distance {_fmt(r.distance)})")
        return emit_outputs(command, {"runs": runs}, out_dir)

    raise ConfigError(f"unknown command {command}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wanebif",
        description="Threshold and bifurcation analysis for an epidemic "
                    "model with age-structured waning immunity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "summary": "threshold quantities and branch curvature",
        "equilibria": "endemic equilibria at the configured coupling",
        "branch": "endemic branch over an R0 window, with folds",
        "simulate": "one time-domain run",
        "bistab": "multiple seedings classified by endpoint",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--beta-s", type=float, default=None, dest="beta_s",
                        help="override beta_s from the config")
        sp.add_argument("--bar-beta", type=float, default=None, dest="bar_beta",
                        help="override bar_beta from the config")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        rc = load_config(args.config)
        rc = with_overrides(rc, beta_s=args.beta_s, bar_beta=args.bar_beta)
        run_command(args.command, rc, args.out)
    except WanebifError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
