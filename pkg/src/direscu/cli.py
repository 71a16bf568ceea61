"""Command-line entry points.

Examples
--------
::

    direscu solve planner --config run.yaml --out out/base
    direscu simulate fbne --config run.yaml --seed 7 --out out/base
    direscu sweep --config run.yaml --workers 8 --out out/sweep
    direscu calibrate carbon --synthetic --out out/cal
    direscu report out/base out/sweep --out out/report

Exit status is 0 on success, 1 when a stage fails or results are flagged
(node failures above threshold, parameters at their bounds), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import calibration as cal
from .config import ScenarioConfig, load_config
from .errors import DirescuError
from .scenarios import (SOLVERS, format_table, initial_taxes, load_solution, report, run_scenario, simulate,
                        solve, sweep, write_fan_charts)

log = logging.getLogger("direscu")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML scenario file (defaults reproduce the reference parameters)")
    p.add_argument("--seed", type=int, help="simulation seed (overrides the config)")
    p.add_argument("--workers", type=int, help="worker processes for node solves")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. solver.horizon=50 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-year solver diagnostics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="direscu", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="backward induction; writes checkpoints, initial taxes and a manifest")
    p.add_argument("solver", choices=SOLVERS)
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo paths and fan charts (reuses checkpoints in --out)")
    p.add_argument("solver", choices=SOLVERS)
    p.add_argument("--paths", type=int, help="number of paths (overrides the config)")
    p.add_argument("--resolve", action="store_true", help="ignore existing checkpoints")
    _common(p)

    p = sub.add_parser("calibrate", help="least-squares fit of one parameter group")
    p.add_argument("group", choices=sorted(cal.GROUPS))
    p.add_argument("--targets", type=Path, help="CSV: scenario,series,year,value[,units]")
    p.add_argument("--inputs", type=Path, help="CSV: scenario,series,year,value (driving series)")
    p.add_argument("--synthetic", action="store_true",
                   help="fit targets generated from the current parameters, starting from a perturbed guess")
    p.add_argument("--years", type=int, default=200)
    p.add_argument("--params", nargs="+", help="subset of parameters to fit")
    _common(p)

    p = sub.add_parser("sweep", help="initial taxes over an (IES, risk aversion) grid")
    p.add_argument("--psi", type=float, nargs="+", default=[0.69, 1.5])
    p.add_argument("--gamma", type=float, nargs="+", default=[3.066, 10.0])
    p.add_argument("--solvers", nargs="+", choices=SOLVERS, default=list(SOLVERS))
    _common(p)

    p = sub.add_parser("report", help="summary tables from earlier runs")
    p.add_argument("runs", type=Path, nargs="+", help="run or sweep directories")
    _common(p)
    return parser


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    over = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise DirescuError(f"--set expects KEY=VALUE, got {item!r}")
        over[key] = yaml.safe_load(val)
    if args.workers is not None:
        over["solver.workers"] = args.workers
    if args.seed is not None:
        over["seed"] = args.seed
    return cfg.with_(**over) if over else cfg


def _progress(diag):
    log.info("year %3d  nodes %4d  flagged %d  residual %.1e  %.2fs", diag.t, diag.n_nodes, diag.n_flagged,
             diag.max_residual, diag.seconds)


def _cmd_solve(args, cfg) -> int:
    res = run_scenario(cfg, args.out, solvers=(args.solver,), log=_progress, simulate_paths=False)
    tx = res.taxes[args.solver]
    print(f"{args.solver}: initial tax north {tx[0]:.2f}  south {tx[1]:.2f} $/tC")
    return 1 if res.manifest["residuals"][args.solver]["flagged"] else 0


def _cmd_simulate(args, cfg) -> int:
    ckpt = args.out / "checkpoints" / args.solver
    if ckpt.exists() and not args.resolve:
        sol = load_solution(cfg, ckpt, args.solver)
    else:
        sol = solve(cfg, args.solver, ckpt, _progress)
        sol.save(ckpt)
    n_paths = args.paths or cfg.n_paths
    ens = simulate(sol, n_paths, cfg.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    files = write_fan_charts(ens, args.out, args.solver)
    tx = initial_taxes(sol)
    print(f"{args.solver}: {n_paths} paths, {int(np.sum(ens.tip_year >= 0))} tipped; "
          f"initial tax north {tx[0]:.2f} south {tx[1]:.2f}; {len(files)} fan charts in {args.out}")
    return 0


def _cmd_calibrate(args, cfg) -> int:
    if args.synthetic:
        inputs = cal.demo_inputs(args.years)
        names = tuple(args.params or cal.GROUPS[args.group])
        targets = cal.synthetic_targets(args.group, inputs, args.years, climate=cfg.climate, econ=cfg.economy)
        true = cal.get_params(args.group, names, cfg.climate, cfg.economy)
        rng = np.random.default_rng(cfg.seed)
        initial = {n: v * (1.0 + rng.uniform(-0.2, 0.2)) for n, v in zip(names, true)}
    else:
        if not (args.targets and args.inputs):
            raise DirescuError("calibrate needs --targets and --inputs, or --synthetic")
        targets, inputs, initial = cal.load_targets(args.targets), cal.load_inputs(args.inputs), None
    res = cal.calibrate(args.group, targets, inputs, initial=initial, params=args.params, climate=cfg.climate,
                        econ=cfg.economy)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "calibration.json").write_text(json.dumps(
        {"group": res.group, "params": res.params, "initial": res.initial, "cost": res.cost,
         "at_bounds": res.at_bounds, "residuals": res.report(), "message": res.message}, indent=1))
    for name, val in res.params.items():
        print(f"{name:28s} {val:.10g}")
    print(f"max relative residual {res.max_residual():.3e}")
    if res.at_bounds:
        print("at bounds: " + ", ".join(res.at_bounds), file=sys.stderr)
        return 1
    return 0


def _cmd_sweep(args, cfg) -> int:
    rows = sweep(cfg, args.out, psis=args.psi, gammas=args.gamma, solvers=args.solvers, log=_progress)
    print(format_table(rows, ["solver", "mode", "psi", "gamma", "tax_north", "tax_south"]))
    return 0


def _cmd_report(args, cfg) -> int:
    summary = report(args.runs, args.out)
    if summary["initial_taxes"]:
        print(format_table(summary["initial_taxes"], ["solver", "scenario", "tax_north", "tax_south"]))
    if summary["sweep"]:
        print(format_table(summary["sweep"], ["solver", "mode", "psi", "gamma", "tax_north", "tax_south"]))
        bad = [o for o in summary["orderings"] if not o["passed"]]
        print(f"orderings: {len(summary['orderings']) - len(bad)} of {len(summary['orderings'])} hold")
        for o in bad:
            print(f"  fails: {o['claim']} ({o['larger']:.2f} vs {o['smaller']:.2f})")
    return 0


COMMANDS = {"solve": _cmd_solve, "simulate": _cmd_simulate, "calibrate": _cmd_calibrate, "sweep": _cmd_sweep,
            "report": _cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except DirescuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
