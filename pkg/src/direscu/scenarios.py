"""Scenario runs, parameter sweeps and summary reports.

A run writes into one output directory::

    config.yaml                 effective configuration
    effective_parameters.json   climate/economy parameters after toggles
    checkpoints/<solver>/       fitted value functions per year
    fan_<solver>_<series>.csv   year, mean, q01, q02, q05, min, max
    initial_taxes.csv           solver, scenario, tax_north, tax_south
    manifest.json               config hash, versions, residual statistics, file digests

Everything except ``manifest.json`` timings is a pure function of the
configuration and seed, so a rerun reproduces the CSV files byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import platform
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import ScenarioConfig, save_config, to_dict
from .dp_sp import PlannerSolution, backward_induction_sp
from .errors import DirescuError
from .game_fbne import GameSolution, backward_induction_fbne, game_model
from .policy_metrics import fan_chart, simulate

SOLVERS = ("planner", "fbne")
FAN_SERIES = ("tax_north", "tax_south", "t_north", "t_south", "adapt_north", "adapt_south",
              "mu_north", "mu_south", "k_north", "k_south", "m_at", "sea_level", "tip_damage")


class StageError(DirescuError, RuntimeError):
    """A run stage failed; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(to_dict(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def effective_parameters(cfg: ScenarioConfig) -> dict:
    """Parameter dump after toggles are applied (e.g. no heat transport zeroes the transport terms)."""
    m = cfg.model()
    return {"climate": dataclasses.asdict(m.climate), "economy": dataclasses.asdict(m.econ),
            "preferences": dataclasses.asdict(m.prefs), "toggles": dataclasses.asdict(m.toggles)}


def _fmt(v) -> str:
    return repr(float(v))


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DirescuError as exc:
        raise StageError(name, exc) from exc


def solve(cfg: ScenarioConfig, solver: str = "planner", checkpoint_dir: str | Path | None = None, log=None):
    """Backward induction for one solver; value functions are checkpointed when a directory is given."""
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    if checkpoint_dir is not None:
        cfg = cfg.with_(**{"solver.checkpoint_dir": str(checkpoint_dir)})
    fn = backward_induction_sp if solver == "planner" else backward_induction_fbne
    return _stage(f"solve-{solver}", fn, cfg, log)


def residual_stats(solution) -> dict:
    d = solution.diagnostics
    fit = []
    for s in d:
        for v in s.fit_residual.values():
            fit.extend(v.values() if isinstance(v, dict) else [v])
    return {"years": len(d), "nodes": int(sum(s.n_nodes for s in d)), "flagged": int(sum(s.n_flagged for s in d)),
            "max_node_residual": float(max((s.max_residual for s in d), default=0.0)),
            "max_fit_residual": float(max(fit, default=0.0)),
            "extrapolations": int(sum(s.extrapolations for s in d)), "refinements": int(solution.refinements)}


def initial_taxes(solution) -> np.ndarray:
    m = solution.model
    return solution.tax(m.initial_state()[None, :], np.zeros(1, dtype=int), 0)[0]


def write_fan_charts(ens, out: Path, prefix: str, series=FAN_SERIES) -> list[Path]:
    files = []
    for name in series:
        path = out / f"fan_{prefix}_{name}.csv"
        fan_chart(ens, name).save_csv(path)
        files.append(path)
    return files


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    return {"direscu": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "pyyaml": yaml.__version__,
            "python": platform.python_version()}


@dataclass
class RunResult:
    out: Path
    solutions: dict
    taxes: dict
    manifest: dict
    ensembles: dict = field(default_factory=dict)


def run_scenario(cfg: ScenarioConfig, out: str | Path, solvers=("planner",), n_paths: int | None = None,
                 seed: int | None = None, log=None, simulate_paths: bool = True) -> RunResult:
    """Solve, simulate and write the output bundle for one configuration.

    Raises
    ------
    StageError
        Naming the stage (``solve-planner``, ``simulate-fbne``, ...) that failed.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else int(seed)
    n_paths = cfg.n_paths if n_paths is None else int(n_paths)
    save_config(cfg, out / "config.yaml")
    (out / "effective_parameters.json").write_text(json.dumps(effective_parameters(cfg), indent=1, sort_keys=True))
    sols, taxes, ens_all, stats, files = {}, {}, {}, {}, []
    for solver in solvers:
        sol = solve(cfg, solver, out / "checkpoints" / solver, log)
        sol.save(out / "checkpoints" / solver)
        sols[solver] = sol
        taxes[solver] = initial_taxes(sol)
        stats[solver] = residual_stats(sol)
        if simulate_paths:
            ens = _stage(f"simulate-{solver}", simulate, sol, n_paths, seed)
            ens_all[solver] = ens
            files += write_fan_charts(ens, out, solver)
    tax_path = out / "initial_taxes.csv"
    with open(tax_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "scenario", "tax_north", "tax_south"])
        for solver, tx in taxes.items():
            w.writerow([solver, cfg.name, _fmt(tx[0]), _fmt(tx[1])])
    files.append(tax_path)
    manifest = {"name": cfg.name, "config_hash": config_hash(cfg), "seed": seed, "n_paths": n_paths,
                "versions": versions(), "residuals": stats,
                "initial_taxes": {k: [float(v[0]), float(v[1])] for k, v in taxes.items()},
                "files": {p.name: _digest(p) for p in files}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return RunResult(out=out, solutions=sols, taxes=taxes, manifest=manifest, ensembles=ens_all)


# --------------------------------------------------------------------------- sweeps
SWEEP_COLUMNS = ["solver", "mode", "psi", "gamma", "tax_north", "tax_south"]


def sweep_cells(psis=(0.69, 1.5), gammas=(3.066, 10.0)):
    """Deterministic cells (one per IES; risk aversion is irrelevant without risk) and stochastic cells."""
    cells = [("deterministic", psi, gammas[0]) for psi in psis]
    cells += [("stochastic", psi, g) for psi, g in product(psis, gammas)]
    return cells


def sweep(cfg: ScenarioConfig, out: str | Path | None = None, psis=(0.69, 1.5), gammas=(3.066, 10.0),
          solvers=SOLVERS, log=None) -> list[dict]:
    """Initial taxes over an (IES, risk aversion) grid, both solvers, with and without tipping risk."""
    rows = []
    for solver in solvers:
        for mode, psi, gamma in sweep_cells(psis, gammas):
            c = cfg.with_(**{"preferences.psi": psi, "preferences.gamma": gamma,
                             "toggles.stochastic": mode == "stochastic"})
            tx = initial_taxes(solve(c, solver, log=log))
            rows.append({"solver": solver, "mode": mode, "psi": psi, "gamma": gamma,
                         "tax_north": float(tx[0]), "tax_south": float(tx[1])})
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(rows, out / "sweep.csv")
        (out / "orderings.json").write_text(json.dumps([o.__dict__ for o in orderings(rows)], indent=1))
    return rows


def write_rows(rows: list[dict], path: Path, columns=SWEEP_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("psi", "gamma", "tax_north", "tax_south"):
            if k in r:
                r[k] = float(r[k])
    return rows


@dataclass
class Ordering:
    claim: str
    larger: float
    smaller: float
    passed: bool


def orderings(rows: list[dict], rel_gap: float = 1e-3) -> list[Ordering]:
    """Pairwise tax comparisons expected across a sweep.

    Per region: planner above game, North above South, stochastic above
    deterministic, higher IES above lower, higher risk aversion above lower
    (stochastic cells).  A comparison passes when the larger side exceeds the
    smaller by more than ``rel_gap`` relative.
    """
    key = {(r["solver"], r["mode"], float(r["psi"]), float(r["gamma"])): r for r in rows}
    regions = ("tax_north", "tax_south")
    out: list[Ordering] = []

    def check(claim, hi, lo):
        out.append(Ordering(claim, float(hi), float(lo), bool(hi - lo > rel_gap * max(abs(lo), 1e-12))))

    psis = sorted({k[2] for k in key})
    gammas = sorted({k[3] for k in key if k[1] == "stochastic"})
    for (solver, mode, psi, gamma), r in sorted(key.items()):
        tag = f"{solver} {mode} psi={psi} gamma={gamma}"
        check(f"{tag}: north >= south", r["tax_north"], r["tax_south"])
        for reg in regions:
            if solver == "fbne" and ("planner", mode, psi, gamma) in key:
                check(f"{tag} {reg}: planner > fbne", key["planner", mode, psi, gamma][reg], r[reg])
            if mode == "stochastic":
                det = next((v for k, v in key.items() if k[:3] == (solver, "deterministic", psi)), None)
                if det is not None:
                    check(f"{tag} {reg}: stochastic >= deterministic", r[reg], det[reg])
                if gamma != gammas[-1] and (solver, mode, psi, gammas[-1]) in key:
                    check(f"{tag} {reg}: gamma={gammas[-1]} >= gamma={gamma}",
                          key[solver, mode, psi, gammas[-1]][reg], r[reg])
            if psi != psis[-1] and (solver, mode, psis[-1], gamma) in key:
                check(f"{tag} {reg}: psi={psis[-1]} >= psi={psi}", key[solver, mode, psis[-1], gamma][reg], r[reg])
    return out


# --------------------------------------------------------------------------- reports
def report(paths, out: str | Path | None = None) -> dict:
    """Collect ``initial_taxes.csv`` and ``sweep.csv`` files under ``paths`` into one summary."""
    taxes, sweeps = [], []
    for p in map(Path, paths):
        for f in sorted(p.rglob("initial_taxes.csv")):
            taxes += read_rows(f)
        for f in sorted(p.rglob("sweep.csv")):
            sweeps += read_rows(f)
    summary = {"initial_taxes": taxes, "sweep": sweeps,
               "orderings": [o.__dict__ for o in orderings(sweeps)] if sweeps else []}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(summary, indent=1))
        if taxes:
            write_rows(taxes, out / "report_initial_taxes.csv", ["solver", "scenario", "tax_north", "tax_south"])
        if sweeps:
            write_rows(sweeps, out / "report_sweep.csv")
    return summary


def format_table(rows: list[dict], columns) -> str:
    """Plain fixed-width text table."""
    cells = [[f"{r[c]:.1f}" if isinstance(r[c], float) and c.startswith("tax") else str(r[c]) for c in columns]
             for r in rows]
    width = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, width))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, width)) for row in cells]
    return "\n".join(lines)


def load_solution(cfg: ScenarioConfig, directory: str | Path, solver: str = "planner"):
    """Rebuild a solution from checkpoint files (enough for taxes and simulation)."""
    from .approx import ValueFunctionApprox

    directory = Path(directory)
    horizon = cfg.solver.horizon
    model = cfg.model() if solver == "planner" else game_model(cfg)
    try:
        if solver == "planner":
            vfs = [ValueFunctionApprox.load(directory / f"value_t{t:03d}.json") for t in range(horizon + 1)]
            return PlannerSolution(model=model, domains={}, value_functions=vfs, settings=cfg.solver)
        vfs = tuple([ValueFunctionApprox.load(directory / f"value_p{i}_t{t:03d}.json") for t in range(horizon + 1)]
                    for i in (1, 2))
        return GameSolution(model=model, domains={}, value_functions=vfs, settings=cfg.solver)
    except FileNotFoundError as exc:
        raise StageError("load-checkpoint", exc) from exc
