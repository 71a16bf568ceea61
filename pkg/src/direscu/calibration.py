"""Least-squares calibration of climate and growth parameters against target series.

Each parameter group has a forward operator that maps parameters and
driving inputs (emissions, forcing, temperatures) to model series:

========== ================================ ==========================================
group      parameters (default selection)   series produced
========== ================================ ==========================================
carbon     phi12 phi21 phi23 phi32          m_at m_uo m_do (needs ``emissions``)
temperature xi1 .. xi5                      t_north t_south t_ocean t_mean (needs ``forcing``)
sea_level  slr_coef slr_power slr_ocean     sea_level (needs ``t_north`` and ``t_ocean``)
permafrost perm_scale perm_lin perm_quad    permafrost (needs ``t_north``)
tfp        tfp0/growth/decline per region   tfp_north tfp_south
intensity  intensity0/growth/decline        intensity_north intensity_south
========== ================================ ==========================================

``t_mean`` is the average of the two regional temperatures.  Targets are
fitted in relative terms, so series of different units can be mixed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from . import climate as cl
from . import economy as ec
from .errors import ConfigError, SolverError

GROUPS = {
    "carbon": ("phi12", "phi21", "phi23", "phi32"),
    "temperature": ("xi1", "xi2", "xi3", "xi4", "xi5"),
    "sea_level": ("slr_coef", "slr_power", "slr_ocean"),
    "permafrost": ("perm_scale", "perm_lin", "perm_quad"),
    "tfp": ("tfp0_north", "tfp0_south", "tfp_growth_north", "tfp_growth_south",
            "tfp_decline_north", "tfp_decline_south"),
    "intensity": ("intensity0_north", "intensity0_south", "intensity_growth_north", "intensity_growth_south",
                  "intensity_decline_north", "intensity_decline_south"),
}
_ECONOMY_GROUPS = ("tfp", "intensity")


@dataclass
class CalibrationTarget:
    """One observed series for one scenario."""

    scenario: str
    series: str
    years: np.ndarray
    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.years.shape != self.values.shape or self.years.ndim != 1:
            raise ConfigError(f"target {self.scenario}/{self.series}: years and values must be 1-d of equal length")
        if np.any(np.diff(self.years) <= 0):
            raise ConfigError(f"target {self.scenario}/{self.series}: years must be strictly increasing")
        if np.any(self.years < 0):
            raise ConfigError(f"target {self.scenario}/{self.series}: years are counted from 0")


@dataclass
class CalibrationResult:
    group: str
    params: dict
    initial: dict
    residuals: dict           # scenario -> series -> relative residual array
    cost: float
    at_bounds: list = field(default_factory=list)
    nfev: int = 0
    message: str = ""

    def max_residual(self) -> float:
        return max((float(np.max(np.abs(r))) for s in self.residuals.values() for r in s.values()), default=0.0)

    def report(self) -> list[dict]:
        """Rows ``scenario, series, rms, max`` of relative residuals."""
        rows = []
        for scen, series in self.residuals.items():
            for name, r in series.items():
                rows.append({"scenario": scen, "series": name, "rms": float(np.sqrt(np.mean(r * r))),
                             "max": float(np.max(np.abs(r)))})
        return rows


# --------------------------------------------------------------------------- parameter plumbing
def _split(name: str):
    for suffix, idx in (("_north", 0), ("_south", 1)):
        if name.endswith(suffix):
            return name[: -len(suffix)], idx
    return name, None


def get_params(group: str, names, climate: cl.ClimateParams, econ: ec.EconomyParams) -> np.ndarray:
    src = econ if group in _ECONOMY_GROUPS else climate
    out = []
    for n in names:
        base, idx = _split(n)
        v = getattr(src, base)
        out.append(v[idx] if idx is not None else v)
    return np.array(out, dtype=float)


def set_params(group: str, names, values, climate: cl.ClimateParams, econ: ec.EconomyParams):
    """Copies of the parameter objects with ``names`` set to ``values``."""
    changes: dict = {}
    src = econ if group in _ECONOMY_GROUPS else climate
    for n, v in zip(names, values):
        base, idx = _split(n)
        if not hasattr(src, base):
            raise ConfigError(f"unknown parameter {n!r} for group {group!r}")
        if idx is None:
            changes[base] = float(v)
        else:
            cur = list(changes.get(base, getattr(src, base)))
            cur[idx] = float(v)
            changes[base] = tuple(cur)
    if group in _ECONOMY_GROUPS:
        return climate, replace(econ, **changes)
    return replace(climate, **changes), econ


# --------------------------------------------------------------------------- forward operators
def _need(inputs: dict, key: str, group: str) -> np.ndarray:
    if key not in inputs:
        raise ConfigError(f"group {group!r} needs the input series {key!r}")
    return np.asarray(inputs[key], dtype=float)


def forward(group: str, inputs: dict, years: int, climate: cl.ClimateParams = cl.ClimateParams(),
            econ: ec.EconomyParams = ec.EconomyParams()) -> dict:
    """Model series for years ``0..years`` (inclusive) from the driving inputs.

    Driving series are indexed by year; entry ``t`` drives the step from
    ``t`` to ``t + 1``.  Optional initial states: ``carbon0``,
    ``temperature0``, ``sea_level0``.
    """
    n = years + 1
    if group == "carbon":
        e = _need(inputs, "emissions", group)
        if e.size < years:
            raise ConfigError("emission series shorter than the target span")
        a = climate.carbon_matrix()
        m = np.empty((n, 3))
        m[0] = inputs.get("carbon0", cl.INITIAL_CARBON)
        for t in range(years):
            m[t + 1] = a @ m[t] + np.array([e[t], 0.0, 0.0])
        return {"m_at": m[:, 0], "m_uo": m[:, 1], "m_do": m[:, 2]}
    if group == "temperature":
        f = _need(inputs, "forcing", group)
        if f.size < years:
            raise ConfigError("forcing series shorter than the target span")
        a = climate.temperature_matrix()
        temp = np.empty((n, 3))
        temp[0] = inputs.get("temperature0", cl.INITIAL_TEMPERATURE)
        for t in range(years):
            temp[t + 1] = a @ temp[t] + climate.xi1 * np.array([f[t], f[t], 0.0])
        return {"t_north": temp[:, 0], "t_south": temp[:, 1], "t_ocean": temp[:, 2],
                "t_mean": 0.5 * (temp[:, 0] + temp[:, 1])}
    if group == "sea_level":
        tn = _need(inputs, "t_north", group)
        to = _need(inputs, "t_ocean", group)
        s = np.empty(n)
        s[0] = inputs.get("sea_level0", cl.INITIAL_SEA_LEVEL)
        for t in range(years):
            s[t + 1] = cl.step_sea_level(s[t], (tn[t], 0.0, to[t]), climate)
        return {"sea_level": s}
    if group == "permafrost":
        tn = _need(inputs, "t_north", group)[:n]
        denom = 1.0 + climate.perm_lin * tn + climate.perm_quad * tn * tn
        # unfloored rational form: the floor would make the fit non-smooth
        return {"permafrost": climate.perm_scale * (1.0 - 1.0 / denom)}
    if group == "tfp":
        t = np.arange(n)
        return {"tfp_north": np.asarray(ec.tfp(t, 1, econ)), "tfp_south": np.asarray(ec.tfp(t, 2, econ))}
    if group == "intensity":
        t = np.arange(n)
        return {"intensity_north": np.asarray(ec.carbon_intensity(t, 1, econ)),
                "intensity_south": np.asarray(ec.carbon_intensity(t, 2, econ))}
    raise ConfigError(f"unknown calibration group {group!r}; choose from {sorted(GROUPS)}")


def synthetic_targets(group: str, inputs: dict, years: int, series=None, climate=cl.ClimateParams(),
                      econ=ec.EconomyParams(), step: int = 1) -> list[CalibrationTarget]:
    """Targets generated by the forward operator itself (for round-trip checks).

    ``inputs`` maps scenario name to its driving series.
    """
    out = []
    for scen, inp in inputs.items():
        sim = forward(group, inp, years, climate, econ)
        for name in series or sim:
            yrs = np.arange(0, years + 1, step)
            out.append(CalibrationTarget(scen, name, yrs, sim[name][yrs]))
    return out


def calibrate(group: str, targets: list[CalibrationTarget], inputs: dict, initial: dict | None = None,
              bounds: dict | None = None, params=None, climate: cl.ClimateParams = cl.ClimateParams(),
              econ: ec.EconomyParams = ec.EconomyParams(), bound_tol: float = 1e-6) -> CalibrationResult:
    """Fit the parameters of ``group`` to ``targets`` by bounded least squares.

    Parameters
    ----------
    targets : observed series; each must name a scenario present in ``inputs``
    inputs : scenario -> driving series (see :func:`forward`)
    initial : starting values by parameter name (default: current values)
    bounds : ``name -> (lo, hi)``; default ``[0, 10 * |start|]`` for positive
        parameters and ``[-10 |start|, 10 |start|]`` otherwise
    params : subset of parameter names (default: the group's selection)

    Raises
    ------
    SolverError
        If the optimiser stops without meeting its tolerances.
    """
    if group not in GROUPS:
        raise ConfigError(f"unknown calibration group {group!r}; choose from {sorted(GROUPS)}")
    names = tuple(params or GROUPS[group])
    if not targets:
        raise ConfigError("no calibration targets")
    for tg in targets:
        if tg.scenario not in inputs:
            raise ConfigError(f"target scenario {tg.scenario!r} has no driving inputs")
    start = get_params(group, names, climate, econ)
    for i, n in enumerate(names):
        if initial and n in initial:
            start[i] = float(initial[n])
    lo = np.empty(len(names))
    hi = np.empty(len(names))
    for i, n in enumerate(names):
        if bounds and n in bounds:
            lo[i], hi[i] = bounds[n]
        else:
            mag = max(abs(start[i]), 1e-8)
            lo[i], hi[i] = (0.0, 10.0 * mag) if start[i] > 0 else (-10.0 * mag, 10.0 * mag)
    if np.any(start < lo) or np.any(start > hi):
        raise ConfigError("initial guess outside the bounds")
    span = max(int(tg.years.max()) for tg in targets)
    by_scen: dict = {}
    for tg in targets:
        by_scen.setdefault(tg.scenario, []).append(tg)
    weights = {id(tg): 1.0 / max(np.max(np.abs(tg.values)), 1e-12) for tg in targets}

    def residual_parts(theta):
        cp, ep = set_params(group, names, theta, climate, econ)
        parts = {}
        for scen, tgs in by_scen.items():
            sim = forward(group, inputs[scen], span, cp, ep)
            parts[scen] = {}
            for tg in tgs:
                if tg.series not in sim:
                    raise ConfigError(f"group {group!r} does not produce series {tg.series!r}")
                parts[scen][tg.series] = (sim[tg.series][tg.years] - tg.values) * weights[id(tg)]
        return parts

    def fun(theta):
        parts = residual_parts(theta)
        return np.concatenate([r for s in parts.values() for r in s.values()])

    sol = least_squares(fun, start, bounds=(lo, hi), x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15,
                        max_nfev=2000 * len(names))
    if sol.status == 0:
        raise SolverError(f"calibration of {group!r} did not converge: {sol.message}")
    width = hi - lo
    at_bounds = [n for n, v, a, b, w in zip(names, sol.x, lo, hi, width) if min(v - a, b - v) <= bound_tol * w]
    return CalibrationResult(group=group, params=dict(zip(names, map(float, sol.x))),
                             initial=dict(zip(names, map(float, start))), residuals=residual_parts(sol.x),
                             cost=float(sol.cost), at_bounds=at_bounds, nfev=int(sol.nfev), message=sol.message)


# --------------------------------------------------------------------------- files
def load_targets(path: str | Path) -> list[CalibrationTarget]:
    """Long-format CSV with columns ``scenario, series, year, value`` and optional ``units``."""
    rows: dict = {}
    units: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["scenario"], row["series"])
            rows.setdefault(key, []).append((int(row["year"]), float(row["value"])))
            units[key] = row.get("units", "") or ""
    out = []
    for (scen, series), pts in rows.items():
        yrs, vals = zip(*pts)
        out.append(CalibrationTarget(scen, series, np.array(yrs), np.array(vals), units[(scen, series)]))
    return out


def load_inputs(path: str | Path) -> dict:
    """Long-format CSV ``scenario, series, year, value`` of driving series (years 0, 1, ...)."""
    raw: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            raw.setdefault(row["scenario"], {}).setdefault(row["series"], {})[int(row["year"])] = float(row["value"])
    out: dict = {}
    for scen, series in raw.items():
        out[scen] = {}
        for name, pts in series.items():
            years = sorted(pts)
            if years != list(range(len(years))):
                raise ConfigError(f"input {scen}/{name} must cover consecutive years from 0")
            out[scen][name] = np.array([pts[y] for y in years])
    return out


def save_targets(targets: list[CalibrationTarget], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "series", "year", "value", "units"])
        for tg in targets:
            for y, v in zip(tg.years, tg.values):
                w.writerow([tg.scenario, tg.series, int(y), repr(float(v)), tg.units])


def demo_inputs(years: int = 200) -> dict:
    """Two stylised driving scenarios (rising and stabilising) for every group."""
    t = np.arange(years + 1, dtype=float)
    out = {}
    for name, peak in (("rising", 20.0), ("stabilising", 8.0)):
        emis = 10.0 + (peak - 10.0) * (1.0 - np.exp(-t / 60.0))
        forcing = 2.5 + (peak / 4.0) * (1.0 - np.exp(-t / 80.0))
        tn = 1.36 + (peak / 5.0) * (1.0 - np.exp(-t / 90.0))
        to = 0.0068 + 0.01 * t * peak / 20.0
        out[name] = {"emissions": emis, "forcing": forcing, "t_north": tn, "t_ocean": to}
    return out
