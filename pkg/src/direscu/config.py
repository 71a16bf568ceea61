"""Scenario configuration: nested dataclasses with YAML round-tripping."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from .climate import ClimateParams
from .economy import EconomyParams, PopulationPath, TabulatedPath
from .errors import ConfigError
from .model import DomainSettings, Model, Toggles
from .preferences import Preferences


@dataclass(frozen=True)
class SolverSettings:
    """Numerical settings shared by the planner and game solvers.

    ``kkt_tol`` bounds the scaled stationarity residual of planner nodes and
    ``foc_tol`` the scaled first-order residuals of game nodes.  ``norm``
    selects the L1 residual model used to polish hard game nodes
    (``"split"`` or ``"one_sided"``).
    """

    horizon: int = 100
    degree: int = 2
    nodes_per_dim: int | None = None
    oversample: float = 2.0
    kkt_tol: float = 1e-6
    foc_tol: float = 1e-6
    norm: str = "split"
    max_iter: int = 60
    multistart: int = 3
    max_flagged_fraction: float = 0.05
    terminal_years: int = 301
    terminal_savings: float | None = None
    min_capital_ratio: float = 0.5
    domain_refinements: int = 4
    extrapolation_margin: float = 0.05
    node_seed: int = 0
    workers: int = 1
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.norm not in ("split", "one_sided"):
            raise ConfigError("norm must be 'split' or 'one_sided'")
        if self.horizon < 1 or self.degree < 0:
            raise ConfigError("horizon must be >= 1 and degree >= 0")


@dataclass(frozen=True)
class PopulationSettings:
    """Logistic stand-in population, or a CSV table when ``csv`` is set."""

    initial: tuple[float, float] = (2.5, 4.9)
    asymptote: tuple[float, float] = (2.7, 8.6)
    rate: tuple[float, float] = (0.03, 0.03)
    csv: str | None = None

    def build(self):
        if self.csv:
            return TabulatedPath.from_csv(self.csv)
        return PopulationPath(self.initial, self.asymptote, self.rate)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build a model and solve it."""

    name: str = "baseline"
    climate: ClimateParams = field(default_factory=ClimateParams)
    economy: EconomyParams = field(default_factory=EconomyParams)
    preferences: Preferences = field(default_factory=Preferences)
    toggles: Toggles = field(default_factory=Toggles)
    solver: SolverSettings = field(default_factory=SolverSettings)
    domain: DomainSettings = field(default_factory=DomainSettings)
    population: PopulationSettings = field(default_factory=PopulationSettings)
    seed: int = 0
    n_paths: int = 1000

    def model(self) -> Model:
        return Model(self.climate, self.economy, self.preferences, self.toggles,
                     self.population.build(), self.solver.horizon)

    def with_(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``with_(**{"preferences.psi": 0.69})``."""
        return from_dict(_merge(to_dict(self), _unflatten(changes)))


def _unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, val in flat.items():
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return out


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _plain(obj):
    if is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def to_dict(cfg: ScenarioConfig) -> dict:
    return _plain(cfg)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    hints = {f.name: f for f in fields(cls)}
    for name, val in data.items():
        default = getattr(cls(), name) if name in hints else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), val, f"{where}.{name}")
        elif isinstance(default, tuple):
            if not isinstance(val, (list, tuple)):
                raise ConfigError(f"{where}.{name}: expected a list")
            if default and all(isinstance(v, float) for v in default):
                if len(val) != len(default):
                    raise ConfigError(f"{where}.{name}: expected {len(default)} numbers")
                kwargs[name] = tuple(float(v) for v in val)
            else:
                kwargs[name] = tuple(val)
        else:
            kwargs[name] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data or {}, "config")


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return from_dict(data)


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(to_dict(cfg), fh, sort_keys=False)


def replace(cfg, **kw):
    return dataclasses.replace(cfg, **kw)
