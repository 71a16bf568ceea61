"""Regional production, damages, abatement, adaptation and capital dynamics.

Regions are numbered 1 (north) and 2 (south) in the public helpers.
Capital and output are in trillions of dollars, population in billions,
per-capita consumption in thousands of dollars.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .climate import ClimateParams, exogenous_forcing, permafrost_emission
from .errors import DomainError, InfeasibleControlError


@dataclass(frozen=True)
class EconomyParams:
    """Economic parameters; two-element tuples are (north, south)."""

    tfp0: tuple[float, float] = (7.331, 3.582)
    tfp_growth: tuple[float, float] = (0.013, 0.0184)
    tfp_decline: tuple[float, float] = (0.0053, 0.0061)
    intensity0: tuple[float, float] = (0.094, 0.104)
    intensity_growth: tuple[float, float] = (0.0156, 0.0181)
    intensity_decline: tuple[float, float] = (0.0063, 0.007)
    backstop0: tuple[float, float] = (1.71, 2.19)
    backstop_decline: float = 0.005
    abatement_exponent: float = 2.6
    slr_damage_lin: tuple[float, float] = (0.00447, 0.00408)
    slr_damage_quad: tuple[float, float] = (0.01146, 0.00646)
    temp_damage_lin: tuple[float, float] = (0.00094, 0.00322)
    temp_damage_quad: tuple[float, float] = (0.0002, 0.00074)
    adapt_cost_scale: float = 0.115
    adapt_cost_exponent: float = 3.6
    depreciation: float = 0.1
    capital_share: float = 0.3
    adjustment_cost: float = 1.0
    capital0: tuple[float, float] = (146.0, 77.0)


def _r(region: int) -> int:
    if region not in (1, 2):
        raise DomainError("region must be 1 (north) or 2 (south)")
    return region - 1


def _growth_integral(t, decline):
    """(1 - exp(-d t)) / d with the d -> 0 limit t."""
    t = np.asarray(t, dtype=float)
    if decline == 0:
        return t
    return -np.expm1(-decline * t) / decline


def _scalar(x):
    return x if np.ndim(x) else float(x)


def tfp(t, region: int, p: EconomyParams = EconomyParams()):
    """Total factor productivity; growth decays geometrically toward a finite limit."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be non-negative")
    i = _r(region)
    return _scalar(p.tfp0[i] * np.exp(p.tfp_growth[i] * _growth_integral(t, p.tfp_decline[i])))


def tfp_limit(region: int, p: EconomyParams = EconomyParams()) -> float:
    i = _r(region)
    return p.tfp0[i] * np.exp(p.tfp_growth[i] / p.tfp_decline[i])


def carbon_intensity(t, region: int, p: EconomyParams = EconomyParams()):
    """Industrial emissions per unit of gross output (GtC per trillion dollars)."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be non-negative")
    i = _r(region)
    return _scalar(p.intensity0[i] * np.exp(-p.intensity_growth[i] * _growth_integral(t, p.intensity_decline[i])))


def backstop_price(t, region: int, p: EconomyParams = EconomyParams()):
    """Price of the zero-emission backstop in thousand dollars per tC."""
    i = _r(region)
    return _scalar(p.backstop0[i] * np.exp(-p.backstop_decline * np.asarray(t, dtype=float)))


def abatement_coefficient(t, region: int, p: EconomyParams = EconomyParams()):
    """Scale of the abatement cost share ``coef * mu**exponent``."""
    return _scalar(backstop_price(t, region, p) * carbon_intensity(t, region, p) / p.abatement_exponent)


def gross_output(k, l, a, p: EconomyParams = EconomyParams()):
    """Cobb-Douglas output before damages."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(k < 0) or np.any(l <= 0):
        raise DomainError("capital must be >= 0 and population > 0")
    return _scalar(a * k ** p.capital_share * l ** (1.0 - p.capital_share))


def damage_slr(s, region: int, p: EconomyParams = EconomyParams()):
    """Quadratic sea-level-rise damage (fraction-like index entering the denominator)."""
    i = _r(region)
    s = np.asarray(s, dtype=float)
    return _scalar(p.slr_damage_lin[i] * s + p.slr_damage_quad[i] * s * s)


def damage_temp(t_at, region: int, p: EconomyParams = EconomyParams()):
    """Quadratic damage from regional surface warming."""
    i = _r(region)
    t = np.asarray(t_at, dtype=float)
    return _scalar(p.temp_damage_lin[i] * t + p.temp_damage_quad[i] * t * t)


def adaptation_cost_share(adapt, p: EconomyParams = EconomyParams()):
    return _scalar(p.adapt_cost_scale * np.asarray(adapt, dtype=float) ** p.adapt_cost_exponent)


def _check_unit(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise InfeasibleControlError(f"{name} must lie in [0, 1]")


def net_output(gross, d_slr, d_temp, j, mu, adapt, theta1, p: EconomyParams = EconomyParams()):
    """Output after damages and after abatement and adaptation spending.

    Parameters
    ----------
    gross : gross output
    d_slr, d_temp : damage indices
    j : tipping damage fraction
    mu, adapt : emission control and adaptation rates, in [0, 1]
    theta1 : abatement cost coefficient (see :func:`abatement_coefficient`)

    Returns
    -------
    (y_net, y_hat)
        Output net of damages and output available for consumption and
        investment.
    """
    _check_unit("emission control rate", mu)
    _check_unit("adaptation rate", adapt)
    mu = np.asarray(mu, dtype=float)
    adapt = np.asarray(adapt, dtype=float)
    y_net = (1.0 - np.asarray(j)) * gross / (1.0 + (1.0 - adapt) * (np.asarray(d_slr) + np.asarray(d_temp)))
    y_hat = y_net * (1.0 - theta1 * mu ** p.abatement_exponent - adaptation_cost_share(adapt, p))
    return _scalar(y_net), _scalar(y_hat)


def optimal_adaptation(mu, damage, theta1, p: EconomyParams = EconomyParams(), iters: int = 60):
    """Adaptation rate maximising available output for given control rate and damage.

    Solves ``(1 - theta1 mu^a - c P^b) D = c b P^(b-1) (1 + (1-P) D)`` by
    bisection on [0, 1].  The left side falls and the right side rises in P,
    so the root is unique; it is 0 when damages vanish.
    """
    mu = np.asarray(mu, dtype=float)
    d = np.asarray(damage, dtype=float)
    c, b = p.adapt_cost_scale, p.adapt_cost_exponent
    base = 1.0 - theta1 * mu ** p.abatement_exponent

    def h(pp):
        return (base - c * pp ** b) * d - c * b * pp ** (b - 1) * (1.0 + (1.0 - pp) * d)

    lo = np.zeros(np.broadcast(mu, d, np.asarray(theta1)).shape)
    hi = np.ones_like(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = h(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    out = np.where(d > 0, 0.5 * (lo + hi), 0.0)
    return _scalar(out)


def industrial_emission(mu, t, region: int, gross, p: EconomyParams = EconomyParams()):
    _check_unit("emission control rate", mu)
    return _scalar(carbon_intensity(t, region, p) * (1.0 - np.asarray(mu, dtype=float)) * gross)


def land_emission(t):
    """Exogenous land-use emissions, decaying from 0.95 GtC per year."""
    return _scalar(0.95 * np.exp(-0.115 * np.asarray(t, dtype=float)))


def global_emission(e1, e2, t_north, t, permafrost: bool = True, cp: ClimateParams = ClimateParams()):
    """Industrial, permafrost and land emissions summed."""
    perm = permafrost_emission(t_north, cp) if permafrost else 0.0
    return _scalar(np.asarray(e1) + np.asarray(e2) + perm + land_emission(t))


def adjustment_cost(investment, consumption, population, y_hat, p: EconomyParams = EconomyParams()):
    """Quadratic cost of absorbing more or less than the region produces.

    ``(B/2) * y_hat * ((I + c L) / y_hat - 1)^2``; zero when absorption
    equals available output.
    """
    y_hat = np.asarray(y_hat, dtype=float)
    if np.any(y_hat <= 0):
        raise DomainError("available output must be positive")
    z = np.asarray(investment) + np.asarray(consumption) * np.asarray(population)
    return _scalar(0.5 * p.adjustment_cost * y_hat * (z / y_hat - 1.0) ** 2)


def step_capital(k, investment, p: EconomyParams = EconomyParams()):
    return _scalar((1.0 - p.depreciation) * np.asarray(k, dtype=float) + investment)


def market_clearing_residual(investment, consumption, population, y_hat, p: EconomyParams = EconomyParams()):
    """Global output minus global absorption minus adjustment costs (zero at clearing)."""
    inv = np.asarray(investment, dtype=float)
    c = np.asarray(consumption, dtype=float)
    l = np.asarray(population, dtype=float)
    yh = np.asarray(y_hat, dtype=float)
    gam = adjustment_cost(inv, c, l, yh, p)
    return _scalar(np.sum(yh - inv - c * l - gam, axis=-1))


def backstop_array(t, p: EconomyParams):
    return np.array([backstop_price(t, r, p) for r in (1, 2)])


@dataclass(frozen=True)
class PopulationPath:
    """Logistic population path ``L(t) = L_inf / (1 + (L_inf/L0 - 1) exp(-r t))``.

    The default numbers are illustrative stand-ins (about 2.5 and 4.9 billion
    people today, levelling off near 2.7 and 8.6 billion).
    """

    initial: tuple[float, float] = (2.5, 4.9)
    asymptote: tuple[float, float] = (2.7, 8.6)
    rate: tuple[float, float] = (0.03, 0.03)

    def __call__(self, t, region: int):
        i = _r(region)
        l0, linf, r = self.initial[i], self.asymptote[i], self.rate[i]
        t = np.asarray(t, dtype=float)
        return _scalar(linf / (1.0 + (linf / l0 - 1.0) * np.exp(-r * t)))


@dataclass(frozen=True)
class TabulatedPath:
    """Population read from a table with columns ``year, north, south`` (year 0 = start).

    Values are linearly interpolated and held constant beyond the last row.
    """

    years: tuple[float, ...]
    north: tuple[float, ...]
    south: tuple[float, ...]

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedPath":
        data = np.genfromtxt(path, delimiter=",", names=True)
        for col in ("year", "north", "south"):
            if col not in data.dtype.names:
                raise DomainError(f"population table lacks column {col!r}")
        if np.any(data["north"] <= 0) or np.any(data["south"] <= 0):
            raise DomainError("population must be positive")
        return cls(tuple(data["year"]), tuple(data["north"]), tuple(data["south"]))

    def __call__(self, t, region: int):
        col = self.north if _r(region) == 0 else self.south
        return _scalar(np.interp(np.asarray(t, dtype=float), self.years, col))


@dataclass(frozen=True)
class ExogenousPaths:
    """Time-only drivers, frozen at their values from ``freeze_after`` onward."""

    econ: EconomyParams = field(default_factory=EconomyParams)
    population: PopulationPath | TabulatedPath = field(default_factory=PopulationPath)
    freeze_after: float | None = None

    def _t(self, t):
        t = np.asarray(t, dtype=float)
        return t if self.freeze_after is None else np.minimum(t, self.freeze_after)

    def at(self, t) -> dict:
        """All drivers at year ``t`` as (2,) arrays or floats."""
        tt = self._t(t)
        e = self.econ
        return {
            "population": np.array([self.population(tt, 1), self.population(tt, 2)]),
            "tfp": np.array([tfp(tt, 1, e), tfp(tt, 2, e)]),
            "intensity": np.array([carbon_intensity(tt, 1, e), carbon_intensity(tt, 2, e)]),
            "abatement_coef": np.array([abatement_coefficient(tt, 1, e), abatement_coefficient(tt, 2, e)]),
            "backstop": np.array([backstop_price(tt, 1, e), backstop_price(tt, 2, e)]),
            "land_emission": land_emission(tt),
            "forcing_ex": exogenous_forcing(tt),
        }
