"""Three-reservoir carbon cycle, two-region temperature module and climate hazards.

All step functions are vectorised: fields of the state tuples may be floats
or numpy arrays of a common shape.  Units follow the model convention:
carbon in GtC, temperatures in degrees C above pre-industrial, sea level in
metres, forcing in W/m^2, emissions in GtC per year.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SingularSystemError


@dataclass(frozen=True)
class ClimateParams:
    """Parameters of the carbon, temperature, sea-level and tipping modules.

    Defaults reproduce the baseline calibration.  ``strict_printed_matrix``
    switches the carbon matrix to the variant whose second column does not
    sum to one (kept for comparison only).
    """

    phi12: float = 0.0237
    phi21: float = 0.0388
    phi23: float = 0.00136
    phi32: float = 0.00284
    m_star: float = 588.0
    eta: float = 3.68
    xi1: float = 0.0526
    xi2: float = 0.08987
    xi3: float = 0.0022
    xi4: float = 0.6557
    xi5: float = 0.5565
    xi6: float = 0.0
    slr_coef: float = 0.00073
    slr_power: float = 1.4
    slr_ocean: float = 0.007
    perm_scale: float = 1.951
    perm_lin: float = -0.0858
    perm_quad: float = 0.2257
    hazard_rate: float = 0.00063
    tip_threshold: float = 1.0
    tip_max_damage: float = 0.15
    tip_duration: float = 50.0
    strict_printed_matrix: bool = False

    @property
    def tip_increment(self) -> float:
        """Per-year increase of the tipping damage after the event."""
        return self.tip_max_damage / self.tip_duration

    def carbon_matrix(self) -> np.ndarray:
        """Annual transition matrix for (atmosphere, upper ocean, deep ocean)."""
        p12, p21, p23, p32 = self.phi12, self.phi21, self.phi23, self.phi32
        mid = 1.0 - p21 - (p32 if self.strict_printed_matrix else p23)
        return np.array([
            [1.0 - p12, p21, 0.0],
            [p12, mid, p32],
            [0.0, p23, 1.0 - p32],
        ])

    def temperature_matrix(self) -> np.ndarray:
        """Annual transition matrix for (north air, south air, ocean)."""
        x2, x3, x4, x5, x6 = self.xi2, self.xi3, self.xi4, self.xi5, self.xi6
        return np.array([
            [1.0 - x2 - x4 - x6, x4 + x5, x2],
            [x4, 1.0 - x2 - x4 - x5 - x6, x2],
            [x3, x3, 1.0 - 2.0 * x3],
        ])


class CarbonState(NamedTuple):
    m_at: float | np.ndarray
    m_uo: float | np.ndarray
    m_do: float | np.ndarray


class TemperatureState(NamedTuple):
    t_at_north: float | np.ndarray
    t_at_south: float | np.ndarray
    t_oc: float | np.ndarray


class TippingState(NamedTuple):
    j: float | np.ndarray
    chi: int | np.ndarray


INITIAL_CARBON = CarbonState(851.0, 460.0, 1740.0)
INITIAL_TEMPERATURE = TemperatureState(1.36, 0.765, 0.0068)
INITIAL_SEA_LEVEL = 0.14


def _nonneg(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite and non-negative")


def step_carbon(m: CarbonState, e, p: ClimateParams = ClimateParams()) -> CarbonState:
    """Advance the carbon reservoirs one year with emissions ``e`` added to the atmosphere."""
    for name, v in zip(CarbonState._fields, m):
        _nonneg(name, v)
    a = p.carbon_matrix()
    m_at, m_uo, m_do = m
    return CarbonState(
        a[0, 0] * m_at + a[0, 1] * m_uo + e,
        a[1, 0] * m_at + a[1, 1] * m_uo + a[1, 2] * m_do,
        a[2, 1] * m_uo + a[2, 2] * m_do,
    )


def exogenous_forcing(t):
    """Non-CO2 forcing: linear ramp from 0.5 to 1 W/m^2 over 85 years, then flat."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 85.0, 0.5 + 0.00588 * t, 1.0)
    return out if out.ndim else float(out)


def radiative_forcing(m_at, t, p: ClimateParams = ClimateParams()):
    """Total forcing from atmospheric carbon plus the exogenous component."""
    m_at = np.asarray(m_at, dtype=float)
    if np.any(m_at <= 0):
        raise DomainError("atmospheric carbon must be positive")
    out = p.eta * np.log2(m_at / p.m_star) + exogenous_forcing(t)
    return out if np.ndim(out) else float(out)


def step_temperature(temp: TemperatureState, f, p: ClimateParams = ClimateParams()) -> TemperatureState:
    """Advance the three temperature boxes one year under forcing ``f``."""
    a = p.temperature_matrix()
    tn, ts, to = temp
    heat = p.xi1 * np.asarray(f, dtype=float)
    return TemperatureState(
        a[0, 0] * tn + a[0, 1] * ts + a[0, 2] * to + heat,
        a[1, 0] * tn + a[1, 1] * ts + a[1, 2] * to + heat,
        a[2, 0] * tn + a[2, 1] * ts + a[2, 2] * to,
    )


def _forcing_vector(f, p):
    return p.xi1 * np.array([f, f, 0.0])


def equilibrium_temperature(f: float, p: ClimateParams = ClimateParams(), rcond: float = 1e-12) -> TemperatureState:
    """Temperature fixed point under constant forcing ``f``.

    Raises
    ------
    SingularSystemError
        When ``I - A`` is singular.  This is the case whenever there is no
        radiative damping (``xi6 == 0``): temperatures then drift upward at a
        constant rate instead of settling, see :func:`balanced_warming`.
    """
    lhs = np.eye(3) - p.temperature_matrix()
    sv = np.linalg.svd(lhs, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise SingularSystemError(
            "temperature system has no unique equilibrium (xi6 = 0 removes radiative damping)")
    return TemperatureState(*np.linalg.solve(lhs, _forcing_vector(f, p)))


def balanced_warming(f: float, p: ClimateParams = ClimateParams(), rcond: float = 1e-12) -> TemperatureState:
    """Long-run yearly temperature increments under constant forcing ``f``.

    If ``I - A`` is nonsingular the long-run increments are zero.  Otherwise
    the increments converge to the unit-eigenvalue direction ``v`` of the
    transition matrix, scaled so that the conserved combination ``w @ T``
    (``w`` the left null vector) grows by exactly ``w @ b`` per year.
    """
    a = p.temperature_matrix()
    lhs = np.eye(3) - a
    u, sv, vt = np.linalg.svd(lhs)
    if sv[-1] > rcond * sv[0]:
        return TemperatureState(0.0, 0.0, 0.0)
    v = vt[-1]
    w = u[:, -1]
    b = _forcing_vector(f, p)
    return TemperatureState(*(v * (w @ b) / (w @ v)))


def step_sea_level(s, temp: TemperatureState, p: ClimateParams = ClimateParams()):
    """Cumulative sea-level rise after one year.

    The power term uses ``max(0, t_at_north)`` so the update stays real for
    sub-pre-industrial temperatures.
    """
    tn = np.maximum(np.asarray(temp[0], dtype=float), 0.0)
    out = s + p.slr_coef * tn ** p.slr_power + p.slr_ocean * np.asarray(temp[2], dtype=float)
    return out if np.ndim(out) else float(out)


def permafrost_emission(t_north, p: ClimateParams = ClimateParams()):
    """Yearly carbon release from thawing permafrost (GtC).

    The rational form ``scale * (1 - 1/(1 + a T + b T^2))`` dips slightly
    below zero for small warming when ``a < 0``; release is floored at zero.
    """
    t = np.asarray(t_north, dtype=float)
    denom = 1.0 + p.perm_lin * t + p.perm_quad * t * t
    if np.any(denom <= 0):
        raise DomainError("permafrost denominator is non-positive")
    out = np.maximum(p.perm_scale * (1.0 - 1.0 / denom), 0.0)
    return out if out.ndim else float(out)


def permafrost_emission_slope(t_north, p: ClimateParams = ClimateParams()):
    """Derivative of :func:`permafrost_emission` with respect to north temperature."""
    t = np.asarray(t_north, dtype=float)
    denom = 1.0 + p.perm_lin * t + p.perm_quad * t * t
    raw = p.perm_scale * (p.perm_lin + 2.0 * p.perm_quad * t) / denom ** 2
    out = np.where(denom > 1.0, raw, 0.0)
    return out if out.ndim else float(out)


def tipping_probability(t_north, p: ClimateParams = ClimateParams()):
    """Probability that the tipping event occurs within the next year."""
    t = np.asarray(t_north, dtype=float)
    out = -np.expm1(-p.hazard_rate * np.maximum(0.0, t - p.tip_threshold))
    return out if out.ndim else float(out)


def step_tipping(state: TippingState, t_north, draw, p: ClimateParams = ClimateParams()) -> TippingState:
    """Advance damage level and indicator one year.

    ``draw`` is a uniform number on [0, 1); the event occurs when
    ``draw < tipping_probability(t_north)``.  The damage level grows by
    :attr:`ClimateParams.tip_increment` per year once the indicator is set,
    capped at ``tip_max_damage``; it uses the indicator *before* the draw.
    """
    j, chi = state
    chi = np.asarray(chi)
    if np.any((chi != 0) & (chi != 1)):
        raise DomainError("tipping indicator must be 0 or 1")
    j = np.asarray(j, dtype=float)
    if np.any(j < 0) or np.any(j > p.tip_max_damage + 1e-12):
        raise DomainError("tipping damage outside [0, tip_max_damage]")
    prob = tipping_probability(t_north, p)
    flip = np.asarray(draw) < prob
    new_chi = np.where(chi == 1, 1, flip.astype(int))
    new_j = np.minimum(p.tip_max_damage, j + p.tip_increment) * chi
    if new_j.ndim == 0:
        return TippingState(float(new_j), int(new_chi))
    return TippingState(new_j, new_chi)
