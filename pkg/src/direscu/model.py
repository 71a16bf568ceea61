"""Vectorised joint dynamics shared by the planner, the game and the simulator.

States are rows of an (N, 10) array with columns given by :data:`STATE_NAMES`;
the tipping indicator is carried separately as an integer array.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .approx import Domain
from .climate import INITIAL_CARBON, INITIAL_SEA_LEVEL, INITIAL_TEMPERATURE, ClimateParams, permafrost_emission
from .economy import EconomyParams, ExogenousPaths, PopulationPath, TabulatedPath, optimal_adaptation
from .errors import DomainError
from .preferences import Preferences, ez_aggregate_grad

STATE_NAMES = ("k_north", "k_south", "m_at", "m_uo", "m_do",
               "t_north", "t_south", "t_ocean", "sea_level", "tip_damage")
K1, K2, MAT, MUO, MDO, TN, TS, TO, SL, JD = range(10)
N_STATE = len(STATE_NAMES)


@dataclass(frozen=True)
class Toggles:
    """Switches for model components (all on by default)."""

    heat_transport: bool = True
    slr: bool = True
    adaptation: bool = True
    permafrost: bool = True
    capital_transfer: bool = True
    stochastic: bool = True


@dataclass
class StateVector:
    """A single model state with named parts."""

    k: tuple[float, float] = (146.0, 77.0)
    carbon: tuple[float, float, float] = tuple(INITIAL_CARBON)
    temp: tuple[float, float, float] = tuple(INITIAL_TEMPERATURE)
    s: float = INITIAL_SEA_LEVEL
    j: float = 0.0
    chi: int = 0

    def __post_init__(self):
        if self.chi not in (0, 1):
            raise DomainError("tipping indicator must be 0 or 1")
        if min(self.k) <= 0 or min(self.carbon) <= 0:
            raise DomainError("capital and carbon stocks must be positive")
        if self.j < 0:
            raise DomainError("tipping damage must be non-negative")

    def to_array(self) -> np.ndarray:
        return np.array([*self.k, *self.carbon, *self.temp, self.s, self.j], dtype=float)

    @classmethod
    def from_array(cls, x, chi: int = 0) -> "StateVector":
        x = np.asarray(x, dtype=float)
        return cls(k=(x[K1], x[K2]), carbon=tuple(x[MAT:MDO + 1]), temp=tuple(x[TN:TO + 1]),
                   s=float(x[SL]), j=float(x[JD]), chi=int(chi))


@dataclass
class NodeContext:
    """Control-independent quantities for a batch of nodes at year ``t``."""

    t: int
    x: np.ndarray
    chi: np.ndarray
    population: np.ndarray      # (2,)
    intensity: np.ndarray       # (2,)
    abatement_coef: np.ndarray  # (2,)
    backstop: np.ndarray        # (2,)
    gross: np.ndarray           # (n, 2)
    damage: np.ndarray          # (n, 2)
    survive: np.ndarray         # (n,) 1 - tipping damage
    other_emission: np.ndarray  # (n,) permafrost + land
    mat_base: np.ndarray        # (n,) next atmospheric carbon before emissions
    fixed_next: np.ndarray      # (n, 10) next state with capital / m_at left blank
    hazard: np.ndarray          # (n,) probability of tipping this year

    def take(self, idx) -> "NodeContext":
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if name in ("x", "chi", "gross", "damage", "survive", "other_emission", "mat_base",
                        "fixed_next", "hazard"):
                v = v[idx]
            out[name] = v
        return NodeContext(**out)

    @property
    def n(self) -> int:
        return self.x.shape[0]


class Model:
    """Economy and climate with component toggles applied.

    Parameters
    ----------
    climate, econ, prefs : parameter sets
    toggles : component switches
    population : population path (callable ``(t, region)``)
    horizon : years after which exogenous drivers stay constant
    """

    def __init__(self, climate: ClimateParams = ClimateParams(), econ: EconomyParams = EconomyParams(),
                 prefs: Preferences = Preferences(), toggles: Toggles = Toggles(),
                 population: PopulationPath | TabulatedPath | None = None, horizon: int = 100):
        if not toggles.heat_transport:
            climate = replace(climate, xi4=0.0, xi5=0.0)
        if not toggles.stochastic:
            climate = replace(climate, hazard_rate=0.0)
        self.climate = climate
        self.econ = econ
        self.prefs = prefs
        self.toggles = toggles
        self.horizon = int(horizon)
        self.population = population if population is not None else PopulationPath()
        self.paths = ExogenousPaths(econ, self.population, freeze_after=float(horizon))
        self.carbon_matrix = climate.carbon_matrix()
        self.temperature_matrix = climate.temperature_matrix()
        self._drivers = lru_cache(maxsize=None)(self.paths.at)

    def __getstate__(self):
        # the driver cache is rebuilt on load so models can be sent to worker processes
        state = self.__dict__.copy()
        del state["_drivers"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._drivers = lru_cache(maxsize=None)(self.paths.at)

    # ------------------------------------------------------------------ basics
    def coordinate_map(self) -> np.ndarray:
        """Linear map to approximation coordinates.

        Temperatures are expressed in the eigenbasis of the temperature
        transition matrix (eigenvectors scaled to unit max-norm), where the
        one-year map is diagonal and boxes map into boxes.  Other states are
        left unchanged.  Falls back to the identity for complex spectra.
        """
        r = np.eye(N_STATE)
        w, v = np.linalg.eig(self.temperature_matrix)
        if np.all(np.abs(np.imag(w)) < 1e-12) and np.linalg.cond(np.real(v)) < 1e8:
            order = np.argsort(-np.abs(np.real(w)))
            v = np.real(v)[:, order]
            v = v / v[np.argmax(np.abs(v), axis=0), np.arange(3)]
            r[TN:TO + 1, TN:TO + 1] = np.linalg.inv(v)
        return r

    def drivers(self, t) -> dict:
        return self._drivers(float(t))

    def initial_state(self) -> np.ndarray:
        return StateVector(k=self.econ.capital0).to_array()

    def damages(self, x: np.ndarray) -> np.ndarray:
        e = self.econ
        s = x[:, SL:SL + 1]
        t = x[:, TN:TS + 1]
        slr = np.asarray(e.slr_damage_lin) * s + np.asarray(e.slr_damage_quad) * s * s
        temp = np.asarray(e.temp_damage_lin) * t + np.asarray(e.temp_damage_quad) * t * t
        return slr + temp

    def gross_output(self, x: np.ndarray, t) -> np.ndarray:
        d = self.drivers(t)
        a = self.econ.capital_share
        k = np.maximum(x[:, K1:K2 + 1], 0.0)
        return d["tfp"] * k ** a * d["population"] ** (1.0 - a)

    def hazard(self, x: np.ndarray, chi: np.ndarray) -> np.ndarray:
        c = self.climate
        p = -np.expm1(-c.hazard_rate * np.maximum(0.0, x[:, TN] - c.tip_threshold))
        return np.where(np.asarray(chi) == 0, p, 0.0)

    def context(self, x: np.ndarray, chi, t: int) -> NodeContext:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        chi = np.broadcast_to(np.asarray(chi, dtype=int), (n,)).copy()
        d = self.drivers(t)
        c = self.climate
        a = self.carbon_matrix
        phi = self.temperature_matrix
        m = x[:, MAT:MDO + 1]
        temp = x[:, TN:TO + 1]
        nxt = np.empty((n, N_STATE))
        nxt[:, K1:K2 + 1] = np.nan
        nxt[:, MAT] = np.nan
        nxt[:, MUO] = m @ a[1]
        nxt[:, MDO] = m @ a[2]
        forcing = c.eta * np.log2(np.maximum(x[:, MAT], 1e-9) / c.m_star) + d["forcing_ex"]
        nxt[:, TN:TO + 1] = temp @ phi.T
        nxt[:, TN] += c.xi1 * forcing
        nxt[:, TS] += c.xi1 * forcing
        if self.toggles.slr:
            nxt[:, SL] = x[:, SL] + c.slr_coef * np.maximum(x[:, TN], 0.0) ** c.slr_power + c.slr_ocean * x[:, TO]
        else:
            nxt[:, SL] = x[:, SL]
        nxt[:, JD] = np.minimum(c.tip_max_damage, x[:, JD] + c.tip_increment) * chi
        perm = permafrost_emission(x[:, TN], c) if self.toggles.permafrost else np.zeros(n)
        return NodeContext(
            t=int(t), x=x, chi=chi, population=d["population"], intensity=d["intensity"],
            abatement_coef=d["abatement_coef"], backstop=d["backstop"],
            gross=self.gross_output(x, t), damage=self.damages(x), survive=1.0 - x[:, JD],
            other_emission=perm + d["land_emission"], mat_base=m @ a[0], fixed_next=nxt,
            hazard=self.hazard(x, chi),
        )

    # ------------------------------------------------------------ production
    def output(self, ctx: NodeContext, mu: np.ndarray, adapt: np.ndarray):
        """Net output, available output and its derivatives in ``mu`` and ``adapt``.

        All arrays are (n, 2).
        """
        e = self.econ
        mu = np.maximum(mu, 0.0)
        adapt = np.maximum(adapt, 0.0)
        omega = 1.0 / (1.0 + (1.0 - adapt) * ctx.damage)
        y = ctx.survive[:, None] * omega * ctx.gross
        abate = ctx.abatement_coef * mu ** e.abatement_exponent
        adapt_cost = e.adapt_cost_scale * adapt ** e.adapt_cost_exponent
        share = 1.0 - abate - adapt_cost
        y_hat = y * share
        dmu = -y * ctx.abatement_coef * e.abatement_exponent * mu ** (e.abatement_exponent - 1.0)
        dadapt = y * (ctx.damage * omega * share
                      - e.adapt_cost_scale * e.adapt_cost_exponent * adapt ** (e.adapt_cost_exponent - 1.0))
        return y, y_hat, dmu, dadapt

    def emissions(self, ctx: NodeContext, mu: np.ndarray):
        """Global emissions (n,) and derivative with respect to each region's control (n, 2)."""
        ind = ctx.intensity * ctx.gross
        return np.sum(ind * (1.0 - mu), axis=1) + ctx.other_emission, -ind

    def next_state(self, ctx: NodeContext, k_next: np.ndarray, emission: np.ndarray) -> np.ndarray:
        nxt = ctx.fixed_next.copy()
        nxt[:, K1:K2 + 1] = k_next
        nxt[:, MAT] = ctx.mat_base + emission
        return nxt

    def best_adaptation(self, ctx: NodeContext, mu: np.ndarray) -> np.ndarray:
        if not self.toggles.adaptation:
            return np.zeros_like(mu)
        return optimal_adaptation(mu, ctx.damage, ctx.abatement_coef, self.econ)

    # ---------------------------------------------------------- continuation
    def continuation(self, ctx: NodeContext, x_next: np.ndarray, vf) -> tuple[np.ndarray, np.ndarray]:
        """Certainty equivalent of next-period value and its gradient in the next state.

        ``vf`` is a fitted value function with layers 0 (not tipped) and,
        when the hazard is positive, 1 (tipped).
        """
        prefs = self.prefs
        n = ctx.n
        g = np.empty(n)
        dg = np.empty((n, N_STATE))
        tipped = ctx.chi == 1
        if np.any(tipped):
            g[tipped], dg[tipped] = vf.eval_grad(x_next[tipped], 1)
        risky = (~tipped) & (ctx.hazard > 0)
        safe = (~tipped) & ~risky
        if np.any(safe):
            g[safe], dg[safe] = vf.eval_grad(x_next[safe], 0)
        if np.any(risky):
            xs = x_next[risky]
            v0, d0 = vf.eval_grad(xs, 0)
            v1, d1 = vf.eval_grad(xs, 1)
            p = ctx.hazard[risky]
            vals = np.stack([v0, v1], axis=-1)
            grads = np.stack([d0, d1], axis=-2)
            probs = np.stack([1.0 - p, p], axis=-1)
            g[risky], dg[risky] = ez_aggregate_grad(vals, grads, probs, prefs.theta, prefs.kappa)
        return g, dg

    # ---------------------------------------------------------- terminal value
    def terminal_values(self, x: np.ndarray, chi, t: int | None = None, years: int = 301,
                        savings: float | None = None, pooled: bool | None = None) -> np.ndarray:
        """Discounted regional utility along a fixed-policy path from ``x``.

        Full abatement, constant savings ``savings`` (default: the modified
        golden rule ``alpha delta / (delta + rho)``), adaptation held at the
        output-maximising level for the starting damages, no further tipping
        draws.  Exogenous drivers stay at their values at ``t`` (default: the
        horizon).  Without pooling there are no capital flows.  With
        ``pooled`` (default: free capital transfers) investment is directed so
        that next year's marginal products are equal and consumption per head
        is equal across regions, which is what costless transfers would
        deliver after the horizon.  Returns an (n, 2) array.
        """
        t = self.horizon if t is None else t
        e = self.econ
        prefs = self.prefs
        if savings is None:
            rho = 1.0 / prefs.beta - 1.0
            savings = e.capital_share * e.depreciation / (e.depreciation + rho)
        x = np.atleast_2d(np.array(x, dtype=float))
        n = x.shape[0]
        chi = np.broadcast_to(np.asarray(chi, dtype=int), (n,))
        ones = np.ones((n, 2))
        ctx = self.context(x, chi, t)
        adapt = self.best_adaptation(ctx, ones)
        total = np.zeros((n, 2))
        disc = 1.0
        pop = ctx.population
        if pooled is None:
            pooled = self.toggles.capital_transfer and e.adjustment_cost == 0.0
        a = e.capital_share
        for _ in range(years):
            ctx = self.context(x, chi, t)
            ctx.hazard[:] = 0.0
            _, y_hat, _, _ = self.output(ctx, ones, adapt)
            if np.any(y_hat <= 0):
                raise DomainError("non-positive available output along terminal path")
            k_next = (1.0 - e.depreciation) * x[:, K1:K2 + 1] + savings * y_hat
            if pooled:
                c = (1.0 - savings) * y_hat.sum(axis=1, keepdims=True) / pop.sum() * ones
                # available output is proportional to K**a: split next year's capital by equal marginal products
                weight = (y_hat / x[:, K1:K2 + 1] ** a) ** (1.0 / (1.0 - a))
                k_next = k_next.sum(axis=1, keepdims=True) * weight / weight.sum(axis=1, keepdims=True)
            else:
                c = (1.0 - savings) * y_hat / pop
            total += disc * prefs.utility(c) * pop
            disc *= prefs.beta
            emis, _ = self.emissions(ctx, ones)
            x = self.next_state(ctx, k_next, emis)
        return total

    # ------------------------------------------------------- heuristic paths
    def heuristic_path(self, savings: float, mu_path, allocation: str = "autarky",
                       tipped: bool = False, horizon: int | None = None) -> np.ndarray:
        """Deterministic path under a simple rule, used to size approximation boxes.

        ``allocation="equalize"`` directs total investment so that next-year
        capital has equal marginal product across regions.
        """
        horizon = self.horizon if horizon is None else horizon
        e = self.econ
        a = e.capital_share
        x = self.initial_state()[None, :]
        chi = np.array([1 if tipped else 0])
        out = np.empty((horizon + 1, N_STATE))
        out[0] = x[0]
        for t in range(horizon):
            ctx = self.context(x, chi, t)
            mu = np.full((1, 2), float(mu_path(t)))
            adapt = self.best_adaptation(ctx, mu)
            _, y_hat, _, _ = self.output(ctx, mu, adapt)
            inv = savings * y_hat
            k_next = (1.0 - e.depreciation) * x[:, K1:K2 + 1] + inv
            if allocation == "equalize":
                d0, d1 = self.drivers(t), self.drivers(t + 1)
                # net output per unit K**a, rolled forward with the exogenous drivers
                mpk = (y_hat[0] / x[0, K1:K2 + 1] ** a * d1["tfp"] / d0["tfp"]
                       * (d1["population"] / d0["population"]) ** (1.0 - a))
                weight = mpk ** (1.0 / (1.0 - a))
                k_next = k_next.sum() * weight / weight.sum()
                k_next = k_next[None, :]
            emis, _ = self.emissions(ctx, mu)
            x = self.next_state(ctx, k_next, emis)
            out[t + 1] = x[0]
        return out


@dataclass(frozen=True)
class DomainSettings:
    """How approximation boxes are sized around heuristic paths."""

    pad: float = 0.25
    rel_floor: float = 0.08
    abs_floor: tuple[float, ...] = (2.0, 2.0, 10.0, 10.0, 10.0, 0.05, 0.05, 0.01, 0.01, 0.002)
    savings: tuple[float, ...] = (0.18, 0.34)
    mu_paths: tuple[str, ...] = ("slow", "fast")
    allocations: tuple[str, ...] = ("autarky", "equalize")
    log_capital: bool = True
    free_transfer_cost: float = 0.1   # below this adjustment cost capital is treated as pooled
    ratio_floor: float = 0.3          # minimum width of the log north/south capital ratio when pooled


_MU_RULES = {
    "slow": lambda t: min(1.0, 0.03 + t / 180.0),
    "fast": lambda t: min(1.0, 0.6 + t / 50.0),
    "none": lambda t: 0.0,
    "full": lambda t: 1.0,
}


def free_transfers(model: Model, settings: DomainSettings = DomainSettings()) -> bool:
    """Whether capital transfers are cheap enough to treat capital as pooled."""
    return model.toggles.capital_transfer and model.econ.adjustment_cost < settings.free_transfer_cost


def heuristic_paths(model: Model, settings: DomainSettings = DomainSettings()):
    """Heuristic trajectories, shape (n_paths, T+1, 10), and a mask of the tipped ones."""
    paths, tipped_mask = [], []
    allocations = tuple(settings.allocations)
    if free_transfers(model, settings):
        # without transfer costs capital never stays in the autarky split
        allocations = tuple(a for a in allocations if a != "autarky") or ("equalize",)
    for s in settings.savings:
        for mu in settings.mu_paths:
            for alloc in allocations:
                for tipped in ((False, True) if model.climate.hazard_rate > 0 else (False,)):
                    paths.append(model.heuristic_path(s, _MU_RULES[mu], alloc, tipped))
                    tipped_mask.append(tipped)
    return np.stack(paths), np.array(tipped_mask)


def domain_from_paths(paths: np.ndarray, model: Model, settings: DomainSettings = DomainSettings(),
                      transform: np.ndarray | None = None) -> Domain:
    """Padded per-year bounding boxes of the given trajectories.

    Boxes are built in the coordinates of ``transform`` (default:
    :meth:`Model.coordinate_map`), with capital on a log scale when
    ``settings.log_capital`` is set.  Under free transfers the log capital
    pair is rotated to (mean, north-south difference): capital then moves to
    a narrow band of regional ratios, which an axis-aligned box in regional
    coordinates would cover badly.  Stocks stay positive and tipping damage
    stays within ``[0, tip_max_damage]``.
    """
    r = model.coordinate_map() if transform is None else transform
    logs = (K1, K2) if settings.log_capital else ()
    mix = None
    if logs and free_transfers(model, settings):
        mix = np.eye(N_STATE)
        mix[K1, K1:K2 + 1] = 0.5
        mix[K2, K1:K2 + 1] = (1.0, -1.0)
    y = paths @ r.T
    if logs:
        y[..., logs] = np.log(y[..., logs])
    if mix is not None:
        y = y @ mix.T
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    mid = 0.5 * (lo + hi)
    floor = np.broadcast_to(np.asarray(settings.abs_floor, dtype=float), lo.shape).copy()
    rel = settings.rel_floor * np.abs(mid)
    if logs:
        floor[:, logs] = 0.0
        rel[:, logs] = settings.rel_floor
    if mix is not None:
        floor[:, K2] = settings.ratio_floor
    width = np.maximum.reduce([hi - lo, rel, floor])
    lower = lo - settings.pad * width
    upper = hi + settings.pad * width
    positive = [j for j in (K1, K2, MAT, MUO, MDO) if j not in logs]
    lower[:, positive] = np.maximum(lower[:, positive], 0.2 * lo[:, positive])
    jmax = max(model.climate.tip_max_damage, settings.abs_floor[JD])
    lower[:, JD] = np.clip(lower[:, JD], 0.0, jmax - settings.abs_floor[JD])
    upper[:, JD] = np.clip(upper[:, JD], lower[:, JD] + settings.abs_floor[JD], jmax)
    return Domain(lower, upper, r, logs, mix)


def layer_domains(paths: np.ndarray, tipped: np.ndarray, model: Model,
                  settings: DomainSettings = DomainSettings(), transform=None) -> dict:
    """One domain per indicator layer.

    The untipped layer is sized on untipped paths only.  The tipped layer
    uses every path: a state on an untipped path is exactly what the tipped
    layer sees in the year tipping occurs.
    """
    out = {0: domain_from_paths(paths[~np.asarray(tipped)], model, settings, transform)}
    if model.climate.hazard_rate > 0:
        out[1] = domain_from_paths(paths, model, settings, transform)
    return out


def expand_domain(domain: Domain, paths: np.ndarray, model: Model, settings: DomainSettings = DomainSettings()) -> Domain:
    """Smallest padded domain containing both ``domain`` and ``paths``."""
    extra = domain_from_paths(paths, model, settings, domain.transform)
    return Domain(np.minimum(domain.lower, extra.lower), np.maximum(domain.upper, extra.upper), domain.transform,
                  domain.log_dims, domain.mix)
