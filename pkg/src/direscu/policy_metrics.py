"""Carbon taxes, Monte Carlo simulation of tipping paths and fan charts.

Because the tipping event is the only random element, every simulated path
coincides with the no-tipping path until its tipping year and then with the
(deterministic) post-tipping branch that starts there.  Branches are
computed once per distinct tipping year and shared by all paths that tip in
that year; policies are re-optimised at every realised state.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dp_sp import CONTROL_NAMES
from .model import K1, K2, MAT, N_STATE, STATE_NAMES

TAX_NAMES = ("tax_north", "tax_south")
EXTRA_NAMES = ("output_north", "output_south", "emission", "hazard")
SERIES_NAMES = STATE_NAMES + ("chi",) + CONTROL_NAMES + TAX_NAMES + EXTRA_NAMES


def tax_from_gradient(grad_m_at, grad_k):
    """``-1000 * dV/dM_AT / dV/dK`` in dollars per ton of carbon (NaN where both gradients vanish)."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return -1000.0 * np.asarray(grad_m_at) / np.asarray(grad_k)


def scc_sp(solution, x, chi, t: int) -> np.ndarray:
    """Regional carbon taxes implied by the planner's value function, shape (n, 2)."""
    x = np.atleast_2d(x)
    _, g = solution.value_functions[t].eval_grad(x, chi)
    return np.column_stack([tax_from_gradient(g[:, MAT], g[:, K1]), tax_from_gradient(g[:, MAT], g[:, K2])])


def scc_fbne(solution, x, chi, t: int) -> np.ndarray:
    """Regional carbon taxes from each player's own value function, shape (n, 2)."""
    x = np.atleast_2d(x)
    out = []
    for i, kcol in enumerate((K1, K2)):
        _, g = solution.value_functions[i][t].eval_grad(x, chi)
        out.append(tax_from_gradient(g[:, MAT], g[:, kcol]))
    return np.column_stack(out)


def _draws(seed: int, paths: np.ndarray, horizon: int) -> np.ndarray:
    """Uniform draws keyed by (seed, path) so any subset reproduces the same numbers."""
    out = np.empty((paths.size, horizon))
    for row, p in enumerate(paths):
        gen = np.random.Generator(np.random.Philox(key=[int(seed), int(p)]))
        out[row] = gen.random(horizon)
    return out


@dataclass
class SimulationEnsemble:
    """Simulated paths stored as shared branches.

    ``tip_year[p]`` is the first year with the indicator set on path ``p``
    (``-1`` if never).  ``branches[tau]`` maps series names to arrays of
    length ``T + 1``; ``branches[-1]`` is the no-tipping path.
    """

    seed: int
    horizon: int
    path_ids: np.ndarray
    tip_year: np.ndarray
    branches: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.path_ids.size

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.horizon + 1)

    def series(self, name: str) -> np.ndarray:
        """(n_paths, T+1) array of one series."""
        keys = sorted(self.branches)
        table = np.stack([self.branches[k][name] for k in keys])
        pos = np.searchsorted(np.array(keys), self.tip_year)
        return table[pos]

    def path(self, p: int) -> dict:
        row = int(np.flatnonzero(self.path_ids == p)[0])
        return self.branches[int(self.tip_year[row])]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "path_ids": self.path_ids.tolist(),
            "tip_year": self.tip_year.tolist(),
            "branches": {str(k): {n: np.asarray(v).tolist() for n, v in b.items()} for k, b in self.branches.items()},
        }

    def save_json(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict()))


def _record(solution, model, rows, x, chi, t, sol, taxes):
    ctx = model.context(x, chi, t)
    ctrl = sol.controls if sol is not None else np.full((x.shape[0], len(CONTROL_NAMES)), np.nan)
    if sol is not None:
        _, y_hat, _, _ = model.output(ctx, ctrl[:, 4:6], ctrl[:, 6:8])
        emis, _ = model.emissions(ctx, ctrl[:, 4:6])
    else:
        y_hat = np.full((x.shape[0], 2), np.nan)
        emis = np.full(x.shape[0], np.nan)
    for r, b in enumerate(rows):
        for j, name in enumerate(STATE_NAMES):
            b[name][t] = x[r, j]
        b["chi"][t] = chi[r]
        for j, name in enumerate(CONTROL_NAMES):
            b[name][t] = ctrl[r, j]
        b["tax_north"][t], b["tax_south"][t] = taxes[r]
        b["output_north"][t], b["output_south"][t] = y_hat[r]
        b["emission"][t] = emis[r]
        b["hazard"][t] = ctx.hazard[r]


def simulate_branches(solution, tip_years, horizon: int | None = None) -> dict:
    """Deterministic branches: the no-tipping path and one path per tipping year.

    A branch with tipping year ``tau`` has the indicator set from year ``tau``
    on; before that it coincides with the no-tipping path.  ``tau = 0``
    starts in the tipped state.
    """
    model = solution.model
    horizon = solution.horizon if horizon is None else horizon
    tip_years = sorted({int(y) for y in tip_years if 0 <= int(y) <= horizon})
    if model.climate.hazard_rate <= 0:
        tip_years = []
    keys = [-1] + tip_years
    branches = {k: {n: np.full(horizon + 1, np.nan) for n in SERIES_NAMES} for k in keys}
    state = {-1: model.initial_state()}
    warm = {}
    for t in range(horizon + 1):
        for k in tip_years:
            if k == t:
                state[k] = state[-1].copy()
        live = [k for k in keys if k in state]
        x = np.stack([state[k] for k in live])
        chi = np.array([0 if k == -1 else 1 for k in live])
        taxes = solution.tax(x, chi, t)
        if t == horizon:
            _record(solution, model, [branches[k] for k in live], x, chi, t, None, taxes)
            break
        w = np.stack([warm[k] for k in live]) if all(k in warm for k in live) else None
        sol = solution.policy(x, chi, t, warm=w)
        _record(solution, model, [branches[k] for k in live], x, chi, t, sol, taxes)
        for r, k in enumerate(live):
            state[k] = sol.next_state[r]
            warm[k] = sol.reduced[r] / sol.scale[r]
        if -1 in warm:
            for k in tip_years:
                if k == t + 1:
                    warm[k] = warm[-1]
    for k in tip_years:
        for name in SERIES_NAMES:
            branches[k][name][:k] = branches[-1][name][:k]
    return branches


def branch_paths(solution, tip_years=(0, 25, 50, 75)) -> np.ndarray:
    """State trajectories of the probe branches, shape (n_branches, T+1, 10)."""
    b = simulate_branches(solution, tip_years)
    return np.stack([np.column_stack([br[n] for n in STATE_NAMES]) for br in b.values()])


def simulate(solution, n_paths: int, seed: int, horizon: int | None = None, path_ids=None) -> SimulationEnsemble:
    """Monte Carlo ensemble of ``n_paths`` tipping scenarios under the solved policy.

    Path ``p`` uses uniform draws from a Philox stream keyed by
    ``(seed, p)``, so the ensemble is identical however paths are split.
    """
    horizon = solution.horizon if horizon is None else horizon
    ids = np.arange(n_paths) if path_ids is None else np.asarray(path_ids, dtype=int)
    base = simulate_branches(solution, [], horizon)[-1]
    hazard = base["hazard"][:horizon]
    u = _draws(seed, ids, horizon)
    hit = u < hazard[None, :]
    tip = np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, -1)
    needed = sorted(set(tip[tip > 0].tolist()))
    branches = simulate_branches(solution, needed, horizon) if needed else {-1: base}
    return SimulationEnsemble(seed=seed, horizon=horizon, path_ids=ids, tip_year=tip, branches=branches)


def simulate_tipping(t_north, n_paths: int, seed: int, params=None) -> np.ndarray:
    """Tipping years under a pinned north-temperature path (``-1`` if never).

    Uses the same keyed draws as :func:`simulate`; the indicator set in year
    ``t`` reflects the draw against the hazard at ``t_north[t - 1]``.
    """
    from .climate import ClimateParams, TippingState, step_tipping

    p = ClimateParams() if params is None else params
    t_north = np.asarray(t_north, dtype=float)
    u = _draws(seed, np.arange(n_paths), t_north.size)
    state = TippingState(np.zeros(n_paths), np.zeros(n_paths, dtype=int))
    tip = np.full(n_paths, -1)
    for t, temp in enumerate(t_north):
        state = step_tipping(state, temp, u[:, t], p)
        tip = np.where((tip < 0) & (state.chi == 1), t + 1, tip)
    return tip


def tipping_frequency(ens: SimulationEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Empirical and theoretical share of paths tipped by each year."""
    years = ens.years
    tipped = (ens.tip_year[:, None] >= 0) & (ens.tip_year[:, None] <= years[None, :])
    empirical = tipped.mean(axis=0)
    hazard = np.nan_to_num(ens.branches[-1]["hazard"][:-1])
    survive = np.concatenate([[1.0], np.cumprod(1.0 - hazard)])
    return empirical, 1.0 - survive


@dataclass
class FanChart:
    """Per-year mean, lower quantiles (nearest rank) and extremes of a series."""

    name: str
    years: np.ndarray
    mean: np.ndarray
    q01: np.ndarray
    q02: np.ndarray
    q05: np.ndarray
    min: np.ndarray
    max: np.ndarray

    def rows(self):
        for i, y in enumerate(self.years):
            yield [int(y), self.mean[i], self.q01[i], self.q02[i], self.q05[i], self.min[i], self.max[i]]

    def save_csv(self, path: str | Path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["year", "mean", "q01", "q02", "q05", "min", "max"])
            w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def nearest_rank(sorted_values: np.ndarray, q: float) -> np.ndarray:
    """Nearest-rank quantile along axis 0 of an already sorted array."""
    n = sorted_values.shape[0]
    k = max(int(np.ceil(q * n)) - 1, 0)
    return sorted_values[k]


def fan_chart(ens: SimulationEnsemble, name: str) -> FanChart:
    data = ens.series(name)
    s = np.sort(data, axis=0)
    return FanChart(name=name, years=ens.years, mean=data.mean(axis=0), q01=nearest_rank(s, 0.01),
                    q02=nearest_rank(s, 0.02), q05=nearest_rank(s, 0.05), min=s[0], max=s[-1])
