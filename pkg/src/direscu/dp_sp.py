"""Cooperative (social planner) solution by backward induction.

At each year the planner's Bellman problem is solved at every approximation
node with a batched projected-Newton method; node values are fitted with a
complete Chebyshev basis, one coefficient vector per tipping layer.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .approx import Domain, ValueFunctionApprox, cheb_nodes, fit_layers
from .errors import ApproximationError, SolverError
from .model import JD, K1, K2, Model, NodeContext, heuristic_paths, layer_domains
from .optim import maximize_box, natural_residual
from .preferences import Preferences, ez_aggregate, ez_aggregate_grad  # noqa: F401  (re-exported)

CONTROL_NAMES = ("inv_north", "inv_south", "c_north", "c_south",
                 "mu_north", "mu_south", "adapt_north", "adapt_south")


@dataclass
class NodeSolution:
    """Solutions of a batch of node problems.

    ``controls`` has columns :data:`CONTROL_NAMES`; ``reduced`` holds the
    free variables actually optimised (used for warm starts).
    """

    value: np.ndarray
    controls: np.ndarray
    reduced: np.ndarray
    scale: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    next_state: np.ndarray
    iterations: np.ndarray

    @property
    def flagged(self) -> np.ndarray:
        return ~self.converged


class PlannerNodes:
    """Planner node problems for a batch of states at one year.

    Free variables are ``(c_north, inv_north, inv_south, mu, adapt)`` when
    capital can move between regions (south consumption then follows from
    market clearing with adjustment costs) and ``(inv_north, inv_south, mu,
    adapt)`` for closed regional budgets (consumption is the budget residual).
    """

    def __init__(self, model: Model, ctx: NodeContext, vf_next: ValueFunctionApprox, min_capital_ratio: float = 0.5):
        self.model = model
        self.ctx = ctx
        self.vf = vf_next
        self.open = model.toggles.capital_transfer
        e = model.econ
        n = ctx.n
        k = ctx.x[:, K1:K2 + 1]
        zero = np.zeros((n, 2))
        adapt0 = model.best_adaptation(ctx, zero)
        _, ymax, _, _ = model.output(ctx, zero, adapt0)
        self.ref_output = ymax
        inv_lo = (min_capital_ratio - (1.0 - e.depreciation)) * k
        total = ymax.sum(axis=1)
        adapt_hi = 1.0 if model.toggles.adaptation else 0.0
        if self.open:
            inv_hi = np.stack([total, total], axis=1)
            pop = ctx.population
            self.lo = np.column_stack([1e-6 * ymax[:, 0] / pop[0], inv_lo, zero, zero])
            self.hi = np.column_stack([total / pop[0], inv_hi, np.ones((n, 2)), np.full((n, 2), adapt_hi)])
            self.scale = np.column_stack([0.75 * ymax[:, 0] / pop[0], ymax, np.ones((n, 4))])
        else:
            self.lo = np.column_stack([inv_lo, zero, zero])
            self.hi = np.column_stack([ymax, np.ones((n, 2)), np.full((n, 2), adapt_hi)])
            self.scale = np.column_stack([ymax, np.ones((n, 4))])
        self.lo = np.minimum(self.lo, self.hi)

    @property
    def n_free(self) -> int:
        return 7 if self.open else 6

    def initial_guess(self, mu: float = 0.3, savings: float = 0.25) -> np.ndarray:
        ctx = self.ctx
        n = ctx.n
        mu_a = np.full((n, 2), mu)
        adapt = self.model.best_adaptation(ctx, mu_a) if self.model.toggles.adaptation else np.zeros((n, 2))
        _, y_hat, _, _ = self.model.output(ctx, mu_a, adapt)
        inv = savings * y_hat
        if self.open:
            c1 = (1.0 - savings) * y_hat[:, 0] / ctx.population[0]
            u = np.column_stack([c1, inv, mu_a, adapt])
        else:
            u = np.column_stack([inv, mu_a, adapt])
        return np.clip(u, self.lo, self.hi)

    # ----------------------------------------------------------------- core
    def evaluate(self, u: np.ndarray, idx: np.ndarray, grad: bool = True):
        """Objective, gradient and auxiliary quantities for rows ``idx``."""
        m = self.model
        e = m.econ
        prefs = m.prefs
        ctx = self.ctx.take(idx)
        pop = ctx.population
        if self.open:
            c1, inv, mu, adapt = u[:, 0], u[:, 1:3], u[:, 3:5], u[:, 5:7]
        else:
            inv, mu, adapt = u[:, 0:2], u[:, 2:4], u[:, 4:6]
        y, y_hat, dyh_mu, dyh_adapt = m.output(ctx, mu, adapt)
        with np.errstate(invalid="ignore", divide="ignore"):
            if self.open:
                b = e.adjustment_cost
                z1 = inv[:, 0] + c1 * pop[0]
                gam1 = 0.5 * b * (z1 - y_hat[:, 0]) ** 2 / y_hat[:, 0]
                q = y_hat[:, 0] - z1 - gam1
                bb = 0.5 * b / y_hat[:, 1]
                disc = 1.0 + 4.0 * bb * q
                root = np.sqrt(np.maximum(disc, 0.0))
                w = 2.0 * q / (1.0 + root)
                c2 = (y_hat[:, 1] + w - inv[:, 1]) / pop[1]
                cons = np.column_stack([c1, c2])
                feasible = (disc > 0) & (c2 > 0) & np.all(y_hat > 0, axis=1)
            else:
                cons = (y_hat - inv) / pop
                feasible = np.all(cons > 0, axis=1) & np.all(y_hat > 0, axis=1)
            k_next = (1.0 - e.depreciation) * ctx.x[:, K1:K2 + 1] + inv
            feasible &= np.all(k_next > 0, axis=1)
            emis, demis = m.emissions(ctx, mu)
            x_next = m.next_state(ctx, k_next, emis)
            cs = np.where(feasible[:, None], cons, 1.0)
            g_next, dg_next = m.continuation(ctx, x_next, self.vf)
            f = np.sum(prefs.utility(cs) * pop, axis=1) + prefs.beta * g_next
        f = np.where(feasible, f, -np.inf)
        aux = {"c": cons, "inv": inv, "mu": mu, "adapt": adapt, "x_next": x_next, "y": y, "y_hat": y_hat}
        if not grad:
            return f, None, aux
        mu_c = prefs.marginal_utility(cs)
        bgk = prefs.beta * dg_next[:, K1:K2 + 1]
        bgm = prefs.beta * dg_next[:, 2]
        if self.open:
            dwdq = 1.0 / np.where(feasible, root, 1.0)
            dwdy2 = b * w * w / (2.0 * y_hat[:, 1] ** 2) * dwdq
            dqdz1 = -(1.0 + b * (z1 - y_hat[:, 0]) / y_hat[:, 0])
            dqdy1 = 1.0 - 0.5 * b * (1.0 - z1 ** 2 / y_hat[:, 0] ** 2)
            m2 = mu_c[:, 1]
            dy = np.column_stack([m2 * dwdq * dqdy1, m2 * (1.0 + dwdy2)])
            g = np.column_stack([
                mu_c[:, 0] * pop[0] + m2 * dwdq * dqdz1 * pop[0],
                bgk[:, 0] + m2 * dwdq * dqdz1,
                bgk[:, 1] - m2,
                dy * dyh_mu + bgm[:, None] * demis,
                dy * dyh_adapt,
            ])
        else:
            g = np.column_stack([
                bgk - mu_c,
                mu_c * dyh_mu + bgm[:, None] * demis,
                mu_c * dyh_adapt,
            ])
        g = np.where(feasible[:, None], g, np.nan)
        aux["marginal_utility"] = mu_c
        return f, g, aux

    def fg(self, u, idx):
        f, g, _ = self.evaluate(u, idx)
        return f, g

    def kkt(self, u, g, idx):
        """Largest scaled natural residual (dimensionless, marginal-utility units)."""
        _, _, aux = self.evaluate(u, idx, grad=False)
        prefs = self.model.prefs
        c = np.where(np.isfinite(aux["c"]) & (aux["c"] > 0), aux["c"], 1.0)
        mu_c = prefs.marginal_utility(c)
        y = aux["y"]
        pop = self.ctx.population
        scale = self.scale[idx]
        if self.open:
            lam = mu_c[:, 1:2]
            resource = np.column_stack([scale[:, 0] * pop[0], scale[:, 1:3], y, y])
        else:
            lam = np.column_stack([mu_c, mu_c, mu_c])
            resource = np.column_stack([scale[:, 0:2], y, y])
        phi = g * scale / (lam * resource)
        r = natural_residual(u, phi, self.lo[idx], self.hi[idx], scale)
        out = np.max(np.abs(r), axis=1)
        return np.where(np.isfinite(out), out, np.inf)

    def full_controls(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        f, _, aux = self.evaluate(u, np.arange(u.shape[0]), grad=False)
        ctrl = np.column_stack([aux["inv"], aux["c"], aux["mu"], aux["adapt"]])
        return f, ctrl, aux["x_next"]


class PooledNodes(PlannerNodes):
    """Open-economy node problems parametrised by total investment and the north share.

    Free variables are ``(c_north, total_inv, share, mu, adapt)`` with
    next-year capital ``share * K'`` in the north and the rest in the south.
    Used when the next value function lives in (mean, log-ratio) capital
    coordinates: the share is then bounded to that box, which keeps the
    weakly identified split away from far extrapolation.  The share may
    reach ``share_reach`` box widths beyond either edge, so that a split the
    box does not cover shows up as a path outside it and the box is refined.
    """

    share_reach = 0.0

    def __init__(self, model: Model, ctx: NodeContext, vf_next: ValueFunctionApprox, min_capital_ratio: float = 0.5):
        super().__init__(model, ctx, vf_next, min_capital_ratio)
        n = ctx.n
        self.kept = (1.0 - model.econ.depreciation) * ctx.x[:, K1:K2 + 1]
        ktot = ctx.x[:, K1] + ctx.x[:, K2]
        s_lo, s_hi = np.empty(n), np.empty(n)
        for layer, box in vf_next.boxes.items():
            sel = ctx.chi == layer
            reach = self.share_reach * (box.upper[K2] - box.lower[K2])
            s_lo[sel] = 1.0 / (1.0 + np.exp(reach - box.lower[K2]))
            s_hi[sel] = 1.0 / (1.0 + np.exp(-box.upper[K2] - reach))
        total = self.ref_output.sum(axis=1)
        self.lo = np.column_stack([self.lo[:, 0], (min_capital_ratio - (1.0 - model.econ.depreciation)) * ktot,
                                   s_lo, self.lo[:, 3:]])
        self.hi = np.column_stack([self.hi[:, 0], total, s_hi, self.hi[:, 3:]])
        self.scale = np.column_stack([self.scale[:, 0], total, np.ones(n), self.scale[:, 3:]])

    def _to_base(self, u, idx):
        k_next = self.kept[idx].sum(axis=1) + u[:, 1]
        inv = np.column_stack([u[:, 2] * k_next, (1.0 - u[:, 2]) * k_next]) - self.kept[idx]
        return np.column_stack([u[:, 0], inv, u[:, 3:]]), k_next

    def initial_guess(self, mu: float = 0.3, savings: float = 0.25) -> np.ndarray:
        base = super().initial_guess(mu, savings)
        k_next = self.kept.sum(axis=1) + base[:, 1] + base[:, 2]
        share = 0.5 * (self.lo[:, 2] + self.hi[:, 2])
        return np.clip(np.column_stack([base[:, 0], k_next - self.kept.sum(axis=1), share, base[:, 3:]]),
                       self.lo, self.hi)

    def evaluate(self, u: np.ndarray, idx: np.ndarray, grad: bool = True):
        base, k_next = self._to_base(u, idx)
        f, g, aux = super().evaluate(base, idx, grad)
        if g is not None:
            s = u[:, 2]
            g = np.column_stack([g[:, 0], s * g[:, 1] + (1.0 - s) * g[:, 2], k_next * (g[:, 1] - g[:, 2]), g[:, 3:]])
        aux["k_next"] = k_next
        return f, g, aux

    def kkt(self, u, g, idx):
        _, _, aux = self.evaluate(u, idx, grad=False)
        prefs = self.model.prefs
        c = np.where(np.isfinite(aux["c"]) & (aux["c"] > 0), aux["c"], 1.0)
        lam = prefs.marginal_utility(c)[:, 1:2]
        y = aux["y"]
        scale = self.scale[idx]
        resource = np.column_stack([scale[:, 0] * self.ctx.population[0], scale[:, 1], aux["k_next"], y, y])
        phi = g * scale / (lam * resource)
        r = natural_residual(u, phi, self.lo[idx], self.hi[idx], scale)
        out = np.max(np.abs(r), axis=1)
        return np.where(np.isfinite(out), out, np.inf)


def solve_nodes_sp(model: Model, x, chi, t: int, vf_next: ValueFunctionApprox, kkt_tol: float = 1e-6,
                   max_iter: int = 60, multistart: int = 3, min_capital_ratio: float = 0.5,
                   warm: np.ndarray | None = None) -> NodeSolution:
    """Solve the planner's node problems for a batch of states at year ``t``.

    Parameters
    ----------
    x : (n, 10) states; chi : (n,) tipping indicators
    vf_next : fitted value function for year ``t + 1``
    warm : optional (n, k) starting points in scaled units (``reduced / scale``)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ctx = model.context(x, chi, t)
    pooled = model.toggles.capital_transfer and vf_next.box.mix is not None
    prob = (PooledNodes if pooled else PlannerNodes)(model, ctx, vf_next, min_capital_ratio)
    starts = []
    if warm is not None:
        starts.append(np.clip(warm * prob.scale, prob.lo, prob.hi))
    starts.append(prob.initial_guess())
    extra = [(0.05, 0.2), (0.7, 0.3), (0.95, 0.15), (0.3, 0.35)]
    for mu, s in extra[:max(0, multistart - 1)]:
        starts.append(prob.initial_guess(mu, s))
    best = None
    for u0 in starts:
        if best is not None and np.all(best.converged):
            break
        todo = np.arange(x.shape[0]) if best is None else np.flatnonzero(~best.converged)
        sub = _SubProblem(prob, todo)
        res = maximize_box(sub.fg, sub.kkt, u0[todo], prob.lo[todo], prob.hi[todo], prob.scale[todo],
                           tol=kkt_tol, max_iter=max_iter)
        if best is None:
            best = res
            continue
        better = (res.converged & ~best.converged[todo]) | (
            (res.converged == best.converged[todo]) & (res.value > best.value[todo]))
        rows = todo[better]
        best.x[rows], best.value[rows] = res.x[better], res.value[better]
        best.residual[rows], best.converged[rows] = res.residual[better], res.converged[better]
        best.iterations[todo] += res.iterations
    value, controls, x_next = prob.full_controls(best.x)
    return NodeSolution(value=value, controls=controls, reduced=best.x, scale=prob.scale,
                        residual=best.residual, converged=best.converged, next_state=x_next,
                        iterations=best.iterations)


class _SubProblem:
    """Row-restricted view so that solver indices map back to the full batch."""

    def __init__(self, prob: PlannerNodes, rows: np.ndarray):
        self.prob = prob
        self.rows = rows

    def fg(self, u, idx):
        return self.prob.fg(u, self.rows[idx])

    def kkt(self, u, g, idx):
        return self.prob.kkt(u, g, self.rows[idx])


def solve_node_sp(x, t: int, v_next: ValueFunctionApprox, model: Model, chi: int = 0, **kw):
    """Single-state convenience wrapper around :func:`solve_nodes_sp`.

    Returns ``(value, controls)`` with controls as a dict keyed by
    :data:`CONTROL_NAMES`.
    """
    sol = solve_nodes_sp(model, np.atleast_2d(x), np.array([chi]), t, v_next, **kw)
    return float(sol.value[0]), dict(zip(CONTROL_NAMES, sol.controls[0])), sol


# --------------------------------------------------------------------------- backward induction
@dataclass
class StepDiagnostics:
    t: int
    n_nodes: int
    n_flagged: int
    max_residual: float
    fit_residual: dict
    extrapolations: int
    mean_iterations: float
    seconds: float


@dataclass
class PlannerSolution:
    """Fitted value functions ``value_functions[t]`` for ``t = 0..T`` plus diagnostics."""

    model: Model
    domains: dict
    value_functions: list
    diagnostics: list = field(default_factory=list)
    settings: object = None
    refinements: int = 0

    @property
    def horizon(self) -> int:
        return len(self.value_functions) - 1

    def value(self, x, chi, t: int):
        return self.value_functions[t].eval(x, chi)

    def tax(self, x, chi, t: int) -> np.ndarray:
        from .policy_metrics import scc_sp

        return scc_sp(self, x, chi, t)

    def policy(self, x, chi, t: int, warm=None) -> NodeSolution:
        s = self.settings
        return solve_nodes_sp(self.model, x, chi, t, self.value_functions[t + 1], kkt_tol=s.kkt_tol,
                              max_iter=s.max_iter, multistart=s.multistart,
                              min_capital_ratio=s.min_capital_ratio, warm=warm)

    def save(self, directory: str | Path):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for t, vf in enumerate(self.value_functions):
            vf.save(directory / f"value_t{t:03d}.json")
        (directory / "diagnostics.json").write_text(json.dumps([d.__dict__ for d in self.diagnostics], default=float))


def _layers(model: Model) -> tuple[int, ...]:
    return (0, 1) if model.climate.hazard_rate > 0 else (0,)


def terminal_fit(model: Model, domains: dict, settings, region: int | None = None) -> ValueFunctionApprox:
    """Fit of the terminal value at the horizon; ``region=None`` sums both regions."""
    t = len(domains[0]) - 1
    data = {}
    for layer in _layers(model):
        box = domains[layer].at(t)
        nodes = cheb_nodes(box, settings.degree, settings.nodes_per_dim, settings.oversample, settings.node_seed)
        v = model.terminal_values(nodes, layer, t, settings.terminal_years, settings.terminal_savings)
        data[layer] = (nodes, v.sum(axis=1) if region is None else v[:, region - 1], box)
    return fit_layers(data, settings.degree, scale=model.prefs.kappa)


def _layer_nodes(domains: dict, layers, t: int, settings):
    """Nodes of every layer at year ``t``, stacked, with their indicator and boxes."""
    boxes = {layer: domains[layer].at(t) for layer in layers}
    parts = [cheb_nodes(boxes[layer], settings.degree, settings.nodes_per_dim, settings.oversample,
                        settings.node_seed) for layer in layers]
    x = np.vstack(parts)
    chi = np.concatenate([np.full(p.shape[0], layer, dtype=int) for layer, p in zip(layers, parts)])
    return x, chi, boxes


def _fit_with_flags(x, chi, values, ok, boxes, degree, kappa):
    """Per-layer fit dropping unconverged nodes."""
    if np.any(kappa * values[ok] <= 0):
        raise SolverError("transformed node values are not positive")
    data = {layer: (x[(chi == layer) & ok], values[(chi == layer) & ok], box) for layer, box in boxes.items()}
    return fit_layers(data, degree, scale=kappa)


def _outside(domains: dict, t: int, x, chi, margin: float) -> int:
    """Number of states outside their layer's box at year ``t``."""
    count = 0
    for layer, dom in domains.items():
        sel = chi == layer
        if np.any(sel):
            count += int(np.sum(~dom.at(t).contains(x[sel], margin)))
    return count


def _chunked(fn, workers, *arrays):
    """Run ``fn`` on row chunks in worker processes (or inline for one worker)."""
    if workers <= 1:
        return [fn(*arrays)]
    n = arrays[0].shape[0]
    bounds = np.linspace(0, n, workers + 1).astype(int)
    parts = [tuple(a[lo:hi] if a is not None else None for a in arrays) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, *zip(*parts)))


def _concat_solutions(parts: list[NodeSolution]) -> NodeSolution:
    if len(parts) == 1:
        return parts[0]
    return NodeSolution(**{f: np.concatenate([getattr(p, f) for p in parts]) for f in NodeSolution.__dataclass_fields__})


class _NodeTask:
    """Picklable callable solving one chunk of planner nodes."""

    def __init__(self, model, t, vf, settings):
        self.model, self.t, self.vf, self.s = model, t, vf, settings

    def __call__(self, x, chi, warm):
        s = self.s
        return solve_nodes_sp(self.model, x, chi, self.t, self.vf, kkt_tol=s.kkt_tol, max_iter=s.max_iter,
                              multistart=s.multistart, min_capital_ratio=s.min_capital_ratio, warm=warm)


def _backward_sp(model: Model, domains: dict, settings, log=None) -> PlannerSolution:
    layers = _layers(model)
    horizon = len(domains[0]) - 1
    vfs: list = [None] * (horizon + 1)
    vfs[horizon] = terminal_fit(model, domains, settings)
    diags = []
    warm = None
    ckpt = Path(settings.checkpoint_dir) if settings.checkpoint_dir else None
    for t in range(horizon - 1, -1, -1):
        tic = time.perf_counter()
        x, chi, boxes = _layer_nodes(domains, layers, t, settings)
        task = _NodeTask(model, t, vfs[t + 1], settings)
        sol = _concat_solutions(_chunked(task, settings.workers, x, chi, warm))
        flagged = sol.flagged
        if flagged.mean() > settings.max_flagged_fraction:
            raise SolverError(f"year {t}: {int(flagged.sum())} of {flagged.size} node problems did not converge")
        try:
            vfs[t] = _fit_with_flags(x, chi, sol.value, ~flagged, boxes, settings.degree, model.prefs.kappa)
        except ApproximationError as exc:
            raise SolverError(f"year {t}: {exc}") from exc
        vfs[t].extrapolation_margin = settings.extrapolation_margin
        warm = sol.reduced / sol.scale
        diag = StepDiagnostics(t=t, n_nodes=int(x.shape[0]), n_flagged=int(flagged.sum()),
                               max_residual=float(np.max(sol.residual)), fit_residual=dict(vfs[t].fit_residual),
                               extrapolations=_outside(domains, t + 1, sol.next_state, chi,
                                                       settings.extrapolation_margin),
                               mean_iterations=float(np.mean(sol.iterations)), seconds=time.perf_counter() - tic)
        diags.append(diag)
        if ckpt is not None:
            ckpt.mkdir(parents=True, exist_ok=True)
            vfs[t].save(ckpt / f"value_t{t:03d}.json")
        if log:
            log(diag)
    return PlannerSolution(model=model, domains=domains, value_functions=vfs, diagnostics=diags[::-1],
                           settings=settings)


def probe_paths(solution, horizon: int | None = None, tip_years=(0, 25, 50, 75)) -> np.ndarray:
    """Deterministic paths under the solved policy: no tipping (first) plus tipping at fixed years."""
    from .policy_metrics import branch_paths

    return branch_paths(solution, tip_years)


def paths_inside(domains: dict, paths: np.ndarray, tipped: np.ndarray, margin: float) -> bool:
    """Whether every path stays in its layer's boxes (tipped paths in the tipped layer)."""
    for path, tip in zip(paths, tipped):
        dom = domains[1 if tip and 1 in domains else 0]
        if not all(dom.at(t).contains(path[t], margin) for t in range(len(dom))):
            return False
    return True


def refine_and_solve(model: Model, backward, settings, domain_settings, log=None):
    """Backward induction on heuristic boxes, then on boxes around solution paths.

    Each refinement simulates the no-tipping path and a few post-tipping
    branches under the current solution.  Boxes are rebuilt around every
    probe path seen so far, so they only grow; refinement stops once the
    current solution's own paths stay inside its boxes.
    """
    paths, tipped = heuristic_paths(model, domain_settings)
    domains = layer_domains(paths, tipped, model, domain_settings)
    sol = backward(model, domains, settings, log)
    seen, seen_tipped = [], []
    for r in range(settings.domain_refinements):
        paths = probe_paths(sol)
        tipped = np.arange(paths.shape[0]) > 0
        if r > 0 and paths_inside(domains, paths, tipped, settings.extrapolation_margin):
            break
        seen.append(paths)
        seen_tipped.append(tipped)
        domains = layer_domains(np.concatenate(seen[-2:]), np.concatenate(seen_tipped[-2:]), model, domain_settings,
                                domains[0].transform)
        sol = backward(model, domains, settings, log)
        sol.refinements = r + 1
    return sol


def backward_induction_sp(cfg, log=None) -> PlannerSolution:
    """Solve the cooperative problem for a :class:`~direscu.config.ScenarioConfig`."""
    model = cfg.model()
    return refine_and_solve(model, _backward_sp, cfg.solver, cfg.domain, log)
