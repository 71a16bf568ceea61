"""Feedback Nash equilibrium between the two regions.

Each region maximises its own recursive utility with a closed capital
budget, taking the other region's feedback policy as given.  At every node
the six first-order conditions (consumption, mitigation and adaptation for
each player) are solved jointly as a box-constrained complementarity system:
a round of best responses gives a start, a semismooth Newton method drives
the scaled residuals to zero, and an L1 sequential-LP reformulation is the
fallback for nodes where Newton stalls.

A small linear-quadratic game (:func:`solve_lq_game`) runs the same
fit-and-solve backward iteration and can be checked against coupled Riccati
recursions.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .approx import Box, ValueFunctionApprox, cheb_nodes, fit
from .dp_sp import (CONTROL_NAMES, NodeSolution, StepDiagnostics, _chunked, _concat_solutions, _fit_with_flags,
                    _layer_nodes, _layers, _outside, refine_and_solve, terminal_fit)
from .errors import ApproximationError, InfeasibleControlError, SolverError
from .model import K1, K2, MAT, Model, NodeContext
from .optim import l1_polish, maximize_box, natural_residual, solve_complementarity

# column layout of the joint control vector: (inv_n, inv_s, mu_n, mu_s, adapt_n, adapt_s)
_OWN = ((0, 2, 4), (1, 3, 5))


class GameNodes:
    """Both players' node problems for a batch of states at one year.

    Controls are ``(inv_north, inv_south, mu_north, mu_south, adapt_north,
    adapt_south)``; consumption is the regional budget residual
    ``(output - investment) / population``.
    """

    def __init__(self, model: Model, ctx: NodeContext, vfs, min_capital_ratio: float = 0.5):
        self.model = model
        self.ctx = ctx
        self.vfs = tuple(vfs)
        e = model.econ
        n = ctx.n
        k = ctx.x[:, K1:K2 + 1]
        zero = np.zeros((n, 2))
        _, ymax, _, _ = model.output(ctx, zero, model.best_adaptation(ctx, zero))
        adapt_hi = 1.0 if model.toggles.adaptation else 0.0
        inv_lo = (min_capital_ratio - (1.0 - e.depreciation)) * k
        self.lo = np.minimum(np.column_stack([inv_lo, zero, zero]),
                             np.column_stack([ymax, np.ones((n, 2)), np.full((n, 2), adapt_hi)]))
        self.hi = np.column_stack([ymax, np.ones((n, 2)), np.full((n, 2), adapt_hi)])
        self.scale = np.column_stack([ymax, np.ones((n, 4))])

    def initial_guess(self, mu: float = 0.1, savings: float = 0.25) -> np.ndarray:
        ctx = self.ctx
        mu_a = np.full((ctx.n, 2), mu)
        adapt = self.model.best_adaptation(ctx, mu_a)
        _, y_hat, _, _ = self.model.output(ctx, mu_a, adapt)
        return np.clip(np.column_stack([savings * y_hat, mu_a, adapt]), self.lo, self.hi)

    def evaluate(self, u: np.ndarray, idx: np.ndarray, grad: bool = True):
        """Player objectives (n, 2), own-control gradients (n, 6) and auxiliaries."""
        m = self.model
        prefs = m.prefs
        ctx = self.ctx.take(idx)
        pop = ctx.population
        inv, mu, adapt = u[:, 0:2], u[:, 2:4], u[:, 4:6]
        y, y_hat, dyh_mu, dyh_adapt = m.output(ctx, mu, adapt)
        cons = (y_hat - inv) / pop
        k_next = (1.0 - m.econ.depreciation) * ctx.x[:, K1:K2 + 1] + inv
        feasible = np.all(cons > 0, axis=1) & np.all(y_hat > 0, axis=1) & np.all(k_next > 0, axis=1)
        emis, demis = m.emissions(ctx, mu)
        x_next = m.next_state(ctx, k_next, emis)
        cs = np.where(feasible[:, None], cons, 1.0)
        util = prefs.utility(cs) * pop
        f = np.empty((u.shape[0], 2))
        grads = []
        for i, vf in enumerate(self.vfs):
            g_next, dg_next = m.continuation(ctx, x_next, vf)
            f[:, i] = util[:, i] + prefs.beta * g_next
            grads.append(prefs.beta * dg_next)
        f = np.where(feasible[:, None], f, -np.inf)
        aux = {"c": cons, "inv": inv, "mu": mu, "adapt": adapt, "x_next": x_next, "y": y, "y_hat": y_hat,
               "feasible": feasible}
        if not grad:
            return f, None, aux
        mu_c = prefs.marginal_utility(cs)
        bgk = np.column_stack([grads[0][:, K1], grads[1][:, K2]])
        bgm = np.column_stack([grads[0][:, MAT], grads[1][:, MAT]])
        g = np.column_stack([bgk - mu_c, mu_c * dyh_mu + bgm * demis, mu_c * dyh_adapt])
        g = np.where(feasible[:, None], g, np.nan)
        aux["marginal_utility"] = mu_c
        return f, g, aux

    def residual(self, u: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Scaled natural residuals of the six first-order conditions, (n, 6)."""
        _, g, aux = self.evaluate(u, idx)
        c = np.where(aux["feasible"][:, None], aux["c"], 1.0)
        lam = np.tile(self.model.prefs.marginal_utility(c), 3)
        scale = self.scale[idx]
        resource = np.column_stack([scale[:, 0:2], aux["y"], aux["y"]])
        phi = g * scale / (lam * resource)
        r = natural_residual(u, phi, self.lo[idx], self.hi[idx], scale)
        return np.where(aux["feasible"][:, None], r, np.inf)

    def full_controls(self, u: np.ndarray):
        f, _, aux = self.evaluate(u, np.arange(u.shape[0]), grad=False)
        ctrl = np.column_stack([aux["inv"], aux["c"], aux["mu"], aux["adapt"]])
        return f, ctrl, aux["x_next"]


class _Rows:
    """Row-restricted view of a :class:`GameNodes` batch."""

    def __init__(self, prob: GameNodes, rows: np.ndarray):
        self.prob = prob
        self.rows = rows

    def residual(self, u, idx):
        return self.prob.residual(u, self.rows[idx])


class _BestResponse:
    """Player ``i``'s problem over its own three controls, the rest held fixed."""

    def __init__(self, prob: GameNodes, rows: np.ndarray, u: np.ndarray, player: int):
        self.prob, self.rows, self.u, self.cols = prob, rows, u, list(_OWN[player])
        self.player = player

    def _full(self, v, idx):
        u = self.u[idx].copy()
        u[:, self.cols] = v
        return u

    def fg(self, v, idx):
        f, g, _ = self.prob.evaluate(self._full(v, idx), self.rows[idx])
        return f[:, self.player], g[:, self.cols]

    def kkt(self, v, g, idx):
        r = self.prob.residual(self._full(v, idx), self.rows[idx])[:, self.cols]
        out = np.max(np.abs(r), axis=1)
        return np.where(np.isfinite(out), out, np.inf)


def _best_response_round(prob: GameNodes, rows: np.ndarray, u: np.ndarray, tol: float, max_iter: int):
    for player in (0, 1):
        br = _BestResponse(prob, rows, u, player)
        cols = list(_OWN[player])
        res = maximize_box(br.fg, br.kkt, u[:, cols], prob.lo[rows][:, cols], prob.hi[rows][:, cols],
                           prob.scale[rows][:, cols], tol=tol, max_iter=max_iter)
        ok = np.isfinite(res.value)
        u[ok] = br._full(res.x[ok], np.flatnonzero(ok))
    return u


def solve_nodes_fbne(model: Model, x, chi, t: int, vfs, foc_tol: float = 1e-6, max_iter: int = 60,
                     multistart: int = 3, min_capital_ratio: float = 0.5, norm: str = "split",
                     warm: np.ndarray | None = None) -> NodeSolution:
    """Equilibrium controls and both players' values at a batch of states.

    ``vfs`` holds the two players' fitted value functions for year ``t + 1``.
    ``value`` in the result is (n, 2).  Nodes whose largest scaled FOC
    residual exceeds ``foc_tol`` are flagged.
    """
    if norm not in ("split", "one_sided"):
        raise SolverError(f"unknown residual norm {norm!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    ctx = model.context(x, chi, t)
    prob = GameNodes(model, ctx, vfs, min_capital_ratio)
    starts = []
    if warm is not None:
        starts.append(np.clip(warm * prob.scale, prob.lo, prob.hi))
    starts.append(prob.initial_guess())
    for mu, s in [(0.02, 0.2), (0.5, 0.3), (0.2, 0.15)][:max(0, multistart - 1)]:
        starts.append(prob.initial_guess(mu, s))
    u = starts[0].copy()
    resid = np.full(n, np.inf)
    iters = np.zeros(n, dtype=int)
    for k, start in enumerate(starts):
        todo = np.flatnonzero(resid > foc_tol)
        if todo.size == 0:
            break
        u0 = start[todo].copy()
        if k > 0 or warm is None:
            u0 = _best_response_round(prob, todo, u0, 1e-3, 20)
        view = _Rows(prob, todo)
        res = solve_complementarity(view.residual, u0, prob.lo[todo], prob.hi[todo], prob.scale[todo],
                                    tol=foc_tol, max_iter=max_iter)
        better = res.residual < resid[todo]
        u[todo[better]] = res.x[better]
        resid[todo[better]] = res.residual[better]
        iters[todo] += res.iterations
    todo = np.flatnonzero(resid > foc_tol)
    if todo.size:
        view = _Rows(prob, todo)
        res = l1_polish(view.residual, u[todo], prob.lo[todo], prob.hi[todo], prob.scale[todo],
                        tol=foc_tol, one_sided=norm == "one_sided")
        better = res.residual < resid[todo]
        u[todo[better]] = res.x[better]
        resid[todo[better]] = res.residual[better]
        iters[todo] += res.iterations
    value, controls, x_next = prob.full_controls(u)
    return NodeSolution(value=value, controls=controls, reduced=u, scale=prob.scale, residual=resid,
                        converged=resid <= foc_tol, next_state=x_next, iterations=iters)


def solve_node_fbne(x, t: int, vfs, model: Model, chi: int = 0, **kw):
    """Single-state wrapper: ``(values (2,), controls dict, NodeSolution)``."""
    sol = solve_nodes_fbne(model, np.atleast_2d(x), np.array([chi]), t, vfs, **kw)
    return sol.value[0], dict(zip(CONTROL_NAMES, sol.controls[0])), sol


def node_objectives(model: Model, x, chi, t: int, vfs, controls: np.ndarray) -> np.ndarray:
    """Both players' node objectives at given joint controls (CONTROL_NAMES layout)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    prob = GameNodes(model, model.context(x, chi, t), vfs, min_capital_ratio=0.0)
    controls = np.atleast_2d(controls)
    u = np.column_stack([controls[:, 0:2], controls[:, 4:6], controls[:, 6:8]])
    f, _, _ = prob.evaluate(u, np.arange(x.shape[0]), grad=False)
    return f


# --------------------------------------------------------------------------- first-order conditions
@dataclass
class FocResidual:
    """The six first-order conditions at given controls.

    ``raw`` columns: consumption north/south (marginal utility minus
    discounted marginal continuation value of own capital), adaptation
    north/south (derivative of available output), mitigation north/south
    (output cost valued at the marginal value of capital plus carbon
    benefit).  ``scaled`` holds the dimensionless natural residuals, which
    also absorb multipliers of active bounds.
    """

    raw: np.ndarray
    scaled: np.ndarray

    @property
    def norm(self) -> np.ndarray:
        return np.max(np.abs(self.scaled), axis=-1)


def foc_residuals(x, controls, t: int, vfs, model: Model, chi=0) -> FocResidual:
    """First-order conditions at ``controls = (c_n, c_s, mu_n, mu_s, adapt_n, adapt_s)``.

    Next-period capital follows the closed regional budget
    ``K' = (1 - delta) K + available output - c * population``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.atleast_2d(np.asarray(controls, dtype=float))
    n = x.shape[0]
    m = model
    prefs = m.prefs
    ctx = m.context(x, np.broadcast_to(np.asarray(chi, dtype=int), (n,)), t)
    c, mu, adapt = a[:, 0:2], a[:, 2:4], a[:, 4:6]
    pop = ctx.population
    y, y_hat, dyh_mu, dyh_adapt = m.output(ctx, mu, adapt)
    k_next = (1.0 - m.econ.depreciation) * x[:, K1:K2 + 1] + y_hat - c * pop
    if np.any(k_next <= 0) or np.any(c <= 0):
        raise InfeasibleControlError("controls leave non-positive consumption or capital")
    emis, demis = m.emissions(ctx, mu)
    x_next = m.next_state(ctx, k_next, emis)
    bgk = np.empty((n, 2))
    bgm = np.empty((n, 2))
    for i, (vf, col) in enumerate(zip(vfs, (K1, K2))):
        _, dg = m.continuation(ctx, x_next, vf)
        bgk[:, i] = prefs.beta * dg[:, col]
        bgm[:, i] = prefs.beta * dg[:, MAT]
    up = prefs.marginal_utility(c)
    cons = up - bgk
    adapt_foc = dyh_adapt
    mitig = bgk * dyh_mu + bgm * demis
    raw = np.column_stack([cons, adapt_foc, mitig])
    # ascent directions in dimensionless units, then natural residuals in the control box
    c_hi = (y_hat + (1.0 - m.econ.depreciation) * x[:, K1:K2 + 1]) / pop
    phi = np.column_stack([cons / up, adapt_foc / y, mitig / (bgk * y)])
    cols = np.column_stack([c, adapt, mu])
    adapt_top = 1.0 if m.toggles.adaptation else 0.0
    lo = np.zeros((n, 6))
    hi = np.column_stack([c_hi, np.full((n, 2), adapt_top), np.ones((n, 2))])
    scale = np.column_stack([y_hat / pop, np.ones((n, 4))])
    scaled = natural_residual(cols, phi, lo, hi, scale)
    return FocResidual(raw=raw, scaled=scaled)


def transfer_margin(model: Model, x, chi, t: int, vfs, sol: NodeSolution) -> np.ndarray:
    """Marginal value to each player of giving up capital at a zero transfer, (n, 2).

    A transfer ``d`` from region ``i`` costs ``d + B d^2 / (2 Y_i)`` of its
    output, so at ``d = 0`` the marginal cost is the marginal utility of
    consumption; a positive entry confirms that no player wants to transfer.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ctx = model.context(x, chi, t)
    _, y_hat, _, _ = model.output(ctx, sol.controls[:, 4:6], sol.controls[:, 6:8])
    transfer = 0.0
    d_gamma = model.econ.adjustment_cost * transfer / y_hat
    return model.prefs.marginal_utility(sol.controls[:, 2:4]) * (1.0 - d_gamma)


# --------------------------------------------------------------------------- backward induction
@dataclass
class GameSolution:
    """Per-player fitted value functions ``value_functions[i][t]`` plus diagnostics."""

    model: Model
    domains: dict
    value_functions: tuple
    diagnostics: list = field(default_factory=list)
    settings: object = None
    refinements: int = 0

    @property
    def horizon(self) -> int:
        return len(self.value_functions[0]) - 1

    def value(self, x, chi, t: int) -> np.ndarray:
        return np.column_stack([vf[t].eval(x, chi) for vf in self.value_functions])

    def tax(self, x, chi, t: int) -> np.ndarray:
        from .policy_metrics import scc_fbne

        return scc_fbne(self, x, chi, t)

    def policy(self, x, chi, t: int, warm=None) -> NodeSolution:
        s = self.settings
        return solve_nodes_fbne(self.model, x, chi, t, [vf[t + 1] for vf in self.value_functions],
                                foc_tol=s.foc_tol, max_iter=s.max_iter, multistart=s.multistart,
                                min_capital_ratio=s.min_capital_ratio, norm=s.norm, warm=warm)

    def save(self, directory: str | Path):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for i, vfs in enumerate(self.value_functions):
            for t, vf in enumerate(vfs):
                vf.save(directory / f"value_p{i + 1}_t{t:03d}.json")
        (directory / "diagnostics.json").write_text(json.dumps([d.__dict__ for d in self.diagnostics], default=float))


class _GameTask:
    """Picklable callable solving one chunk of equilibrium nodes."""

    def __init__(self, model, t, vfs, settings):
        self.model, self.t, self.vfs, self.s = model, t, vfs, settings

    def __call__(self, x, chi, warm):
        s = self.s
        return solve_nodes_fbne(self.model, x, chi, self.t, self.vfs, foc_tol=s.foc_tol, max_iter=s.max_iter,
                                multistart=s.multistart, min_capital_ratio=s.min_capital_ratio, norm=s.norm,
                                warm=warm)


def _backward_fbne(model: Model, domains: dict, settings, log=None) -> GameSolution:
    layers = _layers(model)
    horizon = len(domains[0]) - 1
    vfs = ([None] * (horizon + 1), [None] * (horizon + 1))
    for i in (0, 1):
        vfs[i][horizon] = terminal_fit(model, domains, settings, region=i + 1)
    diags = []
    warm = None
    ckpt = Path(settings.checkpoint_dir) if settings.checkpoint_dir else None
    kappa = model.prefs.kappa
    for t in range(horizon - 1, -1, -1):
        tic = time.perf_counter()
        x, chi, boxes = _layer_nodes(domains, layers, t, settings)
        task = _GameTask(model, t, (vfs[0][t + 1], vfs[1][t + 1]), settings)
        sol = _concat_solutions(_chunked(task, settings.workers, x, chi, warm))
        flagged = sol.flagged
        if flagged.mean() > settings.max_flagged_fraction:
            raise SolverError(f"year {t}: {int(flagged.sum())} of {flagged.size} equilibrium problems exceed the "
                              f"residual bound (largest {np.max(sol.residual):.2e})")
        for i in (0, 1):
            try:
                vfs[i][t] = _fit_with_flags(x, chi, sol.value[:, i], ~flagged, boxes, settings.degree, kappa)
            except ApproximationError as exc:
                raise SolverError(f"year {t}, player {i + 1}: {exc}") from exc
            vfs[i][t].extrapolation_margin = settings.extrapolation_margin
        warm = sol.reduced / sol.scale
        diag = StepDiagnostics(t=t, n_nodes=int(x.shape[0]), n_flagged=int(flagged.sum()),
                               max_residual=float(np.max(sol.residual[~flagged])) if np.any(~flagged) else np.inf,
                               fit_residual={f"p{i + 1}": dict(vfs[i][t].fit_residual) for i in (0, 1)},
                               extrapolations=_outside(domains, t + 1, sol.next_state, chi,
                                                       settings.extrapolation_margin),
                               mean_iterations=float(np.mean(sol.iterations)), seconds=time.perf_counter() - tic)
        diags.append(diag)
        if ckpt is not None:
            ckpt.mkdir(parents=True, exist_ok=True)
            for i in (0, 1):
                vfs[i][t].save(ckpt / f"value_p{i + 1}_t{t:03d}.json")
        if log:
            log(diag)
    return GameSolution(model=model, domains=domains, value_functions=(vfs[0], vfs[1]), diagnostics=diags[::-1],
                        settings=settings)


def game_model(cfg) -> Model:
    """Model for the game: players never transfer capital, so that toggle is switched off."""
    return cfg.with_(**{"toggles.capital_transfer": False}).model()


def backward_induction_fbne(cfg, log=None) -> GameSolution:
    """Solve the feedback Nash game for a :class:`~direscu.config.ScenarioConfig`."""
    model = game_model(cfg)
    return refine_and_solve(model, _backward_fbne, cfg.solver, cfg.domain, log)


# --------------------------------------------------------------------------- LQ validation game
@dataclass(frozen=True)
class LQGame:
    """Scalar-state two-player game ``x' = a x + b1 u1 + b2 u2``.

    Player ``i`` minimises ``sum beta^t (q_i x^2 + r_i u_i^2)``.
    """

    a: float = 0.9
    b: tuple = (0.5, 0.5)
    q: tuple = (1.0, 1.0)
    r: tuple = (1.0, 1.0)
    beta: float = 0.95


@dataclass
class LQResult:
    gains: np.ndarray        # feedback gains F_i with u_i = -F_i x
    value_coef: np.ndarray   # V_i(x) = p_i x^2
    iterations: int
    change: float


def solve_lq_game(game: LQGame = LQGame(), bound: float = 1.0, degree: int = 2, tol: float = 1e-9,
                  max_iter: int = 5000, start=(0.0, 0.0)) -> LQResult:
    """Stationary feedback Nash gains by fitted backward iteration.

    Each iteration solves both players' first-order conditions at the
    Chebyshev nodes of ``[-bound, bound]`` against the previous fitted value
    functions (polynomials of ``degree``), then refits.  Iteration stops when
    successive values at the nodes differ by less than ``tol``.  ``start``
    sets the initial quadratic coefficients, which lets callers probe for
    other equilibria.
    """
    box = Box(np.array([-bound]), np.array([bound]))
    nodes = cheb_nodes(box, degree, nodes_per_dim=degree + 3)
    xs = nodes[:, 0]
    vf = [fit(nodes, p * xs ** 2, box, degree) for p in start]
    a, (b1, b2), q, r, beta = game.a, game.b, game.q, game.r, game.beta
    prev = np.stack([v.eval(nodes) for v in vf])
    big = 1e3 * bound

    def resid(u, idx):
        xn = a * xs[idx] + b1 * u[:, 0] + b2 * u[:, 1]
        out = np.empty_like(u)
        for i, bi in enumerate((b1, b2)):
            _, dv = vf[i].eval_grad(xn[:, None])
            out[:, i] = 2.0 * r[i] * u[:, i] + beta * dv[:, 0] * bi
        return out

    u = np.zeros((xs.size, 2))
    change = np.inf
    for it in range(1, max_iter + 1):
        res = solve_complementarity(resid, u, np.full_like(u, -big), np.full_like(u, big), np.ones_like(u),
                                    tol=1e-13, max_iter=50)
        u = res.x
        xn = a * xs + b1 * u[:, 0] + b2 * u[:, 1]
        vals = []
        for i in (0, 1):
            vals.append(q[i] * xs ** 2 + r[i] * u[:, i] ** 2 + beta * vf[i].eval(xn[:, None]))
        vals = np.stack(vals)
        vf = [fit(nodes, vals[i], box, degree) for i in (0, 1)]
        change = float(np.max(np.abs(vals - prev)))
        prev = vals
        if change < tol:
            break
    else:
        raise SolverError(f"LQ iteration did not settle within {max_iter} iterations (change {change:.2e})")
    gains = -np.array([np.polyfit(xs, u[:, i], 1)[0] for i in (0, 1)])
    value_coef = np.array([np.polyfit(xs, prev[i], 2)[0] for i in (0, 1)])
    return LQResult(gains=gains, value_coef=value_coef, iterations=it, change=change)


def riccati_lqr(a: float, b: float, q: float, r: float, beta: float, tol: float = 1e-14, max_iter: int = 100000):
    """Scalar discounted LQR: returns ``(gain, p)`` with ``u = -gain x``, ``V = p x^2``."""
    p = q
    for _ in range(max_iter):
        gain = beta * p * a * b / (r + beta * p * b * b)
        new = q + r * gain ** 2 + beta * p * (a - b * gain) ** 2
        if abs(new - p) < tol * max(1.0, abs(p)):
            p = new
            break
        p = new
    return beta * p * a * b / (r + beta * p * b * b), p


def coupled_riccati(game: LQGame, tol: float = 1e-14, max_iter: int = 100000, start=(0.0, 0.0)):
    """Feedback Nash gains of :class:`LQGame` by coupled Riccati fixed-point iteration."""
    a, b, q, r, beta = game.a, game.b, game.q, game.r, game.beta
    p = np.array(start, dtype=float)
    gains = np.zeros(2)
    for _ in range(max_iter):
        # gains solve the two linear best-response conditions jointly
        mat = np.array([[r[0] + beta * p[0] * b[0] ** 2, beta * p[0] * b[0] * b[1]],
                        [beta * p[1] * b[1] * b[0], r[1] + beta * p[1] * b[1] ** 2]])
        rhs = np.array([beta * p[0] * b[0] * a, beta * p[1] * b[1] * a])
        gains = np.linalg.solve(mat, rhs)
        closed = a - b[0] * gains[0] - b[1] * gains[1]
        new = np.array([q[i] + r[i] * gains[i] ** 2 + beta * p[i] * closed ** 2 for i in (0, 1)])
        if np.max(np.abs(new - p)) < tol * max(1.0, np.max(np.abs(p))):
            p = new
            break
        p = new
    return gains, p
