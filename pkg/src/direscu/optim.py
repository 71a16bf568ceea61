"""Batched node solvers.

Every routine works on a stack of independent small problems (one per
approximation node).  Problems are advanced together with numpy; nodes that
have converged drop out of the active set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog


@dataclass
class BatchResult:
    x: np.ndarray
    value: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray


def natural_residual(x, phi, lo, hi, scale):
    """Scaled complementarity residual ``(x - clip(x + s*phi, lo, hi)) / s``.

    ``phi`` is a dimensionless ascent direction: zero at an interior
    stationary point, pointing outward at an active bound.
    """
    return (x - np.clip(x + scale * phi, lo, hi)) / scale


def _fd_step(x, lo, hi, scale, rel=1e-6):
    h = rel * scale
    up = x + h <= hi
    return np.where(up, h, -h)


def maximize_box(fg: Callable, kkt: Callable, x0, lo, hi, scale, tol=1e-8, max_iter=60, fd_rel=1e-6):
    """Projected Newton ascent on a batch of box-constrained problems.

    Parameters
    ----------
    fg : ``fg(x, idx) -> (f, g)`` objective (n,) and gradient (n, k) for rows
        ``idx`` of the batch; infeasible points return ``-inf``.
    kkt : ``kkt(x, g, idx) -> (n,)`` scaled stationarity residual.
    x0, lo, hi, scale : (N, k) starting point, bounds and variable scales.

    Notes
    -----
    The Hessian is a forward difference of the analytic gradient in scaled
    variables, made negative definite by clipping eigenvalues.  Variables at a
    bound whose gradient points outward are held fixed for the step; the
    Armijo search runs along the projection arc.
    """
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    n, k = x.shape
    f, g = fg(x, np.arange(n))
    res = kkt(x, g, np.arange(n))
    iters = np.zeros(n, dtype=int)
    done = res <= tol
    for _ in range(max_iter):
        act = np.flatnonzero(~done & np.isfinite(f))
        if act.size == 0:
            break
        xa, ga, fa = x[act], g[act], f[act]
        la, ha, sa = lo[act], hi[act], scale[act]
        h = np.empty((act.size, k, k))
        for j in range(k):
            step = _fd_step(xa[:, j], la[:, j], ha[:, j], sa[:, j], fd_rel)
            xp = xa.copy()
            xp[:, j] += step
            _, gp = fg(xp, act)
            bad = ~np.all(np.isfinite(gp), axis=1)
            if np.any(bad):
                xp[bad, j] = xa[bad, j] - step[bad]
                _, gb = fg(xp[bad], act[bad])
                gp[bad] = gb
                step = np.where(bad, -step, step)
            h[:, :, j] = (gp - ga) / step[:, None]
        hs = h * sa[:, :, None] * sa[:, None, :]
        hs = 0.5 * (hs + np.swapaxes(hs, 1, 2))
        gs = ga * sa
        at_lo = (xa <= la + 1e-12 * sa) & (ga < 0)
        at_hi = (xa >= ha - 1e-12 * sa) & (ga > 0)
        fixed = at_lo | at_hi
        free = ~fixed
        hs = np.where(free[:, :, None] & free[:, None, :], hs, 0.0)
        hs[:, np.arange(k), np.arange(k)] = np.where(free, hs[:, np.arange(k), np.arange(k)], -1.0)
        gs = np.where(free, gs, 0.0)
        hs = np.nan_to_num(hs, nan=0.0, posinf=0.0, neginf=0.0)
        w, q = np.linalg.eigh(hs)
        cap = np.maximum(1e-10, 1e-8 * np.max(np.abs(w), axis=1, keepdims=True))
        w = np.minimum(w, -cap)
        d = -np.einsum("nij,nj,nkj,nk->ni", q, 1.0 / w, q, gs)
        d = d * sa
        alpha = np.ones(act.size)
        pending = np.arange(act.size)
        new_x = xa.copy()
        new_f = fa.copy()
        new_g = ga.copy()
        accepted = np.zeros(act.size, dtype=bool)
        for _ls in range(40):
            if pending.size == 0:
                break
            xt = np.clip(xa[pending] + alpha[pending, None] * d[pending], la[pending], ha[pending])
            ft, gt = fg(xt, act[pending])
            gain = np.sum(ga[pending] * (xt - xa[pending]), axis=1)
            ok = np.isfinite(ft) & np.all(np.isfinite(gt), axis=1) & (ft >= fa[pending] + 1e-4 * gain)
            ok &= gain >= 0
            acc = pending[ok]
            new_x[acc], new_f[acc], new_g[acc] = xt[ok], ft[ok], gt[ok]
            accepted[acc] = True
            pending = pending[~ok]
            alpha[pending] *= 0.5
        x[act], f[act], g[act] = new_x, new_f, new_g
        iters[act] += 1
        res[act] = kkt(x[act], g[act], act)
        done[act] = res[act] <= tol
        stalled = act[~accepted]
        done[stalled] = True
    return BatchResult(x=x, value=f, residual=res, converged=res <= tol, iterations=iters)


def solve_complementarity(resid: Callable, x0, lo, hi, scale, tol=1e-8, max_iter=60, fd_rel=1e-7):
    """Damped semismooth Newton on a batch of square complementarity systems.

    ``resid(x, idx) -> (n, k)`` returns scaled natural residuals.  The
    Jacobian is a forward difference; steps are projected into the box and
    accepted when the residual norm decreases.
    """
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    n, k = x.shape
    r = resid(x, np.arange(n))
    norm = np.max(np.abs(r), axis=1)
    norm[~np.isfinite(norm)] = np.inf
    iters = np.zeros(n, dtype=int)
    done = norm <= tol
    for _ in range(max_iter):
        act = np.flatnonzero(~done & np.isfinite(norm))
        if act.size == 0:
            break
        xa, ra = x[act], r[act]
        la, ha, sa = lo[act], hi[act], scale[act]
        jac = np.empty((act.size, k, k))
        for j in range(k):
            step = fd_rel * sa[:, j] * np.where(xa[:, j] + fd_rel * sa[:, j] <= ha[:, j], 1.0, -1.0)
            xp = xa.copy()
            xp[:, j] += step
            jac[:, :, j] = (resid(xp, act) - ra) / step[:, None]
        jac = np.nan_to_num(jac)
        try:
            d = -np.linalg.solve(jac, ra[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            d = -np.stack([np.linalg.lstsq(jac[i], ra[i], rcond=None)[0] for i in range(act.size)])
        alpha = np.ones(act.size)
        pending = np.arange(act.size)
        merit = np.sum(ra * ra, axis=1)
        moved = np.zeros(act.size, dtype=bool)
        for _ls in range(30):
            if pending.size == 0:
                break
            xt = np.clip(xa[pending] + alpha[pending, None] * d[pending], la[pending], ha[pending])
            rt = resid(xt, act[pending])
            mt = np.sum(rt * rt, axis=1)
            ok = np.isfinite(mt) & (mt <= (1.0 - 1e-4 * alpha[pending]) * merit[pending])
            sel = act[pending[ok]]
            x[sel], r[sel] = xt[ok], rt[ok]
            moved[pending[ok]] = True
            pending = pending[~ok]
            alpha[pending] *= 0.5
        iters[act] += 1
        norm[act] = np.max(np.abs(r[act]), axis=1)
        done[act] = (norm[act] <= tol) | ~moved
    return BatchResult(x=x, value=-norm, residual=norm, converged=norm <= tol, iterations=iters)


def l1_polish(resid: Callable, x0, lo, hi, scale, tol=1e-8, max_iter=40, one_sided=False, trust=0.1):
    """Sequential linear programming on the L1 residual model, node by node.

    Each iteration linearises the residual and solves
    ``min sum(e_plus + e_minus)`` subject to ``r + J dx = e_plus - e_minus``
    (or ``r + J dx = e >= 0`` in the one-sided variant), box bounds and a
    trust region on ``dx``.  Steps that lower the L1 norm enlarge the trust
    region; others shrink it.
    """
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    n, k = x.shape
    out_res = np.empty(n)
    iters = np.zeros(n, dtype=int)
    for i in range(n):
        idx = np.array([i])
        xi = x[i].copy()
        ri = resid(xi[None], idx)[0]
        radius = trust
        for it in range(max_iter):
            if np.max(np.abs(ri)) <= tol or radius < 1e-14:
                break
            jac = np.empty((k, k))
            for j in range(k):
                step = 1e-7 * scale[i, j] * (1.0 if xi[j] + 1e-7 * scale[i, j] <= hi[i, j] else -1.0)
                xp = xi.copy()
                xp[j] += step
                jac[:, j] = (resid(xp[None], idx)[0] - ri) / step
            # variables: dx (k, scaled), e_plus (k), e_minus (k) or e (k)
            js = jac * scale[i]
            dlo = np.maximum((lo[i] - xi) / scale[i], -radius)
            dhi = np.minimum((hi[i] - xi) / scale[i], radius)
            if one_sided:
                c = np.concatenate([np.zeros(k), np.ones(k)])
                a_eq = np.hstack([js, -np.eye(k)])
                bounds = list(zip(dlo, dhi)) + [(0, None)] * k
            else:
                c = np.concatenate([np.zeros(k), np.ones(2 * k)])
                a_eq = np.hstack([js, -np.eye(k), np.eye(k)])
                bounds = list(zip(dlo, dhi)) + [(0, None)] * (2 * k)
            sol = linprog(c, A_eq=a_eq, b_eq=-ri, bounds=bounds, method="highs")
            iters[i] += 1
            if sol.status != 0:
                radius *= 0.25
                continue
            xt = np.clip(xi + sol.x[:k] * scale[i], lo[i], hi[i])
            rt = resid(xt[None], idx)[0]
            if np.all(np.isfinite(rt)) and np.sum(np.abs(rt)) < np.sum(np.abs(ri)):
                xi, ri = xt, rt
                radius = min(2.0 * radius, 1.0)
            else:
                radius *= 0.25
        x[i] = xi
        out_res[i] = np.max(np.abs(ri))
    return BatchResult(x=x, value=-out_res, residual=out_res, converged=out_res <= tol, iterations=iters)
