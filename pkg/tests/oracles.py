"""Independent reference implementations used by the tests.

Nothing here imports solver code; each oracle is written from the model
equations directly so that agreement is meaningful.
"""
from __future__ import annotations

import numpy as np


# --------------------------------------------------------------------------- polynomials
def random_polynomial(dim: int, degree: int, rng, n_terms: int = 25):
    """Random sum of monomials with total degree <= degree, and its gradient."""
    exps = []
    while len(exps) < n_terms:
        e = np.zeros(dim, dtype=int)
        for _ in range(rng.integers(0, degree + 1)):
            e[rng.integers(dim)] += 1
        exps.append(e)
    exps = np.array(exps)
    coef = rng.normal(size=n_terms)
    shift = rng.uniform(-0.5, 0.5, size=dim)

    def f(x):
        y = np.atleast_2d(x) - shift
        return np.prod(y[:, None, :] ** exps[None], axis=2) @ coef

    def grad(x):
        y = np.atleast_2d(x) - shift
        out = np.zeros_like(y)
        for d in range(dim):
            e = exps.copy()
            fac = e[:, d].astype(float)
            e[:, d] = np.maximum(e[:, d] - 1, 0)
            out[:, d] = np.prod(y[:, None, :] ** e[None], axis=2) @ (coef * fac)
        return out

    return f, grad


def cheb_direct(z, n):
    """T_n(z) = cos(n arccos z)."""
    return np.cos(n * np.arccos(np.clip(z, -1, 1)))


# --------------------------------------------------------------------------- climate
def temperature_fixed_point(xi, f):
    """Solve (I - A) T = xi1 (f, f, 0) for the 3x3 temperature system."""
    x1, x2, x3, x4, x5, x6 = xi
    a = np.array([[1 - x2 - x4 - x6, x4 + x5, x2],
                  [x4, 1 - x2 - x4 - x5 - x6, x2],
                  [x3, x3, 1 - 2 * x3]])
    return np.linalg.solve(np.eye(3) - a, x1 * np.array([f, f, 0.0]))


def balanced_direction(xi):
    """Null direction of I - A when there is no radiative damping (ratio N/S)."""
    x1, x2, x3, x4, x5, _ = xi
    a = np.array([[1 - x2 - x4, x4 + x5, x2],
                  [x4, 1 - x2 - x4 - x5, x2],
                  [x3, x3, 1 - 2 * x3]])
    w, v = np.linalg.eig(a)
    k = int(np.argmin(np.abs(w - 1.0)))
    vec = np.real(v[:, k])
    return vec / vec[1]


def cumulative_tipping(hazards):
    """P(tipped by end of year t) = 1 - prod (1 - p_s)."""
    return 1.0 - np.cumprod(1.0 - np.asarray(hazards))


# --------------------------------------------------------------------------- LQ games
def lq_scalar_riccati(a, b, q, r, beta, iters=200000):
    """Discounted scalar LQR by value iteration on the quadratic coefficient."""
    p = 0.0
    for _ in range(iters):
        k = beta * a * b * p / (r + beta * b * b * p)
        new = q + r * k * k + beta * p * (a - b * k) ** 2
        if abs(new - p) < 1e-15:
            break
        p = new
    return beta * a * b * p / (r + beta * b * b * p), p


def lq_coupled_riccati(a, b1, b2, q1, q2, r1, r2, beta, iters=200000):
    """Stationary feedback Nash gains of the scalar two-player LQ game by fixed-point iteration."""
    p1 = p2 = 0.0
    k1 = k2 = 0.0
    for _ in range(iters):
        # best responses given the other's gain, solved jointly (2x2 linear system)
        m = np.array([[r1 + beta * b1 * b1 * p1, beta * b1 * b2 * p1],
                      [beta * b2 * b1 * p2, r2 + beta * b2 * b2 * p2]])
        rhs = np.array([beta * b1 * p1 * a, beta * b2 * p2 * a])
        k1n, k2n = np.linalg.solve(m, rhs)
        acl = a - b1 * k1n - b2 * k2n
        p1n = q1 + r1 * k1n ** 2 + beta * p1 * acl ** 2
        p2n = q2 + r2 * k2n ** 2 + beta * p2 * acl ** 2
        done = max(abs(p1n - p1), abs(p2n - p2)) < 1e-15
        p1, p2, k1, k2 = p1n, p2n, k1n, k2n
        if done:
            break
    return (k1, k2), (p1, p2)
