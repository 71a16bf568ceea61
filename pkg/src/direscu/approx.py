"""Complete Chebyshev polynomial approximation on boxes, with exact gradients.

A :class:`ValueFunctionApprox` holds one box and one coefficient vector per
discrete layer (the tipping indicator).  Nodes are drawn
from per-dimension Chebyshev-Gauss-Lobatto points without forming the full
tensor grid: a scrambled Halton sequence picks grid cells until the node
count reaches ``oversample`` times the number of coefficients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .errors import ApproximationError, DomainError


def multi_indices(dim: int, degree: int) -> np.ndarray:
    """Exponent vectors with total degree <= ``degree``, ordered by total degree."""
    if dim < 1 or degree < 0:
        raise DomainError("dim must be >= 1 and degree >= 0")
    rows = []
    for total in range(degree + 1):
        block = []
        for combo in combinations_with_replacement(range(dim), total):
            a = np.zeros(dim, dtype=int)
            for k in combo:
                a[k] += 1
            block.append(a)
        rows.extend(sorted(block, key=lambda a: tuple(-a)))
    out = np.array(rows, dtype=int)
    assert len(out) == comb(dim + degree, degree)
    return out


def lobatto_points(n: int) -> np.ndarray:
    """Chebyshev extrema on [-1, 1], ascending; a single point is the centre."""
    if n < 1:
        raise DomainError("need at least one point")
    if n == 1:
        return np.zeros(1)
    return -np.cos(np.pi * np.arange(n) / (n - 1))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower, upper]`` in (optionally mapped) coordinates.

    With a ``transform`` matrix ``R`` the box lives in ``y = R @ x``; the
    components listed in ``log_dims`` are then replaced by their logarithm,
    and an optional ``mix`` matrix is applied last.  All methods take and
    return states ``x`` so callers never see ``y``.
    """

    lower: np.ndarray
    upper: np.ndarray
    transform: np.ndarray | None = None
    log_dims: tuple = ()
    mix: np.ndarray | None = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            bad = np.flatnonzero(hi <= lo)
            raise DomainError(f"box has zero or negative width in dimension(s) {bad.tolist()}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "log_dims", tuple(int(j) for j in self.log_dims))
        if self.transform is not None:
            r = np.asarray(self.transform, dtype=float)
            if r.shape != (lo.size, lo.size):
                raise DomainError("transform must be a square matrix matching the box dimension")
            object.__setattr__(self, "transform", r)
            object.__setattr__(self, "_inverse", np.linalg.inv(r))
        if self.mix is not None:
            m = np.asarray(self.mix, dtype=float)
            if m.shape != (lo.size, lo.size):
                raise DomainError("mix must be a square matrix matching the box dimension")
            object.__setattr__(self, "mix", m)
            object.__setattr__(self, "_unmix", np.linalg.inv(m))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def _linear(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.transform is None else x @ self.transform.T

    def to_coords(self, x):
        y = self._linear(x)
        if self.log_dims:
            y = y.copy()
            j = list(self.log_dims)
            if np.any(y[..., j] <= 0):
                raise DomainError("log-scaled coordinate must be positive")
            y[..., j] = np.log(y[..., j])
        return y if self.mix is None else y @ self.mix.T

    def from_coords(self, y):
        y = np.array(y, dtype=float)
        if self.mix is not None:
            y = y @ self._unmix.T
        if self.log_dims:
            j = list(self.log_dims)
            y[..., j] = np.exp(y[..., j])
        return y if self.transform is None else y @ self._inverse.T

    def to_unit(self, x):
        return 2.0 * (self.to_coords(x) - self.lower) / self.width - 1.0

    def from_unit(self, z):
        return self.from_coords(self.lower + 0.5 * (np.asarray(z, dtype=float) + 1.0) * self.width)

    def unit_grad_to_state(self, gz, x=None):
        """Chain rule from unit-box coordinates back to the state ``x``."""
        gy = gz * (2.0 / self.width)
        if self.mix is not None:
            gy = gy @ self.mix
        if self.log_dims:
            if x is None:
                raise DomainError("state needed for the gradient of log-scaled coordinates")
            j = list(self.log_dims)
            gy = gy.copy()
            gy[..., j] = gy[..., j] / self._linear(x)[..., j]
        return gy if self.transform is None else gy @ self.transform

    def contains(self, x, margin: float = 0.0):
        z = self.to_unit(x)
        return np.all(np.abs(z) <= 1.0 + 2.0 * margin, axis=-1)


@dataclass
class Domain:
    """Time-indexed boxes: ``lower[t]``, ``upper[t]`` for ``t = 0..T`` sharing one coordinate map."""

    lower: np.ndarray
    upper: np.ndarray
    transform: np.ndarray | None = None
    log_dims: tuple = ()
    mix: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 2:
            raise DomainError("domain bounds must be (T+1, dim) arrays")
        if np.any(self.upper <= self.lower):
            t, d = np.argwhere(self.upper <= self.lower)[0]
            raise DomainError(f"domain has zero width at step {t}, dimension {d}")

    def __len__(self):
        return self.lower.shape[0]

    def at(self, t: int) -> Box:
        return Box(self.lower[t], self.upper[t], self.transform, self.log_dims, self.mix)


def chebyshev_values(z: np.ndarray, degree: int, with_derivative: bool = False):
    """Chebyshev polynomials ``T_0..T_degree`` (and derivatives) at ``z``.

    Returns arrays of shape ``z.shape + (degree + 1,)``.
    """
    z = np.asarray(z, dtype=float)
    t = np.empty(z.shape + (degree + 1,))
    t[..., 0] = 1.0
    if degree >= 1:
        t[..., 1] = z
    for n in range(2, degree + 1):
        t[..., n] = 2.0 * z * t[..., n - 1] - t[..., n - 2]
    if not with_derivative:
        return t
    dt = np.zeros_like(t)
    if degree >= 1:
        dt[..., 1] = 1.0
    for n in range(2, degree + 1):
        dt[..., n] = 2.0 * t[..., n - 1] + 2.0 * z * dt[..., n - 1] - dt[..., n - 2]
    return t, dt


def _support(alpha: np.ndarray):
    """Per basis function, the (dimension, exponent) pairs with non-zero exponent.

    Padded to the maximal total degree with a dummy dimension ``d`` whose
    polynomial value is one and derivative zero.
    """
    m, d = alpha.shape
    width = max(int(alpha.sum(axis=1).max()) if m else 0, 1)
    dims = np.full((m, width), d, dtype=int)
    exps = np.zeros((m, width), dtype=int)
    for i, row in enumerate(alpha):
        nz = np.flatnonzero(row)
        dims[i, :nz.size] = nz
        exps[i, :nz.size] = row[nz]
    return dims, exps


def _padded_values(z, degree, with_derivative):
    n, d = z.shape
    t = np.zeros((n, d + 1, degree + 1))
    if with_derivative:
        t[:, :d], dt_core = chebyshev_values(z, degree, True)
        dt = np.zeros_like(t)
        dt[:, :d] = dt_core
    else:
        t[:, :d] = chebyshev_values(z, degree)
        dt = None
    t[:, d, 0] = 1.0
    return t, dt


def basis_matrix(z: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Tensor-product basis ``prod_k T_{alpha_mk}(z_k)`` as an (N, M) matrix."""
    z = np.atleast_2d(z)
    degree = int(alpha.max()) if alpha.size else 0
    dims, exps = _support(alpha)
    t, _ = _padded_values(z, degree, False)
    return np.prod(t[:, dims, exps], axis=2)


def basis_and_gradient(z: np.ndarray, alpha: np.ndarray):
    """Basis matrix (N, M) and its derivative along each unit coordinate (N, d, M)."""
    z = np.atleast_2d(z)
    n, d = z.shape
    degree = int(alpha.max()) if alpha.size else 0
    dims, exps = _support(alpha)
    t, dt = _padded_values(z, degree, True)
    f = t[:, dims, exps]
    df = dt[:, dims, exps]
    b = np.prod(f, axis=2)
    grad = np.zeros((n, d + 1, alpha.shape[0]))
    cols = np.arange(alpha.shape[0])
    for s in range(dims.shape[1]):
        others = np.prod(np.delete(f, s, axis=2), axis=2) if dims.shape[1] > 1 else 1.0
        np.add.at(grad, (slice(None), dims[:, s], cols), df[:, :, s] * others)
    return b, grad[:, :d]


def _value_and_gradient(z: np.ndarray, alpha: np.ndarray, coef: np.ndarray):
    """Value (N,) and unit-coordinate gradient (N, d) of ``basis @ coef`` without the full Jacobian."""
    n, d = z.shape
    degree = int(alpha.max()) if alpha.size else 0
    dims, exps = _support(alpha)
    t, dt = _padded_values(z, degree, True)
    f = t[:, dims, exps]
    df = dt[:, dims, exps]
    val = np.prod(f, axis=2) @ coef
    grad = np.zeros((n, d + 1))
    for s in range(dims.shape[1]):
        others = np.prod(np.delete(f, s, axis=2), axis=2) if dims.shape[1] > 1 else 1.0
        scatter = np.zeros((alpha.shape[0], d + 1))
        scatter[np.arange(alpha.shape[0]), dims[:, s]] = coef
        grad += (df[:, :, s] * others) @ scatter
    return val, grad[:, :d]


def n_coefficients(dim: int, degree: int) -> int:
    return comb(dim + degree, degree)


def cheb_nodes(box: Box, degree: int, nodes_per_dim: int | None = None,
               oversample: float = 2.0, seed: int = 0) -> np.ndarray:
    """Approximation nodes in ``box`` for a complete basis of total degree ``degree``.

    Uses the full Lobatto tensor grid when it is no larger than the target
    count, otherwise a low-discrepancy subsample of it.  The centre point is
    always included.
    """
    d = box.dim
    npd = degree + 1 if nodes_per_dim is None else nodes_per_dim
    if npd < degree + 1:
        raise ApproximationError("need at least degree + 1 points per dimension")
    pts = lobatto_points(npd)
    m = n_coefficients(d, degree)
    target = max(int(np.ceil(oversample * m)), m)
    if npd ** d <= target:
        grid = np.stack(np.meshgrid(*([pts] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return box.from_unit(grid)
    sampler = qmc.Halton(d, scramble=True, seed=seed)
    chosen = {tuple([npd // 2] * d)} if npd % 2 else set()
    while len(chosen) < target:
        cells = np.minimum((sampler.random(target) * npd).astype(int), npd - 1)
        for row in map(tuple, cells):
            chosen.add(row)
            if len(chosen) >= target:
                break
    idx = np.array(sorted(chosen))
    return box.from_unit(pts[idx])


@dataclass
class ValueFunctionApprox:
    """Chebyshev approximation with one box and coefficient vector per discrete layer.

    Values are stored as the fitted quantity divided by ``scale``: ``eval``
    returns ``(basis @ coef) / scale``.  The solvers fit ``kappa * V`` (which
    is positive for either sign of ``kappa``) and pass ``scale = kappa``.
    """

    boxes: dict[int, Box]
    degree: int
    alpha: np.ndarray
    coefs: dict[int, np.ndarray]
    scale: float = 1.0
    fit_residual: dict[int, float] = field(default_factory=dict)
    extrapolation_margin: float = 0.05
    extrapolation_count: int = 0

    @property
    def box(self) -> Box:
        """Box of the lowest layer (the only one for single-layer fits)."""
        return self.boxes[min(self.boxes)]

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(sorted(self.coefs))

    def _prep(self, x, chi):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.box.dim:
            raise DomainError(f"state has {x2.shape[1]} components, expected {self.box.dim}")
        n = x2.shape[0]
        chi = np.zeros(n, dtype=int) if chi is None else np.broadcast_to(np.asarray(chi, dtype=int), (n,))
        missing = set(np.unique(chi).tolist()) - set(self.coefs)
        if missing:
            raise DomainError(f"no fitted layer for indicator value(s) {sorted(missing)}")
        return x2, chi, single

    def _unit(self, x, layer):
        z = self.boxes[layer].to_unit(x)
        self.extrapolation_count += int(np.sum(np.any(np.abs(z) > 1.0 + 2.0 * self.extrapolation_margin, axis=1)))
        return z

    def fitted(self, x, chi=None):
        """Raw fitted quantity (before dividing by ``scale``)."""
        x, chi, single = self._prep(x, chi)
        out = np.empty(x.shape[0])
        for layer in np.unique(chi):
            sel = chi == layer
            out[sel] = basis_matrix(self._unit(x[sel], int(layer)), self.alpha) @ self.coefs[int(layer)]
        return out[0] if single else out

    def eval(self, x, chi=None):
        return self.fitted(x, chi) / self.scale

    def eval_grad(self, x, chi=None):
        """Values and gradients with respect to the (unnormalised) state."""
        x, chi, single = self._prep(x, chi)
        val = np.empty(x.shape[0])
        grad = np.empty(x.shape)
        for layer in np.unique(chi):
            sel = chi == layer
            box = self.boxes[int(layer)]
            v, gz = _value_and_gradient(self._unit(x[sel], int(layer)), self.alpha, self.coefs[int(layer)])
            val[sel] = v
            grad[sel] = box.unit_grad_to_state(gz, x[sel])
        val /= self.scale
        grad /= self.scale
        if single:
            return val[0], grad[0]
        return val, grad

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "alpha": self.alpha.tolist(),
            "scale": self.scale,
            "layers": {
                str(k): {
                    "lower": b.lower.tolist(),
                    "upper": b.upper.tolist(),
                    "transform": None if b.transform is None else b.transform.tolist(),
                    "log_dims": list(b.log_dims),
                    "mix": None if b.mix is None else b.mix.tolist(),
                    "coefs": self.coefs[k].tolist(),
                    "fit_residual": self.fit_residual.get(k),
                }
                for k, b in self.boxes.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValueFunctionApprox":
        boxes, coefs, resid = {}, {}, {}
        for k, layer in d["layers"].items():
            tr, mix = layer.get("transform"), layer.get("mix")
            boxes[int(k)] = Box(np.array(layer["lower"]), np.array(layer["upper"]),
                                None if tr is None else np.array(tr), tuple(layer.get("log_dims", ())),
                                None if mix is None else np.array(mix))
            coefs[int(k)] = np.array(layer["coefs"])
            if layer.get("fit_residual") is not None:
                resid[int(k)] = float(layer["fit_residual"])
        return cls(boxes=boxes, degree=int(d["degree"]), alpha=np.array(d["alpha"], dtype=int),
                   coefs=coefs, scale=float(d["scale"]), fit_residual=resid)

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ValueFunctionApprox":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _rank_report(z: np.ndarray, alpha: np.ndarray):
    for k in range(z.shape[1]):
        needed = int(alpha[:, k].max()) + 1
        distinct = np.unique(np.round(z[:, k], 12)).size
        if distinct < needed:
            return f"dimension {k} has {distinct} distinct node coordinate(s) but degree {needed - 1} needs {needed}"
    return "node set does not determine all coefficients"


def _lstsq_layer(nodes, values, box, alpha, scale, layer):
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[1] != box.dim:
        raise ApproximationError("node dimension does not match box")
    z = box.to_unit(nodes)
    b = basis_matrix(z, alpha)
    rank = np.linalg.matrix_rank(b)
    if rank < alpha.shape[0]:
        raise ApproximationError(f"rank-deficient fit ({rank} < {alpha.shape[0]}): {_rank_report(z, alpha)}")
    v = scale * np.asarray(values, dtype=float)
    if v.shape != (nodes.shape[0],):
        raise ApproximationError("values must have one entry per node")
    if not np.all(np.isfinite(v)):
        raise ApproximationError(f"non-finite value in layer {layer}")
    c, *_ = np.linalg.lstsq(b, v, rcond=None)
    return c, float(np.max(np.abs(b @ c - v)))


def fit(nodes, values, box: Box, degree: int, scale: float = 1.0) -> ValueFunctionApprox:
    """Least-squares fit of one or more layers at common nodes in a common box.

    Parameters
    ----------
    nodes : (n, d) array of states inside ``box``
    values : array of length n, or dict mapping layer -> array of length n
    box : approximation box
    degree : total degree of the complete basis
    scale : values are stored multiplied by ``scale``; see :class:`ValueFunctionApprox`
    """
    layers = values if isinstance(values, dict) else {0: values}
    return fit_layers({k: (nodes, v, box) for k, v in layers.items()}, degree, scale)


def fit_layers(data: dict, degree: int, scale: float = 1.0) -> ValueFunctionApprox:
    """Fit each layer on its own nodes and box: ``data[layer] = (nodes, values, box)``."""
    dims = {box.dim for _, _, box in data.values()}
    if len(dims) != 1:
        raise ApproximationError("all layers must share the state dimension")
    alpha = multi_indices(dims.pop(), degree)
    boxes, coefs, resid = {}, {}, {}
    for layer, (nodes, values, box) in data.items():
        coefs[int(layer)], resid[int(layer)] = _lstsq_layer(nodes, values, box, alpha, scale, layer)
        boxes[int(layer)] = box
    return ValueFunctionApprox(boxes=boxes, degree=degree, alpha=alpha, coefs=coefs, scale=scale, fit_residual=resid)
