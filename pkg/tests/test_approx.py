import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from direscu.approx import (Box, Domain, ValueFunctionApprox, chebyshev_values, cheb_nodes, fit, fit_layers,
                            lobatto_points, multi_indices, n_coefficients)
from direscu.errors import ApproximationError, DomainError
from oracles import cheb_direct, random_polynomial


def unit_box(d, lo=-1.0, hi=1.0):
    return Box(np.full(d, lo), np.full(d, hi))


def test_chebyshev_recurrence_matches_direct():
    z = np.linspace(-1, 1, 1001)
    t = chebyshev_values(z, 12)
    for n in range(13):
        np.testing.assert_allclose(t[:, n], cheb_direct(z, n), atol=1e-12)


def test_chebyshev_derivative_finite_difference():
    z = np.linspace(-0.9, 0.9, 37)
    _, dt = chebyshev_values(z, 8, with_derivative=True)
    h = 1e-6
    fd = (chebyshev_values(z + h, 8) - chebyshev_values(z - h, 8)) / (2 * h)
    np.testing.assert_allclose(dt, fd, atol=1e-6)


def test_lobatto_three_points():
    np.testing.assert_allclose(lobatto_points(3), [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(lobatto_points(1), [0.0])


def test_coefficient_counts():
    assert len(multi_indices(10, 2)) == 66 == n_coefficients(10, 2)
    assert len(multi_indices(10, 3)) == 286


def test_node_counts():
    box = Box(np.zeros(10), np.arange(1, 11, dtype=float))
    assert cheb_nodes(box, 0).shape == (1, 10)
    np.testing.assert_allclose(cheb_nodes(box, 0)[0], box.from_unit(np.zeros(10)))
    assert cheb_nodes(box, 2).shape[0] >= 66
    with pytest.raises(ApproximationError):
        cheb_nodes(box, 2, nodes_per_dim=2)


def test_degenerate_box_rejected():
    with pytest.raises(DomainError):
        Box(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(DomainError):
        Domain(np.zeros((3, 2)), np.ones((3, 2)) * np.array([1.0, 0.0]))


@given(st.integers(0, 2**31 - 1))
def test_domain_round_trip(seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-5, 5, 4)
    box = Box(lo, lo + rng.uniform(0.1, 10, 4))
    x = box.from_unit(rng.uniform(-1, 1, (20, 4)))
    np.testing.assert_allclose(box.from_unit(box.to_unit(x)), x, rtol=1e-14, atol=1e-13)


def test_transformed_log_box_round_trip(rng):
    r = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.1, 0.0, 2.0]])
    x = rng.uniform(1, 5, (30, 3))
    y = x @ r.T
    box = Box(np.log(y.min(0)) * np.array([1, 0, 0]) + y.min(0) * np.array([0, 1, 1]),
              np.log(y.max(0)) * np.array([1, 0, 0]) + y.max(0) * np.array([0, 1, 1]), r, (0,))
    np.testing.assert_allclose(box.from_unit(box.to_unit(x)), x, rtol=1e-13)


def test_constant_data_only_constant_coefficient():
    box = unit_box(3)
    nodes = cheb_nodes(box, 2)
    v = fit(nodes, np.full(len(nodes), 4.2), box, 2)
    assert v.coefs[0][0] == pytest.approx(4.2)
    assert np.max(np.abs(v.coefs[0][1:])) < 1e-12
    _, g = v.eval_grad(np.array([0.3, -0.2, 0.1]))
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_linear_slope_gradient():
    box = Box(np.zeros(2), np.array([4.0, 2.0]))
    nodes = cheb_nodes(box, 1)
    v = fit(nodes, 3.0 * nodes[:, 1] + 1.0, box, 1)
    _, g = v.eval_grad(np.array([1.0, 1.5]))
    np.testing.assert_allclose(g, [0.0, 3.0], atol=1e-12)


@pytest.mark.parametrize("dim,degree", [(1, 4), (3, 3), (10, 2), (10, 3)])
def test_polynomial_reproduced_off_node(dim, degree, rng):
    f, _ = random_polynomial(dim, degree, rng)
    box = Box(np.full(dim, -1.5), np.full(dim, 2.0))
    nodes = cheb_nodes(box, degree)
    v = fit(nodes, f(nodes), box, degree)
    test = box.from_unit(rng.uniform(-1, 1, (500, dim)))
    scale = max(1.0, np.max(np.abs(f(test))))
    assert np.max(np.abs(v.eval(test) - f(test))) <= 1e-10 * scale


def test_spectral_convergence_1d():
    box = Box(np.array([0.0]), np.array([2.0]))
    test = np.linspace(0, 2, 401)[:, None]
    errs = []
    for d in (2, 4, 6):
        nodes = cheb_nodes(box, d)
        v = fit(nodes, np.exp(np.sin(nodes[:, 0])), box, d)
        errs.append(np.max(np.abs(v.eval(test) - np.exp(np.sin(test[:, 0])))))
    assert errs[0] > errs[1] > errs[2]


def test_gradient_matches_finite_difference(rng):
    dim, degree = 10, 3
    box = Box(np.full(dim, 1.0), np.full(dim, 3.0))
    alpha = multi_indices(dim, degree)
    v = ValueFunctionApprox(boxes={0: box}, degree=degree, alpha=alpha, coefs={0: rng.normal(size=len(alpha))})
    x = box.from_unit(rng.uniform(-0.95, 0.95, (1000, dim)))
    _, g = v.eval_grad(x)
    h = 1e-5
    fd = np.empty_like(x)
    for d in range(dim):
        e = np.zeros(dim)
        e[d] = h
        fd[:, d] = (v.eval(x + e) - v.eval(x - e)) / (2 * h)
    assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


def test_fit_is_projection(rng):
    box = unit_box(4)
    alpha = multi_indices(4, 3)
    v = ValueFunctionApprox(boxes={0: box}, degree=3, alpha=alpha, coefs={0: rng.normal(size=len(alpha))})
    nodes = cheb_nodes(box, 3)
    again = fit(nodes, v.eval(nodes), box, 3)
    np.testing.assert_allclose(again.coefs[0], v.coefs[0], atol=1e-10)


def test_exact_interpolation_when_square():
    box = Box(np.array([0.0]), np.array([1.0]))
    nodes = cheb_nodes(box, 4, oversample=1.0)
    assert len(nodes) == 5
    v = fit(nodes, np.cos(3 * nodes[:, 0]), box, 4)
    assert v.fit_residual[0] < 1e-12


def test_rank_deficient_reports_dimension():
    box = unit_box(2)
    nodes = np.column_stack([np.linspace(-1, 1, 10), np.zeros(10)])
    with pytest.raises(ApproximationError, match="dimension 1"):
        fit(nodes, np.ones(10), box, 2)


def test_layers_and_serialisation(tmp_path, rng):
    b0, b1 = unit_box(3), unit_box(3, 0.0, 2.0)
    n0, n1 = cheb_nodes(b0, 2), cheb_nodes(b1, 2)
    v = fit_layers({0: (n0, n0.sum(1) ** 2, b0), 1: (n1, -n1[:, 0], b1)}, 2, scale=0.5)
    x = np.array([[0.1, 0.2, 0.3], [1.0, 1.5, 0.5]])
    chi = np.array([0, 1])
    np.testing.assert_allclose(v.eval(x, chi), [0.36, -1.0], atol=1e-12)
    v.save(tmp_path / "v.json")
    w = ValueFunctionApprox.load(tmp_path / "v.json")
    np.testing.assert_allclose(w.eval(x, chi), v.eval(x, chi), rtol=1e-15)
    with pytest.raises(DomainError):
        fit(n0, n0[:, 0], b0, 1).eval(x, chi)


def test_extrapolation_counted():
    box = unit_box(2)
    nodes = cheb_nodes(box, 1)
    v = fit(nodes, nodes[:, 0], box, 1)
    v.eval(np.array([[0.0, 0.0], [3.0, 0.0]]))
    assert v.extrapolation_count == 1
