from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import scipy.special
from hypothesis import given
from hypothesis import strategies as st

from bernstein_dg.bernstein import eval_decasteljau
from bernstein_dg.counters import OpCounter
from bernstein_dg.mass import dense
from bernstein_dg.multiindex import dim, enumerate_indices
from bernstein_dg.stroud import (
    bernstein_1d, duffy, eval_at_stroud, facet_rule, gauss_jacobi, moments_from_values,
    stroud_rule,
)
from oracles import monomial_integral


def test_gauss_jacobi_examples():
    r = gauss_jacobi(1, 0)
    assert r.nodes[0] == pytest.approx(0.5) and r.weights[0] == pytest.approx(1.0)
    r = gauss_jacobi(1, 1)
    assert r.nodes[0] == pytest.approx(1 / 3) and r.weights[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        gauss_jacobi(0, 0)


@pytest.mark.parametrize("a", [0, 1, 2])
@pytest.mark.parametrize("q", [1, 2, 5, 11, 20])
def test_gauss_jacobi_against_scipy(q, a):
    x, w = scipy.special.roots_jacobi(q, a, 0)
    r = gauss_jacobi(q, a)
    np.testing.assert_allclose(r.nodes, 0.5 * (1 + x), atol=1e-14)
    np.testing.assert_allclose(r.weights, w / 2 ** (a + 1), rtol=1e-12)


@pytest.mark.parametrize("a", [0, 1, 2])
@pytest.mark.parametrize("q", [1, 3, 8])
def test_gauss_jacobi_exactness(q, a):
    r = gauss_jacobi(q, a)
    for k in range(2 * q):
        # int_0^1 (1-t)^a t^k dt = a! k! / (a+k+1)!
        exact = factorial(a) * factorial(k) / factorial(a + k + 1)
        assert r.weights @ r.nodes ** k == pytest.approx(exact, rel=1e-13)


def test_duffy_examples():
    np.testing.assert_allclose(duffy([0.0, 0.0]), [0, 0, 1])
    np.testing.assert_allclose(duffy([1.0, 0.37]), [1, 0, 0])
    assert stroud_rule(2, 4).weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_duffy_lands_on_simplex(rng):
    for d in (1, 2, 3):
        lam = duffy(rng.uniform(size=(1000, d)))
        assert lam.min() >= 0.0
        np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_stroud_weight_sum(d):
    for q in (1, 3, 6):
        assert stroud_rule(d, q).weights.sum() == pytest.approx(1 / factorial(d), abs=1e-15)


def test_facet_rule():
    assert facet_rule(2, 3).weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert facet_rule(3, 4).weights.sum() == pytest.approx(0.5, abs=1e-15)
    n = 5
    r = facet_rule(2, n + 1)
    B = bernstein_1d(n, r.lines[0].nodes)
    np.testing.assert_allclose((B * r.weights) @ B.T, dense(1, n), atol=1e-14)


@pytest.mark.parametrize("d,n", [(1, 8), (2, 8), (3, 8), (2, 3), (3, 5)])
def test_stroud_exactness(d, n):
    """All monomials b^alpha with |alpha| <= 2n integrate exactly with q = n + 1."""
    rule = stroud_rule(d, n + 1)
    lam = rule.points
    W = rule.weights
    for k in range(0, 2 * n + 1, max(1, n // 2)):
        for alpha in enumerate_indices(d, k):
            vals = np.prod([lam[..., i] ** a for i, a in enumerate(alpha)], axis=0)
            assert (W * vals).sum() == pytest.approx(float(monomial_integral(alpha)),
                                                     rel=1e-13, abs=1e-16)


def test_eval_examples(rng):
    rule = stroud_rule(2, 4)
    np.testing.assert_allclose(eval_at_stroud(np.ones(dim(2, 3)), 2, 3, rule), 1.0, atol=1e-14)
    v = eval_at_stroud(np.array([0.0, 1.0, 0.0]), 2, 1, rule)
    np.testing.assert_allclose(v, rule.points[..., 1], atol=1e-15)
    with pytest.raises(ValueError):
        eval_at_stroud(np.ones(5), 2, 3, rule)
    with pytest.raises(ValueError):
        eval_at_stroud(np.ones(10), 3, 3, rule)


def test_eval_matches_decasteljau(rng):
    d, n, q = 3, 6, 7
    rule = stroud_rule(d, q)
    c = rng.uniform(-1, 1, dim(d, n))
    vals = eval_at_stroud(c, d, n, rule)
    assert vals.shape == (q, q, q)
    lam = rule.points
    ref = np.array([eval_decasteljau(c, d, p) for p in lam.reshape(-1, d + 1)])
    assert np.abs(vals.ravel() - ref).max() <= 1e-12


def test_grid_order_t1_slowest():
    rule = stroud_rule(2, 3)
    t = rule.cube_points
    np.testing.assert_array_equal(t[:, 0, 0], rule.lines[0].nodes)
    np.testing.assert_array_equal(t[0, :, 1], rule.lines[1].nodes)


def test_moments_examples(rng):
    rule = stroud_rule(2, 3)
    mu = moments_from_values(np.ones((3, 3)), 2, 2, rule)
    np.testing.assert_allclose(mu, 1 / 12, atol=1e-14)
    np.testing.assert_array_equal(moments_from_values(np.zeros((3, 3)), 2, 2, rule), 0)
    for d, n in [(1, 4), (2, 5), (3, 4)]:
        rule = stroud_rule(d, n + 1)
        u = rng.normal(size=dim(d, n))
        mu = moments_from_values(eval_at_stroud(u, d, n, rule), d, n, rule)
        np.testing.assert_allclose(mu, dense(d, n) @ u, atol=1e-13)


@given(st.integers(1, 3), st.integers(0, 6), st.integers(1, 8), st.integers(0, 2**31))
def test_moments_adjoint(d, n, q, seed):
    rng = np.random.default_rng(seed)
    rule = stroud_rule(d, q)
    f = rng.normal(size=dim(d, n))
    g = rng.normal(size=(q,) * d)
    lhs = (rule.weights * eval_at_stroud(f, d, n, rule) * g).sum()
    rhs = f @ moments_from_values(g, d, n, rule)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)


def test_batch_axes(rng):
    rule = stroud_rule(2, 4)
    c = rng.normal(size=(dim(2, 3), 2, 5))
    v = eval_at_stroud(c, 2, 3, rule)
    assert v.shape == (4, 4, 2, 5)
    np.testing.assert_allclose(v[..., 1, 3], eval_at_stroud(c[:, 1, 3], 2, 3, rule))
    m = moments_from_values(v, 2, 3, rule)
    np.testing.assert_allclose(m[:, 1, 3], moments_from_values(v[..., 1, 3], 2, 3, rule))


def test_sum_factorization_scaling():
    counts = []
    for n in (8, 16):
        c = OpCounter()
        eval_at_stroud(np.ones(dim(2, n)), 2, n, stroud_rule(2, n + 1), c)
        counts.append(c.sumfact)
    assert counts[1] / counts[0] <= 2 ** 3 * 1.3


def test_bernstein_1d_partition(rng):
    t = rng.uniform(size=7)
    np.testing.assert_allclose(bernstein_1d(6, t).sum(axis=0), 1.0)


def test_monomial_integral_oracle():
    assert monomial_integral((1, 1, 0)) == Fraction(1, 24)
