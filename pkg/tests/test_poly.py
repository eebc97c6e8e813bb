import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from multicheb.poly import (SparsePolynomial, chebyshev_T, chebyshev_U, evaluate, grlex_key,
                            monomials_up_to, real_roots, tensor_product, univariate_to_sparse)

SP = SparsePolynomial


def test_monomials_univariate():
    assert monomials_up_to(1, 2) == [(0,), (1,), (2,)]


@pytest.mark.parametrize("d,t", [(3, 2), (3, 7), (2, 5), (4, 3)])
def test_monomial_counts(d, t):
    mons = monomials_up_to(d, t)
    assert len(mons) == math.comb(t + d, d)
    # brute-force enumeration
    brute = {k for k in np.ndindex(*([t + 1] * d)) if sum(k) <= t}
    assert set(mons) == brute
    keys = [grlex_key(k) for k in mons]
    assert all(a < b for a, b in zip(keys, keys[1:]))


def test_evaluate_examples():
    p = SP.monomial((2, 2, 1))
    assert evaluate(p, (1, 1, 1)) == 1.0
    tau = 0.4052
    u = math.sqrt((1 - tau ** 2) / 2)
    assert evaluate(p, (u, u, tau)) == pytest.approx(((1 - tau ** 2) / 2) ** 2 * tau, rel=1e-14)
    assert evaluate(SP.zero(3), (0.3, 2.0, -1.0)) == 0.0


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(SP.monomial((1, 1)), (1.0, 2.0, 3.0))


def test_arith_examples():
    x1, x2 = SP.variable(0, 2), SP.variable(1, 2)
    assert (x1 + x2) * (x1 - x2) == SP(2, {(2, 0): 1.0, (0, 2): -1.0})
    z = SP.monomial((3, 1)).scale(0.0)
    assert z.is_zero and len(z) == 0 and z.degree == -1
    t3 = univariate_to_sparse(chebyshev_T(3))
    assert t3 * SP.constant(1, 1.0) == t3
    with pytest.raises(ValueError):
        x1 + SP.variable(0, 3)


def test_no_explicit_zeros():
    x = SP.variable(0, 1)
    assert len(x - x) == 0


def test_chebyshev_T():
    assert np.allclose(chebyshev_T(3).coef, [0, -3, 0, 4])
    assert np.allclose(chebyshev_T(0).coef, [1])
    assert np.allclose(chebyshev_T(5).coef, [0, 5, 0, -20, 0, 16])
    for n in range(1, 12):
        assert chebyshev_T(n).coef[-1] == 2.0 ** (n - 1)


def test_chebyshev_T_cosine_identity():
    theta = np.linspace(0, 2 * np.pi, 1000)
    for n in range(13):
        assert np.max(np.abs(chebyshev_T(n)(np.cos(theta)) - np.cos(n * theta))) <= 1e-10


def test_chebyshev_U():
    assert np.allclose(chebyshev_U(-1).coef, [0])
    assert np.allclose(chebyshev_U(1).coef, [0, 2])
    assert np.allclose(chebyshev_U(3).coef, [0, -4, 0, 8])
    with pytest.raises(ValueError):
        chebyshev_U(-2)


def test_tensor_product():
    assert tensor_product([chebyshev_T(1), chebyshev_T(1)]) == SP.monomial((1, 1))
    assert tensor_product([chebyshev_T(2), chebyshev_T(1)]) == SP(2, {(2, 1): 2.0, (0, 1): -1.0})
    p = Polynomial([1.0, -2.0, 3.0])
    assert tensor_product([p, Polynomial([1.0])]) == univariate_to_sparse(p).lift(2)


def test_real_roots():
    q = Polynomial([243.0, -1944.0, 4880.0, -5472.0, 2880.0])
    r = real_roots(q, (0.0, 0.25))
    assert r[0] == pytest.approx(0.21998, abs=1e-5)
    assert np.allclose(real_roots(Polynomial([-1.0, 0.0, 1.0]), (-2.0, 2.0)), [-1.0, 1.0],
                       atol=1e-13)
    s = math.sqrt(3) / 2
    assert np.allclose(real_roots(chebyshev_T(3)), [-s, 0.0, s], atol=1e-13)


def test_real_roots_bad_interval():
    with pytest.raises(ValueError):
        real_roots(Polynomial([1.0, 1.0]), (1.0, 0.0))


def test_string_round_trip():
    p = SP(3, {(2, 2, 1): 1.0, (0, 0, 3): 0.1452003303264, (0, 0, 1): -0.1089, (0, 0, 0): 2.5})
    assert SP.parse(p.to_string(), 3) == p


# property tests

coeff = st.floats(-5, 5, allow_nan=False).filter(lambda c: c != 0.0)


@st.composite
def polys(draw, dim=2, deg=3):
    mons = monomials_up_to(dim, deg)
    keys = draw(st.lists(st.sampled_from(mons), max_size=6, unique=True))
    return SP(dim, {k: draw(coeff) for k in keys})


points = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=2, max_size=2)


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(p, q, r):
    assert ((p * q) * r).allclose(p * (q * r), 1e-9)
    assert (p * (q + r)).allclose(p * q + p * r, 1e-9)
    assert (p + q).allclose(q + p, 0.0)


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), points)
def test_evaluation_is_multiplicative(p, q, x):
    lhs = (p * q).evaluate(x)
    rhs = p.evaluate(x) * q.evaluate(x)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs)) * 100


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=6))
def test_real_roots_residual(coefs):
    q = Polynomial(coefs)
    if np.abs(q.coef).sum() == 0.0:
        return
    tol = 1e-13
    for r in real_roots(q, (-2.0, 2.0), tol):
        assert abs(q(r)) <= max(tol * (1 + np.abs(q.coef).sum()), 1e-12 * np.abs(q.coef).sum())
