import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicheb.closedform import (B_CONSTANT, ball2d_best_approximant, ball_221_constant,
                                  ball_221_polynomial, ball_311_value, hypercube_best_approximant,
                                  known_error, oracle_uniform_norm, simplex2d_best_approximant,
                                  simplex2d_chebyshev, simplex_211_constants,
                                  simplex_211_polynomial)
from multicheb.domains import make_ball, make_domain, make_hypercube, make_simplex
from multicheb.poly import SparsePolynomial, chebyshev_T, univariate_to_sparse

SP = SparsePolynomial


def test_known_error_examples():
    assert known_error((2, 1, 1), "hypercube").value == 0.5
    assert known_error((3, 2), "ball").value == 1 / 16
    assert known_error((3, 2, 1), "ball") is None
    assert known_error((3, 1, 1), "simplex") is None
    assert known_error((1, 1), "unknown-shape") is None


def test_known_error_three_variables():
    assert known_error((1, 1, 1), "ball").value == pytest.approx(3 ** -1.5, abs=1e-15)
    assert known_error((1, 2, 1), "ball").value == pytest.approx((3 - math.sqrt(8)) / 2, abs=1e-15)
    assert known_error((2, 2, 2), "ball").value == pytest.approx(1 / 72, abs=1e-15)
    assert known_error((1, 1, 1), "simplex").value == pytest.approx(1 / 72, abs=1e-15)
    b = known_error((4, 4, 4), "ball")
    assert b.value == pytest.approx(1 / (27 ** 2 * 21.8935834), rel=1e-12)
    assert known_error((2, 2, 2), "simplex").value == b.value
    assert B_CONSTANT == 21.8935834


def test_known_error_reductions():
    # zero exponents drop to fewer variables of the same family
    assert known_error((2, 0, 1), "ball").value == 0.25
    assert known_error((0, 0, 3), "simplex").value == 2.0 ** -5
    assert known_error((0, 4), "cross").value == 2.0 ** -3
    with pytest.raises(ValueError):
        known_error((0, 0), "ball")


def test_ball_311_matches_table():
    assert ball_311_value() == pytest.approx(4.016e-2, abs=5e-5)


def test_ball_221_constant():
    a, tau = ball_221_constant()
    assert a == pytest.approx(3.63000825e-2, abs=1e-10)
    assert tau == pytest.approx(0.4052, abs=1e-4)
    assert (1 + tau) ** 2 * (1 - tau) * tau / 4 == pytest.approx(
        a * (1 + 4 * tau + 4 * tau ** 2), abs=1e-10)
    # brute force on a fine grid stays below the maximum
    t = np.linspace(0, 1, 200001)
    phi = (1 + t) ** 2 * (1 - t) * t / (4 * (1 + 4 * t + 4 * t ** 2))
    assert phi.max() <= a + 1e-15 and a - phi.max() <= 1e-10


def test_ball_221_polynomial():
    a, _ = ball_221_constant()
    P = ball_221_polynomial()
    assert P == SP.monomial((2, 2, 1)) + univariate_to_sparse(chebyshev_T(3), 3, 2).scale(a)
    assert P.evaluate((0, 0, 1)) == pytest.approx(a, abs=1e-15)
    assert P.evaluate((math.sqrt(3) / 2, 0, -0.5)) == pytest.approx(a, abs=1e-14)
    assert oracle_uniform_norm(P, make_ball(3), 60) == pytest.approx(a, abs=1e-5)


def test_simplex_211_constants():
    s = simplex_211_constants()
    assert s.tau == pytest.approx(0.21998, abs=1e-5)
    # sigma is a double root (h touches its level at the maximum), so only
    # about half the digits of a printed value are meaningful
    assert s.sigma == pytest.approx(0.41942, abs=3e-5)
    assert s.c == pytest.approx(-3 / s.tau, rel=1e-15)
    assert s.E == pytest.approx(2.68850e-3, abs=1e-7)
    assert s.E == pytest.approx(s.tau ** 2 / 18, rel=1e-12)
    h = s.sigma * (1 - 2 * s.sigma) * (s.sigma - s.tau) ** 2
    assert h == pytest.approx(1 / (2 * s.c ** 2), abs=1e-10)
    dh = (1 - 4 * s.sigma) * (s.sigma - s.tau) ** 2 + 2 * s.sigma * (1 - 2 * s.sigma) * (s.sigma - s.tau)
    assert abs(dh) <= 1e-6


def test_simplex_211_polynomial():
    s = simplex_211_constants()
    P = simplex_211_polynomial()
    assert P.evaluate((1, 0, 0)) == pytest.approx(s.E, abs=1e-15)
    y = 0.3
    assert P.evaluate((1 - y, y, 0)) == pytest.approx(-s.E * chebyshev_T(3)(2 * y - 1), abs=1e-14)
    assert P.evaluate((1 - y, 0, y)) == pytest.approx(-s.E * chebyshev_T(3)(2 * y - 1), abs=1e-14)
    assert P.evaluate((1 - 2 * s.sigma, s.sigma, s.sigma)) == pytest.approx(-s.E, abs=1e-10)
    assert oracle_uniform_norm(P, make_simplex(3), 60) == pytest.approx(s.E, abs=1e-5)


def test_hypercube_approximant_examples():
    assert hypercube_best_approximant((1, 1)).is_zero
    r = SP.monomial((2, 1)) - hypercube_best_approximant((2, 1))
    assert oracle_uniform_norm(r, make_hypercube(2)) == pytest.approx(0.5, abs=1e-12)
    r = SP.monomial((2, 2)) - hypercube_best_approximant((2, 2))
    half_t2 = SP(2, {(2, 2): 1.0, (2, 0): -0.5, (0, 2): -0.5, (0, 0): 0.25})
    assert r.allclose(half_t2, 1e-14)
    with pytest.raises(ValueError):
        hypercube_best_approximant((2, 0))


def test_triangle_examples():
    r = SP.monomial((2, 1)) - simplex2d_best_approximant((2, 1))
    assert oracle_uniform_norm(r, make_simplex(2)) == pytest.approx(1 / 32, abs=1e-12)
    # xy <= 1/4 on the triangle, so 8xy - 1 has norm 1 and 2^-3 of it has norm 1/8
    T = simplex2d_chebyshev((1, 1))
    assert T.allclose(SP(2, {(1, 1): 8.0, (0, 0): -1.0}), 1e-14)
    r = SP.monomial((1, 1)) - simplex2d_best_approximant((1, 1))
    assert oracle_uniform_norm(r, make_simplex(2)) == pytest.approx(1 / 8, abs=1e-12)
    with pytest.raises(ValueError):
        simplex2d_chebyshev((1, 2))


def test_disk_example():
    r = SP.monomial((1, 1)) - ball2d_best_approximant((1, 1))
    assert oracle_uniform_norm(r, make_ball(2)) == pytest.approx(0.5, abs=1e-12)


def _catalogue():
    out = []
    for fam, d, nmax in [("hypercube", 1, 6), ("hypercube", 2, 6), ("hypercube", 3, 5),
                         ("ball", 2, 6), ("simplex", 2, 6), ("ball", 1, 5), ("simplex", 1, 5)]:
        for k in itertools.product(range(1, nmax + 1), repeat=d):
            if sum(k) <= nmax:
                out.append((fam, k))
    return out + [("ball", (2, 2, 1)), ("simplex", (2, 1, 1)), ("simplex", (1, 2, 1))]


@pytest.mark.parametrize("fam,k", _catalogue())
def test_residual_norm_and_leading_part(fam, k):
    kn = known_error(k, fam)
    res = kn.residual
    n = sum(k)
    assert res.homogeneous_part(n).allclose(SP.monomial(k), 1e-10)
    assert res.degree == n
    norm = oracle_uniform_norm(res, make_domain(fam, len(k)), 40 if len(k) == 3 else 60)
    assert abs(norm - kn.value) <= 1e-4 * kn.value


def test_oracle_examples():
    assert oracle_uniform_norm(univariate_to_sparse(chebyshev_T(3)), make_hypercube(1)) == \
        pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        oracle_uniform_norm(SP.monomial((1, 1)), make_ball(3))
    with pytest.raises(ValueError):
        oracle_uniform_norm(SP.monomial((1,)), make_ball(1), density=1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_oracle_monotone_in_density(seed):
    rng = np.random.default_rng(seed)
    p = SP(2, {k: float(rng.normal()) for k in [(0, 0), (1, 0), (1, 1), (0, 3), (2, 1)]})
    # square grids of 9 and 17 points per side are nested
    sq = make_hypercube(2)
    coarse = oracle_uniform_norm(p, sq, 9, refine_steps=0)
    assert oracle_uniform_norm(p, sq, 17, refine_steps=0) >= coarse - 1e-12
    dom = make_ball(2)
    grid = oracle_uniform_norm(p, dom, 17, refine_steps=0)
    assert oracle_uniform_norm(p, dom, 17) >= grid - 1e-12


def test_json_form():
    js = known_error((2, 2, 1), "ball").to_json()
    assert set(js) >= {"k", "domain", "expression", "value", "provenance", "best_approximant"}
