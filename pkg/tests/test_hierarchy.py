import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicheb.closedform import oracle_uniform_norm
from multicheb.domains import make_ball, make_cross_polytope, make_hypercube, make_simplex
from multicheb.hierarchy import (LevelError, assemble_moment_relaxation, assemble_sos_relaxation,
                                 level_threshold, localizing_matrix, moment_matrix,
                                 moments_from_solution, recover_best_approximant, run_hierarchy,
                                 run_level)
from multicheb.poly import SparsePolynomial, monomials_up_to
from multicheb.sdp import solve

SP = SparsePolynomial


def dirac_moments(points, weights, order):
    points = np.atleast_2d(points)
    d = points.shape[1]
    return {k: float(sum(w * np.prod(p ** np.array(k)) for p, w in zip(points, weights)))
            for k in monomials_up_to(d, order)}


def test_moment_matrix_small():
    y = {(0,): 1.0, (1,): 0.3, (2,): 0.7}
    assert np.array_equal(moment_matrix(y, 1, 1), [[1.0, 0.3], [0.3, 0.7]])


def test_moment_matrix_of_dirac_is_rank_one():
    w = np.array([0.2, -0.5, 0.7])
    M = moment_matrix(dirac_moments(w, [1.0], 4), 2, 3)
    v = np.array([np.prod(w ** np.array(k)) for k in monomials_up_to(3, 2)])
    assert np.allclose(M, np.outer(v, v), atol=1e-14)


def test_moment_matrix_size():
    y = dirac_moments([0.1, 0.2, 0.3], [1.0], 14)
    assert moment_matrix(y, 7, 3).shape == (120, 120)


def test_moment_matrix_missing_entry():
    with pytest.raises(KeyError):
        moment_matrix({(0,): 1.0, (1,): 0.0}, 1, 1)


def test_localizing_matrix_examples():
    y = dirac_moments([0.5], [1.0], 4)
    assert np.allclose(localizing_matrix(y, SP.constant(1, 1.0), 1), moment_matrix(y, 1, 1))
    g = SP(1, {(0,): 1.0, (2,): -1.0})
    L = localizing_matrix(y, g, 1)
    assert np.allclose(L, 0.75 * np.outer([1, 0.5], [1, 0.5]))
    y2 = dirac_moments([2.0], [1.0], 4)
    assert np.linalg.eigvalsh(localizing_matrix(y2, g, 1))[0] < 0


def test_level_threshold_enforced():
    f = SP.monomial((1, 1, 1))
    assert level_threshold(f, make_ball(3)) == 4
    with pytest.raises(LevelError):
        assemble_moment_relaxation(f, 3, make_ball(3), 3)
    P = assemble_moment_relaxation(f, 3, make_ball(3), 3, force_level=True)
    assert len(P.blocks) == 4


@pytest.mark.parametrize("dom,blocks", [(make_ball(3), 4), (make_simplex(3), 10),
                                        (make_cross_polytope(3), 18)])
def test_block_count(dom, blocks):
    P = assemble_moment_relaxation(SP.monomial((1, 1, 1)), 3, dom, 4)
    assert len(P.blocks) == blocks


def test_moment_examples():
    cases = [((1, 1), make_hypercube(2), 3, 1.0),
             ((1, 1, 1), make_ball(3), 4, 3 ** -1.5),
             ((1, 1, 1), make_simplex(3), 4, 1 / 72)]
    for k, dom, t, val in cases:
        lv = run_level(SP.monomial(k), sum(k), dom, t, sos=False)
        assert lv.moment_status == "optimal"
        assert lv.ub_moment == pytest.approx(val, abs=1e-6)


def test_moment_vector_invariants():
    f = SP.monomial((2, 1, 1))
    P = assemble_moment_relaxation(f, 4, make_ball(3), 5)
    mv = moments_from_solution(P, solve(P))
    assert mv.mass() == pytest.approx(1.0, abs=1e-8)
    assert mv.max_low_degree_gap(4) <= 1e-8


@pytest.mark.parametrize("t,force", [(2, True), (3, False)])
def test_sos_univariate(t, force):
    # level 2 sits below the guaranteed threshold 3 but is already exact
    f = SP.monomial((2,))
    P = assemble_sos_relaxation(f, 2, make_hypercube(1), t, force)
    s = solve(P)
    assert s.objective == pytest.approx(0.5, abs=1e-7)
    p = recover_best_approximant(P, s)
    # x^2 - p = T_2 / 2
    assert p.allclose(SP.constant(1, 0.5), 1e-6)


def test_sos_ball_211():
    P = assemble_sos_relaxation(SP.monomial((2, 1, 1)), 4, make_ball(3), 5)
    assert solve(P).objective == pytest.approx((3 - math.sqrt(8)) / 2, abs=1e-6)


def test_self_approximation():
    f = SP(2, {(1, 0): 2.0, (0, 1): -1.0, (0, 0): 0.5})
    P = assemble_sos_relaxation(f, 2, make_ball(2), 2)
    s = solve(P)
    assert abs(s.objective) <= 1e-7
    assert recover_best_approximant(P, s).allclose(f, 1e-6)


def test_recover_hypercube_11():
    f = SP.monomial((1, 1))
    P = assemble_sos_relaxation(f, 2, make_hypercube(2), 3)
    p = recover_best_approximant(P, solve(P))
    assert oracle_uniform_norm(f - p, make_hypercube(2)) == pytest.approx(1.0, abs=1e-6)


def test_run_level_examples():
    lv = run_level(SP.monomial((2, 2, 2)), 6, make_ball(3), 7)
    assert lv.ub_moment == pytest.approx(1 / 72, abs=1e-6)
    assert abs(lv.ub - lv.ub_moment) <= 1e-6
    lv = run_level(SP.monomial((2, 2, 1)), 5, make_ball(3), 6)
    assert lv.ub_moment == pytest.approx(3.63000825e-2, abs=1e-6)
    p = lv.approximant
    assert oracle_uniform_norm(SP.monomial((2, 2, 1)) - p, make_ball(3)) == pytest.approx(
        3.63000825e-2, abs=1e-5)


def test_run_level_cross_321():
    lv = run_level(SP.monomial((3, 2, 1)), 6, make_cross_polytope(3), 7, sos=False)
    assert lv.ub_moment == pytest.approx(1.087e-3, rel=1e-3)


def test_run_hierarchy_certifies_ball_111():
    rep = run_hierarchy(SP.monomial((1, 1, 1)), 3, make_ball(3))
    assert rep.certified and rep.certified_level == 4
    assert rep.value == pytest.approx(0.19245, abs=1e-5)


def test_run_hierarchy_levels_nonincreasing():
    rep = run_hierarchy(SP.monomial((2, 1)), 3, make_simplex(2), 4, 6, stop_when_certified=False,
                        sos=False)
    ubs = rep.ub_moment
    assert len(ubs) == 3
    assert all(b <= a + 1e-7 for a, b in zip(ubs, ubs[1:]))
    assert rep.value == pytest.approx(2.0 ** -5, abs=1e-7)


def test_run_hierarchy_bad_range():
    with pytest.raises(LevelError):
        run_hierarchy(SP.monomial((1, 1)), 2, make_ball(2), 5, 4)


@settings(max_examples=8, deadline=None)
@given(st.tuples(st.integers(1, 3), st.integers(1, 3)),
       st.sampled_from(["ball", "simplex", "hypercube"]))
def test_upper_bound_property(k, fam):
    from multicheb.closedform import known_error
    from multicheb.domains import make_domain
    dom = make_domain(fam, 2)
    f = SP.monomial(k)
    t = level_threshold(f, dom)
    lv = run_level(f, sum(k), dom, t, sos=False)
    assert lv.ub_moment >= known_error(k, fam).value - 1e-7
