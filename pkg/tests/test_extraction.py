import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicheb.closedform import (ball_221_polynomial, ball_221_signature,
                                  simplex_211_constants, simplex_211_face_coordinates,
                                  simplex_211_polynomial, simplex_211_signature)
from multicheb.domains import make_ball, make_hypercube, make_simplex
from multicheb.extraction import (AtomicMeasure, ExtractionError, Signature, boundary_distance,
                                  build_signature, certify_moments, extract_atoms, extract_both,
                                  flatness_check, verify_equioscillation,
                                  verify_extremal_signature)
from multicheb.hierarchy import assemble_moment_relaxation, moments_from_solution
from multicheb.poly import SparsePolynomial, monomials_up_to
from multicheb.sdp import solve


def moments(points, weights, order):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    exps = np.array(monomials_up_to(points.shape[1], order))
    V = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)
    vals = np.asarray(weights) @ V
    return {tuple(k): float(v) for k, v in zip(exps, vals)}


def test_flatness_single_dirac():
    fl = flatness_check(moments([[0.3, -0.2]], [1.0], 6), 3, 2)
    assert (fl.rank, fl.rank_low) == (1, 1) and fl.certified


def test_flatness_generic_atoms():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.6, 0.6, size=(4, 2))
    fl = flatness_check(moments(pts, [0.1, 0.2, 0.3, 0.4], 8), 4, 2)
    assert (fl.rank, fl.rank_low) == (4, 4) and fl.certified


def test_flatness_uniform_measure_fails():
    # Lebesgue moments on [-1, 1]: the Hankel matrix is positive definite
    y = {(i,): (1 + (-1) ** i) / (2 * (i + 1)) for i in range(7)}
    fl = flatness_check(y, 3, 1)
    assert fl.rank == 4 and not fl.certified


def test_extract_two_point():
    y = moments([[-1.0], [1.0]], [0.5, 0.5], 4)
    mu = extract_atoms(y, 2, 1)
    order = np.argsort(mu.atoms[:, 0])
    assert np.allclose(mu.atoms[order, 0], [-1, 1], atol=1e-8)
    assert np.allclose(mu.weights[order], [0.5, 0.5], atol=1e-8)


def test_extract_not_flat_raises():
    y = {(i,): (1 + (-1) ** i) / (2 * (i + 1)) for i in range(7)}
    with pytest.raises(ExtractionError):
        extract_atoms(y, 3, 1)


def _match(found, truth):
    # max over true atoms of the distance to the closest found atom
    return max(np.min(np.abs(found - p).max(axis=1)) for p in truth)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([1, 2, 3, 5]), st.sampled_from([1, 2, 3]),
       st.sampled_from(["ball", "simplex", "hypercube"]))
def test_synthetic_atoms_recovered(seed, r, d, fam):
    rng = np.random.default_rng(seed)
    if fam == "simplex":
        pts = rng.dirichlet(np.ones(d + 1), size=r)[:, :d]
    elif fam == "ball":
        v = rng.normal(size=(r, d))
        pts = v / np.linalg.norm(v, axis=1, keepdims=True) * rng.uniform(0.3, 1.0, (r, 1))
    else:
        pts = rng.uniform(-1, 1, size=(r, d))
    if r > 1 and min(np.abs(pts[i] - pts[j]).max() for i in range(r) for j in range(i)) < 0.05:
        return
    w = rng.uniform(0.2, 1.0, r)
    w /= w.sum()
    t = 5 if d <= 2 else 4
    y = moments(pts, w, 2 * t)
    # the smallest flat order that can hold r atoms; exact moments allow a
    # rank threshold far below the one used on solver output
    s = next(s for s in range(1, t + 1) if len(monomials_up_to(d, s - 1)) >= r)
    mu = extract_atoms(y, s, d, rank_tol=1e-10)
    assert len(mu) == r
    assert _match(mu.atoms, pts) <= 1e-6
    order = [int(np.argmin(np.abs(mu.atoms - p).max(axis=1))) for p in pts]
    assert np.allclose(mu.weights[order], w, atol=1e-6)
    back = mu.moments(2 * s)
    num = np.sqrt(sum((back[k] - y[k]) ** 2 for k in back))
    den = np.sqrt(sum(y[k] ** 2 for k in back))
    assert num <= 1e-8 * den


def test_build_signature():
    a = AtomicMeasure(np.array([[0.1, 0.2]]), np.array([0.5]))
    b = AtomicMeasure(np.array([[-0.3, 0.4]]), np.array([0.5]))
    sig = build_signature(a, b)
    assert list(sig.signs) == [1, -1] and np.allclose(sig.weights, [0.5, 0.5])
    merged = build_signature(AtomicMeasure(np.array([[0.1, 0.2], [0.1, 0.2 + 1e-7]]),
                                           np.array([0.25, 0.25])), b)
    assert len(merged) == 2 and np.allclose(merged.weights, [0.5, 0.5])


def test_build_signature_ambiguous():
    a = AtomicMeasure(np.array([[0.1, 0.2]]), np.array([0.5]))
    with pytest.raises(ExtractionError) as err:
        build_signature(a, a)
    assert err.value.code == "ambiguous_signature"


def test_signature_validation():
    with pytest.raises(ValueError):
        Signature(np.zeros((2, 1)), [1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        Signature(np.zeros((2, 1)), [1, -1], [1.0, -0.5])


def test_extremal_univariate():
    sig = Signature(np.array([[-1.0], [0.0], [1.0]]), [1, -1, 1], np.ones(3) / 3)
    chk = verify_extremal_signature(sig, 1)
    assert chk.extremal
    assert np.allclose(chk.weights, [0.25, 0.5, 0.25])


def test_extremal_theorem_signatures():
    sig = simplex_211_signature()
    coords = simplex_211_face_coordinates(sig.points)
    assert len(sig) == 10
    assert verify_extremal_signature(sig, 3, coords).extremal
    for i in range(len(sig)):
        smaller = sig.drop(i)
        assert not verify_extremal_signature(smaller, 3,
                                             simplex_211_face_coordinates(smaller.points)).extremal
    sig = ball_221_signature()
    assert len(sig) == 18
    assert np.allclose(sig.points[9:], -sig.points[:9])
    assert verify_extremal_signature(sig, 4).extremal


def test_duplicate_points_reported():
    sig = Signature(np.array([[0.0], [0.0], [1.0]]), [1, 1, -1], np.ones(3) / 3)
    chk = verify_extremal_signature(sig, 0)
    assert chk.rank_deficient


def test_equioscillation():
    P = ball_221_polynomial()
    sig = ball_221_signature()
    assert verify_equioscillation(sig, P, make_ball(3))
    bumped = P + SparsePolynomial.monomial((0, 0, 1)).scale(1e-3)
    assert not verify_equioscillation(sig, bumped, make_ball(3))
    E = simplex_211_constants().E
    assert verify_equioscillation(simplex_211_signature(), simplex_211_polynomial(),
                                  make_simplex(3), norm=E)


def test_hierarchy_extraction_ball_221():
    f = SparsePolynomial.monomial((2, 2, 1))
    P = assemble_moment_relaxation(f, 5, make_ball(3), 6)
    mv = moments_from_solution(P, solve(P))
    ok, ranks = certify_moments(mv, make_ball(3), min_order=3)
    assert ok
    plus, minus = extract_both(mv, make_ball(3), ranks)
    sig = build_signature(plus, minus)
    assert len(sig) == 18
    assert np.any(np.abs(np.abs(sig.points[:, 2]) - 0.4052) < 1e-3)
    assert np.any(np.abs(np.abs(sig.points[:, 2]) - 1.0) < 1e-5)
    assert boundary_distance(plus, "ball").max() <= 1e-4
    assert verify_extremal_signature(sig, 4).extremal


def test_hierarchy_extraction_simplex_211():
    f = SparsePolynomial.monomial((2, 1, 1))
    P = assemble_moment_relaxation(f, 4, make_simplex(3), 5)
    mv = moments_from_solution(P, solve(P))
    ok, ranks = certify_moments(mv, make_simplex(3), min_order=2)
    assert ok
    sig = build_signature(*extract_both(mv, make_simplex(3), ranks))
    assert len(sig) == 10
    tau = simplex_211_constants().tau
    for p in [(1, 0, 0), (0, 0.5, 0.5), (0.25, 0.75, 0), (1 - 2 * tau, tau, tau)]:
        assert np.min(np.abs(sig.points - np.array(p)).max(axis=1)) <= 1e-4


def test_boundary_distance_bad_family():
    with pytest.raises(ValueError):
        boundary_distance(AtomicMeasure(np.zeros((1, 2)), np.ones(1)), "hypercube")
    assert make_hypercube(2).family == "hypercube"
