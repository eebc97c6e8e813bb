"""Rank-drop certification, atom extraction and extremal signatures.

A pseudo-moment vector whose Hankel matrix stops gaining rank between orders
``s - n'`` and ``s`` comes from an atomic measure with that many atoms.  The
atoms are the joint eigenvalues of the multiplication operators acting on the
column space of the Hankel matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .domains import SemialgebraicDomain, membership_many
from .poly import SparsePolynomial, monomials_up_to

log = logging.getLogger(__name__)

RANK_TOL = 1e-6
MERGE_TOL = 1e-5
MEMBERSHIP_TOL = 1e-6
POSITIVITY_TOL = 1e-8
WEIGHT_TOL = 1e-6


class ExtractionError(RuntimeError):
    """Raised with ``code`` ``extraction_failed`` or ``ambiguous_signature``."""

    def __init__(self, message, code="extraction_failed"):
        super().__init__(message)
        self.code = code


def vandermonde(points, exps) -> np.ndarray:
    """``x^e`` for every point (rows) and exponent (columns)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    E = np.asarray(exps, dtype=np.int64).reshape(len(exps), -1)
    return np.prod(pts[:, None, :] ** E[None, :, :], axis=2)


def hankel(y: dict, s: int, d: int) -> np.ndarray:
    basis = monomials_up_to(d, s)
    B = np.asarray(basis, dtype=np.int64)
    out = np.empty((len(basis), len(basis)))
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            try:
                out[i, j] = out[j, i] = y[tuple(B[i] + B[j])]
            except KeyError:
                raise KeyError(f"moment of {tuple(B[i] + B[j])} is missing") from None
    return out


def numerical_rank(A: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


@dataclass
class Flatness:
    order: int
    rank: int
    rank_low: int

    @property
    def certified(self) -> bool:
        return self.rank == self.rank_low


def flatness_check(y: dict, t: int, d: int, half_degree: int = 1,
                   rank_tol: float = RANK_TOL) -> Flatness:
    """Ranks of ``Hank_t(y)`` and ``Hank_{t-n'}(y)``; flat when they agree."""
    if t - half_degree < 0:
        raise ValueError("order is below the generator half-degree")
    r = numerical_rank(hankel(y, t, d), rank_tol)
    r_low = numerical_rank(hankel(y, t - half_degree, d), rank_tol)
    return Flatness(t, r, r_low)


def find_flat_order(y: dict, t: int, d: int, half_degree: int = 1, min_order: int = 1,
                    rank_tol: float = RANK_TOL) -> Flatness | None:
    """Largest ``s`` in ``[min_order, t]`` at which ``y`` truncated to ``2s`` is flat.

    Interior point solutions are of maximal rank on the top orders, which the
    relaxation leaves loosely constrained; the rank drop usually shows below.
    """
    for s in range(t, max(min_order, half_degree) - 1, -1):
        fl = flatness_check(y, s, d, half_degree, rank_tol)
        if fl.certified and fl.rank > 0:
            return fl
    return None


@dataclass
class AtomicMeasure:
    atoms: np.ndarray               # r x d
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if len(self.atoms) != len(self.weights):
            raise ValueError("one weight per atom")
        if np.any(self.weights <= 0):
            raise ValueError("atom weights must be positive")

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return len(self.weights)

    def moments(self, order: int) -> dict:
        exps = monomials_up_to(self.dim, order)
        vals = self.weights @ vandermonde(self.atoms, exps)
        return {k: float(v) for k, v in zip(exps, vals)}

    def in_domain(self, domain: SemialgebraicDomain, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        return membership_many(domain, self.atoms, tol)

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def extract_atoms(y: dict, t: int, d: int, half_degree: int = 1,
                  rank_tol: float = RANK_TOL, seed: int = 0, retries: int = 3) -> AtomicMeasure:
    """Atoms and weights of the measure behind a flat ``y`` at order ``t``."""
    fl = flatness_check(y, t, d, half_degree, rank_tol)
    if not fl.certified:
        raise ExtractionError(f"moments are not flat at order {t} (ranks {fl.rank}, {fl.rank_low})")
    r = fl.rank
    if r == 0:
        raise ExtractionError("moment matrix vanishes")
    top = monomials_up_to(d, t)
    row = {k: i for i, k in enumerate(top)}
    M = hankel(y, t, d)
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1][:r]
    if vals[order[-1]] <= 0:
        raise ExtractionError("moment matrix is not positive semidefinite on its range")
    # M = V V^T and V = zeta(atoms)^T sqrt(W) O for an orthogonal O
    V = vecs[:, order] * np.sqrt(vals[order])
    low = monomials_up_to(d, t - 1)
    V0 = V[[row[k] for k in low]]
    if np.linalg.matrix_rank(V0, tol=rank_tol * np.linalg.norm(V0, 2)) < r:
        raise ExtractionError("the lower Hankel block does not span the atoms")
    V0p = np.linalg.pinv(V0)
    mult = []
    for i in range(d):
        shifted = [tuple(e + (j == i) for j, e in enumerate(k)) for k in low]
        mult.append(V0p @ V[[row[k] for k in shifted]])

    rng = np.random.default_rng(seed)
    last = None
    for attempt in range(retries + 1):
        lam = rng.random(d)
        lam /= lam.sum()
        N = sum(c * Mi for c, Mi in zip(lam, mult))
        T, Q = sla.schur(N, output="real")
        if np.any(np.abs(np.diag(T, -1)) > 1e-8 * max(1.0, np.abs(T).max())):
            last = "complex joint eigenvalues"
            continue
        atoms = np.column_stack([np.diag(Q.T @ Mi @ Q) for Mi in mult])
        try:
            return _weights(y, atoms, t, d)
        except ExtractionError as exc:
            last = str(exc)
    raise ExtractionError(f"extraction failed after {retries + 1} attempts: {last}")


def _weights(y, atoms, t, d) -> AtomicMeasure:
    exps = monomials_up_to(d, t)
    A = vandermonde(atoms, exps).T
    rhs = np.array([y[k] for k in exps])
    w, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    mass = y[(0,) * d]
    if np.any(w < -WEIGHT_TOL * abs(mass)):
        raise ExtractionError(f"negative atom weight {w.min():.3e}")
    # a singular value just above the rank threshold shows up as an atom
    # carrying no mass; it is dropped with the clipped negative ones
    keep = w > WEIGHT_TOL * abs(mass)
    if not keep.any():
        raise ExtractionError("no atom carries mass")
    w = w[keep]
    atoms = atoms[keep]
    w = w * (mass / w.sum())
    return AtomicMeasure(atoms, w)


def certify_moments(moments, domain: SemialgebraicDomain, rank_tol: float = RANK_TOL,
                    min_order: int | None = None):
    """Rank-drop test on both pseudo-moment vectors of a relaxation solution.

    ``min_order`` is the smallest order whose truncation still carries the
    objective, ``ceil(n / 2)`` for degree-``n`` data; it defaults to the
    generator half-degree.  Returns ``(certified, ranks)`` where ``ranks`` maps
    each side to ``(order, rank, rank_low)`` or ``None``.
    """
    d = moments.dim
    t = moments.order // 2
    nh = domain.max_half_degree
    lo = max(nh, min_order or 0)
    ranks = {}
    for name, y in (("plus", moments.plus), ("minus", moments.minus)):
        fl = find_flat_order(y, t, d, nh, lo, rank_tol)
        ranks[name] = None if fl is None else (fl.order, fl.rank, fl.rank_low)
    ok = all(v is not None for v in ranks.values())
    return ok, ranks


def extract_both(moments, domain: SemialgebraicDomain, ranks: dict, rank_tol: float = RANK_TOL,
                 seed: int = 0):
    """Atomic measures for the two sides at the orders found by :func:`certify_moments`."""
    nh = domain.max_half_degree
    out = []
    for name, y in (("plus", moments.plus), ("minus", moments.minus)):
        order = ranks[name][0]
        out.append(extract_atoms(y, order, moments.dim, nh, rank_tol, seed))
    return tuple(out)


# signatures

@dataclass
class Signature:
    points: np.ndarray
    signs: np.ndarray
    weights: np.ndarray
    certified: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.signs = np.asarray(self.signs, dtype=int).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        n = len(self.points)
        if len(self.signs) != n or len(self.weights) != n:
            raise ValueError("points, signs and weights must have equal length")
        if np.any(np.abs(self.signs) != 1):
            raise ValueError("signs must be +1 or -1")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.signs)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def drop(self, i: int) -> "Signature":
        keep = np.arange(len(self)) != i
        return Signature(self.points[keep], self.signs[keep], self.weights[keep])

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "signs": self.signs.tolist(),
                "weights": self.weights.tolist(), "certified": bool(self.certified)}


def build_signature(plus: AtomicMeasure | None, minus: AtomicMeasure | None,
                    merge_tol: float = MERGE_TOL) -> Signature:
    """Signed union of two atomic measures, weights normalised to sum one."""
    pts, sg, wt = [], [], []
    for meas, sign in ((plus, 1), (minus, -1)):
        if meas is None:
            continue
        for x, w in zip(meas.atoms, meas.weights):
            for j, p in enumerate(pts):
                if np.max(np.abs(p - x)) <= merge_tol:
                    if sg[j] != sign:
                        raise ExtractionError(f"atom {x} carries both signs",
                                              code="ambiguous_signature")
                    wt[j] += w
                    break
            else:
                pts.append(np.array(x, dtype=float))
                sg.append(sign)
                wt.append(float(w))
    if not pts:
        raise ExtractionError("both measures are empty")
    wt = np.array(wt)
    return Signature(np.array(pts), np.array(sg), wt / wt.sum())


@dataclass
class ExtremalCheck:
    extremal: bool
    weights: np.ndarray | None
    null_dim: int
    rank_deficient: bool

    def __bool__(self):
        return self.extremal


def signature_matrix(points, signs, degree: int) -> np.ndarray:
    """Rows: monomials of degree <= ``degree``; columns: ``sign * x^e`` at each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    exps = monomials_up_to(pts.shape[1], degree)
    return (vandermonde(pts, exps) * np.asarray(signs)[:, None]).T


def verify_extremal_signature(sig: Signature, degree: int, points=None,
                              tol: float = 1e-9) -> ExtremalCheck:
    """Look for ``c > 0`` with ``sum c_w sign(w) m(w) = 0`` for all ``deg m <= degree``.

    ``points`` replaces the signature's coordinates, e.g. by coordinates on a
    face when the support lies there.
    """
    pts = sig.points if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) != len(sig):
        raise ValueError("one point per signature element")
    A = signature_matrix(pts, sig.signs, degree)
    dup = _has_duplicates(pts)
    if dup:
        log.warning("signature has repeated points")
    U, sv, Vt = np.linalg.svd(A)
    scale = sv[0] if sv.size else 1.0
    rank = int(np.sum(sv > tol * max(scale, 1.0)))
    N = Vt[rank:].T
    if N.shape[1] == 0:
        return ExtremalCheck(False, None, 0, dup)
    c = _positive_null_vector(N)
    if c is None:
        return ExtremalCheck(False, None, N.shape[1], dup)
    return ExtremalCheck(True, c / c.sum(), N.shape[1], dup)


def _has_duplicates(pts) -> bool:
    return len(np.unique(np.round(pts, 12), axis=0)) < len(pts)


def _accept(c):
    if c is None:
        return None
    if c.sum() < 0:
        c = -c
    c = c / np.abs(c).sum()
    return c if c.min() > POSITIVITY_TOL else None


def _positive_null_vector(N):
    # projection of the all-ones vector, then sign combinations of the basis
    ones = np.ones(N.shape[0])
    c = _accept(N @ (N.T @ ones))
    if c is not None:
        return c
    k = N.shape[1]
    if k <= 4:
        for combo in np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * k)).reshape(k, -1).T:
            if not combo.any():
                continue
            c = _accept(N @ combo)
            if c is not None:
                return c
    # LP: maximise the smallest entry of N a over the box |a| <= 1
    n = N.shape[0]
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-N, np.ones((n, 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(n), bounds=[(-1, 1)] * k + [(None, 1)],
                  method="highs")
    if res.status == 0 and -res.fun > 0:
        return _accept(N @ res.x[:k])
    return None


def verify_equioscillation(sig: Signature, g: SparsePolynomial, domain: SemialgebraicDomain,
                           tol: float = 1e-6, density: int = 60, norm: float | None = None) -> bool:
    """``|g| = ||g||`` on the support with the sign pattern of the signature.

    ``norm`` defaults to the grid oracle estimate of ``||g||`` on the domain.
    """
    if g.dim != sig.dim:
        raise ValueError("residual and signature live in different dimensions")
    if norm is None:
        from .closedform import oracle_uniform_norm
        norm = oracle_uniform_norm(g, domain, density)
    vals = g.evaluate_many(sig.points)
    if not np.all(np.abs(vals) >= (1.0 - tol) * norm):
        return False
    return bool(np.all(np.sign(vals) == sig.signs))


def boundary_distance(measure: AtomicMeasure, family: str) -> np.ndarray:
    """Distance of each atom to the sphere (ball) or the face ``sum x = 1`` (simplex)."""
    X = measure.atoms
    if family == "ball":
        return np.abs(np.linalg.norm(X, axis=1) - 1.0)
    if family == "simplex":
        return np.abs(X.sum(axis=1) - 1.0)
    raise ValueError(f"no boundary report for {family!r}")
