"""Known errors of best approximation, explicit Chebyshev polynomials and a
grid oracle for uniform norms.

Everything here is independent of the semidefinite machinery so it can be
used to check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from .domains import (ALIASES, FAMILIES, SemialgebraicDomain, canonicalize_exponent, grid_sample,
                      project)
from .extraction import Signature, verify_extremal_signature
from .poly import (SparsePolynomial, chebyshev_T, chebyshev_U, real_roots, tensor_product,
                   univariate_to_sparse)

B_CONSTANT = 21.8935834     # decimal value as published; no defining equation given


@dataclass(frozen=True)
class KnownResult:
    k: tuple
    domain: str
    expression: str
    value: float
    provenance: str
    approximant: SparsePolynomial | None = None

    @property
    def residual(self) -> SparsePolynomial | None:
        if self.approximant is None:
            return None
        return SparsePolynomial.monomial(self.k) - self.approximant

    def to_json(self) -> dict:
        out = {"k": list(self.k), "domain": self.domain, "expression": self.expression,
               "value": self.value, "provenance": self.provenance}
        if self.approximant is not None:
            out["best_approximant"] = self.approximant.to_string()
        return out


# one-dimensional maximisations

def _rational_argmax(num: Polynomial, den: Polynomial, lo: float, hi: float):
    """Maximiser and maximum of ``num / den`` on ``[lo, hi]`` (``den > 0`` there)."""
    crit = num.deriv() * den - num * den.deriv()
    cands = [lo, hi] + real_roots(crit, (lo, hi), tol=1e-15)
    vals = [num(x) / den(x) for x in cands]
    i = int(np.argmax(vals))
    return float(cands[i]), float(vals[i])


@lru_cache(maxsize=None)
def ball_221_constant() -> tuple:
    """``(a, tau_B)``: maximum and maximiser of ``(1+t)^2 (1-t) t / (4 (1 + 4t + 4t^2))`` on [0, 1]."""
    t = Polynomial([0.0, 1.0])
    num = (1 + t) ** 2 * (1 - t) * t
    den = 4 * (1 + 4 * t + 4 * t ** 2)
    tau, a = _rational_argmax(num, den, 0.0, 1.0)
    return a, tau


def ball_221_polynomial() -> SparsePolynomial:
    """``x1^2 x2^2 x3 + a T_3(x3)``, the residual of the best approximant ``-a T_3(x3)``."""
    a, _ = ball_221_constant()
    return SparsePolynomial.monomial((2, 2, 1)) + univariate_to_sparse(a * chebyshev_T(3), 3, 2)


def ball_221_support() -> tuple:
    """Signature support ``(points, signs)``: nine points with sign +1 and their negatives."""
    _, tau = ball_221_constant()
    r = math.sqrt(3.0) / 2
    u = math.sqrt((1 - tau * tau) / 2)
    plus = [(0, 0, 1), (r, 0, -0.5), (-r, 0, -0.5), (0, r, -0.5), (0, -r, -0.5),
            (u, u, tau), (u, -u, tau), (-u, -u, tau), (-u, u, tau)]
    pts = np.array(plus + [tuple(-v for v in p) for p in plus], dtype=float)
    return pts, np.array([1] * 9 + [-1] * 9)


@dataclass(frozen=True)
class Simplex211:
    tau: float
    sigma: float
    c: float
    E: float


@lru_cache(maxsize=None)
def simplex_211_constants() -> Simplex211:
    quartic = Polynomial([243.0, -1944.0, 4880.0, -5472.0, 2880.0])
    roots = real_roots(quartic, (0.0, 0.25), tol=1e-15)
    if not roots:
        raise ArithmeticError("the quartic has no root in [0, 1/4]")
    tau = roots[0]
    y = Polynomial([0.0, 1.0])
    h = y * (1 - 2 * y) * (y - tau) ** 2
    sigma, _ = _rational_argmax(h, Polynomial([1.0]), 0.0, 0.5)
    c = -3.0 / tau
    E = 1.0 / (2 * c * c)
    if abs(h(sigma) - E) > 1e-10:
        raise ArithmeticError(f"fixed-point identity fails: {h(sigma)} vs {E}")
    return Simplex211(tau, sigma, c, E)


def simplex_211_polynomial() -> SparsePolynomial:
    """``x1^2 x2 x3 + (1/(2c^2)) [ ... ]``, the equioscillating residual."""
    c = simplex_211_constants().c
    x1, x2, x3 = (SparsePolynomial.variable(i, 3) for i in range(3))
    s = x2 + x3
    bracket = (x1 * x1 * s).scale(-16.0) + (x1 * s * s).scale(16.0) \
        + (x1 * x2 * x3).scale(-2.0 * (64 + 12 * c + c * c)) + (x2 * x3).scale(8.0) \
        + s.scale(-2.0) + 1.0
    return SparsePolynomial.monomial((2, 1, 1)) + bracket.scale(1.0 / (2 * c * c))


def ball_221_signature() -> Signature:
    pts, signs = ball_221_support()
    return _signature(pts, signs, 4)


def simplex_211_face_coordinates(points) -> np.ndarray:
    """``(x1, x2)`` coordinates of points on the face ``x1 + x2 + x3 = 1``."""
    return np.asarray(points, dtype=float)[:, :2]


def simplex_211_signature() -> Signature:
    pts, signs = simplex_211_support()
    return _signature(pts, signs, 3, simplex_211_face_coordinates(pts))


def _signature(pts, signs, degree, coords=None) -> Signature:
    # weights from the annihilation test; uniform placeholders if it fails
    chk = verify_extremal_signature(Signature(pts, signs, np.ones(len(signs))), degree, coords)
    w = chk.weights if chk.extremal else np.full(len(signs), 1.0 / len(signs))
    return Signature(pts, signs, w, certified=bool(chk.extremal))


def simplex_211_support() -> tuple:
    """Ten support points on the face ``x1 + x2 + x3 = 1`` with their signs."""
    k = simplex_211_constants()
    tau, sig = k.tau, k.sigma
    plus = [(0.25, 0.75, 0), (0.25, 0, 0.75), (0, 0.5, 0.5), (1, 0, 0), (1 - 2 * tau, tau, tau)]
    minus = [(0.75, 0.25, 0), (0.75, 0, 0.25), (0, 0, 1), (0, 1, 0), (1 - 2 * sig, sig, sig)]
    return np.array(plus + minus, dtype=float), np.array([1] * 5 + [-1] * 5)


def ball_311_value() -> float:
    """``(1 - a) (a^3 / 5)^(1/4) / 5`` with ``a`` the smallest root of ``9t^4 - 29t^3 + 24t^2 - 29t + 9``."""
    q = Polynomial([9.0, -29.0, 24.0, -29.0, 9.0])
    a = real_roots(q, (0.0, 1.0), tol=1e-15)[0]
    return (1 - a) * (a ** 3 / 5) ** 0.25 / 5


# explicit families

def _check_positive(k):
    if any(e < 1 for e in k):
        raise ValueError(f"formula needs every exponent >= 1, got {k}; reduce zero exponents first")


def hypercube_best_approximant(k) -> SparsePolynomial:
    """``m_k - 2^(d-n) T_k1 x ... x T_kd``."""
    k = tuple(int(e) for e in k)
    _check_positive(k)
    n, d = sum(k), len(k)
    cheb = tensor_product([chebyshev_T(e) for e in k]).scale(2.0 ** (d - n))
    return _cancel_leading(SparsePolynomial.monomial(k) - cheb, k)


def ball2d_best_approximant(k) -> SparsePolynomial:
    """``m_k - 2^-n (U_k1 x U_k2 + U_(k1-2) x U_(k2-2))`` on the unit disk.

    The second product is absent when an exponent is 1 (``U_-1 = 0``).
    """
    k = tuple(int(e) for e in k)
    if len(k) != 2:
        raise ValueError("the disk formula is for two variables")
    _check_positive(k)
    k1, k2 = k
    n = k1 + k2
    res = tensor_product([chebyshev_U(k1), chebyshev_U(k2)])
    if k1 >= 2 and k2 >= 2:
        res = res + tensor_product([chebyshev_U(k1 - 2), chebyshev_U(k2 - 2)])
    return _cancel_leading(SparsePolynomial.monomial(k) - res.scale(2.0 ** -n), k)


def simplex2d_chebyshev(k) -> SparsePolynomial:
    """``T_(k1,k2)(x, y)`` of the triangle ``x, y >= 0, x + y <= 1`` (``k1 >= k2``)."""
    k1, k2 = (int(e) for e in k)
    if k1 < k2:
        raise ValueError("the triangle formula needs k1 >= k2; canonicalize first")
    x, y = SparsePolynomial.variable(0, 2), SparsePolynomial.variable(1, 2)
    u = x.scale(2.0) - 1.0
    v = (x * y).scale(8.0) - 1.0
    out = _compose(chebyshev_T(k1 - k2), u) * _compose(chebyshev_T(k2), v)
    if k1 - k2 >= 1 and k2 >= 1:
        out = out + (x * y).scale(8.0) * u * _compose(chebyshev_U(k1 - k2 - 1), u) \
            * _compose(chebyshev_U(k2 - 1), v)
    return out


def simplex2d_best_approximant(k) -> SparsePolynomial:
    """``m_k - 2^(1-2n) T_(k1,k2)``; the factor makes the leading coefficient one."""
    k = tuple(int(e) for e in k)
    if len(k) != 2:
        raise ValueError("the triangle formula is for two variables")
    _check_positive(k)
    n = sum(k)
    T = simplex2d_chebyshev(k)
    return _cancel_leading(SparsePolynomial.monomial(k) - T.scale(2.0 ** (1 - 2 * n)), k)


def _compose(p: Polynomial, u: SparsePolynomial) -> SparsePolynomial:
    out = SparsePolynomial(u.dim)
    power = SparsePolynomial.constant(u.dim, 1.0)
    for c in np.asarray(p.coef, dtype=float):
        if c:
            out = out + power.scale(c)
        power = power * u
    return out


def _cancel_leading(p: SparsePolynomial, k) -> SparsePolynomial:
    # the degree-n part cancels up to rounding; drop it so deg p <= n - 1
    n = sum(k)
    top = p.homogeneous_part(n)
    if any(abs(c) > 1e-9 for _, c in top.items()):
        raise ArithmeticError("leading part did not cancel")
    return p.truncate(n - 1)


# catalogue

def _family(domain) -> str:
    name = domain.family if isinstance(domain, SemialgebraicDomain) else str(domain)
    return ALIASES.get(name, name)


def _three_variable(kk, fam):
    """``(expression, value, source, approximant)`` for sorted positive ``kk`` in three variables."""
    if fam == "ball":
        if kk == (1, 1, 1):
            return "3^(-3/2)", 3.0 ** -1.5, "ball, product of coordinates", None
        if kk == (2, 1, 1):
            return "(3-sqrt(8))/2", (3 - math.sqrt(8)) / 2, "ball, squared times product", None
        if kk == (3, 1, 1):
            return ("(1-a)(a^3/5)^(1/4)/5, a smallest root of 9t^4-29t^3+24t^2-29t+9",
                    ball_311_value(), "ball, quartic root", None)
        if kk == (2, 2, 2):
            return "1/72", 1 / 72, "ball, squares", None
        if kk == (2, 2, 1):
            a, _ = ball_221_constant()
            return ("max_t (1+t)^2(1-t)t/(4(1+4t+4t^2))", a, "ball, explicit Chebyshev polynomial",
                    SparsePolynomial.monomial(kk) - ball_221_polynomial())
        if kk == (4, 4, 4):
            return ("1/(27^2 b), b = 21.8935834", 1 / (729 * B_CONSTANT),
                    "ball, published decimal constant b", None)
    if fam == "simplex":
        if kk == (1, 1, 1):
            return "1/72", 1 / 72, "simplex, product of coordinates", None
        if kk == (2, 1, 1):
            s = simplex_211_constants()
            return ("1/(2c^2), c = -3/tau", s.E, "simplex, explicit Chebyshev polynomial",
                    SparsePolynomial.monomial(kk) - simplex_211_polynomial())
        if kk == (2, 2, 2):
            return ("1/(27^2 b), b = 21.8935834", 1 / (729 * B_CONSTANT),
                    "simplex, published decimal constant b", None)
    return None


def known_error(k, domain) -> KnownResult | None:
    """Exact ``E(k, domain)`` when a closed form is available, else ``None``.

    Zero exponents are dropped first (same family in fewer variables) and the
    exponent is sorted; neither changes the error.
    """
    fam = _family(domain)
    if fam not in FAMILIES:
        return None
    k0 = tuple(int(e) for e in k)
    if any(e < 0 for e in k0) or sum(k0) == 0:
        raise ValueError(f"invalid exponent {k0}")
    kk = canonicalize_exponent(tuple(e for e in k0 if e > 0))
    d, n = len(kk), sum(kk)

    if fam == "hypercube" or (d == 1 and fam in ("ball", "cross")):
        found = (f"2^({d}-{n})", 2.0 ** (d - n), "tensor Chebyshev polynomial",
                 hypercube_best_approximant(kk))
    elif fam == "simplex" and d == 1:
        q = chebyshev_T(n)(Polynomial([-1.0, 2.0])) * 2.0 ** (1 - 2 * n)
        p = (SparsePolynomial.monomial((n,)) - univariate_to_sparse(q)).truncate(n - 1)
        found = (f"2^(1-2*{n})", 2.0 ** (1 - 2 * n), "shifted Chebyshev polynomial on [0, 1]", p)
    elif fam == "ball" and d == 2:
        found = (f"2^(1-{n})", 2.0 ** (1 - n), "disk formula", ball2d_best_approximant(kk))
    elif fam == "simplex" and d == 2:
        found = (f"2^(1-2*{n})", 2.0 ** (1 - 2 * n), "triangle formula",
                 simplex2d_best_approximant(kk))
    elif d == 3:
        found = _three_variable(kk, fam)
    else:
        found = None
    if found is None:
        return None
    expr, val, src, approx = found
    if approx is not None:
        approx = _lift_back(approx, k0, kk)
    return KnownResult(k0, fam, expr, float(val), src, approx)


def _lift_back(p: SparsePolynomial, k0, kk) -> SparsePolynomial | None:
    """Move an approximant for the reduced sorted exponent ``kk`` back to ``k0``."""
    if tuple(k0) == tuple(kk):
        return p
    # position j of kk is taken by the j-th largest nonzero entry of k0
    order = sorted((i for i, e in enumerate(k0) if e > 0), key=lambda i: -k0[i])
    return p.lift(len(k0), order)


# grid oracle

def oracle_uniform_norm(p: SparsePolynomial, domain: SemialgebraicDomain, density: int = 60,
                        refine_steps: int = 60, top: int = 50) -> float:
    """``max |p|`` over a grid of the domain, best points polished by coordinate ascent."""
    if density < 2:
        raise ValueError("density must be at least 2")
    if p.dim != domain.dim:
        raise ValueError("polynomial and domain dimensions differ")
    pts = grid_sample(domain, density)
    vals = np.abs(p.evaluate_many(pts))
    best = float(vals.max(initial=0.0))
    order = np.argsort(-vals, kind="stable")[:top]
    h0 = 2.0 / (density - 1)
    for idx in order:
        x = pts[idx].copy()
        fx = vals[idx]
        h = h0
        for _ in range(refine_steps):
            moved = False
            for i in range(domain.dim):
                for sgn in (1.0, -1.0):
                    cand = x.copy()
                    cand[i] += sgn * h
                    cand = project(domain, cand)
                    fc = abs(p.evaluate(cand))
                    if fc > fx:
                        x, fx, moved = cand, fc, True
            if not moved:
                h *= 0.5
        best = max(best, float(fx))
    return best
