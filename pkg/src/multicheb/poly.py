"""Sparse multivariate polynomials, monomial indexing and univariate Chebyshev
polynomials.

Exponents are plain tuples of non-negative ints.  The global monomial order is
graded lexicographic: total degree first, then Python tuple order, so that for
``d = 3`` and degree one the order is ``(0,0,1) < (0,1,0) < (1,0,0)``.
"""
from __future__ import annotations

import itertools
import math
import re
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

MultiIndex = tuple

# univariate polynomials are numpy Polynomials with ascending coefficients
UnivariatePolynomial = Polynomial


def total_degree(k: Sequence[int]) -> int:
    return int(sum(k))


def grlex_key(k: Sequence[int]):
    return (sum(k), tuple(k))


@lru_cache(maxsize=None)
def _monomials_cached(d: int, t: int) -> tuple:
    out = []
    for deg in range(t + 1):
        layer = [k for k in _compositions(deg, d)]
        layer.sort()
        out.extend(layer)
    return tuple(out)


def _compositions(n: int, d: int):
    """All length-``d`` tuples of non-negative ints summing to ``n``."""
    if d == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


def monomials_up_to(d: int, t: int) -> list:
    """All exponents with ``|k| <= t`` in ``d`` variables, graded-lex increasing.

    >>> monomials_up_to(1, 2)
    [(0,), (1,), (2,)]
    """
    if d < 1 or t < 0:
        raise ValueError(f"need d >= 1 and t >= 0, got d={d}, t={t}")
    return list(_monomials_cached(int(d), int(t)))


def monomials_of_degree(d: int, n: int) -> list:
    return sorted(_compositions(n, d))


def monomial_index(d: int, t: int) -> dict:
    return {k: i for i, k in enumerate(_monomials_cached(int(d), int(t)))}


def _add_exp(a, b):
    return tuple(x + y for x, y in zip(a, b))


class SparsePolynomial:
    """Immutable polynomial in ``dim`` variables stored as ``{exponent: coeff}``.

    Only exact zeros are pruned; there is no epsilon cleanup during arithmetic.
    """

    __slots__ = ("dim", "_terms", "_hash")

    def __init__(self, dim: int, terms: Mapping | None = None):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)
        clean = {}
        for k, c in (terms or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != self.dim:
                raise ValueError(f"exponent {k} does not have length {self.dim}")
            if any(e < 0 for e in k):
                raise ValueError(f"negative exponent in {k}")
            c = float(c)
            if c != 0.0:
                clean[k] = clean.get(k, 0.0) + c
                if clean[k] == 0.0:
                    del clean[k]
        self._terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls, dim: int) -> "SparsePolynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> "SparsePolynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def monomial(cls, k: Sequence[int], c: float = 1.0) -> "SparsePolynomial":
        k = tuple(k)
        return cls(len(k), {k: c})

    @classmethod
    def variable(cls, i: int, dim: int) -> "SparsePolynomial":
        """The coordinate function ``x_{i+1}`` (``i`` is zero-based)."""
        k = [0] * dim
        k[i] = 1
        return cls(dim, {tuple(k): 1.0})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def coeff(self, k: Sequence[int]) -> float:
        return self._terms.get(tuple(k), 0.0)

    @property
    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(k) for k in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def homogeneous_part(self, n: int) -> "SparsePolynomial":
        return SparsePolynomial(self.dim, {k: c for k, c in self._terms.items() if sum(k) == n})

    def truncate(self, n: int) -> "SparsePolynomial":
        """Drop all terms of total degree above ``n``."""
        return SparsePolynomial(self.dim, {k: c for k, c in self._terms.items() if sum(k) <= n})

    # arithmetic
    def _check(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return SparsePolynomial.constant(self.dim, float(other))
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return SparsePolynomial(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePolynomial(self.dim, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s: float) -> "SparsePolynomial":
        s = float(s)
        if s == 0.0:
            return SparsePolynomial(self.dim)
        return SparsePolynomial(self.dim, {k: s * c for k, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(other)
        other = self._check(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                k = _add_exp(k1, k2)
                out[k] = out.get(k, 0.0) + c1 * c2
        return SparsePolynomial(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power")
        out = SparsePolynomial.constant(self.dim, 1.0)
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other: "SparsePolynomial", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    # evaluation
    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point of shape {x.shape} for a polynomial in {self.dim} variables")
        total = 0.0
        for k, c in self._terms.items():
            term = c
            for xi, e in zip(x, k):
                if e:
                    term *= xi ** e
            total += term
        return float(total)

    def evaluate_many(self, points) -> np.ndarray:
        """Vectorised evaluation at the rows of an ``(N, dim)`` array."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points must have shape (N, {self.dim})")
        out = np.zeros(pts.shape[0])
        if not self._terms:
            return out
        maxdeg = max(max(k) for k in self._terms)
        powers = np.ones((maxdeg + 1,) + pts.shape)
        for e in range(1, maxdeg + 1):
            powers[e] = powers[e - 1] * pts
        for k, c in self._terms.items():
            term = np.full(pts.shape[0], c)
            for i, e in enumerate(k):
                if e:
                    term *= powers[e, :, i]
            out += term
        return out

    # structural maps
    def lift(self, new_dim: int, positions: Sequence[int] | None = None) -> "SparsePolynomial":
        """Embed into ``new_dim`` variables, variable ``j`` going to ``positions[j]``."""
        if positions is None:
            positions = list(range(self.dim))
        if len(positions) != self.dim:
            raise ValueError("need one position per variable")
        out = {}
        for k, c in self._terms.items():
            nk = [0] * new_dim
            for j, e in zip(positions, k):
                nk[j] += e
            out[tuple(nk)] = c
        return SparsePolynomial(new_dim, out)

    def compose_affine(self, matrix, offset) -> "SparsePolynomial":
        """Return ``q(u) = p(matrix @ u + offset)``; ``matrix`` is ``dim x m``."""
        matrix = np.asarray(matrix, dtype=float)
        offset = np.asarray(offset, dtype=float)
        m = matrix.shape[1]
        coords = []
        for i in range(self.dim):
            lin = {(0,) * m: offset[i]}
            for j in range(m):
                if matrix[i, j] != 0.0:
                    e = [0] * m
                    e[j] = 1
                    lin[tuple(e)] = matrix[i, j]
            coords.append(SparsePolynomial(m, lin))
        out = SparsePolynomial(m)
        for k, c in self._terms.items():
            term = SparsePolynomial.constant(m, c)
            for ci, e in zip(coords, k):
                if e:
                    term = term * ci ** e
            out = out + term
        return out

    def coefficient_vector(self, basis: Sequence) -> np.ndarray:
        idx = {k: i for i, k in enumerate(basis)}
        v = np.zeros(len(basis))
        for k, c in self._terms.items():
            if k not in idx:
                raise KeyError(f"monomial {k} not in basis")
            v[idx[k]] = c
        return v

    @classmethod
    def from_coefficients(cls, basis: Sequence, coeffs) -> "SparsePolynomial":
        basis = list(basis)
        dim = len(basis[0])
        return cls(dim, {k: c for k, c in zip(basis, coeffs)})

    # text rendering
    def to_string(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for k in sorted(self._terms, key=grlex_key, reverse=True):
            c = format(self._terms[k], ".17g")
            mono = " ".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(k) if e
            )
            parts.append(f"{c} * {mono}" if mono else c)
        return " + ".join(parts)

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"SparsePolynomial({self.dim}, {self.to_string()!r})"

    @classmethod
    def parse(cls, text: str, dim: int) -> "SparsePolynomial":
        """Inverse of :meth:`to_string` (also accepts ``-`` between terms)."""
        text = text.strip()
        if text in ("", "0"):
            return cls(dim)
        text = re.sub(r"\s+-\s+", " + -", text)
        terms: dict = {}
        for raw in text.split(" + "):
            raw = raw.strip()
            if not raw:
                continue
            if "*" in raw:
                cstr, mstr = raw.split("*", 1)
            elif raw.lstrip("-").startswith("x"):
                cstr, mstr = ("-1" if raw.startswith("-") else "1"), raw.lstrip("-")
            else:
                cstr, mstr = raw, ""
            k = [0] * dim
            for tok in mstr.split():
                m = re.fullmatch(r"x(\d+)(?:\^(\d+))?", tok)
                if m is None:
                    raise ValueError(f"cannot parse monomial token {tok!r}")
                i = int(m.group(1)) - 1
                if not 0 <= i < dim:
                    raise ValueError(f"variable x{i + 1} out of range for dim {dim}")
                k[i] += int(m.group(2) or 1)
            k = tuple(k)
            terms[k] = terms.get(k, 0.0) + float(cstr)
        return cls(dim, terms)


def monomial(k: Sequence[int]) -> SparsePolynomial:
    return SparsePolynomial.monomial(k)


def evaluate(p: SparsePolynomial, x) -> float:
    return p.evaluate(x)


# univariate Chebyshev polynomials

def chebyshev_T(n: int) -> Polynomial:
    """First-kind Chebyshev polynomial by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be non-negative")
    t_prev, t_cur = Polynomial([1.0]), Polynomial([0.0, 1.0])
    if n == 0:
        return t_prev
    x2 = Polynomial([0.0, 2.0])
    for _ in range(n - 1):
        t_prev, t_cur = t_cur, x2 * t_cur - t_prev
    return t_cur


def chebyshev_U(n: int) -> Polynomial:
    """Second-kind Chebyshev polynomial ``T_{n+1}' / (n+1)``, with ``U_{-1} = 0``."""
    if n < -1:
        raise ValueError("n must be >= -1")
    if n == -1:
        return Polynomial([0.0])
    return chebyshev_T(n + 1).deriv() / (n + 1)


def tensor_product(polys: Sequence[Polynomial]) -> SparsePolynomial:
    """``(p_1 x ... x p_d)(x) = p_1(x_1) ... p_d(x_d)`` as a sparse polynomial."""
    d = len(polys)
    if d < 1:
        raise ValueError("need at least one factor")
    factors = []
    for p in polys:
        coef = np.asarray(p.coef, dtype=float)
        factors.append([(e, c) for e, c in enumerate(coef) if c != 0.0])
    terms = {}
    for combo in itertools.product(*factors):
        k = tuple(e for e, _ in combo)
        terms[k] = terms.get(k, 0.0) + math.prod(c for _, c in combo)
    return SparsePolynomial(d, terms)


def univariate_to_sparse(p: Polynomial, dim: int = 1, var: int = 0) -> SparsePolynomial:
    terms = {}
    for e, c in enumerate(np.asarray(p.coef, dtype=float)):
        k = [0] * dim
        k[var] = e
        terms[tuple(k)] = c
    return SparsePolynomial(dim, terms)


class RootFindingError(RuntimeError):
    pass


def real_roots(q: Polynomial, interval: tuple = (-1.0, 1.0), tol: float = 1e-13,
               subdivisions: int = 4096) -> list:
    """Real roots of ``q`` in ``[lo, hi]`` by sign-change bracketing and Brent polish.

    Roots of even multiplicity produce no sign change and are not reported.
    """
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ValueError("need lo < hi")
    q = Polynomial(np.asarray(q.coef, dtype=float))
    coef_norm = float(np.abs(q.coef).sum())
    if coef_norm == 0.0:
        raise ValueError("zero polynomial has no isolated roots")
    grid = np.linspace(lo, hi, subdivisions + 1)
    vals = q(grid)
    roots = []
    for i in range(subdivisions):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(q, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200))
    if vals[-1] == 0.0:
        roots.append(hi)
    # Newton polish, then check the residual
    dq = q.deriv()
    out = []
    scale = tol * (1.0 + coef_norm)
    for r in roots:
        slope = dq(r)
        if slope != 0.0:
            cand = r - q(r) / slope
            if lo <= cand <= hi and abs(q(cand)) <= abs(q(r)):
                r = cand
        if abs(q(r)) > max(scale, 1e3 * np.finfo(float).eps * coef_norm):
            raise RootFindingError(f"root {r!r} has residual {q(r)!r}")
        out.append(float(r))
    return sorted(out)
