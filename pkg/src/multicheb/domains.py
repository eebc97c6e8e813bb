"""Compact basic semialgebraic domains and the two exponent reductions.

A domain is ``{x : g_h(x) >= 0 for all h}``.  The four built-in families are
the euclidean ball, the hypercube, the simplex and the cross-polytope.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poly import SparsePolynomial

FAMILIES = ("ball", "hypercube", "simplex", "cross")
ALIASES = {"cross_polytope": "cross", "cross-polytope": "cross", "cube": "hypercube",
           "B": "ball", "H": "hypercube", "S": "simplex", "C": "cross"}
MAX_CROSS_DIM = 20
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SemialgebraicDomain:
    name: str
    dim: int
    generators: tuple
    family: str | None = None

    def __post_init__(self):
        if not self.generators:
            raise ValueError("a domain needs at least one generator")
        for g in self.generators:
            if g.dim != self.dim:
                raise ValueError(f"generator {g} is not in {self.dim} variables")

    @property
    def half_degrees(self) -> tuple:
        return tuple(math.ceil(max(g.degree, 0) / 2) for g in self.generators)

    @property
    def max_half_degree(self) -> int:
        return max(self.half_degrees)

    def membership(self, x, tol: float = DEFAULT_TOL) -> bool:
        return membership(self, x, tol)

    def to_json(self) -> dict:
        return {"name": self.name, "d": self.dim,
                "generators": [g.to_string() for g in self.generators]}

    @classmethod
    def from_json(cls, data: dict) -> "SemialgebraicDomain":
        d = int(data["d"])
        name = data["name"]
        family = ALIASES.get(name, name)
        if family in FAMILIES:
            built = make_domain(family, d)
            gens = tuple(SparsePolynomial.parse(s, d) for s in data["generators"])
            if all(a.allclose(b, 0.0) for a, b in zip(gens, built.generators)) \
                    and len(gens) == len(built.generators):
                return built
        gens = tuple(SparsePolynomial.parse(s, d) for s in data["generators"])
        return cls(name=name, dim=d, generators=gens, family=None)


def _affine(d: int, const: float, lin: Sequence[float]) -> SparsePolynomial:
    terms = {(0,) * d: const}
    for i, c in enumerate(lin):
        if c:
            e = [0] * d
            e[i] = 1
            terms[tuple(e)] = c
    return SparsePolynomial(d, terms)


def _check_dim(d):
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    return int(d)


def make_ball(d: int) -> SemialgebraicDomain:
    d = _check_dim(d)
    terms = {(0,) * d: 1.0}
    for i in range(d):
        e = [0] * d
        e[i] = 2
        terms[tuple(e)] = -1.0
    return SemialgebraicDomain("ball", d, (SparsePolynomial(d, terms),), "ball")


def make_hypercube(d: int) -> SemialgebraicDomain:
    d = _check_dim(d)
    gens = []
    for i in range(d):
        e = [0] * d
        e[i] = 2
        gens.append(SparsePolynomial(d, {(0,) * d: 1.0, tuple(e): -1.0}))
    return SemialgebraicDomain("hypercube", d, tuple(gens), "hypercube")


def make_simplex(d: int, redundant_ball: bool = False) -> SemialgebraicDomain:
    """Simplex ``x_i >= 0, sum x_i <= 1``.

    ``redundant_ball`` appends ``1 - |x|^2 >= 0``, which does not change the set.
    """
    d = _check_dim(d)
    gens = [_affine(d, 0.0, [1.0 if j == i else 0.0 for j in range(d)]) for i in range(d)]
    gens.append(_affine(d, 1.0, [-1.0] * d))
    if redundant_ball:
        gens.append(make_ball(d).generators[0])
    return SemialgebraicDomain("simplex", d, tuple(gens), "simplex")


def make_cross_polytope(d: int) -> SemialgebraicDomain:
    """``sum |x_i| <= 1`` through the ``2^d`` half-spaces ``1 - eps.x >= 0``."""
    d = _check_dim(d)
    if d > MAX_CROSS_DIM:
        raise ValueError(f"cross-polytope needs 2^{d} generators; refusing d > {MAX_CROSS_DIM}")
    gens = [_affine(d, 1.0, [-float(s) for s in eps])
            for eps in itertools.product((1, -1), repeat=d)]
    return SemialgebraicDomain("cross", d, tuple(gens), "cross")


_MAKERS = {"ball": make_ball, "hypercube": make_hypercube, "simplex": make_simplex,
           "cross": make_cross_polytope}


def make_domain(name: str, d: int, **kwargs) -> SemialgebraicDomain:
    family = ALIASES.get(name, name)
    if family not in _MAKERS:
        raise ValueError(f"unknown domain {name!r}; expected one of {FAMILIES}")
    return _MAKERS[family](d, **kwargs)


def membership(domain: SemialgebraicDomain, x, tol: float = DEFAULT_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (domain.dim,):
        raise ValueError(f"point of shape {x.shape} for a domain in {domain.dim} variables")
    return all(g.evaluate(x) >= -tol for g in domain.generators)


def membership_many(domain: SemialgebraicDomain, pts, tol: float = DEFAULT_TOL) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    ok = np.ones(pts.shape[0], dtype=bool)
    for g in domain.generators:
        ok &= g.evaluate_many(pts) >= -tol
    return ok


# reductions

@dataclass(frozen=True)
class ReductionWitness:
    kept_indices: tuple
    dropped_fill: tuple
    reduced_exponent: tuple
    original_exponent: tuple = field(default=())

    @property
    def is_identity(self) -> bool:
        return len(self.kept_indices) == len(self.original_exponent)


def reduce_zero_exponents(k: Sequence[int], domain: SemialgebraicDomain):
    """Drop coordinates with zero exponent.

    Returns ``(witness, reduced_domain)``.  For the built-in families the
    projection onto the kept coordinates is the same family in fewer variables
    and filling the dropped coordinates with zero stays inside the domain.
    """
    k = tuple(int(e) for e in k)
    if len(k) != domain.dim:
        raise ValueError(f"exponent {k} does not match domain dimension {domain.dim}")
    if any(e < 0 for e in k):
        raise ValueError("exponents must be non-negative")
    if sum(k) == 0:
        raise ValueError("the zero exponent has nothing to approximate")
    if domain.family not in FAMILIES:
        raise ValueError("zero-exponent reduction is only available for built-in domains")
    kept = tuple(i for i, e in enumerate(k) if e > 0)
    dropped = tuple(0.0 for e in k if e == 0)
    witness = ReductionWitness(kept, dropped, tuple(k[i] for i in kept), k)
    if len(kept) == len(k):
        return witness, domain
    return witness, make_domain(domain.family, len(kept))


def canonicalize_exponent(k: Sequence[int]) -> tuple:
    return tuple(sorted((int(e) for e in k), reverse=True))


def canonical_exponents(n: int, d: int) -> list:
    """Partitions of ``n`` into exactly ``d`` positive parts, descending."""
    out = []

    def rec(rest, parts, cap):
        if len(parts) == d:
            if rest == 0:
                out.append(tuple(parts))
            return
        slots = d - len(parts)
        for p in range(min(cap, rest - (slots - 1)), 0, -1):
            if p * slots < rest:
                break
            rec(rest - p, parts + [p], p)

    if n >= d:
        rec(n, [], n)
    return out


# deterministic sampling

def _fibonacci_sphere(npts: int) -> np.ndarray:
    i = np.arange(npts) + 0.5
    z = 1.0 - 2.0 * i / npts
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _simplex_lattice(d: int, m: int) -> np.ndarray:
    """Points ``a / (m-1)`` with non-negative integer ``a`` and ``sum a <= m-1``."""
    res = m - 1
    pts = [a for a in itertools.product(range(res + 1), repeat=d) if sum(a) <= res]
    return np.asarray(pts, dtype=float) / res


def _face_lattice(d: int, m: int) -> np.ndarray:
    """Barycentric lattice on the face ``sum x = 1, x >= 0``."""
    res = m - 1
    pts = [a + (res - sum(a),) for a in itertools.product(range(res + 1), repeat=d - 1)
           if sum(a) <= res]
    return np.asarray(pts, dtype=float) / res


def grid_sample(domain: SemialgebraicDomain, m: int) -> np.ndarray:
    """Deterministic covering of the domain: box lattice plus boundary points."""
    if m < 2:
        raise ValueError("density must be at least 2")
    d = domain.dim
    fam = domain.family
    if fam == "simplex":
        return _simplex_lattice(d, m)
    if fam == "hypercube":
        axis = np.linspace(-1.0, 1.0, m)
        return np.array(list(itertools.product(axis, repeat=d)))
    if fam == "cross":
        # integer lattice on [-res, res]^d keeps the l1 test exact
        res = m - 1
        ints = np.array(list(itertools.product(range(-res, res + 1, 2), repeat=d)))
        inner = ints[np.abs(ints).sum(axis=1) <= res] / res
        face = _face_lattice(d, m)
        facets = [face * np.array(eps) for eps in itertools.product((1.0, -1.0), repeat=d)]
        return _unique_rows(np.vstack([inner] + facets))
    if fam == "ball":
        axis = np.linspace(-1.0, 1.0, m)
        box = np.array(list(itertools.product(axis, repeat=d)))
        inner = box[(box ** 2).sum(axis=1) <= 1.0]
        if d == 1:
            bnd = np.array([[-1.0], [1.0]])
        elif d == 2:
            ang = np.linspace(0.0, 2 * math.pi, 4 * m, endpoint=False)
            bnd = np.column_stack([np.cos(ang), np.sin(ang)])
        elif d == 3:
            bnd = _fibonacci_sphere(4 * m * m)
        else:
            shell = box[np.abs(box).max(axis=1) == 1.0]
            bnd = shell / np.linalg.norm(shell, axis=1, keepdims=True)
        # renormalisation can leave |x| a hair above 1
        bnd = bnd / np.maximum(1.0, np.linalg.norm(bnd, axis=1, keepdims=True) * (1 + 1e-16))
        return np.vstack([inner, bnd])
    lo = -np.ones(d)
    hi = np.ones(d)
    axis = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
    box = np.array(list(itertools.product(*axis)))
    return box[membership_many(domain, box, tol=0.0)]


def _unique_rows(a: np.ndarray) -> np.ndarray:
    _, idx = np.unique(np.round(a, 14), axis=0, return_index=True)
    return a[np.sort(idx)]


def project(domain: SemialgebraicDomain, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto a built-in domain (identity otherwise)."""
    fam = domain.family
    if fam == "ball":
        r = np.linalg.norm(x)
        return x / r if r > 1.0 else x
    if fam == "hypercube":
        return np.clip(x, -1.0, 1.0)
    if fam == "simplex":
        y = np.maximum(x, 0.0)
        if y.sum() <= 1.0:
            return y
        return _project_simplex_face(x)
    if fam == "cross":
        if np.abs(x).sum() <= 1.0:
            return x
        return np.sign(x) * _project_simplex_face(np.abs(x))
    return x


def _project_simplex_face(v: np.ndarray) -> np.ndarray:
    # projection onto {x >= 0, sum x = 1}
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = ind[u - css / ind > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)
