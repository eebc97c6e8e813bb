"""Moment and sum-of-squares relaxations for best uniform approximation.

For ``f`` and a degree bound ``n`` the quantity of interest is

    E = min_{p, deg p <= n-1}  max_{x in domain} |f(x) - p(x)|.

Both relaxations at level ``t`` are built as :class:`SdpProblem` instances on
the same Hankel atoms.  The moment side works with two pseudo-moment vectors
``y+`` and ``y-``, the SOS side with Gram matrices certifying that
``c - f + p`` and ``c + f - p`` lie in the truncated quadratic module.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domains import SemialgebraicDomain
from .poly import SparsePolynomial, monomial_index, monomials_up_to, total_degree
from .sdp import Block, SdpProblem, SdpSolution, solve
from .sdp.problem import hankel_atoms
from .sdp.solver import MAX_BLOCK, SolverOptions

log = logging.getLogger(__name__)

GAP_TOL = 1e-6


class LevelError(ValueError):
    """Relaxation level below the convergence threshold."""


# moment vectors and Hankel matrices

@dataclass
class MomentVector:
    dim: int
    order: int                      # 2t
    plus: dict
    minus: dict

    def side(self, sign: int) -> dict:
        return self.plus if sign > 0 else self.minus

    def mass(self) -> float:
        zero = (0,) * self.dim
        return self.plus.get(zero, 0.0) + self.minus.get(zero, 0.0)

    def max_low_degree_gap(self, n: int) -> float:
        return max((abs(self.plus[k] - self.minus[k]) for k in self.plus
                    if total_degree(k) <= n - 1), default=0.0)

    def to_json(self) -> dict:
        basis = monomials_up_to(self.dim, self.order)
        return {"d": self.dim, "order": self.order,
                "monomials": [list(k) for k in basis],
                "plus": [self.plus[k] for k in basis],
                "minus": [self.minus[k] for k in basis]}


def _lookup(y: dict, k):
    try:
        return y[k]
    except KeyError:
        raise KeyError(f"moment of {k} is missing") from None


def moment_matrix(y: dict, t: int, d: int) -> np.ndarray:
    """``Hank_t(y)``: entry ``(i, j)`` is ``y[b_i + b_j]`` over the monomials of degree <= t."""
    basis = monomials_up_to(d, t)
    s = len(basis)
    out = np.empty((s, s))
    for i, a in enumerate(basis):
        for j in range(i, s):
            v = _lookup(y, tuple(p + q for p, q in zip(a, basis[j])))
            out[i, j] = out[j, i] = v
    return out


def localizing_matrix(y: dict, g: SparsePolynomial, s: int) -> np.ndarray:
    """``Hank_s(g y)``: entry ``(i, j)`` is ``sum_l g_l y[b_i + b_j + l]``."""
    d = g.dim
    shifted = {}
    for k in monomials_up_to(d, 2 * s):
        shifted[k] = sum(c * _lookup(y, tuple(p + q for p, q in zip(k, e))) for e, c in g.items())
    return moment_matrix(shifted, s, d)


# relaxation assembly

def level_threshold(f: SparsePolynomial, domain: SemialgebraicDomain) -> int:
    return max(f.degree, 0) + domain.max_half_degree


def _check_inputs(f, n, domain, t, force_level):
    if f.dim != domain.dim:
        raise ValueError(f"polynomial in {f.dim} variables, domain in {domain.dim}")
    if n < 1:
        raise ValueError("the approximation degree bound n must be at least 1")
    N = max(f.degree, 0)
    need = level_threshold(f, domain)
    if t < need and not force_level:
        raise LevelError(f"level t={t} is below the convergence threshold {need} "
                         f"(deg f = {N} plus the largest generator half-degree)")
    if 2 * t < max(N, n - 1):
        raise LevelError(f"level t={t} cannot represent degree {max(N, n - 1)}")
    for g, nh in zip(domain.generators, domain.half_degrees):
        if t - nh < 0:
            raise LevelError(f"level t={t} is below a generator half-degree {nh}")
    if math.comb(t + domain.dim, domain.dim) > MAX_BLOCK:
        raise LevelError(f"level t={t} gives moment blocks above {MAX_BLOCK}")


def _block(d, s, g, colmap, constval, m, label):
    """PSD block ``L(g x^a x^b)`` over the monomials of degree <= s.

    Atoms are the Hankel patterns of ``x^(a+b)``; multiplication by ``g`` goes
    into the coupling.  ``colmap`` sends a monomial to a solver variable,
    ``constval`` fixes it to a number.
    """
    elems = monomials_up_to(d, s)
    atoms = monomials_up_to(d, 2 * s)
    ptr, rows, cols, vals = hankel_atoms(elems, {k: i for i, k in enumerate(atoms)})
    gterms = list(g.items()) if g is not None else [((0,) * d, 1.0)]
    coupling = {}
    cat = np.zeros(len(atoms))
    for a, kappa in enumerate(atoms):
        for e, coef in gterms:
            gamma = tuple(p + q for p, q in zip(kappa, e))
            j = colmap.get(gamma)
            if j is not None:
                coupling[a, j] = coupling.get((a, j), 0.0) - coef
            elif gamma in constval:
                cat[a] += coef * constval[gamma]
    keys = list(coupling)
    S = sp.csr_matrix(([coupling[k] for k in keys],
                       ([k[0] for k in keys], [k[1] for k in keys])), shape=(len(atoms), m))
    size = len(elems)
    atom_of = np.repeat(np.arange(len(atoms)), np.diff(ptr))
    const = np.bincount(rows * size + cols, weights=vals * cat[atom_of], minlength=size * size)
    return Block(size, ptr, rows, cols, vals, S, const.reshape(size, size), label=label)


def _blocks_for(domain, t, colmaps, constvals, m):
    blocks = []
    d = domain.dim
    for side, colmap, constval in zip("+-", colmaps, constvals):
        blocks.append(_block(d, t, None, colmap, constval, m, f"moment{side}"))
        for h, (g, nh) in enumerate(zip(domain.generators, domain.half_degrees)):
            blocks.append(_block(d, t - nh, g, colmap, constval, m, f"localizing{side}{h}"))
    return blocks


def assemble_moment_relaxation(f: SparsePolynomial, n: int, domain: SemialgebraicDomain,
                               t: int, force_level: bool = False) -> SdpProblem:
    """Moment program: maximize ``sum f_l (y+_l - y-_l)``.

    ``y+_l = y-_l`` for ``|l| <= n-1`` and ``y+_0 + y-_0 = 1``; these ties are
    substituted, so shared moments are single variables.  The tie at ``l = 0``
    together with the mass condition fixes ``y+_0 = y-_0 = 1/2``.
    """
    _check_inputs(f, n, domain, t, force_level)
    d = domain.dim
    mons = monomials_up_to(d, 2 * t)
    zero = (0,) * d
    shared = [k for k in mons if 1 <= total_degree(k) <= n - 1]
    free_hi = [k for k in mons if total_degree(k) >= n and k != zero]
    col = 0
    plus, minus = {}, {}
    for k in shared:
        plus[k] = minus[k] = col
        col += 1
    for k in free_hi:
        plus[k] = col
        col += 1
    for k in free_hi:
        minus[k] = col
        col += 1
    m = col
    b = np.zeros(m)
    for k, c in f.items():
        if total_degree(k) >= n:
            b[plus[k]] += c
            b[minus[k]] -= c
    const = {zero: 0.5}
    blocks = _blocks_for(domain, t, (plus, minus), (const, const), m)
    return SdpProblem(blocks, b, target="dual", name=f"moment t={t}",
                      meta={"kind": "moment", "t": t, "n": n, "dim": d, "monomials": mons,
                            "plus": plus, "minus": minus, "shared": len(shared)})


def assemble_sos_relaxation(f: SparsePolynomial, n: int, domain: SemialgebraicDomain,
                            t: int, force_level: bool = False) -> SdpProblem:
    """SOS program: minimize ``c`` with ``c -+ (f - p)`` in the truncated quadratic module.

    Rows are coefficient matches for every monomial of degree <= 2t, first for
    ``c - f + p`` then for ``c + f - p``.  Free variables are ``c`` followed by
    the coefficients of ``p`` in graded order.
    """
    _check_inputs(f, n, domain, t, force_level)
    d = domain.dim
    mons = monomials_up_to(d, 2 * t)
    nm = len(mons)
    plus = {k: i for i, k in enumerate(mons)}
    minus = {k: nm + i for i, k in enumerate(mons)}
    m = 2 * nm
    low = monomials_up_to(d, n - 1)
    fv = np.array([f.coeff(k) for k in mons])
    b = np.concatenate([fv, -fv])
    ri, ci, vv = [0, nm], [0, 0], [1.0, 1.0]
    for j, k in enumerate(low, start=1):
        ri += [plus[k], minus[k]]
        ci += [j, j]
        vv += [1.0, -1.0]
    F = sp.csr_matrix((vv, (ri, ci)), shape=(m, 1 + len(low)))
    cf = np.zeros(1 + len(low))
    cf[0] = 1.0
    blocks = _blocks_for(domain, t, (plus, minus), ({}, {}), m)
    return SdpProblem(blocks, b, F, cf, target="primal", name=f"sos t={t}",
                      meta={"kind": "sos", "t": t, "n": n, "dim": d, "monomials": mons,
                            "plus": plus, "minus": minus, "approximant_basis": low})


def moments_from_solution(problem: SdpProblem, sol: SdpSolution) -> MomentVector:
    """Pseudo-moments ``y+``, ``y-`` carried by a solution of either relaxation."""
    meta = problem.meta
    d, t = meta["dim"], meta["t"]
    zero = (0,) * d
    plus, minus = {}, {}
    for k in meta["monomials"]:
        for src, dst in ((meta["plus"], plus), (meta["minus"], minus)):
            j = src.get(k)
            dst[k] = float(sol.y[j]) if j is not None else 0.5
    if meta["kind"] == "moment":
        plus[zero] = minus[zero] = 0.5
    return MomentVector(d, 2 * t, plus, minus)


def recover_best_approximant(problem: SdpProblem, sol: SdpSolution) -> SparsePolynomial:
    """The approximant ``p`` from the free variables of an SOS solution."""
    if problem.meta.get("kind") != "sos":
        raise ValueError("the approximant is read from an SOS relaxation")
    if sol.status not in ("optimal", "near_optimal"):
        raise ValueError(f"SOS solve did not converge (status {sol.status})")
    low = problem.meta["approximant_basis"]
    return SparsePolynomial(problem.meta["dim"], dict(zip(low, (float(v) for v in sol.w[1:]))))


# level runs

@dataclass
class LevelResult:
    t: int
    ub: float                      # SOS value
    ub_moment: float               # moment value
    sos_status: str
    moment_status: str
    moments: MomentVector | None
    approximant: SparsePolynomial | None
    certified: bool = False
    ranks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"t": self.t, "ub": self.ub, "ub_moment": self.ub_moment,
                "sos_status": self.sos_status, "moment_status": self.moment_status,
                "certified": self.certified, "ranks": self.ranks}


@dataclass
class HierarchyReport:
    levels: list
    value: float
    certified: bool
    certificate: MomentVector | None
    certified_level: int | None = None
    approximant: SparsePolynomial | None = None

    @property
    def ub_moment(self) -> list:
        return [lv.ub_moment for lv in self.levels]

    def to_json(self) -> dict:
        return {"levels": [lv.to_json() for lv in self.levels], "E_est": self.value,
                "certified": self.certified, "certified_level": self.certified_level}


_OK = ("optimal", "near_optimal")


def run_level(f: SparsePolynomial, n: int, domain: SemialgebraicDomain, t: int,
              opts: SolverOptions | None = None, force_level: bool = False,
              sos: bool = True) -> LevelResult:
    """Solve the moment relaxation and (unless ``sos=False``) the SOS one at level ``t``."""
    mp = assemble_moment_relaxation(f, n, domain, t, force_level)
    ms = solve(mp, opts)
    moments = moments_from_solution(mp, ms) if ms.status in _OK else None
    ub, sstat, p = math.nan, "skipped", None
    metrics = {"moment": ms.metrics}
    if sos:
        sp_ = assemble_sos_relaxation(f, n, domain, t, force_level)
        ss = solve(sp_, opts)
        ub, sstat = ss.primal_objective, ss.status
        metrics["sos"] = ss.metrics
        if ss.status in _OK:
            p = recover_best_approximant(sp_, ss)
        if ms.status == "optimal" and ss.status == "optimal" \
                and abs(ub - ms.dual_objective) > GAP_TOL:
            log.warning("level %d: SOS %.10g and moment %.10g values differ", t, ub,
                        ms.dual_objective)
    log.info("level %d: moment %.10g (%s), sos %.10g (%s)", t, ms.dual_objective, ms.status,
             ub, sstat)
    return LevelResult(t, ub, ms.dual_objective, sstat, ms.status, moments, p, metrics=metrics)


def max_level(domain: SemialgebraicDomain) -> int:
    t = 0
    while math.comb(t + 1 + domain.dim, domain.dim) <= MAX_BLOCK:
        t += 1
    return t


def run_hierarchy(f: SparsePolynomial, n: int, domain: SemialgebraicDomain,
                  t_min: int | None = None, t_max: int | None = None,
                  opts: SolverOptions | None = None, force_level: bool = False,
                  sos: bool = True, rank_tol: float = 1e-6, stop_when_certified: bool = True,
                  seed: int = 0) -> HierarchyReport:
    """Run levels ``t_min..t_max`` and stop at the first certified one."""
    from .extraction import ExtractionError, certify_moments

    thr = level_threshold(f, domain)
    if t_min is None:
        t_min = thr
    if t_max is None:
        t_max = min(t_min + 3, max_level(domain))
    if t_max < t_min:
        raise LevelError(f"t_max={t_max} is below t_min={t_min}")
    levels = []
    cert, cert_level, approx = None, None, None
    for t in range(t_min, t_max + 1):
        lv = run_level(f, n, domain, t, opts, force_level, sos)
        if lv.moments is not None:
            try:
                ok, ranks = certify_moments(lv.moments, domain, rank_tol, (n + 1) // 2)
            except ExtractionError:
                ok, ranks = False, {}
            lv.certified, lv.ranks = ok, ranks
        levels.append(lv)
        if lv.approximant is not None:
            approx = lv.approximant
        if lv.certified and cert is None:
            cert, cert_level = lv.moments, t
            if stop_when_certified:
                break
    good = [lv for lv in levels if lv.moment_status in _OK]
    if cert_level is not None:
        value = next(lv.ub_moment for lv in levels if lv.t == cert_level)
    elif good:
        value = min(lv.ub_moment for lv in good)
    else:
        value = math.nan
    return HierarchyReport(levels, float(value), cert is not None, cert, cert_level, approx)
