"""Primal-dual interior point solver on the homogeneous self-dual embedding.

Nesterov-Todd direction with a Mehrotra predictor-corrector.  The embedding
adds ``tau`` and ``kappa`` so that one iteration works for feasible and
infeasible problems alike; an infeasible problem shows up as ``tau -> 0``
with a ray in ``(X, w)`` or ``y``.  Starting from an arbitrary infeasible point
without the embedding stalls on the simplex relaxations, whose Schur
complement is nearly singular along directions the moment ties leave free.

Each block keeps its iterate in factored scaled form

    X = G diag(lam) G^T,    Z = G^-T diag(lam) G^-1,

so ``W = G G^T`` is the NT scaling point.  Steps are taken in the scaled
coordinates and the factors are updated by products, never by re-deriving
them from the explicit ``X`` and ``Z``.  That keeps the small eigenvalues of
nearly complementary blocks accurate.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
import scipy.sparse.linalg as spla

from . import kernels
from .problem import SdpProblem, SdpSolution

log = logging.getLogger(__name__)

MAX_BLOCK = 200
STALL_ITERS = 10


@dataclass
class SolverOptions:
    eps_feas: float = 1e-8
    eps_gap: float = 1e-8
    max_iter: int = 100
    # GMRES steps spent polishing each Newton direction
    refine: int = 10
    # extra iterations after convergence, kept only while they improve
    polish: int = 3
    verbose: bool = False


class SolverError(RuntimeError):
    pass


def _sym(A):
    return 0.5 * (A + A.T)


class _ScaledBlock:
    """One block iterate: ``G``, ``G^-1`` and the scaled point ``lam``."""

    __slots__ = ("G", "Gi", "lam")

    def __init__(self, G, Gi, lam):
        self.G, self.Gi, self.lam = G, Gi, lam

    @classmethod
    def start(cls, s, xi, eta):
        g = (xi / eta) ** 0.25
        return cls(g * np.eye(s), np.eye(s) / g, np.full(s, math.sqrt(xi * eta)))

    @property
    def X(self):
        return _sym((self.G * self.lam) @ self.G.T)

    @property
    def Z(self):
        return _sym((self.Gi.T * self.lam) @ self.Gi)

    @property
    def W(self):
        return _sym(self.G @ self.G.T)

    def unscale_primal(self, R):
        return _sym(self.G @ R @ self.G.T)

    def scale_dual(self, R):
        return _sym(self.G.T @ R @ self.G)

    def corrector(self, smu, dx=None, dz=None):
        """Scaled right-hand side of ``dX~ + dZ~ = R``."""
        lam = self.lam
        if dx is None:
            R = np.zeros((len(lam), len(lam)))
        else:
            R = -(dx @ dz + dz @ dx)
        R[np.diag_indices_from(R)] += 2.0 * (smu - lam * lam)
        return R / (lam[:, None] + lam[None, :])

    def max_step(self, d):
        r = 1.0 / np.sqrt(self.lam)
        lo = np.linalg.eigvalsh(_sym(d * r[:, None] * r[None, :]))[0]
        return math.inf if lo >= 0 else -1.0 / lo

    def advance(self, dx, dz, ap, ad):
        """Move to ``diag(lam) + ap dx`` and ``diag(lam) + ad dz`` and rescale."""
        Xs = ap * dx
        Xs[np.diag_indices_from(Xs)] += self.lam
        Zs = ad * dz
        Zs[np.diag_indices_from(Zs)] += self.lam
        Lx = np.linalg.cholesky(_sym(Xs))
        Lz = np.linalg.cholesky(_sym(Zs))
        U, lam, Vt = np.linalg.svd(Lz.T @ Lx)
        if lam[-1] <= 0:
            raise np.linalg.LinAlgError("scaled point left the cone")
        r = 1.0 / np.sqrt(lam)
        G = self.G @ (Lx @ (Vt.T * r))
        Gi = (r[:, None] * U.T) @ (Lz.T @ self.Gi)
        return _ScaledBlock(G, Gi, lam)


def _initial_point(problem):
    out = []
    b = problem.b
    for blk in problem.blocks:
        s = blk.size
        normA = np.sqrt(blk.row_norms_sq())
        touched = normA > 0
        normC = np.linalg.norm(blk.const)
        if touched.any():
            xi = max(10.0, math.sqrt(s), s * np.max((1 + np.abs(b[touched])) / (1 + normA[touched])))
            eta = max(10.0, math.sqrt(s), (1 + max(normA.max(), normC)) / math.sqrt(s))
        else:
            xi = eta = max(10.0, math.sqrt(s))
        out.append(_ScaledBlock.start(s, xi, eta))
    return out


class _Newton:
    """Factored ``[[M, F], [F^T, 0]]`` system.

    Free variables are handled in the null space of ``F^T``: with
    ``F = Q [R; 0]`` only the trailing block of ``Q^T M Q`` is factored.
    Forming ``F^T M^-1 F`` instead loses the free directions once ``M`` is
    badly conditioned.
    """

    def __init__(self, M, F):
        self.nf = F.shape[1]
        if self.nf:
            (self.qr, self.tau), _ = sla.qr(F.toarray(), mode="raw")
            R = np.triu(self.qr[:self.nf, :self.nf])
            if np.min(np.abs(np.diag(R)), initial=np.inf) <= 1e-12 * np.abs(R).max(initial=1.0):
                raise SolverError("free-variable columns are linearly dependent")
            self.R = R
            K = self._qt(self._qt(M).T).T
            self.K11, self.K12 = K[:self.nf, :self.nf], K[:self.nf, self.nf:]
            self.K21 = K[self.nf:, :self.nf]
            M = _sym(K[self.nf:, self.nf:])
        self._factor(M)

    def _qt(self, A):
        # Q^T A, Q from the Householder reflectors of F
        out, _, info = lapack.dormqr("L", "T", self.qr, self.tau, np.array(A, order="F"),
                                     lwork=max(1, A.shape[1] if A.ndim == 2 else 1) * 64)
        if info != 0:
            raise SolverError("applying the free-variable reflectors failed")
        return out

    def _q(self, A):
        out, _, info = lapack.dormqr("L", "N", self.qr, self.tau, np.array(A, order="F"),
                                     lwork=max(1, A.shape[1] if A.ndim == 2 else 1) * 64)
        if info != 0:
            raise SolverError("applying the free-variable reflectors failed")
        return out

    def _factor(self, M):
        # equilibrate first: Cholesky is then insensitive to the row scaling
        # and the regularising shift is relative to every diagonal entry
        diag = np.diag(M).copy()
        diag[diag <= 0] = 1.0
        self.d = 1.0 / np.sqrt(diag)
        Ms = M * self.d[:, None] * self.d[None, :]
        shift = 0.0
        for attempt in range(8):
            try:
                self.cho = sla.cho_factor(Ms + shift * np.eye(len(M)), lower=True,
                                          check_finite=False)
                break
            except np.linalg.LinAlgError:
                shift = 10.0 ** (-14 + attempt)
        else:
            raise SolverError("Schur complement is not positive definite")
        self.shift = shift

    def _msolve(self, h):
        return self.d * sla.cho_solve(self.cho, self.d * h, check_finite=False)

    def solve(self, h, rf):
        if not self.nf:
            return self._msolve(h), np.zeros(0)
        nf = self.nf
        g = self._qt(h[:, None])[:, 0]
        u1 = sla.solve_triangular(self.R, rf, trans="T")
        u2 = self._msolve(g[nf:] - self.K21 @ u1)
        dw = sla.solve_triangular(self.R, g[:nf] - self.K11 @ u1 - self.K12 @ u2)
        return self._q(np.concatenate([u1, u2])[:, None])[:, 0], dw


def _krylov_refine(newton, op, h, rf, maxit):
    """Solve the Newton system with the factorisation as preconditioner.

    The factorisation alone loses accuracy once the Schur complement is badly
    conditioned; GMRES on the exact operator recovers most of it.
    """
    dy, dw = newton.solve(h, rf)
    if maxit <= 0:
        return dy, dw
    m = len(h)
    rhs = np.concatenate([h, rf])
    nrm = np.linalg.norm(rhs)
    if nrm == 0:
        return dy, dw

    def matvec(v):
        a, c = op(v[:m], v[m:])
        return np.concatenate([a, c])

    def precond(v):
        a, c = newton.solve(v[:m], v[m:])
        return np.concatenate([a, c])

    n = len(rhs)
    x0 = np.concatenate([dy, dw])
    K = spla.LinearOperator((n, n), matvec=matvec)
    Mp = spla.LinearOperator((n, n), matvec=precond)
    r0 = np.linalg.norm(rhs - matvec(x0))
    if r0 <= 1e-15 * nrm:
        return dy, dw
    x, _ = spla.gmres(K, rhs, x0=x0, rtol=1e-15, atol=0.0, restart=maxit,
                      maxiter=1, M=Mp)
    r1 = np.linalg.norm(rhs - matvec(x))
    log.debug("      krylov %.2e -> %.2e  (rhs %.2e)", r0, r1, nrm)
    if r1 < r0:
        return x[:m], x[m:]
    return dy, dw


def _schur(problem, Ws):
    m = problem.m
    M = np.zeros((m, m))
    for blk, W in zip(problem.blocks, Ws):
        N = kernels.schur_block(W, W, blk.ptr, blk.rows, blk.cols, blk.vals)
        St = blk.coupling.T.tocsr()
        M += St @ (St @ N).T
    return _sym(M)


def _inner(A, B):
    return float(sum(np.vdot(a, b) for a, b in zip(A, B)))


def _norm(A):
    return math.sqrt(sum(float(np.vdot(a, a)) for a in A))


class _Normalized:
    """Operator view of a problem with replaced ``b``, ``C`` and ``c_free``."""

    def __init__(self, problem, b, C, cf):
        self._p = problem
        self.b, self.C, self.c_free = b, C, cf

    def __getattr__(self, name):
        return getattr(self._p, name)


def solve(problem: SdpProblem, opts: SolverOptions | None = None, **kw) -> SdpSolution:
    """Solve ``problem``; returns the best iterate found with a status.

    Keyword arguments override fields of :class:`SolverOptions`.  Stopping
    tests use the data normalised to ``||b|| = ||(C, c_free)|| = 1``, which
    makes the run invariant under positive scaling of either.
    """
    opts = replace(opts or SolverOptions(), **kw)
    for blk in problem.blocks:
        if blk.size > MAX_BLOCK:
            raise ValueError(f"block side {blk.size} exceeds the supported maximum {MAX_BLOCK}")
    t0 = time.perf_counter()
    bscale = float(np.linalg.norm(problem.b)) or 1.0
    cscale = math.sqrt(sum(float(np.vdot(blk.const, blk.const)) for blk in problem.blocks)
                       + float(problem.c_free @ problem.c_free)) or 1.0
    b, F, cf = problem.b / bscale, problem.free, problem.c_free / cscale
    C = [blk.const / cscale for blk in problem.blocks]
    P = _Normalized(problem, b, C, cf)
    n_tot = sum(problem.block_sizes)
    normb = np.linalg.norm(b)
    normC = math.sqrt(_norm(C) ** 2 + float(cf @ cf))

    # embedding: (X, w, y, Z) are tau times the iterate of the original pair
    it_blocks = _initial_point(P)
    w = np.zeros(problem.n_free)
    y = np.zeros(problem.m)
    tau = 1.0
    kappa = sum(float(sb.lam @ sb.lam) for sb in it_blocks) / max(n_tot, 1)
    best = None
    since_best = polished = 0
    n_iter = 0
    status = "stalled"

    for it in range(opts.max_iter + 1):
        n_iter = it
        X = [sb.X for sb in it_blocks]
        Z = [sb.Z for sb in it_blocks]
        AX = P.A(X)
        Aty = P.At(y)
        cx = _inner(C, X) + float(cf @ w)
        by = float(b @ y)
        r_x = AX + F @ w - tau * b
        r_y = F.T @ y - tau * cf
        r_z = [z + a - tau * c for z, a, c in zip(Z, Aty, C)]
        r_t = kappa + cx - by
        mu = (sum(float(sb.lam @ sb.lam) for sb in it_blocks) + tau * kappa) / (n_tot + 1)

        pobj, dobj = cx / tau, by / tau
        pinf = np.linalg.norm(r_x) / tau / (1 + normb)
        dinf = math.sqrt(_norm(r_z) ** 2 + float(r_y @ r_y)) / tau / (1 + normC)
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        err = max(pinf, dinf, gap)
        if opts.verbose:
            log.info("it %3d  p %+.10e  d %+.10e  pinf %.1e dinf %.1e gap %.1e mu %.1e tau %.1e",
                     it, pobj, dobj, pinf, dinf, gap, mu, tau)
        improved = best is None or err < best[0]
        if improved:
            best = (err, [x / tau for x in X], w / tau, y / tau, [z / tau for z in Z],
                    pobj, dobj, pinf, dinf, gap)
            since_best = 0
        else:
            since_best += 1
        if pinf <= opts.eps_feas and dinf <= opts.eps_feas and gap <= opts.eps_gap:
            status = "optimal"
        if status == "optimal":
            # a few more steps sharpen the rank structure of the iterate;
            # stop as soon as they stop helping
            if not improved or polished >= opts.polish:
                break
            polished += 1
        elif since_best >= STALL_ITERS:
            break
        cert = _infeasibility(P, X, w, y, Z, cx, by, opts)
        if cert:
            status = cert
            break
        if it == opts.max_iter:
            break

        try:
            Ws = [sb.W for sb in it_blocks]
            newton = _Newton(_schur(P, Ws), F)
        except SolverError:
            break

        def scaled_op(dy, dw):
            lin = P.A([sb.unscale_primal(sb.scale_dual(a)) for sb, a in zip(it_blocks, P.At(dy))])
            return lin + F @ dw, F.T @ dy

        # the tau column of the system does not depend on the right-hand side
        WCW = [W @ c @ W for W, c in zip(Ws, C)]
        dy1, dw1 = _krylov_refine(newton, scaled_op, b + P.A(WCW), cf, opts.refine)
        D1 = [a - c for a, c in zip(P.At(dy1), C)]
        coef = -kappa / tau - sum(float(np.vdot(d, W @ d @ W)) for d, W in zip(D1, Ws))
        rz_s = [sb.scale_dual(r) for sb, r in zip(it_blocks, r_z)]

        def direction(Rc, eta, rt_c):
            # scaled dX~ + dZ~ = Rc, linear residuals reduced by eta,
            # kappa dtau + tau dkappa = rt_c
            T = [sb.unscale_primal(r + eta * rz) for sb, r, rz in zip(it_blocks, Rc, rz_s)]
            dy0, dw0 = _krylov_refine(newton, scaled_op, -eta * r_x - P.A(T), -eta * r_y,
                                      opts.refine)
            dX0 = [t + sb.unscale_primal(sb.scale_dual(a))
                   for t, sb, a in zip(T, it_blocks, P.At(dy0))]
            rhs = (-eta * r_t - rt_c / tau + float(b @ dy0) - float(cf @ dw0) - _inner(C, dX0))
            dtau = rhs / coef
            dkappa = (rt_c - kappa * dtau) / tau
            dy = dy0 + dtau * dy1
            dw = dw0 + dtau * dw1
            dZ = [-eta * r - a + dtau * c for r, a, c in zip(r_z, P.At(dy), C)]
            dz = [sb.scale_dual(d) for sb, d in zip(it_blocks, dZ)]
            dx = [_sym(r - d) for r, d in zip(Rc, dz)]
            return dx, dz, dy, dw, dtau, dkappa

        def step(dx, dz, dtau, dkappa):
            a = min([sb.max_step(d) for sb, d in zip(it_blocks, dx)]
                    + [sb.max_step(d) for sb, d in zip(it_blocks, dz)] + [math.inf])
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        dxa, dza, _, _, dta, dka = direction([sb.corrector(0.0) for sb in it_blocks], 1.0,
                                             -tau * kappa)
        aa = min(1.0, step(dxa, dza, dta, dka))
        sigma = (1.0 - aa) ** 3

        # corrector
        Rc = [sb.corrector(sigma * mu, dx, dz) for sb, dx, dz in zip(it_blocks, dxa, dza)]
        dx, dz, dy, dw, dtau, dkappa = direction(Rc, 1.0 - sigma,
                                                 sigma * mu - tau * kappa - dta * dka)
        alpha = min(1.0, 0.99 * step(dx, dz, dtau, dkappa))
        for _ in range(20):
            try:
                nxt = [sb.advance(x, z, alpha, alpha) for sb, x, z in zip(it_blocks, dx, dz)]
                break
            except np.linalg.LinAlgError:
                alpha *= 0.8
        else:
            break
        it_blocks = nxt
        y = y + alpha * dy
        w = w + alpha * dw
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        if opts.verbose:
            log.info("    sigma %.2e  step %.3f", sigma, alpha)
        if alpha < 1e-8:
            break

    if status in ("infeasible", "unbounded"):
        # certificates are rays, reported unnormalised by tau
        gap = float("nan")
        X, Z = [sb.X for sb in it_blocks], [sb.Z for sb in it_blocks]
        pobj, dobj = _inner(C, X) + float(cf @ w), float(b @ y)
        pinf = dinf = float("nan")
    else:
        err, X, w, y, Z, pobj, dobj, pinf, dinf, gap = best
        if status != "optimal":
            status = "near_optimal" if err <= 1e3 * max(opts.eps_feas, opts.eps_gap) else "stalled"
    X = [x * bscale for x in X]
    w = w * bscale
    y = y * cscale
    Z = [z * cscale for z in Z]
    pobj *= bscale * cscale
    dobj *= bscale * cscale
    metrics = {"primal_residual": float(pinf), "dual_residual": float(dinf), "gap": float(gap),
               "iterations": n_iter, "time": time.perf_counter() - t0,
               "backend": kernels.BACKEND}
    return SdpSolution(X=X, w=w, y=y, Z=Z, primal_objective=pobj, dual_objective=dobj,
                       status=status, metrics=metrics, target=problem.target)


def _infeasibility(P, X, w, y, Z, cx, by, opts):
    """Status string if the embedding iterate has become an infeasibility ray."""
    tol = opts.eps_feas
    if by > 0:
        ray = math.sqrt(_norm([a + z for a, z in zip(P.At(y), Z)]) ** 2
                        + float(np.sum((P.free.T @ y) ** 2)))
        if ray <= tol * by:
            # Z = -A*(y) >= 0, F^T y = 0 and b.y > 0: (P) has no feasible point
            return "infeasible" if P.target == "primal" else "unbounded"
    if cx < 0:
        ray = np.linalg.norm(P.A(X) + P.free @ w)
        if ray <= tol * -cx:
            return "unbounded" if P.target == "primal" else "infeasible"
    return None


def residuals(problem: SdpProblem, solution: SdpSolution) -> dict:
    """Recompute feasibility, conic and gap metrics of a solution."""
    if len(solution.X) != len(problem.blocks) or len(solution.y) != problem.m:
        raise ValueError("solution does not match the problem shape")
    rp = problem.b - problem.A(solution.X) - problem.free @ solution.w
    Z = [c - a for c, a in zip((blk.const for blk in problem.blocks), problem.At(solution.y))]
    rf = problem.c_free - problem.free.T @ solution.y
    pobj = problem.primal_objective(solution.X, solution.w)
    dobj = problem.dual_objective(solution.y)
    gap = abs(pobj - dobj) if solution.status in ("optimal", "near_optimal") else float("nan")
    return {
        "equality_residual": float(np.max(np.abs(rp), initial=0.0)),
        "free_residual": float(np.max(np.abs(rf), initial=0.0)),
        "min_eig_primal": [float(np.linalg.eigvalsh(_sym(x))[0]) for x in solution.X],
        "min_eig_dual": [float(np.linalg.eigvalsh(_sym(z))[0]) for z in Z],
        "primal_objective": pobj,
        "dual_objective": dobj,
        "gap": gap,
    }
