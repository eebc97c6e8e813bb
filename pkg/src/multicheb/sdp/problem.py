"""Block-diagonal semidefinite programs in atom-factored form.

An :class:`SdpProblem` holds the primal-dual pair

    (P)  minimize   <C, X> + c_free . w
         subject to A(X) + F w = b,        X = diag(X_1, ..., X_B) >= 0, w free

    (D)  maximize   b . y
         subject to Z = C - A*(y) >= 0,    F^T y = c_free

Every block stores its constraint matrices through a small set of sparse
"atom" matrices ``H_k`` and a sparse coupling ``S`` so that the constraint
matrix of row ``i`` restricted to the block is ``sum_k S[k, i] H_k``.  Moment
and localizing matrices fit this with one atom per monomial, which keeps the
Schur complement cost at one pass over the atoms instead of one per row.

``target`` says which side of the pair is the program being modelled:
``"primal"`` for the SOS side (minimize), ``"dual"`` for the moment side
(maximize).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class Block:
    """One symmetric PSD block of side ``size``.

    ``rows``, ``cols``, ``vals`` list every nonzero of every atom (both
    triangles), grouped by atom with ``ptr`` offsets as in CSR.
    """

    size: int
    ptr: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    coupling: sp.csr_matrix           # n_atoms x m
    const: np.ndarray                 # dense C block, size x size
    diagonal: bool = False
    label: str = ""

    def __post_init__(self):
        self.ptr = np.ascontiguousarray(self.ptr, dtype=np.intp)
        self.rows = np.ascontiguousarray(self.rows, dtype=np.intp)
        self.cols = np.ascontiguousarray(self.cols, dtype=np.intp)
        self.vals = np.ascontiguousarray(self.vals, dtype=float)
        self.coupling = sp.csr_matrix(self.coupling)
        self.const = np.ascontiguousarray(self.const, dtype=float)
        if self.size < 1:
            raise ValueError("block side must be at least 1")
        if self.const.shape != (self.size, self.size):
            raise ValueError("constant block has the wrong shape")
        if self.coupling.shape[0] != self.n_atoms:
            raise ValueError("coupling must have one row per atom")
        if len(self.rows) and (self.rows.max() >= self.size or self.cols.max() >= self.size):
            raise ValueError("atom entry outside the block")
        self._flat = self.rows * self.size + self.cols
        self._atom_of = np.repeat(np.arange(self.n_atoms), np.diff(self.ptr))

    @property
    def n_atoms(self) -> int:
        return len(self.ptr) - 1

    @property
    def atom_of_entry(self) -> np.ndarray:
        return self._atom_of

    def atom_dots(self, X: np.ndarray) -> np.ndarray:
        """``<H_k, X>`` for every atom."""
        return np.bincount(self._atom_of, weights=self.vals * X.ravel()[self._flat],
                           minlength=self.n_atoms)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Contribution of this block to ``A(X)`` (length ``m``)."""
        return self.coupling.T @ self.atom_dots(X)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """This block of ``A*(y)``."""
        coef = self.coupling @ y
        flat = np.bincount(self._flat, weights=self.vals * coef[self._atom_of],
                           minlength=self.size * self.size)
        return flat.reshape(self.size, self.size)

    def atom_matrix(self, k: int) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        sl = slice(self.ptr[k], self.ptr[k + 1])
        np.add.at(out, (self.rows[sl], self.cols[sl]), self.vals[sl])
        return out

    def row_matrix(self, i: int) -> np.ndarray:
        """Dense ``A_i`` restricted to this block."""
        col = self.coupling[:, i].toarray().ravel()
        return self.adjoint(np.eye(self.coupling.shape[1])[:, i]) if col.any() else \
            np.zeros((self.size, self.size))

    def row_norms_sq(self) -> np.ndarray:
        """``||A_i||_F^2`` restricted to this block, for every row ``i``."""
        E = sp.csr_matrix((self.vals, (self._atom_of, self._flat)),
                          shape=(self.n_atoms, self.size * self.size))
        gram = (E @ E.T).tocsr()
        S = self.coupling
        return np.asarray((S.multiply(gram @ S)).sum(axis=0)).ravel()


@dataclass
class SdpProblem:
    blocks: list
    b: np.ndarray
    free: sp.csr_matrix = None        # F, m x nf
    c_free: np.ndarray = None
    target: str = "primal"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m = len(self.b)
        if self.free is None:
            self.free = sp.csr_matrix((m, 0))
        self.free = sp.csr_matrix(self.free)
        if self.c_free is None:
            self.c_free = np.zeros(self.free.shape[1])
        self.c_free = np.asarray(self.c_free, dtype=float)
        if self.free.shape != (m, len(self.c_free)):
            raise ValueError("free-variable matrix does not match b / c_free")
        if not self.blocks and self.free.shape[1] == 0:
            raise ValueError("problem has no variables")
        for blk in self.blocks:
            if blk.coupling.shape[1] != m:
                raise ValueError(f"block {blk.label!r} couples {blk.coupling.shape[1]} rows, expected {m}")
        if self.target not in ("primal", "dual"):
            raise ValueError("target must be 'primal' or 'dual'")

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def n_free(self) -> int:
        return self.free.shape[1]

    @property
    def direction(self) -> str:
        return "minimize" if self.target == "primal" else "maximize"

    @property
    def block_sizes(self) -> list:
        return [blk.size for blk in self.blocks]

    def A(self, X: list) -> np.ndarray:
        out = np.zeros(self.m)
        for blk, Xb in zip(self.blocks, X):
            out += blk.apply(Xb)
        return out

    def At(self, y: np.ndarray) -> list:
        return [blk.adjoint(y) for blk in self.blocks]

    def primal_objective(self, X: list, w: np.ndarray) -> float:
        return float(sum(np.vdot(blk.const, Xb) for blk, Xb in zip(self.blocks, X))
                     + self.c_free @ w)

    def dual_objective(self, y: np.ndarray) -> float:
        return float(self.b @ y)

    def scaled(self, factor: float) -> "SdpProblem":
        """Same feasible set, objective of the target side multiplied by ``factor``."""
        if self.target == "dual":
            return SdpProblem(self.blocks, self.b * factor, self.free, self.c_free,
                              self.target, self.name, dict(self.meta))
        blocks = [Block(blk.size, blk.ptr, blk.rows, blk.cols, blk.vals, blk.coupling,
                        blk.const * factor, blk.diagonal, blk.label) for blk in self.blocks]
        return SdpProblem(blocks, self.b, self.free, self.c_free * factor,
                          self.target, self.name, dict(self.meta))

    def stats(self) -> dict:
        return {"blocks": len(self.blocks), "block_sizes": self.block_sizes,
                "constraints": self.m, "free_variables": self.n_free}


@dataclass
class SdpSolution:
    X: list
    w: np.ndarray
    y: np.ndarray
    Z: list
    primal_objective: float
    dual_objective: float
    status: str
    metrics: dict
    target: str = "primal"

    @property
    def objective(self) -> float:
        return self.primal_objective if self.target == "primal" else self.dual_objective

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def hankel_atoms(basis: list, atom_index: dict):
    """Atom entries of a Hankel-structured block.

    Entry ``(a, b)`` belongs to the atom of monomial ``basis[a] + basis[b]``.
    Returns ``ptr, rows, cols, vals`` sorted by atom id.
    """
    s = len(basis)
    B = np.asarray(basis, dtype=np.int64)
    sums = B[:, None, :] + B[None, :, :]
    ids = np.array([atom_index[tuple(v)] for v in sums.reshape(-1, B.shape[1])])
    rows = np.repeat(np.arange(s), s)
    cols = np.tile(np.arange(s), s)
    order = np.argsort(ids, kind="stable")
    ids, rows, cols = ids[order], rows[order], cols[order]
    n_atoms = len(atom_index)
    ptr = np.zeros(n_atoms + 1, dtype=np.intp)
    np.add.at(ptr, ids + 1, 1)
    ptr = np.cumsum(ptr)
    return ptr, rows, cols, np.ones(len(rows))


def block_from_matrices(size: int, matrices: dict, m: int, const=None,
                        diagonal: bool = False, label: str = "") -> Block:
    """Block whose row ``i`` matrix is ``matrices[i]`` (one atom per row).

    Matrices may be dense arrays or ``{(r, c): value}`` maps given on one
    triangle; they are symmetrised.
    """
    keys = sorted(matrices)
    ptr = [0]
    rows, cols, vals = [], [], []
    for i in keys:
        ents = _entries(matrices[i], size)
        for (r, c), v in sorted(ents.items()):
            rows.append(r)
            cols.append(c)
            vals.append(v)
        ptr.append(len(rows))
    S = sp.csr_matrix((np.ones(len(keys)), (np.arange(len(keys)), keys)), shape=(len(keys), m))
    C = np.zeros((size, size)) if const is None else _dense(const, size)
    return Block(size, np.array(ptr), np.array(rows, dtype=np.intp),
                 np.array(cols, dtype=np.intp), np.array(vals, dtype=float), S, C,
                 diagonal, label)


def _entries(mat, size) -> dict:
    out = {}
    if isinstance(mat, dict):
        for (r, c), v in mat.items():
            if v == 0:
                continue
            out[(r, c)] = v
            out[(c, r)] = v
        return out
    A = _sym_dense(np.asarray(mat, dtype=float))
    if A.shape != (size, size):
        raise ValueError("matrix has the wrong shape")
    for r, c in zip(*np.nonzero(A)):
        out[(int(r), int(c))] = float(A[r, c])
    return out


def _sym_dense(A):
    return 0.5 * (A + A.T)


def _dense(mat, size):
    if isinstance(mat, dict):
        out = np.zeros((size, size))
        for (r, c), v in mat.items():
            out[r, c] = v
            out[c, r] = v
        return out
    return _sym_dense(np.asarray(mat, dtype=float))
