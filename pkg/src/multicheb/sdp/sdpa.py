"""SDPA sparse text format.

SDPA reads the pair

    minimize  c . x   subject to   X = sum_i F_i x_i - F_0 >= 0
    maximize  <F_0, Y> subject to  <F_i, Y> = c_i,  Y >= 0

so a :class:`SdpProblem` maps over with ``x = y``, ``c = -b``, ``F_0 = -C``
and ``F_i = -A_i``; ``Y`` is then our ``X``.  Free variables ``w`` have no
SDPA counterpart.  They are written as ``w = w+ - w-`` in one trailing
diagonal block, announced by a ``*free`` comment so :func:`parse_sdpa` can
fold the pair back.
"""
from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp

from .problem import Block, SdpProblem

_FREE = re.compile(r"^\*free\s+block\s+(\d+)\s+count\s+(\d+)")
_TARGET = re.compile(r"^\*target\s+(primal|dual)")


class SdpaFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def _block_rows(blk: Block, m: int) -> sp.csr_matrix:
    """Row ``i`` holds ``A_i`` of the block flattened row-major."""
    s = blk.size
    E = sp.csr_matrix((blk.vals, (blk.atom_of_entry, blk.rows * s + blk.cols)),
                      shape=(blk.n_atoms, s * s))
    return (blk.coupling.T @ E).tocsr()


def _upper_entries(flat_row, s):
    """``(i, j, v)`` with ``i <= j`` from one flattened symmetric matrix."""
    out = {}
    coo = flat_row.tocoo() if sp.issparse(flat_row) else sp.coo_matrix(flat_row.reshape(1, -1))
    for idx, v in zip(coo.col, coo.data):
        i, j = divmod(int(idx), s)
        if i > j:
            i, j = j, i
        out[i, j] = v
    return sorted((i, j, v) for (i, j), v in out.items() if v != 0)


def export_sdpa(problem: SdpProblem) -> str:
    m = problem.m
    if m == 0:
        raise SdpaFormatError("SDPA needs at least one constraint")
    nf = problem.n_free
    data = [problem.b, problem.c_free, problem.free.data]
    data += [blk.const for blk in problem.blocks] + [blk.vals for blk in problem.blocks]
    if not all(np.all(np.isfinite(np.asarray(a, dtype=float))) for a in data):
        raise SdpaFormatError("problem data must be finite")

    sizes = []
    for blk in problem.blocks:
        if blk.diagonal:
            rows = _block_rows(blk, m).tocoo()
            i, j = np.divmod(rows.col, blk.size)
            off = np.abs(blk.const - np.diag(np.diag(blk.const))).max(initial=0.0)
            if np.any(i != j) or off > 0:
                raise SdpaFormatError(f"block {blk.label!r} is flagged diagonal but is not")
            sizes.append(-blk.size)
        else:
            sizes.append(blk.size)
    if nf:
        sizes.append(-2 * nf)

    lines = []
    if problem.target != "primal":
        lines.append(f"*target {problem.target}")
    if nf:
        lines.append(f"*free block {len(problem.blocks) + 1} count {nf}")
    lines.append(str(m))
    lines.append(str(len(sizes)))
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(_fmt(-v) for v in problem.b))

    entries = []
    for bno, blk in enumerate(problem.blocks, start=1):
        s = blk.size
        for i, j, v in _upper_entries(blk.const.ravel(), s):
            entries.append((0, bno, i + 1, j + 1, -v))
        rows = _block_rows(blk, m)
        for r in range(m):
            for i, j, v in _upper_entries(rows[r], s):
                entries.append((r + 1, bno, i + 1, j + 1, -v))
    if nf:
        bno = len(problem.blocks) + 1
        for k, c in enumerate(problem.c_free):
            if c:
                entries.append((0, bno, k + 1, k + 1, -c))
                entries.append((0, bno, nf + k + 1, nf + k + 1, c))
        F = problem.free.tocoo()
        for r, k, v in zip(F.row, F.col, F.data):
            if v:
                entries.append((int(r) + 1, bno, int(k) + 1, int(k) + 1, -v))
                entries.append((int(r) + 1, bno, nf + int(k) + 1, nf + int(k) + 1, v))
    entries.sort(key=lambda e: e[:4])
    lines += [f"{a} {b} {i} {j} {_fmt(v)}" for a, b, i, j, v in entries]
    return "\n".join(lines) + "\n"


def write_sdpa(problem: SdpProblem, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(export_sdpa(problem))


def _numbers(text: str) -> list:
    return [t for t in re.split(r"[\s,{}()]+", text) if t]


def parse_sdpa(text: str) -> SdpProblem:
    """Inverse of :func:`export_sdpa`; also reads plain SDPA files.

    Every constraint matrix becomes its own atom.  A diagonal block keeps the
    ``diagonal`` flag.
    """
    free_blk, nf, target = None, 0, "primal"
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line[0] in '"*':
            if not body:
                if (mt := _FREE.match(line)):
                    free_blk, nf = int(mt.group(1)), int(mt.group(2))
                elif (mt := _TARGET.match(line)):
                    target = mt.group(1)
            continue
        body.append(line)
    if len(body) < 4:
        raise SdpaFormatError("truncated SDPA header")
    try:
        m = int(_numbers(body[0])[0])
        nblocks = int(_numbers(body[1])[0])
        sizes = [int(float(v)) for v in _numbers(body[2])[:nblocks]]
        cvec = np.array([float(v) for v in _numbers(body[3])[:m]])
    except (IndexError, ValueError) as exc:
        raise SdpaFormatError(f"bad SDPA header: {exc}") from None
    if len(sizes) != nblocks or len(cvec) != m or 0 in sizes:
        raise SdpaFormatError("SDPA header sizes do not match")

    per_block = [dict() for _ in range(nblocks)]
    for line in body[4:]:
        parts = _numbers(line)
        if len(parts) != 5:
            raise SdpaFormatError(f"bad entry line: {line!r}")
        a, bno, i, j = (int(p) for p in parts[:4])
        v = float(parts[4])
        if not (0 <= a <= m and 1 <= bno <= nblocks):
            raise SdpaFormatError(f"entry outside the problem: {line!r}")
        s = abs(sizes[bno - 1])
        if not (1 <= i <= s and 1 <= j <= s):
            raise SdpaFormatError(f"entry outside block {bno}: {line!r}")
        if sizes[bno - 1] < 0 and i != j:
            raise SdpaFormatError(f"off-diagonal entry in diagonal block {bno}")
        key = (min(i, j) - 1, max(i, j) - 1)
        mats = per_block[bno - 1].setdefault(a, {})
        mats[key] = mats.get(key, 0.0) + v

    b = -cvec
    blocks = []
    F = c_free = None
    for bno, (size, mats) in enumerate(zip(sizes, per_block), start=1):
        if bno == free_blk:
            if size != -2 * nf:
                raise SdpaFormatError("free-variable block has the wrong size")
            F, c_free = _fold_free(mats, nf, m)
            continue
        blocks.append(_make_block(abs(size), mats, m, size < 0, f"block{bno}"))
    return SdpProblem(blocks, b, F, c_free, target=target)


def _make_block(s, mats, m, diagonal, label) -> Block:
    const = np.zeros((s, s))
    for (i, j), v in mats.get(0, {}).items():
        const[i, j] = const[j, i] = -v
    rows_used = sorted(r for r in mats if r > 0)
    ptr, rr, cc, vv = [0], [], [], []
    for r in rows_used:
        for (i, j), v in sorted(mats[r].items()):
            if v == 0:
                continue
            rr.append(i)
            cc.append(j)
            vv.append(-v)
            if i != j:
                rr.append(j)
                cc.append(i)
                vv.append(-v)
        ptr.append(len(rr))
    S = sp.csr_matrix((np.ones(len(rows_used)), (np.arange(len(rows_used)),
                                                 np.array(rows_used, dtype=int) - 1)),
                      shape=(len(rows_used), m))
    return Block(s, np.array(ptr), np.array(rr, dtype=np.intp), np.array(cc, dtype=np.intp),
                 np.array(vv, dtype=float), S, const, diagonal, label)


def _fold_free(mats, nf, m):
    c_free = np.zeros(nf)
    for (i, _), v in mats.get(0, {}).items():
        if i < nf:
            c_free[i] = -v
    rr, kk, vv = [], [], []
    for r, entries in mats.items():
        if r == 0:
            continue
        for (i, _), v in entries.items():
            if i < nf and v:
                rr.append(r - 1)
                kk.append(i)
                vv.append(-v)
    return sp.csr_matrix((vv, (rr, kk)), shape=(m, nf)), c_free
