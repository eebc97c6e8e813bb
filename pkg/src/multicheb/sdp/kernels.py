"""Schur-complement kernels with a compiled core and a numpy fallback.

``BACKEND`` names the implementation picked at import time.  Set
``MULTICHEB_KERNEL=numpy`` to force the fallback.
"""
import os

import numpy as np


def schur_block_numpy(X, Zi, ptr, rows, cols, vals):
    """``N[k1, k2] = Tr(H_k1 X H_k2 Zi)`` for all atom pairs of one block."""
    na = len(ptr) - 1
    s = X.shape[0]
    atom_of = np.repeat(np.arange(na), np.diff(ptr))
    flat = rows * s + cols
    N = np.zeros((na, na))
    for k in range(na):
        lo, hi = ptr[k], ptr[k + 1]
        if lo == hi:
            continue
        G = (X[rows[lo:hi], :].T * vals[lo:hi]) @ Zi[cols[lo:hi], :]
        N[:, k] = np.bincount(atom_of, weights=vals * G.ravel()[flat], minlength=na)
    return 0.5 * (N + N.T)


try:
    if os.environ.get("MULTICHEB_KERNEL", "").lower() == "numpy":
        raise ImportError("fallback forced")
    from ._kernels import schur_block as _schur_block_c

    def schur_block_compiled(X, Zi, ptr, rows, cols, vals):
        return _schur_block_c(np.ascontiguousarray(X), np.ascontiguousarray(Zi),
                              ptr, rows, cols, vals)

    schur_block = schur_block_compiled
    BACKEND = "cython"
except ImportError:
    schur_block_compiled = None
    schur_block = schur_block_numpy
    BACKEND = "numpy"
