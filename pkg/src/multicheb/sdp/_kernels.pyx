# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Schur-complement kernel for atom-factored blocks."""
import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def schur_block(double[:, ::1] X, double[:, ::1] Zi, Py_ssize_t[::1] ptr,
                Py_ssize_t[::1] rows, Py_ssize_t[::1] cols, double[::1] vals):
    """``N[k1, k2] = Tr(H_k1 X H_k2 Zi)`` for all atom pairs of one block."""
    cdef Py_ssize_t s = X.shape[0]
    cdef Py_ssize_t na = ptr.shape[0] - 1
    cdef Py_ssize_t k1, k2, e, j, p, q, lo, hi
    cdef int n = <int>s, ke, ld
    cdef double one = 1.0, zero = 0.0, acc, w
    cdef cnp.ndarray[double, ndim=2] N = np.zeros((na, na))
    cdef double[:, ::1] Nv = N
    cdef Py_ssize_t emax = 0
    for k2 in range(na):
        if ptr[k2 + 1] - ptr[k2] > emax:
            emax = ptr[k2 + 1] - ptr[k2]
    # P (e x s, row-major) holds w * X[a, :], Q (e x s) holds Zi[b, :]
    cdef double[:, ::1] P = np.empty((max(emax, 1), s))
    cdef double[:, ::1] Q = np.empty((max(emax, 1), s))
    cdef double[:, ::1] G = np.empty((s, s))
    for k2 in range(na):
        lo = ptr[k2]
        hi = ptr[k2 + 1]
        e = hi - lo
        if e == 0:
            continue
        for j in range(e):
            p = rows[lo + j]
            q = cols[lo + j]
            w = vals[lo + j]
            for ld in range(n):
                P[j, ld] = w * X[p, ld]
                Q[j, ld] = Zi[q, ld]
        # row-major G = P^T Q  <=>  column-major G^T = Q^T P
        ke = <int>e
        dgemm(b"N", b"T", &n, &n, &ke, &one, &Q[0, 0], &n, &P[0, 0], &n,
              &zero, &G[0, 0], &n)
        for k1 in range(k2, na):
            acc = 0.0
            for j in range(ptr[k1], ptr[k1 + 1]):
                acc += vals[j] * G[rows[j], cols[j]]
            Nv[k1, k2] = acc
            Nv[k2, k1] = acc
    return N
