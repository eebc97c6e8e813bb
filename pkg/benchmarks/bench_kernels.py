"""Compare the compiled and numpy Schur-complement kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--solve]

Kernel timings use the blocks of one moment relaxation with random positive
definite scalings.  ``--solve`` also times a full solve in a subprocess for
each backend, since the backend is fixed at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from multicheb.domains import make_domain
from multicheb.hierarchy import assemble_moment_relaxation
from multicheb.poly import SparsePolynomial
from multicheb.sdp.kernels import schur_block_compiled, schur_block_numpy

CASES = [((2, 1, 1), "ball", 5), ((2, 2, 2), "ball", 7), ((2, 2, 1), "cross", 6)]

SOLVE = """
import time
from multicheb.domains import make_domain
from multicheb.hierarchy import assemble_moment_relaxation
from multicheb.poly import SparsePolynomial
from multicheb.sdp import BACKEND, solve
P = assemble_moment_relaxation(SparsePolynomial.monomial({k}), {n}, make_domain({dom!r}, 3), {t})
t0 = time.perf_counter()
s = solve(P)
print(BACKEND, time.perf_counter() - t0, s.metrics["iterations"])
"""


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'case':<22}{'block':>7}{'atoms':>7}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}")
    for k, dom, t in CASES:
        P = assemble_moment_relaxation(SparsePolynomial.monomial(k), sum(k),
                                       make_domain(dom, 3), t)
        blk = max(P.blocks, key=lambda b: b.size)
        A = rng.normal(size=(blk.size, blk.size))
        X = A @ A.T + np.eye(blk.size)
        Zi = np.linalg.inv(X)
        args = (X, Zi, blk.ptr, blk.rows, blk.cols, blk.vals)
        tn = min(timeit.repeat(lambda: schur_block_numpy(*args), number=1, repeat=repeat))
        label = f"{''.join(map(str, k))}/{dom}/t={t}"
        if schur_block_compiled is None:
            print(f"{label:<22}{blk.size:>7}{len(blk.ptr) - 1:>7}{tn * 1e3:>11.1f}"
                  f"{'n/a':>11}{'':>9}")
            continue
        a = schur_block_numpy(*args)
        c = schur_block_compiled(*args)
        assert np.allclose(a, c, rtol=1e-10, atol=1e-9 * np.abs(a).max())
        tc = min(timeit.repeat(lambda: schur_block_compiled(*args), number=1, repeat=repeat))
        print(f"{label:<22}{blk.size:>7}{len(blk.ptr) - 1:>7}{tn * 1e3:>11.1f}{tc * 1e3:>11.1f}"
              f"{tn / tc:>8.1f}x")


def bench_solves():
    print(f"\n{'case':<22}{'backend':>9}{'seconds':>10}{'iters':>7}")
    for k, dom, t in CASES:
        code = SOLVE.format(k=k, n=sum(k), dom=dom, t=t)
        for forced in ("", "numpy"):
            env = dict(os.environ, MULTICHEB_KERNEL=forced)
            out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                 text=True, check=True).stdout.split()
            label = f"{''.join(map(str, k))}/{dom}/t={t}"
            print(f"{label:<22}{out[0]:>9}{float(out[1]):>10.2f}{out[2]:>7}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if args.solve:
        bench_solves()


if __name__ == "__main__":
    main()
