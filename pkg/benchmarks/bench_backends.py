"""Time the hot kernels under the numba and numpy implementations.

Run as ``python benchmarks/bench_backends.py [--repeat N]``.  Both
kernel modules are imported directly, so the PSDLIFT_BACKEND flag is
irrelevant here; the point is the side-by-side on identical inputs.
"""

import argparse
import time

import numpy as np

from psdlift import _kernels_numpy as knp

try:
    from psdlift import _kernels_numba as knb
except ImportError:
    knb = None


def timeit(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def ap_inputs(d=10, n=30, seed=0):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(d)
    pack = np.where(iu == ju, 1.0, np.sqrt(2.0))
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    g = rng.standard_normal((n, d, d))
    q = knp.orthogonal_from_gaussian(g)
    stack = np.einsum("nij,nkj->nik", q[:, :, :1], q[:, :, :1])
    rows = np.vstack([stack[j][iu, ju] * pack for j in range(n)]
                     + [np.eye(d)[iu, ju] * pack])
    b = np.concatenate([np.einsum("nij,i,j->n", stack, x, x), [1.0]])
    v0, *_ = np.linalg.lstsq(rows, b, rcond=None)
    _, sv, vt = np.linalg.svd(rows, full_matrices=False)
    basis = vt[sv > sv[0] * 1e-12].T.copy()
    return rows, b, basis, v0, iu, ju, d


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(42)
    g = rng.standard_normal((2000, 16, 16))
    stack = rng.standard_normal((20000, 16, 16))
    stack = stack + stack.transpose(0, 2, 1)
    x16 = rng.standard_normal((16, 16))
    x16 = x16 + x16.T
    coefs = rng.standard_normal(20000)
    qs = rng.standard_normal((500, 16, 16))
    points = rng.standard_normal((3600, 8))
    from itertools import combinations_with_replacement
    betas = []
    for combo in combinations_with_replacement(range(8), 6):
        beta = np.zeros(8, dtype=np.int64)
        for i in combo:
            beta[i] += 1
        betas.append(beta)
    betas = np.array(betas)
    aploop = ap_inputs()

    cases = [
        ("orthogonal_from_gaussian (2000, 16x16)", "orthogonal_from_gaussian", (g,)),
        ("inner_batch (20000, 16x16)", "inner_batch", (stack, x16)),
        ("apply_frame (20000, 16x16)", "apply_frame", (stack, coefs)),
        ("pairwise_inner (500x500, 16x16)", "pairwise_inner", (qs, qs)),
        ("monomial_columns (1716 rows, 3600 pts)", "monomial_columns", (points, betas)),
        ("ap_loop (d=10, n=30, tol 1e-9)", "ap_loop", (*aploop, 1e-9, 5000)),
    ]

    if knb is not None:
        print("warming up numba kernels...")
        for _, name, a in cases:
            getattr(knb, name)(*a)

    header = f"{'kernel':42s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, name, a in cases:
        t_np = timeit(getattr(knp, name), a, args.repeat)
        if knb is None:
            print(f"{label:42s} {t_np * 1e3:9.2f}ms {'n/a':>10s} {'':>8s}")
            continue
        t_nb = timeit(getattr(knb, name), a, args.repeat)
        print(f"{label:42s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.2f}x")


if __name__ == "__main__":
    main()
