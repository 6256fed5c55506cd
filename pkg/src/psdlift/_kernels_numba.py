"""Numba-compiled twins of the kernels in ``_kernels_numpy``.

Importing this module requires numba; ``_backend`` falls back to the
numpy implementations when it is missing.  Kernels are cached to disk so
the compile cost is paid once per machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_SQRT2 = np.sqrt(2.0)


@njit(cache=True)
def orthogonal_from_gaussian(g):
    n, d, _ = g.shape
    out = np.empty((n, d, d))
    for j in range(n):
        q, r = np.linalg.qr(g[j])
        for c in range(d):
            s = 1.0 if r[c, c] >= 0.0 else -1.0
            for a in range(d):
                out[j, a, c] = q[a, c] * s
    return out


@njit(cache=True)
def inner_batch(ps, x):
    n, d, _ = ps.shape
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for a in range(d):
            for c in range(d):
                acc += ps[j, a, c] * x[a, c]
        out[j] = acc
    return out


@njit(cache=True)
def apply_frame(ps, coefs):
    n, d, _ = ps.shape
    out = np.zeros((d, d))
    for j in range(n):
        cj = coefs[j]
        if cj != 0.0:
            for a in range(d):
                for c in range(d):
                    out[a, c] += cj * ps[j, a, c]
    return out


@njit(cache=True)
def pairwise_inner(ps, qs):
    n, d, _ = ps.shape
    m = qs.shape[0]
    a = np.ascontiguousarray(ps).reshape(n, d * d)
    b = np.ascontiguousarray(qs).reshape(m, d * d)
    return np.dot(a, b.T)


@njit(cache=True)
def monomial_columns(points, betas):
    n, d = points.shape
    nr = betas.shape[0]
    out = np.ones((nr, n))
    for r in range(nr):
        for j in range(n):
            acc = 1.0
            for i in range(d):
                e = betas[r, i]
                x = points[j, i]
                for _ in range(e):
                    acc *= x
            out[r, j] = acc
    return out


@njit(cache=True)
def ap_loop(rows, b, basis, v0, iu, ju, d, tol, max_iter):
    dim = v0.shape[0]
    m = rows.shape[0]
    v = v0.copy()
    vp = v0.copy()
    M = np.empty((d, d))
    it = 0
    aff = np.inf
    neg = np.inf
    while it < max_iter:
        it += 1
        for a in range(dim):
            e = v[a] if iu[a] == ju[a] else v[a] / _SQRT2
            M[iu[a], ju[a]] = e
            M[ju[a], iu[a]] = e
        w, V = np.linalg.eigh(M)
        neg = -w[0] if w[0] < 0.0 else 0.0
        Mp = np.zeros((d, d))
        for c in range(d):
            wc = w[c]
            if wc > 0.0:
                for a in range(d):
                    va = V[a, c] * wc
                    for bb in range(d):
                        Mp[a, bb] += va * V[bb, c]
        for a in range(d):
            for bb in range(a + 1, d):
                s = 0.5 * (Mp[a, bb] + Mp[bb, a])
                Mp[a, bb] = s
                Mp[bb, a] = s
        for a in range(dim):
            e = Mp[iu[a], ju[a]]
            vp[a] = e if iu[a] == ju[a] else e * _SQRT2
        aff = 0.0
        for r in range(m):
            acc = -b[r]
            for a in range(dim):
                acc += rows[r, a] * vp[a]
            if acc < 0.0:
                acc = -acc
            if acc > aff:
                aff = acc
        if aff <= tol and neg <= tol:
            break
        diff = vp - v0
        coef = basis.T @ diff
        v = vp - basis @ coef
    return vp, it, aff, neg
