"""Pure-numpy implementations of the hot kernels.

Every function here has a signature-identical twin in
``_kernels_numba``; ``_backend`` picks one set at import time.  All
inputs are plain float64 ndarrays — no wrapper types cross this
boundary.
"""

from __future__ import annotations

import numpy as np

_SQRT2 = np.sqrt(2.0)


def orthogonal_from_gaussian(g: np.ndarray) -> np.ndarray:
    """Orthogonalize a stack of Gaussian matrices, (n, d, d) -> (n, d, d).

    QR with the diagonal sign fix (columns flipped so R has positive
    diagonal), which makes the output Haar-distributed when the input
    entries are i.i.d. standard normal.
    """
    q, r = np.linalg.qr(g)
    s = np.sign(np.einsum("nii->ni", r))
    s[s == 0.0] = 1.0
    return q * s[:, None, :]


def inner_batch(ps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Hilbert–Schmidt inner products of a stack with one matrix, -> (n,)."""
    return np.einsum("nij,ij->n", ps, x)


def apply_frame(ps: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    """Weighted sum of a matrix stack: sum_j coefs[j] * ps[j]."""
    return np.tensordot(coefs, ps, axes=1)


def pairwise_inner(ps: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """All Hilbert–Schmidt inner products between two stacks, -> (n, m)."""
    n = ps.shape[0]
    m = qs.shape[0]
    return ps.reshape(n, -1) @ qs.reshape(m, -1).T


def monomial_columns(points: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Monomial evaluations points[j]**betas[r], -> (R, n).

    ``points`` is (n, d), ``betas`` is (R, d) nonnegative integers; the
    output row r holds prod_i points[j, i]**betas[r, i] over j.
    """
    n, d = points.shape
    emax = int(betas.max())
    out = np.ones((betas.shape[0], n))
    for i in range(d):
        pw = np.vander(points[:, i], emax + 1, increasing=True).T
        out *= pw[betas[:, i], :]
    return out


def ap_loop(
    rows: np.ndarray,
    b: np.ndarray,
    basis: np.ndarray,
    v0: np.ndarray,
    iu: np.ndarray,
    ju: np.ndarray,
    d: int,
    tol: float,
    max_iter: int,
):
    """Alternating projections between an affine slice and the PSD cone.

    State lives in scaled upper-triangle coordinates v (diagonal entries
    as-is, off-diagonals times sqrt(2)) so Euclidean geometry matches the
    Hilbert–Schmidt metric.  ``rows`` are constraint functionals in the
    same coordinates with targets ``b``; ``basis`` is an orthonormal
    basis of their span and ``v0`` a particular solution, so the affine
    projection of w is w - basis @ (basis.T @ (w - v0)).

    Returns ``(v_psd, iterations, affine_residual, negative_part)`` where
    ``v_psd`` encodes the last PSD iterate (exactly PSD by construction),
    ``affine_residual`` is the max constraint violation at that iterate
    and ``negative_part`` the magnitude of its most negative eigenvalue
    before clipping.
    """
    diag = iu == ju
    unpack = np.where(diag, 1.0, 1.0 / _SQRT2)
    pack = np.where(diag, 1.0, _SQRT2)
    v = v0.copy()
    M = np.empty((d, d))
    vp = v0.copy()
    it = 0
    aff = np.inf
    neg = np.inf
    while it < max_iter:
        it += 1
        e = v * unpack
        M[iu, ju] = e
        M[ju, iu] = e
        w, V = np.linalg.eigh(M)
        neg = max(0.0, -float(w[0]))
        wc = np.maximum(w, 0.0)
        Mp = (V * wc) @ V.T
        Mp = 0.5 * (Mp + Mp.T)
        vp = Mp[iu, ju] * pack
        aff = float(np.abs(rows @ vp - b).max()) if rows.shape[0] else 0.0
        if aff <= tol and neg <= tol:
            break
        v = vp - basis @ (basis.T @ (vp - v0))
    return vp, it, aff, neg
