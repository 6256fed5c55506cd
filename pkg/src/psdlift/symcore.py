"""Symmetric-matrix algebra and the tangent geometry of rank-1 matrices.

The ambient space is the d x d real symmetric matrices with the
Hilbert–Schmidt inner product <X, Y> = trace(XY).  A ``Spectrum`` fixes
the eigenvalue vector of the measurement matrices; a ``TangentAnchor``
fixes the signal x whose lift xx* is to be recovered and carries the
tangent space T_x = {xz^T + zx^T : z}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_ASYM_RTOL = 1e-10


@dataclass(frozen=True)
class SymMatrix:
    """Element of the symmetric-matrix space.

    The constructor symmetrizes float noise via (X + X^T)/2 but rejects
    inputs whose asymmetry exceeds ``1e-10`` relative to the largest
    entry; the stored array is read-only.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        gap = np.abs(a - a.T).max()
        scale = max(1.0, np.abs(a).max())
        if gap > _ASYM_RTOL * scale:
            raise ValueError(
                f"input is not symmetric: max asymmetry {gap:.3e} "
                f"exceeds {_ASYM_RTOL} * {scale:.3e}"
            )
        sym = 0.5 * (a + a.T)
        sym.setflags(write=False)
        object.__setattr__(self, "entries", sym)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def identity(d: int) -> SymMatrix:
    """The d x d identity."""
    return SymMatrix(np.eye(d))


def rank1(x: np.ndarray) -> SymMatrix:
    """The lift xx^T of a vector."""
    x = np.asarray(x, dtype=np.float64)
    return SymMatrix(np.outer(x, x))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue vector of the measurement manifold.

    ``values`` must satisfy 1 >= lam_1 >= ... >= lam_k > 0 with exact
    zeros afterwards; ``rank`` is k.
    """

    values: np.ndarray
    rank: int = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] < 1:
            raise ValueError("spectrum must be a nonempty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum entries must be finite")
        if np.any(np.diff(v) > 1e-14):
            raise ValueError("spectrum must be nonincreasing")
        if v[0] > 1.0 + 1e-12:
            raise ValueError("leading eigenvalue must be <= 1")
        pos = v > 0.0
        k = int(pos.sum())
        if k < 1:
            raise ValueError("spectrum needs at least one positive entry")
        if np.any(v[~pos] != 0.0):
            raise ValueError("entries after the positive block must be exactly 0")
        if np.any(~pos[:k]):
            raise ValueError("positive entries must come first")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rank", k)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def diagonal(self) -> SymMatrix:
        """D_lam = diag(values)."""
        return SymMatrix(np.diag(self.values))

    def power_sums(self, t_max: int) -> np.ndarray:
        """(s_1, ..., s_t_max) with s_i = sum(values**i)."""
        return np.array([np.sum(self.values**i) for i in range(1, t_max + 1)])

    @staticmethod
    def projector(d: int, k: int) -> "Spectrum":
        """The 0/1 spectrum with k leading ones."""
        v = np.zeros(d)
        v[:k] = 1.0
        return Spectrum(v)


@dataclass(frozen=True)
class TangentAnchor:
    """A nonzero vector x with cached unit direction and squared norm."""

    x: np.ndarray
    unit_x: np.ndarray = field(init=False)
    norm_sq: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] < 1:
            raise ValueError("anchor must be a nonempty 1-D vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("anchor entries must be finite")
        nsq = float(x @ x)
        if nsq <= 0.0:
            raise ValueError("anchor must be nonzero")
        x = x.copy()
        x.setflags(write=False)
        u = x / np.sqrt(nsq)
        u.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "unit_x", u)
        object.__setattr__(self, "norm_sq", nsq)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def hs_inner(X: SymMatrix, Y: SymMatrix) -> float:
    """Hilbert–Schmidt inner product trace(XY)."""
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    return float(np.tensordot(X.entries, Y.entries))


def fro_norm(X: SymMatrix) -> float:
    """Frobenius norm, the norm of ``hs_inner``."""
    return float(np.linalg.norm(X.entries))


def spectral_decompose(X: SymMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (nonincreasing) and matching orthonormal eigenvectors.

    Satisfies X = V diag(vals) V^T to 1e-10 relative; raises instead of
    returning NaNs if the iteration fails.
    """
    try:
        w, V = np.linalg.eigh(X.entries)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise RuntimeError("eigendecomposition produced non-finite values")
    return w[::-1].copy(), V[:, ::-1].copy()


def psd_project(X: SymMatrix) -> SymMatrix:
    """Frobenius-nearest positive-semidefinite matrix (negative eigenvalues clipped)."""
    w, V = spectral_decompose(X)
    wc = np.maximum(w, 0.0)
    return SymMatrix((V * wc) @ V.T)


def power_sums(X: SymMatrix, t_max: int) -> np.ndarray:
    """(trace(X), trace(X^2), ..., trace(X^t_max)) via eigenvalues."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    w, _ = spectral_decompose(X)
    return np.array([np.sum(w**i) for i in range(1, t_max + 1)])


def tangent_project(anchor: TangentAnchor, X: SymMatrix) -> SymMatrix:
    """Orthogonal projection onto T_x = {xz^T + zx^T}.

    With P the unit projector onto the anchor line, this is
    PX + XP - <X, P> P; it is idempotent and self-adjoint.
    """
    if anchor.dim != X.dim:
        raise ValueError(f"dimension mismatch: {anchor.dim} vs {X.dim}")
    u = anchor.unit_x
    Xu = X.entries @ u
    quad = float(u @ Xu)
    out = np.outer(u, Xu) + np.outer(Xu, u) - quad * np.outer(u, u)
    return SymMatrix(out)


def tangent_complement(anchor: TangentAnchor, X: SymMatrix) -> SymMatrix:
    """X minus its tangent part."""
    return SymMatrix(X.entries - tangent_project(anchor, X).entries)


def tangent_decompose(anchor: TangentAnchor, Z: SymMatrix) -> tuple[float, np.ndarray]:
    """Write a tangent matrix as Z = q (z x^T + x z^T) with unit z, q >= 0.

    Uses the normalized anchor u: w = Zu - (u^T Z u / 2) u recovers q z
    exactly for Z in the tangent space.  Raises if Z is zero or lies
    outside the tangent space by more than 1e-8 relative.
    """
    if anchor.dim != Z.dim:
        raise ValueError(f"dimension mismatch: {anchor.dim} vs {Z.dim}")
    znorm = fro_norm(Z)
    if znorm == 0.0:
        raise ValueError("cannot decompose the zero matrix")
    gap = fro_norm(SymMatrix(Z.entries - tangent_project(anchor, Z).entries))
    if gap > 1e-8 * znorm:
        raise ValueError(
            f"matrix is not tangent: off-tangent part {gap:.3e} "
            f"exceeds 1e-08 * {znorm:.3e}"
        )
    u = anchor.unit_x
    Zu = Z.entries @ u
    w = Zu - 0.5 * float(u @ Zu) * u
    q = float(np.linalg.norm(w))
    if q == 0.0:
        raise ValueError("degenerate tangent matrix (zero direction)")
    return q, w / q


def operator_norm(X: SymMatrix) -> float:
    """Largest eigenvalue magnitude."""
    w, _ = spectral_decompose(X)
    return float(max(abs(w[0]), abs(w[-1])))


def hs_basis(d: int) -> list[SymMatrix]:
    """Orthonormal basis of the symmetric matrices: E_ii, (E_ij + E_ji)/sqrt(2)."""
    out = []
    for i in range(d):
        m = np.zeros((d, d))
        m[i, i] = 1.0
        out.append(SymMatrix(m))
    isq2 = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d))
            m[i, j] = isq2
            m[j, i] = isq2
            out.append(SymMatrix(m))
    return out


def tangent_basis(anchor: TangentAnchor) -> list[SymMatrix]:
    """Orthonormal basis of T_x: uu^T and (u z_i^T + z_i u^T)/sqrt(2).

    The z_i complete the unit anchor to an orthonormal basis of R^d, so
    the list has length d = dim(T_x).
    """
    u = anchor.unit_x
    d = anchor.dim
    # Householder reflector sending e_1 to -sign(u_0) u: its trailing
    # columns are an orthonormal completion of u, with no degenerate case.
    s0 = 1.0 if u[0] >= 0.0 else -1.0
    v = u.copy()
    v[0] += s0
    H = np.eye(d) - (2.0 / (v @ v)) * np.outer(v, v)
    out = [SymMatrix(np.outer(u, u))]
    isq2 = 1.0 / np.sqrt(2.0)
    for i in range(1, d):
        z = H[:, i]
        out.append(SymMatrix(isq2 * (np.outer(u, z) + np.outer(z, u))))
    return out
