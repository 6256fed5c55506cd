"""Analytic trace moments of the orbit measure and derived operators.

For a fixed spectrum lam, P = O D_lam O^T with Haar-random orthogonal O
defines the orbit measure; the t-th trace moment of a test matrix X is
E <P, X>^t.  Two independent evaluation paths are implemented for
t <= 3: a zonal-polynomial sum and an explicit coefficient form; they
must agree and the tests enforce it.  On top sit the first- and
second-order expectation operators E <P,X> P and E <P,X1><P,X2> P and
the trace-correcting map S that inverts the first one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import factorial

import numpy as np

from .symcore import SymMatrix, Spectrum, power_sums
from .zonal import Partition, partitions, zonal_eval_sums


def _rising(a: float, n: int) -> float:
    """Rising factorial (a)_n = a (a+1) ... (a+n-1); (a)_0 = 1."""
    out = 1.0
    for i in range(n):
        out *= a + i
    return out


def _check_t(t: int, d: int) -> None:
    if t not in (1, 2, 3):
        raise ValueError(f"trace moments support t in {{1,2,3}}, got {t}")
    if d < t:
        raise ValueError(f"degenerate dimension: need d >= t, got d={d}, t={t}")


@dataclass(frozen=True)
class MomentCoefficients:
    """Per-spectrum constants of the explicit moment formulas.

    ``s`` are the power sums of the spectrum, ``q1..q3`` the degree
    normalizers, ``alpha`` maps partitions (as tuples) to their
    coefficients, and ``a1``, ``a2`` are the constants of the first-order
    expectation identity a1 E<P,X>P = X + a2 trace(X) I.  A constant
    spectrum (all entries equal) is rejected: <P, X> is deterministic
    there and a1's denominator vanishes.
    """

    spectrum: Spectrum
    d: int = field(init=False)
    s: tuple[float, float, float] = field(init=False)
    q1: float = field(init=False)
    q2: float = field(init=False)
    q3: float = field(init=False)
    alpha: dict = field(init=False)
    a1: float = field(init=False)
    a2: float = field(init=False)

    def __post_init__(self):
        lam = self.spectrum
        d = lam.dim
        s1, s2, s3 = (float(v) for v in lam.power_sums(3))
        denom = 2.0 * d * s2 - 2.0 * s1 * s1
        if denom <= 1e-14 * max(1.0, d * s2):
            raise ValueError(
                "constant spectrum rejected: inner products with the orbit "
                "are deterministic and the expectation operator is degenerate"
            )
        alpha = {
            (1,): s1,
            (1, 1): (d + 1) * s1 * s1 - 2.0 * s2,
            (2,): -2.0 * s1 * s1 + 2.0 * d * s2,
            (1, 1, 1): (d * d + 3 * d - 2) * s1**3
            - 6.0 * (d + 2) * s1 * s2
            + 16.0 * s3,
            (2, 1): -6.0 * (d + 2) * s1**3
            + 6.0 * (d * d + 2 * d + 4) * s1 * s2
            - 24.0 * d * s3,
            (3,): 16.0 * s1**3 - 24.0 * d * s1 * s2 + 8.0 * d * d * s3,
        }
        q2 = float((d - 1) * d * (d + 2))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "s", (s1, s2, s3))
        object.__setattr__(self, "q1", float(d))
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "q3", float((d - 2) * (d - 1) * d * (d + 2) * (d + 4)))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a1", q2 / denom)
        object.__setattr__(self, "a2", alpha[(1, 1)] / alpha[(2,)])

    @staticmethod
    def from_spectrum(lam: Spectrum) -> "MomentCoefficients":
        return MomentCoefficients(lam)


def trace_moment(lam: Spectrum, t: int, X: SymMatrix) -> float:
    """E <P, X>^t via the zonal-polynomial sum.

    Sums C_pi(X) C_pi(D_lam) / C_pi(I_d) over partitions of t with at
    most d parts.
    """
    d = lam.dim
    _check_t(t, d)
    if X.dim != d:
        raise ValueError(f"dimension mismatch: {X.dim} vs {d}")
    sums_x = power_sums(X, t)
    sums_l = lam.power_sums(t)
    sums_i = np.array([float(d)] * t)
    acc = 0.0
    for pi in partitions(t, d):
        acc += (
            zonal_eval_sums(pi, sums_x)
            * zonal_eval_sums(pi, sums_l)
            / zonal_eval_sums(pi, sums_i)
        )
    return acc


def cross_moment(lam: Spectrum, Xs: list[SymMatrix]) -> float:
    """E <P,X_1> ... <P,X_t> by polarization of the trace moments.

    Equals (1/t!) sum over subsets J of {1..t} of (-1)^(t+|J|) times the
    t-th trace moment of sum_{j in J} X_j; symmetric and multilinear in
    the arguments.
    """
    t = len(Xs)
    d = lam.dim
    _check_t(t, d)
    for X in Xs:
        if X.dim != d:
            raise ValueError(f"dimension mismatch: {X.dim} vs {d}")
    if t == 1:
        return trace_moment(lam, 1, Xs[0])
    acc = 0.0
    idx = range(t)
    for size in range(1, t + 1):
        sign = (-1.0) ** (t + size)
        for subset in combinations(idx, size):
            ssum = SymMatrix(sum(Xs[j].entries for j in subset))
            acc += sign * trace_moment(lam, t, ssum)
    return acc / factorial(t)


def coefficient_moment(coeffs: MomentCoefficients, Xs: list[SymMatrix]) -> float:
    """E <P,X_1> ... <P,X_t> via the explicit coefficient form.

    Independent of the zonal path; the two must agree to 1e-10 relative
    and the test suite enforces that.
    """
    t = len(Xs)
    d = coeffs.d
    _check_t(t, d)
    for X in Xs:
        if X.dim != d:
            raise ValueError(f"dimension mismatch: {X.dim} vs {d}")
    al = coeffs.alpha
    tr = [float(np.trace(X.entries)) for X in Xs]
    if t == 1:
        return al[(1,)] * tr[0] / coeffs.q1
    if t == 2:
        m12 = float(np.tensordot(Xs[0].entries, Xs[1].entries))
        return (al[(1, 1)] * tr[0] * tr[1] + al[(2,)] * m12) / coeffs.q2
    a, b, c = (X.entries for X in Xs)
    m12 = float(np.tensordot(a, b))
    m13 = float(np.tensordot(a, c))
    m23 = float(np.tensordot(b, c))
    ab = a @ b
    m123 = float(np.tensordot(ab, c))
    m213 = float(np.tensordot(b @ a, c))
    val = (
        al[(1, 1, 1)] * tr[0] * tr[1] * tr[2]
        + (al[(2, 1)] / 3.0) * (tr[0] * m23 + tr[1] * m13 + tr[2] * m12)
        + (al[(3,)] / 2.0) * (m123 + m213)
    )
    return val / coeffs.q3


def rank1_projector_moment(k: int, d: int, t: int, norm_sq: float = 1.0) -> float:
    """E <P, xx*>^t for a 0/1 spectrum of rank k: (k/2)_t / (d/2)_t * |x|^(2t).

    Valid for every t >= 1, not just t <= 3.
    """
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if t < 1:
        raise ValueError("t must be >= 1")
    return _rising(k / 2.0, t) / _rising(d / 2.0, t) * norm_sq**t


def dirichlet_moment(d: int, beta) -> float:
    """Mixed moment E prod_i w_i^beta_i of the squared coordinates of a
    uniform unit vector (Dirichlet with parameter 1/2): product of
    (1/2)_{beta_i} over (d/2)_{|beta|}.
    """
    beta = [int(v) for v in beta]
    if any(v < 0 for v in beta):
        raise ValueError("multi-index entries must be nonnegative")
    total = sum(beta)
    if total < 1:
        raise ValueError("multi-index must have weight >= 1")
    if len(beta) > d:
        raise ValueError("multi-index longer than dimension")
    num = 1.0
    for v in beta:
        num *= _rising(0.5, v)
    return num / _rising(d / 2.0, total)


def _compositions(total: int, slots: int):
    if slots == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, slots - 1):
            yield (head,) + tail


def rank1_general_moment(d: int, t: int, eigenvalues) -> float:
    """E <P, X>^t for the rank-1 spectrum e_1 and X with given eigenvalues.

    Expands (sum_i alpha_i w_i)^t over Dirichlet moments of the squared
    coordinates w; works for every t >= 1 (the closed forms beyond t = 3
    exist only in this rank-1 case).
    """
    ev = [float(v) for v in eigenvalues]
    if len(ev) != d:
        raise ValueError(f"need {d} eigenvalues, got {len(ev)}")
    if t < 1:
        raise ValueError("t must be >= 1")
    tfac = factorial(t)
    denom = _rising(d / 2.0, t)
    acc = 0.0
    for beta in _compositions(t, d):
        coef = tfac
        mono = 1.0
        num = 1.0
        for a, bi in zip(ev, beta):
            if bi:
                coef //= factorial(bi)
                mono *= a**bi
                num *= _rising(0.5, bi)
        if mono != 0.0:
            acc += coef * mono * num
    return acc / denom


def expectation_operator(coeffs: MomentCoefficients, X: SymMatrix) -> SymMatrix:
    """E <P, X> P = (X + a2 trace(X) I) / a1; linear in X."""
    if X.dim != coeffs.d:
        raise ValueError(f"dimension mismatch: {X.dim} vs {coeffs.d}")
    tr = float(np.trace(X.entries))
    return SymMatrix((X.entries + coeffs.a2 * tr * np.eye(coeffs.d)) / coeffs.a1)


def second_order_operator(
    coeffs: MomentCoefficients, X1: SymMatrix, X2: SymMatrix
) -> SymMatrix:
    """E <P,X1> <P,X2> P, the strength-3 expectation operator.

    Symmetric bilinear form with values in the symmetric matrices:

        (1/q3) [ alpha_(1,1,1) trX1 trX2 I
                 + (alpha_(2,1)/3) (trX1 X2 + trX2 X1 + <X1,X2> I)
                 + (alpha_(3)/2) (X1 X2 + X2 X1) ]

    The product term is the symmetrized one; pairing the output with X3
    reproduces the three-argument cross moment exactly, which is the
    consistency gate the tests enforce.
    """
    d = coeffs.d
    if d < 3:
        raise ValueError("second-order operator needs d >= 3")
    if X1.dim != d or X2.dim != d:
        raise ValueError("dimension mismatch")
    al = coeffs.alpha
    a, b = X1.entries, X2.entries
    t1 = float(np.trace(a))
    t2 = float(np.trace(b))
    m12 = float(np.tensordot(a, b))
    eye = np.eye(d)
    ab = a @ b
    out = (
        al[(1, 1, 1)] * t1 * t2 * eye
        + (al[(2, 1)] / 3.0) * (t1 * b + t2 * a + m12 * eye)
        + (al[(3,)] / 2.0) * (ab + ab.T)
    ) / coeffs.q3
    return SymMatrix(out)


def s_map(coeffs: MomentCoefficients, X: SymMatrix) -> SymMatrix:
    """The trace correction S: X -> X - a2/(1 + a2 d) trace(X) I.

    Inverts a1 times the first-order expectation operator and has
    operator norm at most 1.
    """
    if X.dim != coeffs.d:
        raise ValueError(f"dimension mismatch: {X.dim} vs {coeffs.d}")
    tr = float(np.trace(X.entries))
    c = coeffs.a2 / (1.0 + coeffs.a2 * coeffs.d)
    return SymMatrix(X.entries - c * tr * np.eye(coeffs.d))


def moment_bound(k: int, d: int, t: int) -> float:
    """Upper bound (kt/d)^t on the t-th trace moment of a unit lift xx*."""
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if t < 1:
        raise ValueError("t must be >= 1")
    return (k * t / d) ** t
