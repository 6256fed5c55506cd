"""Recovery of rank-1 lifts from linear measurements and dual certificates.

A measurement set holds matrices P_j and values b_j = <xx*, P_j>
together with the trace value <xx*, I>.  Recovery solves the convex
feasibility problem {X PSD, <X, P_j> = b_j, trace X = trace value} by
alternating projections.  The certificate machinery measures when the
recovered point is provably the unique feasible one: a (gamma, delta)
certificate Y in the measurement span with tangent part near xx* and
small off-tangent operator norm, combined with two-sided isometry
constants of the measurement map on and off the tangent space.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log
from typing import NamedTuple, Union

import numpy as np

from . import _backend
from .symcore import (
    SymMatrix,
    Spectrum,
    TangentAnchor,
    fro_norm,
    hs_basis,
    operator_norm,
    spectral_decompose,
    tangent_basis,
    tangent_decompose,
    tangent_project,
)
from .moments import MomentCoefficients, s_map
from .cubature import WeightedEnsemble, draw_iid_stack, haar_batch


class InfeasibleError(RuntimeError):
    """The affine constraints admit no common point."""


class GolfingStageError(RuntimeError):
    """A golfing stage exhausted its retry budget."""

    def __init__(self, stage: int, attempts: int, off_tangent: float, tangent_gap: float):
        self.stage = stage
        self.attempts = attempts
        self.off_tangent = off_tangent
        self.tangent_gap = tangent_gap
        super().__init__(
            f"stage {stage} failed {attempts} attempts "
            f"(last off-tangent {off_tangent:.3e}, tangent gap {tangent_gap:.3e}); "
            "increase batch_size or max_repeats"
        )


@dataclass(frozen=True)
class MeasurementSet:
    """Matrices P_1..P_n with values b_j and the trace constraint.

    ``trace_value`` plays the role of the index-0 measurement against
    the identity.
    """

    matrices: tuple
    values: np.ndarray
    trace_value: float

    def __post_init__(self):
        mats = tuple(
            m if isinstance(m, SymMatrix) else SymMatrix(m) for m in self.matrices
        )
        vals = np.asarray(self.values, dtype=np.float64)
        if len(mats) < 1:
            raise ValueError("need at least one measurement matrix")
        if vals.shape != (len(mats),):
            raise ValueError("one value per matrix required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        d = mats[0].dim
        for m in mats:
            if m.dim != d:
                raise ValueError("measurement dimensions must agree")
        if self.trace_value < 0.0:
            raise ValueError("trace value must be nonnegative")
        object.__setattr__(self, "matrices", mats)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.matrices[0].dim

    @property
    def size(self) -> int:
        return len(self.matrices)

    def stack(self) -> np.ndarray:
        return np.stack([m.entries for m in self.matrices])


@dataclass(frozen=True)
class RecoveryResult:
    X_hat: SymMatrix
    converged: bool
    iterations: int
    feasibility_residual: float
    spectral_gap: float
    extracted_x: np.ndarray


@dataclass(frozen=True)
class CertificateReport:
    Y: SymMatrix
    gamma_measured: float
    delta_measured: float
    in_span: bool
    batches_used: int
    repeats: tuple
    q_norms: tuple
    atoms: np.ndarray


class IsometryConstants(NamedTuple):
    alpha: float
    beta_bound: float
    beta_exact: float


class CertificateCheck(NamedTuple):
    passes: bool
    gamma_measured: float
    delta_measured: float
    in_span: bool


def measure(x: np.ndarray, Ps) -> MeasurementSet:
    """Measurement values <xx*, P_j> = x^T P_j x plus the trace value."""
    x = np.asarray(x, dtype=np.float64)
    mats = tuple(m if isinstance(m, SymMatrix) else SymMatrix(m) for m in Ps)
    vals = np.array([float(x @ (m.entries @ x)) for m in mats])
    return MeasurementSet(mats, vals, float(x @ x))


def _vech_rows(stack: np.ndarray, iu, ju, pack):
    """Constraint rows in scaled upper-triangle coordinates."""
    return stack[:, iu, ju] * pack


def solve_feasibility(
    m: MeasurementSet, tol: float = 1e-7, max_iter: int = 20000
) -> RecoveryResult:
    """Alternating projections between the constraint slice and the PSD cone.

    The affine projection uses an orthonormal basis of the constraint
    span (precomputed once by SVD); the cone projection clips negative
    eigenvalues.  The returned matrix is the last cone iterate, so it is
    PSD by construction, and ``feasibility_residual`` is its largest
    constraint violation (trace row included).  ``converged`` means both
    that residual and the pre-clip negative part fell below ``tol``.
    Inconsistent constraints raise ``InfeasibleError``; plain
    non-convergence does not.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    d = m.dim
    iu, ju = (a.astype(np.int64) for a in np.triu_indices(d))
    pack = np.where(iu == ju, 1.0, np.sqrt(2.0))
    stack = m.stack()
    rows = np.vstack([_vech_rows(stack, iu, ju, pack), _vech_rows(np.eye(d)[None], iu, ju, pack)])
    b = np.append(m.values, m.trace_value)

    scale = max(1.0, float(np.abs(b).max()))
    if m.trace_value == 0.0:
        # PSD with zero trace forces the zero matrix.
        if np.abs(m.values).max() > 1e-12 * scale:
            raise InfeasibleError("zero trace with nonzero measurement values")
        zero = SymMatrix(np.zeros((d, d)))
        return RecoveryResult(zero, True, 0, 0.0, 0.0, np.zeros(d))

    v0, _, _, _ = np.linalg.lstsq(rows, b, rcond=None)
    gap = float(np.abs(rows @ v0 - b).max())
    if gap > 1e-8 * scale:
        raise InfeasibleError(
            f"constraints are inconsistent: best affine fit misses by {gap:.3e}"
        )
    u_svd, sv, vt = np.linalg.svd(rows, full_matrices=False)
    cut = sv > sv[0] * max(rows.shape) * np.finfo(np.float64).eps if sv.size else sv
    basis = vt[cut].T.copy()

    vp, iters, aff, neg = _backend.ap_loop(
        np.ascontiguousarray(rows),
        np.ascontiguousarray(b),
        np.ascontiguousarray(basis),
        np.ascontiguousarray(v0),
        iu,
        ju,
        d,
        float(tol),
        int(max_iter),
    )
    M = np.zeros((d, d))
    e = vp / pack
    M[iu, ju] = e
    M[ju, iu] = e
    X_hat = SymMatrix(M)
    w, V = spectral_decompose(X_hat)
    gap01 = float(w[0] - w[1]) if d > 1 else float(w[0])
    top = max(w[0], 0.0)
    extracted = V[:, 0] * np.sqrt(top)
    converged = aff <= tol and neg <= tol
    return RecoveryResult(X_hat, converged, int(iters), float(aff), gap01, extracted)


def isometry_constants(Ps, x: np.ndarray) -> IsometryConstants:
    """Two-sided frame constants of the normalized measurement map.

    ``alpha`` is the smallest eigenvalue of the tangent-space Gram form
    M_ab = (1/n) sum_j <B_a, P_j> <B_b, P_j> over an orthonormal tangent
    basis at x; ``beta_exact`` is the largest eigenvalue of the
    full-space analogue; ``beta_bound`` is the rank of the measurement
    matrices (the a-priori upper bound; beta_exact never exceeds it for
    orbit atoms).
    """
    anchor = TangentAnchor(x)
    stack = Ps.stack() if isinstance(Ps, MeasurementSet) else _as_stack(Ps)
    n = stack.shape[0]
    d = stack.shape[1]
    tb = np.stack([bm.entries for bm in tangent_basis(anchor)])
    g_t = _backend.pairwise_inner(tb, stack)
    m_t = (g_t @ g_t.T) / n
    alpha = float(np.linalg.eigvalsh(m_t)[0])
    fb = np.stack([bm.entries for bm in hs_basis(d)])
    g_f = _backend.pairwise_inner(fb, stack)
    m_f = (g_f @ g_f.T) / n
    beta_exact = float(np.linalg.eigvalsh(m_f)[-1])
    ev = np.linalg.eigvalsh(stack[0])
    beta_bound = float((ev > 1e-8 * max(1.0, abs(ev[-1]))).sum())
    return IsometryConstants(alpha, beta_bound, beta_exact)


def deterministic_guarantee(alpha: float, beta: float, gamma: float, delta: float):
    """Strict verdict sqrt(beta/alpha) < (1 - delta)/gamma.

    When it holds alongside a valid certificate, the feasible point is
    unique and recovery is exact.  Returns False when alpha <= 0 (lower
    isometry fails) or delta >= 1; a zero gamma passes whenever those
    two are fine.
    """
    if alpha <= 0.0:
        return False
    if delta >= 1.0 or delta < 0.0:
        return False
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    if gamma == 0.0:
        return True
    return bool(np.sqrt(beta / alpha) < (1.0 - delta) / gamma)


def _as_stack(Ps) -> np.ndarray:
    if isinstance(Ps, np.ndarray) and Ps.ndim == 3:
        return Ps
    return np.stack([p.entries if isinstance(p, SymMatrix) else np.asarray(p) for p in Ps])


def r_operator(Ps, coeffs: MomentCoefficients, X: SymMatrix) -> SymMatrix:
    """Sampled frame operator (a1/n) sum_j <X, P_j> P_j.

    Its expectation over orbit draws is X + a2 trace(X) I.
    """
    stack = _as_stack(Ps)
    n = stack.shape[0]
    c = _backend.inner_batch(stack, X.entries)
    out = _backend.apply_frame(stack, c) * (coeffs.a1 / n)
    return SymMatrix(out)


def truncated_r(
    Ps,
    coeffs: MomentCoefficients,
    anchor: TangentAnchor,
    Z: SymMatrix,
    s: float,
    t: int,
    r_rate: float,
    X: SymMatrix,
) -> SymMatrix:
    """The frame operator restricted to atoms with small inner products.

    Keeps index j only when <P_j, uu*> and <P_j, zz*> both fall at or
    below (s+1) t k d^(-r_rate), where u is the normalized anchor and z
    the unit direction of the tangent matrix Z; the normalization still
    divides by the full batch size.
    """
    if not 0.0 < r_rate <= 1.0:
        raise ValueError("truncation rate must lie in (0, 1]")
    stack = _as_stack(Ps)
    n = stack.shape[0]
    d = coeffs.d
    k = coeffs.spectrum.rank
    threshold = (s + 1.0) * t * k * d ** (-r_rate)
    u = anchor.unit_x
    _, z = tangent_decompose(anchor, Z)
    ip_u = _backend.inner_batch(stack, np.outer(u, u))
    ip_z = _backend.inner_batch(stack, np.outer(z, z))
    keep = (ip_u <= threshold) & (ip_z <= threshold)
    c = _backend.inner_batch(stack, X.entries) * keep
    out = _backend.apply_frame(stack, c) * (coeffs.a1 / n)
    return SymMatrix(out)


@dataclass(frozen=True)
class GolfingParams:
    """Knobs of the staged certificate construction.

    ``c0`` sets the per-stage targets A = 1/c0 (off-tangent) and
    B = sqrt(2)/c0 (tangent contraction); ``s`` the truncation level
    (defaults to c0); ``r_rate`` the truncation rate (defaults to
    1 - 2/t with t = 3); ``batch_size`` the atoms per stage (defaults to
    ceil(batch_mult * 3 t d^(2 - r) log d)); ``max_repeats`` the redraw
    budget per stage.
    """

    c0: float = 10.0
    s: float | None = None
    r_rate: float | None = None
    batch_size: int | None = None
    batch_mult: float = 1.0
    max_repeats: int = 50

    def resolved(self, d: int, t: int = 3):
        if self.c0 <= np.sqrt(2.0):
            raise ValueError("c0 must exceed sqrt(2) so the contraction factor is < 1")
        s = self.c0 if self.s is None else self.s
        r_rate = (1.0 - 2.0 / t) if self.r_rate is None else self.r_rate
        if self.batch_size is None:
            batch = ceil(self.batch_mult * 3.0 * t * d ** (2.0 - r_rate) * log(d))
        else:
            batch = int(self.batch_size)
        if batch < 1:
            raise ValueError("batch_size must be >= 1")
        return s, r_rate, batch


EnsembleSource = Union[WeightedEnsemble, Spectrum]


def golfing_depth(d: int, c0: float) -> int:
    """Stage count ceil(log_{1/B} d) + 2 with B = sqrt(2)/c0."""
    B = np.sqrt(2.0) / c0
    if B >= 1.0:
        raise ValueError("c0 must exceed sqrt(2)")
    return ceil(log(d) / log(1.0 / B)) + 2


def golfing_certificate(
    x: np.ndarray,
    source: EnsembleSource,
    params: GolfingParams,
    rng: np.random.Generator,
) -> CertificateReport:
    """Build a dual certificate by staged batches with geometric decay.

    Stage i draws a batch, applies the trace-corrected truncated frame
    operator to the current tangent residual Q_{i-1}, and accepts when
    the off-tangent part is at most A |Q| in operator norm and the
    tangent part reproduces Q within B |Q| in Frobenius norm (these are
    the two contraction events; acceptance forces |Q_i| <= B |Q_{i-1}|).
    Rejected batches are redrawn up to ``max_repeats`` times.  The
    certificate accumulates the accepted updates, scaled at the end so
    its tangent part approximates xx* rather than the unit lift.

    ``source`` may be a finite ensemble (atoms drawn i.i.d. by weight)
    or a bare spectrum (atoms drawn from the orbit measure directly).
    The report carries every accepted atom, the per-stage retry counts
    and the residual norms |Q_0|, |Q_1|, ....
    """
    anchor = TangentAnchor(x)
    if isinstance(source, WeightedEnsemble):
        lam = source.spectrum
    else:
        lam = source
    d = lam.dim
    if anchor.dim != d:
        raise ValueError("anchor dimension does not match the atom source")
    coeffs = MomentCoefficients.from_spectrum(lam)
    t = 3
    s, r_rate, batch = params.resolved(d, t)
    A = 1.0 / params.c0
    B = np.sqrt(2.0) / params.c0
    depth = golfing_depth(d, params.c0)

    u = anchor.unit_x
    target = SymMatrix(np.outer(u, u))
    Y = np.zeros((d, d))
    Q = target
    q_norms = [fro_norm(Q)]
    repeats = []
    used = []
    for stage in range(depth):
        attempts = 0
        off_t = tan_gap = float("inf")
        while True:
            attempts += 1
            if attempts > params.max_repeats:
                raise GolfingStageError(stage, attempts - 1, off_t, tan_gap)
            if isinstance(source, WeightedEnsemble):
                batch_stack = draw_iid_stack(source, batch, rng)
            else:
                batch_stack = haar_batch(lam, batch, rng)
            W = s_map(
                coeffs,
                truncated_r(batch_stack, coeffs, anchor, Q, s, t, r_rate, Q),
            )
            w_tan = tangent_project(anchor, W)
            qn = q_norms[-1]
            off_t = operator_norm(SymMatrix(W.entries - w_tan.entries))
            tan_gap = fro_norm(SymMatrix(w_tan.entries - Q.entries))
            if off_t <= A * qn and tan_gap <= B * qn:
                break
        Y = Y + W.entries
        Q = SymMatrix(Q.entries - w_tan.entries)
        q_norms.append(fro_norm(Q))
        repeats.append(attempts - 1)
        used.append(batch_stack)

    atoms = np.concatenate(used, axis=0)
    Y_final = SymMatrix(anchor.norm_sq * Y)
    xx = SymMatrix(np.outer(anchor.x, anchor.x))
    y_tan = tangent_project(anchor, Y_final)
    gamma = fro_norm(SymMatrix(y_tan.entries - xx.entries))
    delta = operator_norm(SymMatrix(Y_final.entries - y_tan.entries))
    in_span = _span_residual(Y_final, atoms) <= 1e-8 * max(1.0, fro_norm(Y_final))
    return CertificateReport(
        Y_final,
        gamma,
        delta,
        bool(in_span),
        depth,
        tuple(repeats),
        tuple(q_norms),
        atoms,
    )


def _span_residual(Y: SymMatrix, stack: np.ndarray) -> float:
    """Distance from Y to span{I, P_1, ..., P_n} in Frobenius norm."""
    d = Y.dim
    iu, ju = np.triu_indices(d)
    pack = np.where(iu == ju, 1.0, np.sqrt(2.0))
    cols = np.vstack([_vech_rows(np.eye(d)[None], iu, ju, pack), _vech_rows(stack, iu, ju, pack)]).T
    y = Y.entries[iu, ju] * pack
    coef, _, _, _ = np.linalg.lstsq(cols, y, rcond=None)
    return float(np.linalg.norm(cols @ coef - y))


def check_certificate(
    Y: SymMatrix, x: np.ndarray, Ps, gamma: float, delta: float
) -> CertificateCheck:
    """Measure a candidate certificate against (gamma, delta) targets.

    Returns the measured tangent gap |Y_T - xx*|_F, off-tangent operator
    norm, and whether Y lies in span{I, P_j} within 1e-8; ``passes``
    requires all three.
    """
    anchor = TangentAnchor(x)
    xx = SymMatrix(np.outer(anchor.x, anchor.x))
    y_tan = tangent_project(anchor, Y)
    gm = fro_norm(SymMatrix(y_tan.entries - xx.entries))
    dm = operator_norm(SymMatrix(Y.entries - y_tan.entries))
    stack = Ps.stack() if isinstance(Ps, MeasurementSet) else _as_stack(Ps)
    in_span = _span_residual(Y, stack) <= 1e-8 * max(1.0, fro_norm(Y))
    return CertificateCheck(
        bool(gm <= gamma and dm <= delta and in_span), gm, dm, bool(in_span)
    )


def save_measurements(path, m: MeasurementSet) -> None:
    """Text format mirroring the ensemble file with a value column:
    header ``d n trace_value``, then per line the value b_j followed by
    the upper-triangle entries of P_j at 17 significant digits."""
    d = m.dim
    iu, ju = np.triu_indices(d)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{d} {m.size} {m.trace_value:.17g}\n")
        for j in range(m.size):
            vals = m.matrices[j].entries[iu, ju]
            cells = [f"{m.values[j]:.17g}"] + [f"{v:.17g}" for v in vals]
            fh.write(" ".join(cells) + "\n")


def load_measurements(path) -> MeasurementSet:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError("bad header: expected 'd n trace_value'")
        d, n = int(header[0]), int(header[1])
        trace_value = float(header[2])
        iu, ju = np.triu_indices(d)
        vals = np.empty(n)
        mats = []
        for j in range(n):
            parts = fh.readline().split()
            if len(parts) != 1 + iu.size:
                raise ValueError(f"bad line {j}: expected {1 + iu.size} fields")
            vals[j] = float(parts[0])
            mm = np.empty((d, d))
            entries = np.array([float(v) for v in parts[1:]])
            mm[iu, ju] = entries
            mm[ju, iu] = entries
            mats.append(SymMatrix(mm))
    return MeasurementSet(tuple(mats), vals, trace_value)
