"""Finite ensembles on the orbit manifold: sampling, verification, construction.

An ensemble is a weighted finite set of matrices from the orbit
{O D_lam O^T}; it has *strength t* when its weighted trace moments of
order up to t match the orbit measure's.  Verification compares against
the analytic moments; construction draws a random pool of orbit atoms
and solves a nonnegative least-squares moment-matching problem for the
weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import _backend
from .symcore import SymMatrix, Spectrum, hs_basis, rank1
from .moments import cross_moment, dirichlet_moment, rank1_projector_moment, trace_moment

_EXACT_TUPLE_LIMIT = 30  # max d(d+1)/2 for the tuple-basis exact check


class CubatureResidualError(RuntimeError):
    """Raised when construction cannot reach the requested residual."""

    def __init__(self, achieved: float, target: float, support: int):
        self.achieved = achieved
        self.target = target
        self.support = support
        super().__init__(
            f"cubature residual {achieved:.3e} exceeds target {target:.3e} "
            f"(support {support}); enlarge the pool"
        )


@dataclass(frozen=True)
class WeightedEnsemble:
    """Weighted atoms on the orbit of a spectrum.

    Weights are nonnegative and sum to 1 within 1e-12; every atom's
    eigenvalues match the spectrum within 1e-8.
    """

    spectrum: Spectrum
    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        w = np.asarray(self.weights, dtype=np.float64)
        if len(atoms) < 1:
            raise ValueError("ensemble needs at least one atom")
        if w.shape != (len(atoms),):
            raise ValueError("one weight per atom required")
        if np.any(w < -1e-12):
            raise ValueError("weights must be nonnegative")
        w = np.maximum(w, 0.0)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        lam = np.sort(self.spectrum.values)[::-1]
        d = self.spectrum.dim
        stack = np.empty((len(atoms), d, d))
        for j, a in enumerate(atoms):
            if not isinstance(a, SymMatrix):
                a = SymMatrix(a)
                atoms = atoms[:j] + (a,) + atoms[j + 1 :]
            if a.dim != d:
                raise ValueError("atom dimension does not match spectrum")
            ev = np.sort(np.linalg.eigvalsh(a.entries))[::-1]
            if np.abs(ev - lam).max() > 1e-8:
                raise ValueError(
                    f"atom {j} eigenvalues deviate from the spectrum by "
                    f"{np.abs(ev - lam).max():.3e}"
                )
            stack[j] = a.entries
        w = w.copy()
        w.setflags(write=False)
        stack.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_stack", stack)

    @property
    def size(self) -> int:
        return len(self.atoms)

    def stack(self) -> np.ndarray:
        """Atoms as an (n, d, d) read-only array."""
        return self._stack


@dataclass(frozen=True)
class VerificationReport:
    claimed_strength: int
    mode: str
    max_residual: float
    probes_used: int
    passed: bool


def haar_orthogonal(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n Haar orthogonal matrices, (n, d, d)."""
    g = rng.standard_normal((n, d, d))
    return _backend.orthogonal_from_gaussian(g)


def haar_batch(lam: Spectrum, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent orbit samples O D_lam O^T, (n, d, d)."""
    o = haar_orthogonal(lam.dim, n, rng)
    return np.einsum("nij,j,nkj->nik", o, lam.values, o)


def haar_sample(lam: Spectrum, rng: np.random.Generator) -> SymMatrix:
    """One orbit sample with Haar-distributed frame."""
    return SymMatrix(haar_batch(lam, 1, rng)[0])


def uniform_haar_ensemble(lam: Spectrum, n: int, rng: np.random.Generator) -> WeightedEnsemble:
    """n Haar atoms with equal weights 1/n."""
    stack = haar_batch(lam, n, rng)
    atoms = tuple(SymMatrix(stack[j]) for j in range(n))
    return WeightedEnsemble(lam, atoms, np.full(n, 1.0 / n))


def pol_dim_bounds(d: int, t: int) -> tuple[int, int]:
    """Dimension bounds for degree-t polynomials on the orbit.

    Returns ``(full_bound, diag_bound)``: the count of degree-t
    monomials in the d(d+1)/2 matrix coordinates, and the count of
    degree-2t monomials in d vector coordinates (the rank-1 case).
    """
    if d < 1 or t < 1:
        raise ValueError("d and t must be >= 1")
    big = d * (d + 1) // 2
    return comb(big + t - 1, t), comb(d + 2 * t - 1, 2 * t)


def _even_multi_indices(d: int, degree: int) -> np.ndarray:
    """All length-d nonnegative integer vectors summing to ``degree``."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + [remaining])
            return
        for head in range(remaining + 1):
            rec(prefix + [head], remaining - head, slots - 1)

    rec([], degree, d)
    return np.array(out, dtype=np.int64)


def _axes_from_rank1_atoms(stack: np.ndarray) -> np.ndarray:
    """Unit top eigenvectors of a stack of rank-1 orbit atoms, (n, d)."""
    n, d, _ = stack.shape
    out = np.empty((n, d))
    for j in range(n):
        w, v = np.linalg.eigh(stack[j])
        out[j] = v[:, -1]
    return out


def _monomial_system(d: int, taus, axes: np.ndarray):
    """Moment-matching rows over atom axes for a rank-1 spectrum.

    For each degree tau in ``taus``, one row per degree-2*tau monomial
    u^beta: the weighted ensemble must reproduce the uniform-sphere
    value (0 for any odd exponent, a Dirichlet moment otherwise).
    Returns (rows, rhs, scale) where scale[i] is the moment order of row
    i (for residual reporting in moment units).
    """
    rows = []
    rhs = []
    order = []
    for tau in taus:
        betas = _even_multi_indices(d, 2 * tau)
        cols = _backend.monomial_columns(axes, betas)
        rows.append(cols)
        for beta in betas:
            if np.any(beta % 2 == 1):
                rhs.append(0.0)
            else:
                rhs.append(dirichlet_moment(d, beta // 2))
            order.append(tau)
    return np.vstack(rows), np.array(rhs), np.array(order)


def _tuple_system(lam: Spectrum, taus, stack: np.ndarray):
    """Moment-matching rows over the orthonormal matrix basis.

    One row per size-tau multiset of basis elements; the target is the
    analytic cross moment.  Only feasible for d(d+1)/2 <= 30.
    """
    d = lam.dim
    basis = hs_basis(d)
    bstack = np.stack([bm.entries for bm in basis])
    g = _backend.pairwise_inner(bstack, stack)  # (D, n)
    rows = []
    rhs = []
    order = []
    for tau in taus:
        for combo in combinations_with_replacement(range(len(basis)), tau):
            prod = g[combo[0]].copy()
            for a in combo[1:]:
                prod = prod * g[a]
            rows.append(prod)
            rhs.append(cross_moment(lam, [basis[a] for a in combo]))
            order.append(tau)
    return np.vstack(rows), np.array(rhs), np.array(order)


def verify_strength(
    ens: WeightedEnsemble,
    t: int,
    tol: float,
    mode: str = "exact",
    n_probes: int = 200,
    rng: np.random.Generator | None = None,
) -> VerificationReport:
    """Check the strength-t moment conditions for orders 1..t.

    Exact mode compares every moment of a spanning family: for rank-1
    spectra the degree-2*tau monomials of the atom axes (any d), else
    all multisets from the orthonormal matrix basis (needs
    d(d+1)/2 <= 30).  Randomized mode compares weighted t-th powers of
    inner products against the analytic moment on random unit-Frobenius
    probes.  ``max_residual`` is the largest absolute deviation.
    """
    if t not in (1, 2, 3):
        raise ValueError(f"strength verification supports t in {{1,2,3}}, got {t}")
    lam = ens.spectrum
    d = lam.dim
    taus = range(1, t + 1)
    if mode == "exact":
        if lam.rank == 1:
            axes = _axes_from_rank1_atoms(ens.stack())
            rows, rhs, order = _monomial_system(d, taus, axes)
            lam1 = float(lam.values[0])
            scale = lam1 ** order.astype(np.float64)
        else:
            if d * (d + 1) // 2 > _EXACT_TUPLE_LIMIT:
                raise ValueError(
                    "exact tuple verification limited to d(d+1)/2 <= "
                    f"{_EXACT_TUPLE_LIMIT}; use randomized mode"
                )
            rows, rhs, order = _tuple_system(lam, taus, ens.stack())
            scale = np.ones(len(rhs))
        got = rows @ ens.weights
        resid = np.abs(got - rhs) * scale
        worst = float(resid.max())
        return VerificationReport(t, "exact", worst, len(rhs), worst <= tol)
    if mode == "randomized":
        if rng is None:
            raise ValueError("randomized mode needs an rng")
        stack = ens.stack()
        worst = 0.0
        for _ in range(n_probes):
            g = rng.standard_normal((d, d))
            x = 0.5 * (g + g.T)
            x /= np.linalg.norm(x)
            ip = _backend.inner_batch(stack, x)
            xm = SymMatrix(x)
            for tau in taus:
                got = float(np.dot(ens.weights, ip**tau))
                ref = trace_moment(lam, tau, xm)
                worst = max(worst, abs(got - ref))
        return VerificationReport(t, "randomized", worst, n_probes, worst <= tol)
    raise ValueError(f"unknown mode {mode!r}")


def verify_tight_fusion(
    ens: WeightedEnsemble,
    t: int,
    tol: float,
    n_probes: int = 200,
    rng: np.random.Generator | None = None,
) -> VerificationReport:
    """Check the moment conditions on rank-1 test matrices only.

    Compares sum_j w_j <P_j, xx*>^t against the analytic value on random
    unit vectors x.  For t <= 3 any spectrum is supported; beyond that a
    0/1 spectrum is required (closed form via the rising-factorial
    ratio).
    """
    if rng is None:
        raise ValueError("fusion verification needs an rng")
    if t < 1:
        raise ValueError("t must be >= 1")
    lam = ens.spectrum
    d = lam.dim
    zero_one = bool(np.all((lam.values == 0.0) | (np.abs(lam.values - 1.0) <= 1e-12)))
    if t > 3 and not zero_one:
        raise ValueError(
            "no analytic reference for t > 3 with a non-0/1 spectrum"
        )
    stack = ens.stack()
    worst = 0.0
    for _ in range(n_probes):
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        xx = np.outer(x, x)
        ip = _backend.inner_batch(stack, xx)
        got = float(np.dot(ens.weights, ip**t))
        if t <= 3:
            ref = trace_moment(lam, t, rank1(x))
        else:
            ref = rank1_projector_moment(lam.rank, d, t, 1.0)
        worst = max(worst, abs(got - ref))
    return VerificationReport(t, "randomized", worst, n_probes, worst <= tol)


def construct_cubature(
    lam: Spectrum,
    t: int,
    pool_size: int,
    target_residual: float,
    rng: np.random.Generator,
    prune_tol: float = 1e-10,
) -> WeightedEnsemble:
    """Build a strength-t ensemble by moment matching over a random pool.

    Draws ``pool_size`` orbit atoms, assembles the exact moment rows of
    order t plus the weight-normalization row (lower orders are linear
    consequences because <P, I> is constant on the orbit), solves for
    nonnegative weights by NNLS with unit-normalized rows, prunes
    weights below ``prune_tol`` and re-solves on the support.  The
    result is re-verified in exact mode; failure raises
    ``CubatureResidualError`` with the achieved residual.
    """
    if t not in (1, 2, 3):
        raise ValueError(f"construction supports t in {{1,2,3}}, got {t}")
    from scipy.optimize import nnls

    d = lam.dim
    rank1_case = lam.rank == 1
    if rank1_case:
        n_rows = comb(d + 2 * t - 1, 2 * t) + 1
    else:
        if d * (d + 1) // 2 > _EXACT_TUPLE_LIMIT:
            raise ValueError(
                "construction needs the exact verification path: "
                f"d(d+1)/2 <= {_EXACT_TUPLE_LIMIT} or a rank-1 spectrum"
            )
        n_rows = comb(d * (d + 1) // 2 + t - 1, t) + 1
    if pool_size < n_rows:
        raise ValueError(
            f"pool_size {pool_size} below the constraint count {n_rows}; "
            "feasibility needs at least that many atoms (about twice is safe)"
        )

    if rank1_case:
        g = rng.standard_normal((pool_size, d))
        axes = g / np.linalg.norm(g, axis=1, keepdims=True)
        lam1 = float(lam.values[0])
        stack = lam1 * np.einsum("ni,nj->nij", axes, axes)
        rows, rhs, _ = _monomial_system(d, [t], axes)
    else:
        stack = haar_batch(lam, pool_size, rng)
        rows, rhs, _ = _tuple_system(lam, [t], stack)

    rows = np.vstack([rows, np.ones((1, pool_size))])
    rhs = np.append(rhs, 1.0)
    norms = np.linalg.norm(rows, axis=1)
    rows_s = rows / norms[:, None]
    rhs_s = rhs / norms

    w, _ = nnls(rows_s, rhs_s)
    support = np.flatnonzero(w > prune_tol)
    if support.size:
        w2, _ = nnls(rows_s[:, support], rhs_s)
        total = w2.sum()
        if total > 0:
            w2 = w2 / total
    else:
        w2 = np.array([])
    if support.size == 0 or w2.sum() == 0.0:
        raise CubatureResidualError(float("inf"), target_residual, 0)

    atoms = tuple(SymMatrix(stack[j]) for j in support)
    ens = WeightedEnsemble(lam, atoms, w2)
    report = verify_strength(ens, t, target_residual, mode="exact")
    if not report.passed:
        raise CubatureResidualError(report.max_residual, target_residual, ens.size)
    return ens


def draw_iid(ens: WeightedEnsemble, n: int, rng: np.random.Generator) -> list[SymMatrix]:
    """n independent draws from the ensemble (inverse-CDF on the weights)."""
    return [ens.atoms[j] for j in _draw_indices(ens, n, rng)]


def draw_iid_stack(ens: WeightedEnsemble, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws as an (n, d, d) array."""
    return ens.stack()[_draw_indices(ens, n, rng)]


def _draw_indices(ens: WeightedEnsemble, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    cum = np.cumsum(ens.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.minimum(idx, ens.size - 1)


def save_ensemble(path, ens: WeightedEnsemble, t_claimed: int) -> None:
    """Write the text format: header ``d k t_claimed n_atoms``, then one
    line per atom with the weight followed by the upper-triangle entries
    (row-major), all at 17 significant digits."""
    d = ens.spectrum.dim
    iu, ju = np.triu_indices(d)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{d} {ens.spectrum.rank} {t_claimed} {ens.size}\n")
        for j in range(ens.size):
            vals = ens.atoms[j].entries[iu, ju]
            cells = [f"{ens.weights[j]:.17g}"] + [f"{v:.17g}" for v in vals]
            fh.write(" ".join(cells) + "\n")


def load_ensemble(path) -> tuple[WeightedEnsemble, int]:
    """Read the text format back; returns (ensemble, t_claimed).

    The header stores only d and k, so the spectrum is reconstructed
    from the first atom's eigenvalues (top k, clipped into [0, 1]); all
    atoms agree with it to 1e-8 by the ensemble invariant.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError("bad header: expected 'd k t_claimed n_atoms'")
        d, k, t_claimed, n = (int(v) for v in header)
        iu, ju = np.triu_indices(d)
        weights = np.empty(n)
        mats = []
        for j in range(n):
            parts = fh.readline().split()
            if len(parts) != 1 + iu.size:
                raise ValueError(f"bad atom line {j}: expected {1 + iu.size} fields")
            weights[j] = float(parts[0])
            m = np.empty((d, d))
            vals = np.array([float(v) for v in parts[1:]])
            m[iu, ju] = vals
            m[ju, iu] = vals
            mats.append(SymMatrix(m))
    ev = np.sort(np.linalg.eigvalsh(mats[0].entries))[::-1]
    vals = np.zeros(d)
    vals[:k] = np.clip(ev[:k], 0.0, 1.0)
    lam = Spectrum(vals)
    return WeightedEnsemble(lam, tuple(mats), weights), t_claimed
