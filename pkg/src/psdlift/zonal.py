"""Partitions and explicit zonal polynomial evaluation for degrees 1..3.

Zonal polynomials C_pi are the orthogonally invariant homogeneous
polynomials indexed by partitions pi; closed forms in the power sums
s_i = trace(X^i) exist for |pi| <= 3 and those are the only degrees the
moment calculus needs.  The family satisfies the summation identity
sum_pi C_pi(X) = trace(X)^t over partitions of t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .symcore import SymMatrix, power_sums


@dataclass(frozen=True)
class Partition:
    """Nonincreasing positive integer parts; ``weight`` is their sum."""

    parts: tuple[int, ...]
    weight: int = field(init=False)

    def __post_init__(self):
        p = tuple(int(v) for v in self.parts)
        if len(p) == 0:
            raise ValueError("partition needs at least one part")
        if any(v < 1 for v in p):
            raise ValueError("parts must be positive integers")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError("parts must be nonincreasing")
        object.__setattr__(self, "parts", p)
        object.__setattr__(self, "weight", sum(p))


def partitions(t: int, max_parts: int) -> list[Partition]:
    """All partitions of t with at most ``max_parts`` parts.

    Ordered lexicographically decreasing, e.g. (3) > (2,1) > (1,1,1),
    so downstream sums are deterministic.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if max_parts < 1:
        raise ValueError("max_parts must be >= 1")

    def rec(remaining: int, cap: int, room: int) -> list[tuple[int, ...]]:
        if remaining == 0:
            return [()]
        if room == 0:
            return []
        out = []
        for head in range(min(cap, remaining), 0, -1):
            for tail in rec(remaining - head, head, room - 1):
                out.append((head,) + tail)
        return out

    return [Partition(p) for p in rec(t, t, max_parts)]


def _eval_from_sums(parts: tuple[int, ...], s1: float, s2: float, s3: float) -> float:
    """Closed forms of C_pi in the power sums, |pi| <= 3."""
    if parts == (1,):
        return s1
    if parts == (2,):
        return (s1 * s1 + 2.0 * s2) / 3.0
    if parts == (1, 1):
        return (2.0 / 3.0) * (s1 * s1 - s2)
    if parts == (3,):
        return (s1**3 + 6.0 * s1 * s2 + 8.0 * s3) / 15.0
    if parts == (2, 1):
        return (3.0 / 5.0) * (s1**3 + s1 * s2 - 2.0 * s3)
    if parts == (1, 1, 1):
        return (s1**3 - 3.0 * s1 * s2 + 2.0 * s3) / 3.0
    raise ValueError(
        f"no closed form for partition {parts}: only weights 1..3 are supported"
    )


def zonal_eval_sums(pi: Partition, sums) -> float:
    """Evaluate C_pi from precomputed power sums (s_1, s_2, s_3, ...).

    Only the first ``pi.weight`` entries are read; pass at least that
    many.
    """
    if pi.weight > 3:
        raise ValueError(f"unsupported degree {pi.weight}: closed forms stop at 3")
    if len(sums) < pi.weight:
        raise ValueError(f"need {pi.weight} power sums, got {len(sums)}")
    s1 = float(sums[0])
    s2 = float(sums[1]) if len(sums) > 1 else 0.0
    s3 = float(sums[2]) if len(sums) > 2 else 0.0
    return _eval_from_sums(pi.parts, s1, s2, s3)


def zonal_eval(pi: Partition, X: SymMatrix) -> float:
    """Evaluate the zonal polynomial C_pi at a symmetric matrix."""
    if pi.weight > 3:
        raise ValueError(f"unsupported degree {pi.weight}: closed forms stop at 3")
    return zonal_eval_sums(pi, power_sums(X, pi.weight))
