"""Optimized Lyapunov sparsity for a fixed factor pattern T.

:func:`optimize_R` computes in O(m n^2) the entrywise-largest symmetric
closed pattern ``R`` with ``T closure(R) <= T``. Its graph has the fewest
connected components among all admissible patterns, i.e. it forces the
least separability on the closed-loop Lyapunov function.
:func:`verify_optimality` cross-checks this against exhaustive enumeration
of set partitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .sparsity import (
    Partition,
    PatternError,
    SparsityPattern,
    closure,
    connected_components,
    leq,
)

DEFAULT_N_LIMIT = 8


def optimize_R(T: SparsityPattern) -> SparsityPattern:
    t = T.bits
    # forbidden[j, k]: some row i has T_ij = 1 and T_ik = 0
    forbidden = (t[:, :, None] & ~t[:, None, :]).any(axis=0)
    R_T = ~forbidden
    return SparsityPattern(R_T & R_T.T)


def is_feasible_R(T: SparsityPattern, R: SparsityPattern) -> bool:
    """True iff R is symmetric, ``R >= I`` and ``T closure(R) <= T``."""
    n = T.cols
    if R.shape != (n, n):
        raise PatternError(f"R must be {n}x{n}, got {R.shape}")
    if not (R.is_symmetric() and R.has_unit_diagonal()):
        return False
    return leq(T @ closure(R), T)


def set_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted-growth strings of length n in lexicographic order.

    ``a[0] = 0`` and ``a[i] <= 1 + max(a[:i])``; each string is one set
    partition of ``range(n)`` with ``a[i]`` the block of element ``i``.
    """
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield tuple(a)
            return
        for v in range(top + 2):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def enumerate_feasible_R(T: SparsityPattern, n_limit: int = DEFAULT_N_LIMIT) -> list[SparsityPattern]:
    """All closed patterns (one per set partition) feasible for T."""
    n = T.cols
    if n > n_limit:
        raise PatternError(f"n = {n} exceeds enumeration limit {n_limit}")
    out = []
    for rgs in set_partitions(n):
        R = Partition.from_labels(rgs).to_pattern()
        if is_feasible_R(T, R):
            out.append(R)
    return out


@dataclass(frozen=True)
class OptimalityReport:
    matches_oracle: bool
    r_star: int
    r_min_oracle: int
    in_feasible_set: bool
    dominates_all: bool
    n_feasible: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_optimality(T: SparsityPattern, n_limit: int = DEFAULT_N_LIMIT) -> OptimalityReport:
    feasible = enumerate_feasible_R(T, n_limit)
    R_star = optimize_R(T)
    in_set = R_star in feasible
    dominates = all(leq(R, R_star) for R in feasible)
    r_star = connected_components(R_star).r
    r_min = min(connected_components(R).r for R in feasible)
    return OptimalityReport(
        matches_oracle=in_set and dominates and r_star == r_min,
        r_star=r_star,
        r_min_oracle=r_min,
        in_feasible_set=in_set,
        dominates_all=dominates,
        n_feasible=len(feasible),
    )

