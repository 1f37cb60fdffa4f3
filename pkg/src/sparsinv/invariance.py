"""Sparsity invariance of a factor pair (S, T, R).

For a controller pattern ``S`` (m x n), a factor pattern ``T`` (m x n) and a
symmetric ``R >= I_n``, every ``Y`` in Sparse(T) and invertible ``X`` in
Sparse(R) give ``Y X^-1`` in Sparse(S) exactly when ``T <= S`` and
``T closure(R) <= S``. :func:`check` decides this combinatorially;
:func:`counterexample` and :func:`numeric_probe` are the numerical sides of
the equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sparsity import PatternError, SparsityPattern, closure, leq_violation
from .witness import (
    WitnessConfig,
    WitnessError,
    construct_full_product,
    dense_inverse_witness,
    random_member,
)

HOLDS = "holds"
T_EXCEEDS_S = "T_exceeds_S"
PRODUCT_EXCEEDS_S = "product_exceeds_S"


@dataclass(frozen=True)
class InvarianceVerdict:
    holds: bool
    reason: str
    violating_index: Optional[tuple[int, int]] = None
    counterexample: Optional[tuple[np.ndarray, np.ndarray]] = None

    def to_dict(self) -> dict:
        out = {
            "holds": self.holds,
            "reason": self.reason,
            "violating_index": list(self.violating_index) if self.violating_index else None,
        }
        if self.counterexample is not None:
            X, Y = self.counterexample
            out["counterexample"] = {"X": X.tolist(), "Y": Y.tolist()}
        return out


def _check_shapes(S: SparsityPattern, T: SparsityPattern, R: SparsityPattern) -> None:
    if S.shape != T.shape:
        raise PatternError(f"S is {S.shape} but T is {T.shape}")
    if R.shape != (S.cols, S.cols):
        raise PatternError(f"R must be {S.cols}x{S.cols}, got {R.shape}")


def check(
    S: SparsityPattern,
    T: SparsityPattern,
    R: SparsityPattern,
    with_counterexample: bool = False,
    cfg: Optional[WitnessConfig] = None,
) -> InvarianceVerdict:
    _check_shapes(S, T, R)
    Rc = closure(R)  # validates symmetry and unit diagonal
    bad = leq_violation(T, S)
    if bad is not None:
        reason = T_EXCEEDS_S
    else:
        bad = leq_violation(T @ Rc, S)
        reason = PRODUCT_EXCEEDS_S if bad is not None else HOLDS
    if bad is None:
        return InvarianceVerdict(True, HOLDS)
    cex = counterexample(S, T, R, cfg) if with_counterexample else None
    return InvarianceVerdict(False, reason, bad, cex)


def _outside_violation(K: np.ndarray, S: SparsityPattern) -> float:
    return float(np.abs(np.where(S.bits, 0.0, K)).max()) if K.size else 0.0


def counterexample(
    S: SparsityPattern,
    T: SparsityPattern,
    R: SparsityPattern,
    cfg: Optional[WitnessConfig] = None,
    min_violation: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, Y)`` with X in Sparse(R), Y in Sparse(T), ``Y X^-1`` not in Sparse(S).

    ``X`` fills the closure on inversion and ``Y`` realises the full product
    pattern ``T closure(R)``, which is not below ``S`` whenever invariance
    fails. The pair is checked numerically: some entry of ``Y X^-1`` outside
    ``S`` must exceed ``min_violation``.
    """
    cfg = cfg or WitnessConfig()
    _check_shapes(S, T, R)
    Rc = closure(R)
    if leq_violation(T, S) is None and leq_violation(T @ Rc, S) is None:
        raise PatternError("sparsity invariance holds; no counterexample exists")
    for attempt in range(cfg.max_retries):
        sub = WitnessConfig(
            seed=cfg.seed * 7919 + attempt,
            alpha_range=cfg.alpha_range,
            nonzero_tol=cfg.nonzero_tol,
            max_retries=cfg.max_retries,
        )
        w = dense_inverse_witness(R, sub)
        Y = construct_full_product(T, w.X_inv, sub)
        K = np.linalg.solve(w.X.T, Y.T).T
        if _outside_violation(K, S) > min_violation:
            return w.X, Y
    raise WitnessError("counterexample did not exceed the violation threshold")


def numeric_probe(
    S: SparsityPattern,
    T: SparsityPattern,
    R: SparsityPattern,
    trials: int = 20,
    cfg: Optional[WitnessConfig] = None,
    max_cond: float = 1e6,
) -> bool:
    """Randomised necessary check: does ``Y X^-1`` stay in Sparse(S)?

    Draws ``trials`` pairs of random members of Sparse(T) and Sparse(R)
    (``X`` redrawn while its condition number exceeds ``max_cond``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg or WitnessConfig()
    _check_shapes(S, T, R)
    rng = cfg.rng()
    for _ in range(trials):
        while True:
            X = random_member(R, rng=rng)
            if np.linalg.cond(X) < max_cond:
                break
        Y = random_member(T, rng=rng)
        K = np.linalg.solve(X.T, Y.T).T
        if not (cfg.pattern(K) <= S):
            return False
    return True
