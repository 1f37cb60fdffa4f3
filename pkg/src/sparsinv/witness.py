"""Constructive witnesses for maximal sparsity patterns.

Two constructions are provided:

* :func:`construct_dense_inverse` builds an invertible ``X`` supported on a
  symmetric pattern ``R >= I`` whose inverse fills the whole transitive
  closure ``R^(n-1)``. It starts from the identity and applies rank-one
  updates ``X += alpha * e_i e_j^T`` over the off-diagonal support of ``R``,
  tracking ``X^-1`` with the Sherman-Morrison identity.
* :func:`construct_full_product` builds ``Z`` supported on ``T`` such that
  ``Z @ W`` has the full boolean-product pattern ``T @ Struct(W)``.

Both pick update magnitudes at random and reject any value that would
cancel an entry that must be nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .sparsity import SparsityPattern, closure, structure_of


class WitnessError(RuntimeError):
    """The target pattern was not reached within the retry budget."""


@dataclass(frozen=True)
class WitnessConfig:
    """Randomness and tolerances shared by the witness constructions.

    ``alpha_range`` bounds update magnitudes (a random sign is applied).
    ``nonzero_tol`` is relative: an entry of ``M`` counts as nonzero when
    ``|M_ij| > nonzero_tol * (1 + max|M|)``.
    """

    seed: int = 0
    alpha_range: tuple[float, float] = (0.5, 1.5)
    nonzero_tol: float = 1e-8
    max_retries: int = 20

    def __post_init__(self):
        lo, hi = self.alpha_range
        if lo > hi:
            raise ValueError("alpha_range must be an ordered interval")
        if lo <= 0.0 <= hi:
            raise ValueError("alpha_range must exclude 0")
        if not self.nonzero_tol > 0:
            raise ValueError("nonzero_tol must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    def rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream])

    def threshold(self, M: np.ndarray) -> float:
        M = np.asarray(M)
        return self.nonzero_tol * (1.0 + (float(np.abs(M).max()) if M.size else 0.0))

    def pattern(self, M: np.ndarray) -> SparsityPattern:
        return structure_of(M, self.threshold(M))

    def sample_alpha(self, rng: np.random.Generator) -> float:
        lo, hi = self.alpha_range
        return float(rng.choice((-1.0, 1.0)) * rng.uniform(lo, hi))

    @property
    def separation(self) -> float:
        # entries that must stay nonzero are kept well clear of the zero threshold
        return float(np.sqrt(self.nonzero_tol))


def random_member(
    X: SparsityPattern,
    cfg: Optional[WitnessConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Standard-normal matrix supported exactly on ``X``."""
    if rng is None:
        rng = (cfg or WitnessConfig()).rng()
    return rng.standard_normal(X.shape) * X.bits


@dataclass
class DenseInverseWitness:
    X: np.ndarray
    X_inv: np.ndarray
    sweeps: int
    updates: int
    attempts: int
    # pattern of X^-1 before the first sweep and after each completed sweep
    trace: list[SparsityPattern] = field(default_factory=list)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.X))


class _Rejected(Exception):
    pass


def _sherman_morrison_step(Xinv, i, j, cfg, rng):
    """Pick alpha for ``X + alpha e_i e_j^T`` and return (alpha, new inverse).

    Accepts alpha only if ``1 + alpha Xinv[j, i]`` is safely away from zero
    and every entry in ``Struct(Xinv) + Struct(Xinv[:, i]) Struct(Xinv[j, :])``
    stays nonzero, which in particular makes row ``i`` of the new inverse
    absorb the structure of row ``j``.
    """
    col = Xinv[:, i].copy()
    row = Xinv[j, :].copy()
    must_nonzero = (Xinv != 0) | np.outer(col != 0, row != 0)
    for _ in range(cfg.max_retries):
        alpha = cfg.sample_alpha(rng)
        denom = 1.0 + alpha * Xinv[j, i]
        if abs(denom) <= cfg.separation:
            continue
        new = Xinv - (alpha / denom) * np.outer(col, row)
        scale = 1.0 + float(np.abs(new).max())
        if (np.abs(new[must_nonzero]) > cfg.separation * scale).all():
            return alpha, new
    raise _Rejected


def dense_inverse_witness(R: SparsityPattern, cfg: Optional[WitnessConfig] = None) -> DenseInverseWitness:
    """Run the rank-one update construction and return full diagnostics."""
    cfg = cfg or WitnessConfig()
    target = closure(R)
    n = R.rows
    offdiag = [(i, j) for i, j in R.support() if i != j]
    max_sweeps = n - 1 if offdiag else 0

    for attempt in range(cfg.max_retries):
        rng = cfg.rng(attempt)
        X = np.eye(n)
        Xinv = np.eye(n)
        trace = [SparsityPattern(Xinv != 0)]
        sweeps = updates = 0
        try:
            while SparsityPattern(Xinv != 0) != target:
                if sweeps == max_sweeps:
                    raise _Rejected
                for i, j in offdiag:
                    alpha, Xinv = _sherman_morrison_step(Xinv, i, j, cfg, rng)
                    X[i, j] += alpha
                    updates += 1
                sweeps += 1
                trace.append(SparsityPattern(Xinv != 0))
        except _Rejected:
            continue
        # re-check against a fresh inversion, not the tracked one
        fresh = np.linalg.inv(X)
        if cfg.pattern(fresh) == target and structure_of(X, 0.0) <= R:
            return DenseInverseWitness(X, fresh, sweeps, updates, attempt + 1, trace)
    raise WitnessError(
        f"could not reach Struct(X^-1) = closure(R) after {cfg.max_retries} reseedings"
    )


def construct_dense_inverse(R: SparsityPattern, cfg: Optional[WitnessConfig] = None) -> np.ndarray:
    """Invertible ``X`` in Sparse(R) with ``Struct(X^-1) = closure(R)``."""
    return dense_inverse_witness(R, cfg).X


def construct_full_product(
    T: SparsityPattern, W: np.ndarray, cfg: Optional[WitnessConfig] = None
) -> np.ndarray:
    """``Z`` in Sparse(T) with ``Struct(Z @ W) = T @ Struct(W)``.

    Each row is filled independently: while some target entry ``(i, j)`` of
    the product is still zero, pick ``k`` with ``T[i, k] = W_kj != 0`` and add
    ``alpha`` to ``Z[i, k]``, rejecting alphas that would zero any entry of
    row ``i`` that is already nonzero.
    """
    cfg = cfg or WitnessConfig()
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or T.cols != W.shape[0]:
        raise ValueError(f"T is {T.shape} but W is {W.shape}")
    Wp = cfg.pattern(W)
    target = (T @ Wp).bits
    m = T.rows

    for attempt in range(cfg.max_retries):
        rng = cfg.rng(attempt)
        Z = np.zeros((m, W.shape[0]))
        try:
            for i in range(m):
                zw = np.zeros(W.shape[1])
                while True:
                    missing = np.flatnonzero(target[i] & ~(zw != 0))
                    if missing.size == 0:
                        break
                    j = missing[0]
                    ks = np.flatnonzero(T.bits[i] & Wp.bits[:, j])
                    k = int(rng.choice(ks))
                    wk = np.where(Wp.bits[k], W[k], 0.0)
                    must = (zw != 0) | Wp.bits[k]
                    for _ in range(cfg.max_retries):
                        alpha = cfg.sample_alpha(rng)
                        new = zw + alpha * wk
                        scale = 1.0 + float(np.abs(new).max())
                        if (np.abs(new[must]) > cfg.separation * scale).all():
                            break
                    else:
                        raise _Rejected
                    Z[i, k] += alpha
                    zw = new
        except _Rejected:
            continue
        if cfg.pattern(Z @ W) == SparsityPattern(target):
            return Z
    raise WitnessError("could not reach Struct(Z W) = T Struct(W)")
