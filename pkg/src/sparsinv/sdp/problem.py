"""Conic form of the structured H2 restriction.

A :class:`ConicProblem` is a linear objective over a vector ``x`` of free
scalars subject to affine matrix inequalities ``F0 + sum_k x_k F_k >= 0``.
Each scalar is one free entry of a named matrix (``X``, ``Y`` or ``Z`` for the
synthesis problem); entries outside the sparsity masks are simply not
variables, so they are exactly zero in every solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from ..sparsity import PatternError, SparsityPattern, closure


@dataclass(frozen=True)
class MatrixVar:
    """Shape, free-entry mask and symmetry of one matrix decision variable."""

    name: str
    rows: int
    cols: int
    mask: SparsityPattern
    symmetric: bool = False

    def free_entries(self) -> list[tuple[int, int]]:
        if self.symmetric:
            return [(i, j) for i, j in self.mask.support() if i <= j]
        return self.mask.support()


@dataclass(frozen=True)
class LmiBlock:
    """``const + mat(coef @ x) >= 0``; ``coef`` has one row per entry (row-major)."""

    name: str
    size: int
    const: np.ndarray
    coef: sp.csc_matrix

    def value(self, x: np.ndarray) -> np.ndarray:
        M = self.const + (self.coef @ x).reshape(self.size, self.size)
        return 0.5 * (M + M.T)

    def min_eig(self, x: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.value(x))[0]) if self.size else np.inf


@dataclass
class ConicProblem:
    variables: list[MatrixVar]
    index: list[tuple[str, int, int]]
    c: np.ndarray
    blocks: list[LmiBlock]
    offset: float = 0.0
    eps: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.index)

    def var(self, name: str) -> MatrixVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Scatter the scalar vector into full matrices (zeros off-mask)."""
        out = {v.name: np.zeros((v.rows, v.cols)) for v in self.variables}
        sym = {v.name for v in self.variables if v.symmetric}
        for val, (name, i, j) in zip(x, self.index):
            out[name][i, j] = val
            if name in sym:
                out[name][j, i] = val
        return out

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.offset)


def _unit_layout(variables: list[MatrixVar]) -> list[tuple[str, int, int]]:
    return [(v.name, i, j) for v in variables for i, j in v.free_entries()]


def assemble(
    variables: list[MatrixVar],
    objective: Callable[..., float],
    blocks: list[tuple[str, Callable[..., np.ndarray]]],
    eps: float = 0.0,
    meta: Optional[dict] = None,
) -> ConicProblem:
    """Build a :class:`ConicProblem` from affine callables.

    ``objective`` and each block callable take the named matrices as keyword
    arguments. Their linear parts are recovered by evaluating at zero and at
    each unit variable, so the callables must be affine.
    """
    index = _unit_layout(variables)
    zeros = {v.name: np.zeros((v.rows, v.cols)) for v in variables}
    shapes = {v.name: v for v in variables}

    def unit(k: int) -> dict[str, np.ndarray]:
        name, i, j = index[k]
        mats = dict(zeros)
        E = np.zeros((shapes[name].rows, shapes[name].cols))
        E[i, j] = 1.0
        if shapes[name].symmetric:
            E[j, i] = 1.0
        mats[name] = E
        return mats

    units = [unit(k) for k in range(len(index))]
    offset = float(objective(**zeros))
    c = np.array([objective(**u) - offset for u in units], dtype=float)

    built = []
    for name, fn in blocks:
        F0 = np.asarray(fn(**zeros), dtype=float)
        s = F0.shape[0]
        rows, cols, vals = [], [], []
        for k, u in enumerate(units):
            Fk = np.asarray(fn(**u), dtype=float) - F0
            nz = np.flatnonzero(Fk.ravel())
            rows.extend(nz.tolist())
            cols.extend([k] * nz.size)
            vals.extend(Fk.ravel()[nz].tolist())
        coef = sp.csc_matrix((vals, (rows, cols)), shape=(s * s, len(index)))
        built.append(LmiBlock(name, s, F0, coef))
    return ConicProblem(variables, index, c, built, offset, eps, dict(meta or {}))


def default_eps(A: np.ndarray, H: np.ndarray) -> float:
    """Strictness margin ``1e-6 * max(1, |A|_inf, |HH^T|_inf)``."""
    return 1e-6 * max(1.0, np.linalg.norm(A, np.inf), np.linalg.norm(H @ H.T, np.inf))


def build_restriction(sys, T: SparsityPattern, R_closed: SparsityPattern, eps: Optional[float] = None) -> ConicProblem:
    """Assemble the restricted H2 program for factor patterns ``T`` and ``R_closed``.

    minimize   Tr(C X C' + D Y C' + C Y' D' + D Z D')
    subject to [[Z, Y], [Y', X]] >= 0,   X >= eps I,
               -(A X + X A' + B Y + Y' B' + H H') >= eps I,
               X in Sparse(R_closed),  Y in Sparse(T).

    ``sys`` is any object with matrix attributes ``A, B, H, C, D``.
    """
    A, B, H, C, D = (np.asarray(getattr(sys, k), dtype=float) for k in "ABHCD")
    n, m = B.shape
    if T.shape != (m, n):
        raise PatternError(f"T must be {m}x{n}, got {T.shape}")
    if R_closed.shape != (n, n):
        raise PatternError(f"R must be {n}x{n}, got {R_closed.shape}")
    if closure(R_closed) != R_closed:
        raise PatternError("R_closed must equal its transitive closure")
    if eps is None:
        eps = default_eps(A, H)
    if not eps > 0:
        raise ValueError("eps must be positive")

    variables = [
        MatrixVar("X", n, n, R_closed, symmetric=True),
        MatrixVar("Y", m, n, T),
        MatrixVar("Z", m, m, SparsityPattern.ones(m), symmetric=True),
    ]
    HHt = H @ H.T
    In = np.eye(n)

    def objective(X, Y, Z):
        return float(np.trace(C @ X @ C.T + D @ Y @ C.T + C @ Y.T @ D.T + D @ Z @ D.T))

    def schur(X, Y, Z):
        return np.block([[Z, Y], [Y.T, X]])

    def x_pos(X, Y, Z):
        return X - eps * In

    def lyap(X, Y, Z):
        return -(A @ X + X @ A.T + B @ Y + Y.T @ B.T + HHt) - eps * In

    return assemble(
        variables,
        objective,
        [("schur", schur), ("x_pos", x_pos), ("lyapunov", lyap)],
        eps=eps,
        meta={"n": n, "m": m},
    )
