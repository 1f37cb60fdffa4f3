"""Boolean algebra over binary sparsity patterns.

A :class:`SparsityPattern` is an immutable binary matrix. Products and sums
are evaluated over {0, 1} with AND/OR, so there is never numeric
cancellation: ``X @ Z`` is the generic-rank structure of a product of
matrices supported on ``X`` and ``Z``.

All indices are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc


class PatternError(ValueError):
    """Shape mismatch or violated precondition on a sparsity pattern."""


class SparsityPattern:
    """Immutable binary ``rows x cols`` matrix of allowed nonzeros."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise PatternError(f"pattern must be 2-D, got shape {arr.shape}")
        if arr.dtype != bool:
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise PatternError("pattern entries must be 0 or 1")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        self._bits = arr

    # construction helpers

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparsityPattern":
        return cls(np.zeros((rows, cols), dtype=bool))

    @classmethod
    def ones(cls, rows: int, cols: Optional[int] = None) -> "SparsityPattern":
        return cls(np.ones((rows, rows if cols is None else cols), dtype=bool))

    @classmethod
    def identity(cls, n: int) -> "SparsityPattern":
        return cls(np.eye(n, dtype=bool))

    @classmethod
    def from_text(cls, text: str) -> "SparsityPattern":
        """Parse rows of ``0``/``1`` characters separated by newlines.

        Blank lines and whitespace inside a row are ignored.
        """
        rows = []
        for line in text.splitlines():
            line = "".join(line.split())
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise PatternError(f"invalid pattern row {line!r}")
            rows.append([c == "1" for c in line])
        if not rows:
            raise PatternError("empty pattern text")
        if len({len(r) for r in rows}) != 1:
            raise PatternError("ragged pattern rows")
        return cls(np.array(rows, dtype=bool))

    @classmethod
    def from_json(cls, data) -> "SparsityPattern":
        """Build from a JSON string or an already-decoded list of lists."""
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
            raise PatternError("pattern JSON must be a non-empty array of arrays")
        if len({len(r) for r in data}) != 1:
            raise PatternError("ragged pattern rows")
        for row in data:
            for v in row:
                if isinstance(v, bool) or v not in (0, 1):
                    raise PatternError("pattern entries must be the integers 0 or 1")
        return cls(np.array(data, dtype=int))

    # views

    @property
    def bits(self) -> np.ndarray:
        """Read-only boolean array."""
        return self._bits

    @property
    def shape(self) -> tuple[int, int]:
        return self._bits.shape

    @property
    def rows(self) -> int:
        return self._bits.shape[0]

    @property
    def cols(self) -> int:
        return self._bits.shape[1]

    @property
    def T(self) -> "SparsityPattern":
        return SparsityPattern(self._bits.T)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def count(self) -> int:
        """Number of ones, written |X|."""
        return int(self._bits.sum())

    def is_symmetric(self) -> bool:
        return self.is_square and bool((self._bits == self._bits.T).all())

    def has_unit_diagonal(self) -> bool:
        return self.is_square and bool(np.diag(self._bits).all())

    def to_array(self, dtype=int) -> np.ndarray:
        return self._bits.astype(dtype)

    def to_list(self) -> list[list[int]]:
        return self._bits.astype(int).tolist()

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    def to_text(self) -> str:
        return "\n".join("".join("1" if b else "0" for b in row) for row in self._bits)

    def support(self) -> list[tuple[int, int]]:
        """Row-major list of (i, j) with a one."""
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self._bits))]

    # operators

    def __matmul__(self, other: "SparsityPattern") -> "SparsityPattern":
        return bool_mul(self, other)

    def __or__(self, other: "SparsityPattern") -> "SparsityPattern":
        return bool_add(self, other)

    __add__ = __or__

    def __le__(self, other: "SparsityPattern") -> bool:
        return leq(self, other)

    def __lt__(self, other: "SparsityPattern") -> bool:
        return lt(self, other)

    def __ge__(self, other: "SparsityPattern") -> bool:
        return leq(other, self)

    def __gt__(self, other: "SparsityPattern") -> bool:
        return lt(other, self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.shape == other.shape and bool((self._bits == other._bits).all())

    def __hash__(self) -> int:
        return hash((self.shape, np.packbits(self._bits).tobytes()))

    def __repr__(self) -> str:
        body = ";".join("".join("1" if b else "0" for b in row) for row in self._bits)
        return f"SparsityPattern({self.rows}x{self.cols}: {body})"


def _check_same_shape(X: SparsityPattern, Y: SparsityPattern) -> None:
    if X.shape != Y.shape:
        raise PatternError(f"shape mismatch: {X.shape} vs {Y.shape}")


def default_tol(M: np.ndarray) -> float:
    """Relative threshold ``1e-9 * (1 + max|M|)`` used for structure recovery."""
    M = np.asarray(M)
    return 1e-9 * (1.0 + (float(np.abs(M).max()) if M.size else 0.0))


def structure_of(M, tol: Optional[float] = None) -> SparsityPattern:
    """Return the pattern of entries with ``|M_ij| > tol``.

    With ``tol=None`` the relative default of :func:`default_tol` is used.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if tol is None:
        tol = default_tol(M)
    if tol < 0:
        raise PatternError("tol must be nonnegative")
    return SparsityPattern(np.abs(M) > tol)


def bool_mul(X: SparsityPattern, Z: SparsityPattern) -> SparsityPattern:
    if X.cols != Z.rows:
        raise PatternError(f"cannot multiply {X.shape} by {Z.shape}")
    prod = (X.bits[:, :, None] & Z.bits[None, :, :]).any(axis=1)
    return SparsityPattern(prod)


def bool_add(X: SparsityPattern, Xh: SparsityPattern) -> SparsityPattern:
    _check_same_shape(X, Xh)
    return SparsityPattern(X.bits | Xh.bits)


def leq_violation(X: SparsityPattern, Xh: SparsityPattern) -> Optional[tuple[int, int]]:
    """First (row-major) index with ``X_ij > Xh_ij``, or None if ``X <= Xh``."""
    _check_same_shape(X, Xh)
    bad = np.argwhere(X.bits & ~Xh.bits)
    if len(bad) == 0:
        return None
    return int(bad[0][0]), int(bad[0][1])


def leq(X: SparsityPattern, Xh: SparsityPattern) -> bool:
    return leq_violation(X, Xh) is None


def lt(X: SparsityPattern, Xh: SparsityPattern) -> bool:
    """Strict order: ``X <= Xh`` and the two differ somewhere."""
    return leq(X, Xh) and X != Xh


def _check_lyapunov_pattern(R: SparsityPattern) -> None:
    if not R.is_square:
        raise PatternError(f"R must be square, got {R.shape}")
    if not R.is_symmetric():
        raise PatternError("R must be symmetric")
    if not R.has_unit_diagonal():
        raise PatternError("R must have an all-ones diagonal (R >= I)")


def bool_power(R: SparsityPattern, k: int) -> SparsityPattern:
    """Boolean power ``R^k`` for square R (``R^0 = I``)."""
    if not R.is_square:
        raise PatternError("bool_power needs a square pattern")
    if k < 0:
        raise PatternError("negative exponent")
    out = SparsityPattern.identity(R.rows)
    base = R
    while k:
        if k & 1:
            out = out @ base
        base = base @ base
        k >>= 1
    return out


def closure(R: SparsityPattern) -> SparsityPattern:
    """Transitive closure ``R^(n-1)`` of a symmetric pattern with unit diagonal.

    Computed by repeated boolean squaring; since ``R >= I`` the powers are
    monotone, so overshooting ``n - 1`` gives the same result.
    """
    _check_lyapunov_pattern(R)
    n = R.rows
    P, reach = R, 1
    while reach < n - 1:
        nxt = P @ P
        if nxt == P:
            break
        P, reach = nxt, 2 * reach
    return P


def is_closed(R: SparsityPattern) -> bool:
    return closure(R) == R


@dataclass(frozen=True)
class Partition:
    """Assignment of ``n`` indices to ``r`` components.

    ``component_of[i]`` is the 0-based component id of index ``i``; ids are
    issued in order of each component's smallest member.
    """

    n: int
    component_of: tuple[int, ...]
    sizes: tuple[int, ...]

    @property
    def r(self) -> int:
        return len(self.sizes)

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.r)]
        for i, c in enumerate(self.component_of):
            out[c].append(i)
        return out

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        """Relabel arbitrary labels canonically (first appearance order)."""
        remap: dict[int, int] = {}
        comp = []
        for lab in labels:
            if lab not in remap:
                remap[lab] = len(remap)
            comp.append(remap[lab])
        sizes = [0] * len(remap)
        for c in comp:
            sizes[c] += 1
        return cls(len(comp), tuple(comp), tuple(sizes))

    def to_pattern(self) -> SparsityPattern:
        """Block-clique pattern: ones exactly between members of one component."""
        c = np.asarray(self.component_of)
        return SparsityPattern(c[:, None] == c[None, :])


def connected_components(R: SparsityPattern) -> Partition:
    """Components of the undirected graph with adjacency ``R``."""
    _check_lyapunov_pattern(R)
    _, labels = _cc(csr_matrix(R.bits), directed=False)
    return Partition.from_labels(labels.tolist())


def block_diag_permutation(R: SparsityPattern) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Permutation putting ``closure(R)`` in block-diagonal all-ones form.

    Returns ``(perm, sizes)`` where ``perm[k]`` is the original index moved
    to position ``k``, i.e. ``closure(R).bits[np.ix_(perm, perm)]`` is
    ``blkdiag(1_{v1}, ..., 1_{vr})``. Blocks are ordered by smallest member
    and members ascend within a block.
    """
    part = connected_components(R)
    perm = tuple(i for block in part.blocks() for i in block)
    return perm, part.sizes


def kron(A: SparsityPattern, B: SparsityPattern) -> SparsityPattern:
    return SparsityPattern(np.kron(A.bits.astype(int), B.bits.astype(int)) > 0)


def as_pattern(x) -> SparsityPattern:
    if isinstance(x, SparsityPattern):
        return x
    return SparsityPattern(x)

