"""Benchmark instances: the three-state example and the coupled mesh network.

Mesh nodes are numbered left to right starting from the top row (0-based
here). Node ``i`` owns states ``2i`` and ``2i + 1`` and input ``i``.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .sparsity import SparsityPattern, connected_components, kron
from .structure_opt import optimize_R
from .synthesis import LinearSystem, SynthesisOptions, synthesize

# full-information reveal order of the 4x4 experiment, 1-based as published
PUBLISHED_REVEAL_ORDER_4X4 = (14, 15, 3, 11, 2, 5, 9, 16, 8, 13, 7, 1, 12, 6, 10, 4)
DEFAULT_ALPHA = 0.1

METHODS = ("block_diag", "siv_TS", "siv_Tnew", "centralized")
CSV_FIELDS = ("L", "method", "status", "objective", "h2", "r", "wall_ms")


def example1() -> tuple[LinearSystem, SparsityPattern, SparsityPattern, SparsityPattern]:
    """Unstable 3-state system with controller pattern S and factor patterns T, R."""
    A = np.array([[2.0, 1.0, 5.0], [0.0, -1.0, 1.0], [-1.0, 1.0, 0.5]])
    B = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])
    H = np.eye(3)
    C = np.vstack([np.eye(3), np.zeros((3, 3))])
    D = np.vstack([np.zeros((3, 3)), np.eye(3)])
    S = SparsityPattern([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    T = SparsityPattern([[1, 1, 0], [1, 1, 1], [0, 0, 1]])
    R = SparsityPattern([[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    return LinearSystem(A, B, H, C, D), S, T, R


def example1_problem() -> dict:
    """Example 1 in the CLI problem-file layout."""
    sys, S, T, R = example1()
    d = sys.to_dict()
    d.update(S=S.to_list(), T=T.to_list(), R=R.to_list())
    return d


def example1_file() -> str:
    """Text of the shipped ``data/example1.json`` problem file."""
    return resources.files("sparsinv").joinpath("data/example1.json").read_text(encoding="utf-8")


def load_example1_file() -> dict:
    return json.loads(example1_file())


@dataclass(frozen=True)
class MeshSpec:
    side: int = 4
    alpha: float = DEFAULT_ALPHA
    L: int = 0
    reveal_order: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("side must be positive")
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if not 0 <= self.L <= self.nodes:
            raise ValueError(f"L must lie in [0, {self.nodes}]")
        if self.reveal_order is not None and sorted(self.reveal_order) != list(range(self.nodes)):
            raise ValueError("reveal_order must be a permutation of the node indices")

    @property
    def nodes(self) -> int:
        return self.side * self.side

    @property
    def order(self) -> tuple[int, ...]:
        if self.reveal_order is not None:
            return tuple(self.reveal_order)
        if self.side == 4:
            return tuple(k - 1 for k in PUBLISHED_REVEAL_ORDER_4X4)
        return tuple(range(self.nodes))

    @property
    def revealed(self) -> tuple[int, ...]:
        return self.order[: self.L]

    def with_L(self, L: int) -> "MeshSpec":
        return MeshSpec(self.side, self.alpha, L, self.reveal_order)


def mesh_neighbors(side: int) -> list[list[int]]:
    """4-connected grid neighbours of each node."""
    out = []
    for k in range(side * side):
        r, c = divmod(k, side)
        nb = []
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < side and 0 <= cc < side:
                nb.append(rr * side + cc)
        out.append(sorted(nb))
    return out


def mesh_system(spec: MeshSpec) -> tuple[LinearSystem, SparsityPattern]:
    N = spec.nodes
    nbrs = mesh_neighbors(spec.side)
    local = np.array([[1.0, 1.0], [1.0, 2.0]])
    A = np.zeros((2 * N, 2 * N))
    for i in range(N):
        A[2 * i:2 * i + 2, 2 * i:2 * i + 2] = local
        for j in nbrs[i]:
            A[2 * i:2 * i + 2, 2 * j:2 * j + 2] = spec.alpha * np.eye(2)
    B = np.kron(np.eye(N), np.array([[0.0], [1.0]]))
    H = B.copy()
    C = np.vstack([np.eye(2 * N), np.zeros((N, 2 * N))])
    D = np.vstack([np.zeros((2 * N, N)), np.eye(N)])

    S = np.zeros((N, 2 * N), dtype=bool)
    for i in range(N):
        for j in [i, *nbrs[i]]:
            S[i, 2 * j:2 * j + 2] = True
    for i in spec.revealed:
        S[i, :] = True
    return LinearSystem(A, B, H, C, D), SparsityPattern(S)


def block_diag_baseline_R(n_sub: int, block: int) -> SparsityPattern:
    """``I_{n_sub} kron 1_{block x block}``: one dense Lyapunov block per subsystem."""
    return kron(SparsityPattern.identity(n_sub), SparsityPattern.ones(block))


def t_new(spec: MeshSpec) -> SparsityPattern:
    """Clique-based factor pattern plus full rows for the revealed nodes.

    Nodes are paired with their right-hand neighbour ((0, 1), (2, 3), ...),
    and both inputs of a pair see all four states of the pair.
    """
    if spec.side % 2:
        raise ValueError("the horizontal pairing needs an even grid side")
    N = spec.nodes
    T = kron(SparsityPattern.identity(N // 2), SparsityPattern.ones(2, 4)).bits.copy()
    for i in spec.revealed:
        T[i, :] = True
    return SparsityPattern(T)


def method_patterns(method: str, spec: MeshSpec):
    """``(S, T, R)`` used by one sweep method at ``spec.L``."""
    sys, S = mesh_system(spec)
    N = spec.nodes
    if method == "block_diag":
        return S, S, block_diag_baseline_R(N, 2)
    if method == "siv_TS":
        return S, S, optimize_R(S)
    if method == "siv_Tnew":
        T = t_new(spec)
        return S, T, optimize_R(T)
    if method == "centralized":
        full = SparsityPattern.ones(N, 2 * N)
        return full, full, SparsityPattern.ones(2 * N)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass
class SweepRow:
    L: int
    method: str
    status: str
    objective: Optional[float]
    h2: Optional[float]
    r: Optional[int]
    wall_ms: float


def run_cell(spec: MeshSpec, method: str, opts: Optional[SynthesisOptions] = None) -> SweepRow:
    t0 = time.perf_counter()
    try:
        sys, _ = mesh_system(spec)
        S, T, R = method_patterns(method, spec)
        res = synthesize(sys, S, T, R, opts)
        status, obj, h2 = res.status, res.objective, res.h2
        r = connected_components(R).r
    except Exception as exc:  # cell failures are recorded, never fatal
        status, obj, h2, r = f"error: {type(exc).__name__}: {exc}", None, None, None
    return SweepRow(spec.L, method, status, obj, h2, r, 1000.0 * (time.perf_counter() - t0))


def sweep(
    base: MeshSpec,
    L_values: Iterable[int],
    methods: Sequence[str] = METHODS,
    opts: Optional[SynthesisOptions] = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Run every (L, method) cell; rows come back in (L, method) order."""
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    cells = [(base.with_L(L), m) for L in L_values for m in methods]
    if jobs <= 1:
        return [run_cell(s, m, opts) for s, m in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda c: run_cell(c[0], c[1], opts), cells))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def rows_to_csv(rows: Sequence[SweepRow], wall_time: bool = True) -> str:
    """CSV text with the columns of :data:`CSV_FIELDS`.

    ``wall_time=False`` blanks the timing column so that repeated sweeps
    compare byte for byte.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        d = asdict(row)
        if not wall_time:
            d["wall_ms"] = None
        else:
            d["wall_ms"] = round(d["wall_ms"], 1)
        w.writerow([_fmt(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def rows_to_gnuplot(rows: Sequence[SweepRow]) -> str:
    """Whitespace table: L followed by one h2 column per method (NaN when missing)."""
    methods = list(dict.fromkeys(r.method for r in rows))
    Ls = sorted({r.L for r in rows})
    table = {(r.L, r.method): r.h2 for r in rows}
    lines = ["# L " + " ".join(methods)]
    for L in Ls:
        vals = [table.get((L, m)) for m in methods]
        lines.append(f"{L} " + " ".join("NaN" if v is None else f"{v:.10g}" for v in vals))
    return "\n".join(lines) + "\n"
