"""SDPA sparse format export and import.

The grammar is documented in ``docs/sdpa_format.md``. In short, the file
describes

    minimize  sum_k c_k x_k   subject to  sum_k F_k x_k - F_0 >= 0

with each block inequality of a :class:`ConicProblem` mapped to
``F_0 = -const`` and ``F_k`` = coefficient of ``x_k``. Masked matrix entries
are never variables and so never appear. Comment lines starting with ``*``
carry the variable layout so that :func:`parse_sdpa` can rebuild named
matrices.
"""

from __future__ import annotations

import re
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..sparsity import SparsityPattern
from .backends import SdpSolution, SolveOptions, solve
from .problem import ConicProblem, LmiBlock, MatrixVar


def _fmt(v: float) -> str:
    return repr(float(v))


def export_sdpa(p: ConicProblem) -> str:
    blocks = [b for b in p.blocks if b.size]
    lines = ['"sparsinv restricted SDP"']
    lines.append(f"* offset {_fmt(p.offset)}")
    for v in p.variables:
        mask = v.mask.to_text().replace("\n", "/")
        lines.append(f"* matrix {v.name} {v.rows} {v.cols} {'sym' if v.symmetric else 'gen'} {mask}")
    for k, (name, i, j) in enumerate(p.index, start=1):
        lines.append(f"* var {k} {name} {i} {j}")
    for b in blocks:
        lines.append(f"* block {b.name}")
    lines.append(f"{p.n_vars} = mDIM")
    lines.append(f"{len(blocks)} = nBLOCK")
    lines.append(" ".join(str(b.size) for b in blocks) + " = bLOCKsTRUCT")
    lines.append("{" + ", ".join(_fmt(c) for c in p.c) + "}")

    entries = []
    for bno, b in enumerate(blocks, start=1):
        s = b.size
        F0 = -b.const
        for i in range(s):
            for j in range(i, s):
                if F0[i, j] != 0:
                    entries.append((0, bno, i + 1, j + 1, F0[i, j]))
        coo = b.coef.tocoo()
        for r, k, val in zip(coo.row, coo.col, coo.data):
            i, j = divmod(int(r), s)
            if i <= j and val != 0:
                entries.append((int(k) + 1, bno, i + 1, j + 1, val))
    entries.sort(key=lambda e: e[:4])
    for mat, bno, i, j, val in entries:
        lines.append(f"{mat} {bno} {i} {j} {_fmt(val)}")
    return "\n".join(lines) + "\n"


_NUM = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf|nan")


class SdpaParseError(ValueError):
    pass


def parse_sdpa(text: str) -> ConicProblem:
    """Rebuild a :class:`ConicProblem` from :func:`export_sdpa` output.

    Files without layout comments are accepted; their variables become the
    entries of a single ``m x 1`` matrix named ``x``.
    """
    offset = 0.0
    matrices: list[MatrixVar] = []
    index: list[tuple[str, int, int]] = []
    block_names: list[str] = []
    body: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith('"'):
            continue
        if line.startswith("*"):
            parts = line[1:].split()
            if not parts:
                continue
            if parts[0] == "offset":
                offset = float(parts[1])
            elif parts[0] == "matrix":
                name, r, c, kind, mask = parts[1], int(parts[2]), int(parts[3]), parts[4], parts[5]
                pat = SparsityPattern.from_text(mask.replace("/", "\n"))
                matrices.append(MatrixVar(name, r, c, pat, symmetric=(kind == "sym")))
            elif parts[0] == "var":
                index.append((parts[2], int(parts[3]), int(parts[4])))
            elif parts[0] == "block":
                block_names.append(parts[1])
            continue
        body.append(line)
    if len(body) < 3:
        raise SdpaParseError("missing SDPA header")

    def nums(line: str) -> list[str]:
        return _NUM.findall(line.replace("{", " ").replace("}", " ").replace(",", " "))

    try:
        m = int(nums(body[0])[0])
        nblocks = int(nums(body[1])[0])
        sizes = [int(float(t)) for t in nums(body[2])[:nblocks]] if nblocks else []
        pos = 3
        c_tokens: list[str] = []
        while pos == 3 or len(c_tokens) < m:
            c_tokens.extend(nums(body[pos]))
            pos += 1
        c = np.array([float(t) for t in c_tokens[:m]])
    except (IndexError, ValueError) as exc:
        raise SdpaParseError(f"malformed SDPA header: {exc}") from exc

    if len(sizes) != nblocks or any(s <= 0 for s in sizes):
        raise SdpaParseError("only positive (semidefinite) block sizes are supported")
    const = [np.zeros((s, s)) for s in sizes]
    trip: list[tuple[list, list, list]] = [([], [], []) for _ in sizes]
    for line in body[pos:]:
        tok = line.split()
        if len(tok) != 5:
            raise SdpaParseError(f"bad entry line {line!r}")
        mat, bno, i, j = (int(t) for t in tok[:4])
        val = float(tok[4])
        s = sizes[bno - 1]
        i, j = i - 1, j - 1
        if mat == 0:
            const[bno - 1][i, j] = const[bno - 1][j, i] = -val
        else:
            rows, cols, vals = trip[bno - 1]
            for a, b in {(i, j), (j, i)}:
                rows.append(a * s + b)
                cols.append(mat - 1)
                vals.append(val)
    blocks = []
    for bno, s in enumerate(sizes):
        rows, cols, vals = trip[bno]
        coef = sp.csc_matrix((vals, (rows, cols)), shape=(s * s, m))
        name = block_names[bno] if bno < len(block_names) else f"block{bno + 1}"
        blocks.append(LmiBlock(name, s, const[bno], coef))

    if not index:
        matrices = [MatrixVar("x", m, 1, SparsityPattern.ones(m, 1))]
        index = [("x", k, 0) for k in range(m)]
    if len(index) != m:
        raise SdpaParseError(f"layout lists {len(index)} variables but mDIM is {m}")
    return ConicProblem(matrices, index, c, blocks, offset)


def solve_sdpa(text: str, opts: Optional[SolveOptions] = None) -> SdpSolution:
    """Parse an exported problem and solve it (cvxopt unless told otherwise)."""
    return solve(parse_sdpa(text), opts or SolveOptions(backend="cvxopt"))
