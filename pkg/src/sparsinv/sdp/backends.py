"""Solving :class:`ConicProblem` instances.

Two interior-point backends sit behind :func:`solve`:

``clarabel``
    The default. Problem data are passed in sparse form with each block
    vectorised as the scaled upper triangle (column-major, off-diagonal
    entries times sqrt(2)).
``cvxopt``
    ``cvxopt.solvers.sdp`` with dense block data. Used as the independent
    route for exported problems.

Every backend reports one of ``optimal``, ``infeasible``, ``unbounded``,
``inaccurate`` or ``solver_error``. ``infeasible`` is only reported when
the backend returned a dual certificate, and the certificate is re-checked
here (see :func:`check_infeasibility_certificate`).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .problem import ConicProblem

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
INACCURATE = "inaccurate"
SOLVER_ERROR = "solver_error"


@dataclass(frozen=True)
class SolveOptions:
    backend: str = "clarabel"
    max_iter: int = 200
    tol_feas: float = 1e-8
    tol_gap_abs: float = 1e-8
    tol_gap_rel: float = 1e-8
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    values: dict = field(default_factory=dict)
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    # per-block dual matrices proving infeasibility, when status is infeasible
    certificate: Optional[list[np.ndarray]] = None

    @property
    def has_values(self) -> bool:
        return self.x is not None

    @property
    def X(self):
        return self.values.get("X")

    @property
    def Y(self):
        return self.values.get("Y")

    @property
    def Z(self):
        return self.values.get("Z")


def _triu_selector(s: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """Map row-major ``vec(M)`` to the scaled upper-triangular vector."""
    rows, cols, vals = [], [], []
    r = 0
    for j in range(s):
        for i in range(j + 1):
            rows.append(r)
            cols.append(i * s + j)
            vals.append(1.0 if i == j else np.sqrt(2.0))
            r += 1
    P = sp.csr_matrix((vals, (rows, cols)), shape=(r, s * s))
    return P, np.asarray(vals)


def _smat(v: np.ndarray, s: int) -> np.ndarray:
    M = np.zeros((s, s))
    r = 0
    for j in range(s):
        for i in range(j + 1):
            val = v[r] if i == j else v[r] / np.sqrt(2.0)
            M[i, j] = M[j, i] = val
            r += 1
    return M


def _solve_clarabel(p: ConicProblem, opts: SolveOptions) -> SdpSolution:
    import clarabel

    A_parts, b_parts, cones = [], [], []
    for blk in p.blocks:
        if blk.size == 0:
            continue
        P, _ = _triu_selector(blk.size)
        A_parts.append(-(P @ blk.coef))
        b_parts.append(P @ blk.const.ravel())
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    A = sp.vstack(A_parts, format="csc")
    b = np.concatenate(b_parts)
    Pq = sp.csc_matrix((p.n_vars, p.n_vars))

    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.tol_feas = opts.tol_feas
    settings.tol_gap_abs = opts.tol_gap_abs
    settings.tol_gap_rel = opts.tol_gap_rel
    settings.presolve_enable = False

    sol = clarabel.DefaultSolver(Pq, p.c, A, b, cones, settings).solve()
    status_name = str(sol.status)
    diag = {
        "backend": "clarabel",
        "raw_status": status_name,
        "iterations": int(sol.iterations),
        "solve_time": float(sol.solve_time),
        "r_prim": float(sol.r_prim),
        "r_dual": float(sol.r_dual),
    }
    x = np.asarray(sol.x, dtype=float)
    z = np.asarray(sol.z, dtype=float)

    def dual_mats():
        out, k = [], 0
        for blk in p.blocks:
            t = blk.size * (blk.size + 1) // 2
            out.append(_smat(z[k:k + t], blk.size))
            k += t
        return out

    if status_name == "Solved":
        return SdpSolution(OPTIMAL, x=x, objective=p.objective(x), diagnostics=diag)
    if status_name == "PrimalInfeasible":
        return SdpSolution(INFEASIBLE, diagnostics=diag, certificate=dual_mats())
    if status_name == "DualInfeasible":
        return SdpSolution(UNBOUNDED, diagnostics=diag)
    if status_name in ("AlmostSolved", "AlmostPrimalInfeasible", "AlmostDualInfeasible",
                       "MaxIterations", "MaxTime", "InsufficientProgress"):
        if np.all(np.isfinite(x)):
            return SdpSolution(INACCURATE, x=x, objective=p.objective(x), diagnostics=diag)
    return SdpSolution(SOLVER_ERROR, diagnostics=diag)


def _solve_cvxopt(p: ConicProblem, opts: SolveOptions) -> SdpSolution:
    from cvxopt import matrix, solvers, sparse, spmatrix

    Gs, hs = [], []
    for blk in p.blocks:
        if blk.size == 0:
            continue
        coo = (-blk.coef).tocoo()
        # the coefficient of a symmetric block is symmetric, so row-major and
        # column-major vectorisations coincide
        Gs.append(spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(),
                           (blk.size * blk.size, p.n_vars)))
        hs.append(matrix(np.ascontiguousarray(blk.const, dtype=float)))
    options = {
        "show_progress": opts.verbose,
        "maxiters": opts.max_iter,
        "abstol": opts.tol_gap_abs,
        "reltol": opts.tol_gap_rel,
        "feastol": opts.tol_feas,
    }
    t0 = time.perf_counter()
    res = solvers.sdp(matrix(p.c), Gs=[sparse(G) for G in Gs], hs=hs, options=options)
    diag = {
        "backend": "cvxopt",
        "raw_status": res["status"],
        "iterations": int(res.get("iterations", 0)),
        "solve_time": time.perf_counter() - t0,
        "r_prim": float(res.get("primal infeasibility") or 0.0),
        "r_dual": float(res.get("dual infeasibility") or 0.0),
    }
    status = res["status"]
    x = None if res["x"] is None else np.array(res["x"]).ravel()
    if status == "optimal":
        return SdpSolution(OPTIMAL, x=x, objective=p.objective(x), diagnostics=diag)
    if status == "primal infeasible":
        cert = [np.array(zs) for zs in res["zs"]]
        cert = [0.5 * (Zs + Zs.T) for Zs in cert]
        return SdpSolution(INFEASIBLE, diagnostics=diag, certificate=cert)
    if status == "dual infeasible":
        return SdpSolution(UNBOUNDED, diagnostics=diag)
    if x is not None and np.all(np.isfinite(x)):
        return SdpSolution(INACCURATE, x=x, objective=p.objective(x), diagnostics=diag)
    return SdpSolution(SOLVER_ERROR, diagnostics=diag)


BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


def check_infeasibility_certificate(p: ConicProblem, cert: list[np.ndarray]) -> dict:
    """Residuals of a Farkas certificate for ``F0 + sum x_k F_k >= 0``.

    A valid certificate is a list of PSD matrices ``W_b`` with
    ``sum_b <F_k^b, W_b> = 0`` for every variable and ``sum_b <F0^b, W_b> < 0``.
    Values are normalised by ``sum_b trace(W_b)``.
    """
    blocks = [b for b in p.blocks if b.size]
    scale = sum(float(np.trace(W)) for W in cert) or 1.0
    lin = np.zeros(p.n_vars)
    const = 0.0
    min_eig = np.inf
    for blk, W in zip(blocks, cert):
        Wn = W / scale
        lin += blk.coef.T @ Wn.ravel()
        const += float(np.sum(blk.const * Wn))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(Wn)[0]))
    return {
        "const_term": const,
        "linear_residual": float(np.abs(lin).max()) if lin.size else 0.0,
        "min_eig": min_eig,
        "valid": const < -1e-8 and min_eig > -1e-8 and (not lin.size or np.abs(lin).max() <= 1e-6 * abs(const)),
    }


def _presolve(p: ConicProblem):
    """Split off variables that appear in no block.

    Returns ``(reduced_problem, kept_indices)`` or ``None`` when a free
    variable with nonzero cost makes the problem unbounded.
    """
    used = np.zeros(p.n_vars, dtype=bool)
    for blk in p.blocks:
        used |= np.diff(blk.coef.indptr) > 0
    if used.all():
        return p, np.arange(p.n_vars)
    if np.any(p.c[~used] != 0):
        return None
    keep = np.flatnonzero(used)
    blocks = [type(b)(b.name, b.size, b.const, b.coef[:, keep]) for b in p.blocks]
    reduced = ConicProblem(p.variables, [p.index[k] for k in keep], p.c[keep], blocks,
                           p.offset, p.eps, p.meta)
    return reduced, keep


def solve(p: ConicProblem, opts: Optional[SolveOptions] = None) -> SdpSolution:
    """Solve with the configured backend and verify the answer post hoc."""
    opts = opts or SolveOptions()
    if opts.backend not in BACKENDS:
        raise ValueError(f"unknown backend {opts.backend!r}; choose from {sorted(BACKENDS)}")
    pre = _presolve(p)
    if pre is None:
        return SdpSolution(UNBOUNDED, diagnostics={"backend": "presolve",
                                                   "reason": "cost on a variable absent from all constraints"})
    reduced, keep = pre
    if not any(b.size for b in reduced.blocks):
        if np.any(reduced.c != 0):
            return SdpSolution(UNBOUNDED, diagnostics={"backend": "presolve", "reason": "no constraints"})
        x = np.zeros(p.n_vars)
        return SdpSolution(OPTIMAL, values=p.unpack(x), x=x, objective=p.objective(x),
                           diagnostics={"backend": "presolve"})
    t0 = time.perf_counter()
    try:
        sol = BACKENDS[opts.backend](reduced, opts)
    except Exception as exc:  # backend failures become structured results
        log.warning("backend %s failed: %s", opts.backend, exc)
        return SdpSolution(SOLVER_ERROR, diagnostics={"backend": opts.backend, "error": repr(exc)})
    sol.diagnostics["wall_time"] = time.perf_counter() - t0

    if sol.x is not None:
        full = np.zeros(p.n_vars)
        full[keep] = sol.x
        sol.x = full
        sol.values = p.unpack(full)
        sol.objective = p.objective(full)
        sol.diagnostics["block_min_eig"] = {b.name: b.min_eig(full) for b in p.blocks}
    if sol.status == INFEASIBLE:
        chk = check_infeasibility_certificate(reduced, sol.certificate)
        sol.diagnostics["certificate"] = chk
        if not chk["valid"]:
            sol.status = INACCURATE if sol.x is not None else SOLVER_ERROR
    return sol
