"""Structured H2 state-feedback synthesis and closed-loop certification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import invariance
from .sdp import INACCURATE, OPTIMAL, SolveOptions, build_restriction, solve
from .sparsity import PatternError, SparsityPattern, block_diag_permutation, closure
from .structure_opt import optimize_R

KRON_LYAP_MAX_N = 40


class InvarianceError(ValueError):
    """The factor patterns do not guarantee a controller in Sparse(S)."""


class NotHurwitzError(ValueError):
    pass


class SeparabilityError(ValueError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    """``dx/dt = A x + B u + H w`` with performance output ``z = C x + D u``."""

    A: np.ndarray
    B: np.ndarray
    H: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for k in "ABHCD":
            arr = np.atleast_2d(np.asarray(getattr(self, k), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, k, arr)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n or self.H.shape[0] != n:
            raise ValueError("B and H must have n rows")
        if self.C.shape[1] != n:
            raise ValueError("C must have n columns")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError(f"D must be {self.C.shape[0]}x{self.B.shape[1]}, got {self.D.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.H.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "ABHCD"}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSystem":
        return cls(*(np.asarray(d[k], dtype=float) for k in "ABHCD"))


def spectral_abscissa(M: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(M).real))


def is_hurwitz(M: np.ndarray, margin: float = 0.0) -> tuple[bool, float]:
    """Return ``(max Re(eig) < -margin, spectral abscissa)``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("is_hurwitz needs a square matrix")
    a = spectral_abscissa(M)
    return a < -margin, a


def solve_lyapunov(M: np.ndarray, Q: np.ndarray, method: str = "auto") -> np.ndarray:
    """Solve ``M W + W M^T + Q = 0``.

    ``method="kron"`` solves the vectorised system
    ``(I kron M + M kron I) vec(W) = -vec(Q)`` directly; ``"schur"`` uses
    the Bartels-Stewart solver in SciPy. ``"auto"`` picks ``kron`` up to
    n = 40.
    """
    M = np.asarray(M, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = M.shape[0]
    if method == "auto":
        method = "kron" if n <= KRON_LYAP_MAX_N else "schur"
    if method == "kron":
        I = np.eye(n)
        L = np.kron(I, M) + np.kron(M, I)
        # row-major vec: vec(M W) = (M kron I) vec(W), vec(W M^T) = (I kron M) vec(W)
        W = np.linalg.solve(L, -Q.ravel()).reshape(n, n)
    elif method == "schur":
        W = sla.solve_continuous_lyapunov(M, -Q)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (W + W.T)


def h2_norm(sys: LinearSystem, K: np.ndarray, method: str = "auto") -> float:
    """Closed-loop H2 norm ``sqrt(Tr((C+DK) W (C+DK)^T))`` from the Gramian W."""
    K = np.asarray(K, dtype=float)
    Acl = sys.A + sys.B @ K
    stable, a = is_hurwitz(Acl)
    if not stable:
        raise NotHurwitzError(f"A + BK is not Hurwitz (spectral abscissa {a:.3g}); H2 norm is infinite")
    W = solve_lyapunov(Acl, sys.H @ sys.H.T, method)
    Ccl = sys.C + sys.D @ K
    return float(np.sqrt(max(np.trace(Ccl @ W @ Ccl.T), 0.0)))


@dataclass(frozen=True)
class SeparabilityCertificate:
    permutation: tuple[int, ...]
    block_sizes: tuple[int, ...]
    block_min_eigs: tuple[float, ...]
    offblock_max: float

    @property
    def r(self) -> int:
        return len(self.block_sizes)

    def blocks(self, P: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        perm = np.asarray(self.permutation)
        for v in self.block_sizes:
            idx = perm[k:k + v]
            out.append(P[np.ix_(idx, idx)])
            k += v
        return out

    def to_dict(self) -> dict:
        return {
            "permutation": list(self.permutation),
            "block_sizes": list(self.block_sizes),
            "r": self.r,
            "block_min_eigs": list(self.block_min_eigs),
            "offblock_max": self.offblock_max,
        }


def separability_certificate(P: np.ndarray, R: SparsityPattern, tol: Optional[float] = None) -> SeparabilityCertificate:
    """Certify that ``x' P x`` splits into one positive-definite term per component of G(R)."""
    P = np.asarray(P, dtype=float)
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.abs(P).max()))
    if P.shape != R.shape:
        raise PatternError(f"P is {P.shape} but R is {R.shape}")
    if np.abs(P - P.T).max() > tol:
        raise SeparabilityError("P is not symmetric")
    Rc = closure(R)
    outside = float(np.abs(np.where(Rc.bits, 0.0, P)).max())
    if outside > tol:
        raise SeparabilityError(f"P has support outside closure(R) (max |entry| {outside:.3g})")
    perm, sizes = block_diag_permutation(R)
    cert_eigs = []
    k = 0
    idx = np.asarray(perm)
    for v in sizes:
        b = idx[k:k + v]
        blk = P[np.ix_(b, b)]
        cert_eigs.append(float(np.linalg.eigvalsh(0.5 * (blk + blk.T))[0]))
        k += v
    if min(cert_eigs) <= 0:
        raise SeparabilityError("a diagonal block of P is not positive definite")
    return SeparabilityCertificate(tuple(perm), tuple(sizes), tuple(cert_eigs), outside)


@dataclass(frozen=True)
class SynthesisOptions:
    eps: Optional[float] = None
    solver: SolveOptions = field(default_factory=SolveOptions)
    hurwitz_margin: float = 0.0
    # allowed pre-projection violation, relative to max|K|
    projection_rtol: float = 1e-6


@dataclass
class SynthesisResult:
    status: str
    S: SparsityPattern
    T: SparsityPattern
    R: SparsityPattern
    K: Optional[np.ndarray] = None
    P: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None
    Y: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    objective: Optional[float] = None
    h2: Optional[float] = None
    certificate: Optional[SeparabilityCertificate] = None
    residuals: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    @property
    def objective_norm(self) -> Optional[float]:
        """``sqrt(objective)``: the H2 bound certified by the SDP."""
        return None if self.objective is None else float(np.sqrt(max(self.objective, 0.0)))

    def to_dict(self) -> dict:
        def mat(M):
            return None if M is None else np.asarray(M).tolist()

        return {
            "status": self.status,
            "message": self.message,
            "objective": self.objective,
            "objective_norm": self.objective_norm,
            "h2": self.h2,
            "S": self.S.to_list(),
            "T": self.T.to_list(),
            "R": self.R.to_list(),
            "K": mat(self.K),
            "P": mat(self.P),
            "X": mat(self.X),
            "Y": mat(self.Y),
            "Z": mat(self.Z),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "residuals": self.residuals,
            "solver": _jsonable(self.solver),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def lyapunov_residual(sys: LinearSystem, K: np.ndarray, P: np.ndarray) -> float:
    """``min eig of -((A+BK)'P + P(A+BK) + P H H' P)``; positive certifies the closed loop."""
    Acl = sys.A + sys.B @ K
    M = Acl.T @ P + P @ Acl + P @ sys.H @ sys.H.T @ P
    return float(np.linalg.eigvalsh(-0.5 * (M + M.T))[0])


def synthesize(
    sys: LinearSystem,
    S: SparsityPattern,
    T: Optional[SparsityPattern] = None,
    R: Optional[SparsityPattern] = None,
    opts: Optional[SynthesisOptions] = None,
) -> SynthesisResult:
    """Solve the restriction for ``(T, closure(R))`` and recover ``K = Y X^-1``.

    ``T`` defaults to ``S`` and ``R`` to :func:`optimize_R` of ``T``. Raises
    :class:`InvarianceError` when ``(S, T, R)`` is not sparsity invariant,
    since the program would then not be a restriction of the structured
    problem. Solver failures and an unstable projected gain are returned as
    results with a non-optimal status.
    """
    opts = opts or SynthesisOptions()
    T = S if T is None else T
    R = optimize_R(T) if R is None else R
    if S.shape != (sys.m, sys.n):
        raise PatternError(f"S must be {sys.m}x{sys.n}, got {S.shape}")
    verdict = invariance.check(S, T, R)
    if not verdict.holds:
        raise InvarianceError(f"({verdict.reason} at {verdict.violating_index}): not a restriction")
    Rc = closure(R)

    problem = build_restriction(sys, T, Rc, opts.eps)
    sol = solve(problem, opts.solver)
    res = SynthesisResult(sol.status, S, T, R, objective=sol.objective, solver=dict(sol.diagnostics))
    res.solver["eps"] = problem.eps
    if sol.status != OPTIMAL:
        res.message = f"solver returned {sol.status}"
        if sol.status != INACCURATE or not sol.has_values:
            if sol.has_values:
                res.X, res.Y, res.Z = sol.X, sol.Y, sol.Z
            return res
        # near-optimal iterates are still recovered and certified, the
        # status just stays "inaccurate"

    X, Y = sol.X, sol.Y
    res.X, res.Y, res.Z = X, Y, sol.Z
    K_raw = np.linalg.solve(X.T, Y.T).T
    k_scale = float(np.abs(K_raw).max()) if K_raw.size else 0.0
    violation = float(np.abs(np.where(S.bits, 0.0, K_raw)).max()) if K_raw.size else 0.0
    K = np.where(S.bits, K_raw, 0.0)
    P = np.linalg.inv(X)
    P = 0.5 * (P + P.T)
    res.K, res.P = K, P

    stable, abscissa = is_hurwitz(sys.A + sys.B @ K, opts.hurwitz_margin)
    res.residuals = {
        "k_sparsity_max_violation": violation,
        "k_sparsity_rel_violation": violation / k_scale if k_scale else 0.0,
        "spectral_abscissa": abscissa,
        "lyap_lmi_mineig": lyapunov_residual(sys, K, P),
        "sdp_block_min_eig": sol.diagnostics.get("block_min_eig", {}),
    }
    if violation > opts.projection_rtol * max(k_scale, 1e-300):
        res.status = "inaccurate"
        res.message = f"pre-projection violation {violation:.3g} exceeds tolerance"
    if not stable:
        res.status = "unstable"
        res.message = f"A + BK not Hurwitz after projection (abscissa {abscissa:.3g})"
        return res
    res.h2 = h2_norm(sys, K)
    try:
        res.certificate = separability_certificate(P, R)
    except SeparabilityError as exc:
        res.status = "inaccurate"
        res.message = f"separability certificate failed: {exc}"
    return res


def centralized(sys: LinearSystem, opts: Optional[SynthesisOptions] = None) -> SynthesisResult:
    full = SparsityPattern.ones(sys.m, sys.n)
    return synthesize(sys, full, full, SparsityPattern.ones(sys.n), opts)
