"""Convex restriction assembly, solving and SDPA exchange."""

from .backends import (
    INACCURATE,
    INFEASIBLE,
    OPTIMAL,
    SOLVER_ERROR,
    UNBOUNDED,
    SdpSolution,
    SolveOptions,
    check_infeasibility_certificate,
    solve,
)
from .problem import ConicProblem, LmiBlock, MatrixVar, assemble, build_restriction, default_eps
from .sdpa import SdpaParseError, export_sdpa, parse_sdpa, solve_sdpa

__all__ = [
    "ConicProblem", "LmiBlock", "MatrixVar", "SdpSolution", "SolveOptions", "SdpaParseError",
    "assemble", "build_restriction", "check_infeasibility_certificate", "default_eps",
    "export_sdpa", "parse_sdpa", "solve", "solve_sdpa",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "INACCURATE", "SOLVER_ERROR",
]
