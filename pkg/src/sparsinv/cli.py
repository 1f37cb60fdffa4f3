"""Command-line front end.

Exit codes: 0 success, 1 valid but negative outcome (invariance violated,
no optimal controller, oracle mismatch), 2 unreadable input, 3 input that
parses but breaks a contract (shapes, non-restrictions, size limits).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import bench, invariance
from .sdp import SolveOptions
from .sparsity import PatternError, SparsityPattern
from .structure_opt import DEFAULT_N_LIMIT, optimize_R, verify_optimality
from .synthesis import InvarianceError, LinearSystem, SynthesisOptions, synthesize
from .witness import WitnessConfig, WitnessError

EXIT_OK, EXIT_NEGATIVE, EXIT_PARSE, EXIT_CONTRACT = 0, 1, 2, 3

log = logging.getLogger("sparsinv")


class InputError(Exception):
    """Input file could not be read or decoded."""


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def load_problem(path: str) -> dict:
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: problem file must hold a JSON object")
    return data


def load_pattern(path: str) -> SparsityPattern:
    """A pattern file holds a JSON array of 0/1 rows or plain ``0101`` text rows."""
    text = _read(path)
    try:
        if not text.lstrip().startswith(("[", "{")):
            return SparsityPattern.from_text(text)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        if isinstance(data, dict):
            for key in ("T", "S", "R"):
                if key in data:
                    return SparsityPattern.from_json(data[key])
            raise InputError(f"{path}: object has no pattern key")
        return SparsityPattern.from_json(data)
    except PatternError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _pattern_field(problem: dict, key: str) -> Optional[SparsityPattern]:
    if problem.get(key) is None:
        return None
    try:
        return SparsityPattern.from_json(problem[key])
    except PatternError as exc:
        raise InputError(f"field {key}: {exc}") from exc


def _system(problem: dict) -> LinearSystem:
    missing = [k for k in "ABHCD" if k not in problem]
    if missing:
        raise InputError(f"problem lacks {', '.join(missing)}")
    try:
        mats = [np.asarray(problem[k], dtype=float) for k in "ABHCD"]
    except (TypeError, ValueError) as exc:
        raise InputError(f"matrices must be arrays of numbers: {exc}") from exc
    if any(M.ndim != 2 for M in mats):
        raise InputError("matrices must be rectangular arrays of arrays")
    return LinearSystem(*mats)


def _patterns(problem: dict, args) -> tuple:
    S = _pattern_field(problem, "S")
    T = load_pattern(args.T) if getattr(args, "T", None) else _pattern_field(problem, "T")
    R = load_pattern(args.R) if getattr(args, "R", None) else _pattern_field(problem, "R")
    if S is None:
        raise InputError("problem lacks S")
    return S, T, R


_FLAT_LIST = re.compile(r"\[\s+([^\[\]{}]*?)\s+\]")


def dumps(obj) -> str:
    """Indented JSON with each innermost array kept on one line."""
    text = json.dumps(obj, indent=2)
    return _FLAT_LIST.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]", text)


def _emit(obj, out: Optional[str] = None) -> None:
    text = dumps(obj)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_check_invariance(args) -> int:
    problem = load_problem(args.problem)
    S, T, R = _patterns(problem, args)
    T = S if T is None else T
    R = optimize_R(T) if R is None else R
    cfg = WitnessConfig(seed=args.seed)
    verdict = invariance.check(S, T, R, with_counterexample=args.counterexample, cfg=cfg)
    out = verdict.to_dict()
    if args.counterexample and verdict.counterexample is not None:
        X, Y = verdict.counterexample
        K = np.linalg.solve(X.T, Y.T).T
        out["counterexample"]["max_outside_S"] = float(np.abs(np.where(S.bits, 0.0, K)).max())
    _emit(out)
    return EXIT_OK if verdict.holds else EXIT_NEGATIVE


def cmd_optimize_structure(args) -> int:
    T = load_pattern(args.T)
    R = optimize_R(T)
    out = {"R": R.to_list()}
    code = EXIT_OK
    if args.verify_oracle:
        if T.cols > args.n_limit:
            raise ValueError(f"oracle limited to n <= {args.n_limit}, got n = {T.cols}")
        report = verify_optimality(T, args.n_limit)
        out["oracle"] = report.to_dict()
        code = EXIT_OK if report.matches_oracle and report.dominates_all else EXIT_NEGATIVE
    if args.json or args.verify_oracle:
        _emit(out)
    else:
        print(R.to_text())
    return code


def _solver_opts(args) -> SolveOptions:
    return SolveOptions(backend=args.backend, max_iter=args.max_iter)


def cmd_synthesize(args) -> int:
    problem = load_problem(args.problem)
    sysm = _system(problem)
    opts = SynthesisOptions(eps=args.eps, solver=_solver_opts(args))
    if args.centralized:
        full = SparsityPattern.ones(sysm.m, sysm.n)
        S, T, R = full, full, SparsityPattern.ones(sysm.n)
    else:
        S, T, R = _patterns(problem, args)
    t0 = time.perf_counter()
    res = synthesize(sysm, S, T, R, opts)
    d = res.to_dict()
    d["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    _emit(d, args.out)
    if args.out:
        print(f"{res.status} h2={res.h2} objective={res.objective}")
    return EXIT_OK if res.ok else EXIT_NEGATIVE


def _parse_L(text: str, nodes: int) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if any(not 0 <= L <= nodes for L in out):
        raise ValueError(f"L values must lie in [0, {nodes}]")
    return out


def cmd_bench_mesh(args) -> int:
    nodes = args.n * args.n
    try:
        Ls = _parse_L(args.L, nodes) if args.L else list(range(nodes + 1))
        order = tuple(int(k) for k in args.reveal_order.split(",")) if args.reveal_order else None
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    base = bench.MeshSpec(args.n, args.alpha, 0, order)
    opts = SynthesisOptions(solver=_solver_opts(args))
    t0 = time.perf_counter()
    rows = bench.sweep(base, Ls, methods, opts, jobs=args.jobs)
    csv_text = bench.rows_to_csv(rows, wall_time=not args.no_timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.gnuplot:
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(bench.rows_to_gnuplot(rows))
    log.info("sweep of %d cells took %.1f s", len(rows), time.perf_counter() - t0)
    return EXIT_OK if all(r.status == "optimal" for r in rows) else EXIT_NEGATIVE


def cmd_bench_example1(args) -> int:
    _emit(bench.example1_problem(), args.out)
    return EXIT_OK


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="clarabel", choices=["clarabel", "cvxopt"])
    p.add_argument("--max-iter", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsinv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-invariance", help="test whether (S, T, R) is sparsity invariant")
    p.add_argument("--problem", required=True, help="problem JSON providing S (and optionally T, R)")
    p.add_argument("--T", help="pattern file overriding T")
    p.add_argument("--R", help="pattern file overriding R")
    p.add_argument("--counterexample", action="store_true", help="emit a witness pair when violated")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_invariance)

    p = sub.add_parser("optimize-structure", help="print the maximal closed R for T")
    p.add_argument("--T", required=True, help="pattern file (JSON array, text rows, or problem JSON)")
    p.add_argument("--verify-oracle", action="store_true", help="compare against set-partition enumeration")
    p.add_argument("--n-limit", type=int, default=DEFAULT_N_LIMIT)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize_structure)

    p = sub.add_parser("synthesize", help="solve the restricted H2 program")
    p.add_argument("--problem", required=True)
    p.add_argument("--T", help="pattern file overriding T")
    p.add_argument("--R", help="pattern file overriding R")
    p.add_argument("--eps", type=float, default=None, help="strictness margin of the LMIs")
    p.add_argument("--centralized", action="store_true", help="ignore S, T, R and use full patterns")
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("bench", help="benchmark generators and sweeps")
    bsub = p.add_subparsers(dest="bench_command", required=True)
    m = bsub.add_parser("mesh", help="sweep L for the mesh network")
    m.add_argument("--n", type=int, default=4, help="grid side")
    m.add_argument("--alpha", type=float, default=bench.DEFAULT_ALPHA)
    m.add_argument("--methods", default=",".join(bench.METHODS))
    m.add_argument("--L", help="e.g. '0-16' or '0,4,8'; default all")
    m.add_argument("--reveal-order", help="comma separated 0-based node order")
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--out", help="CSV path; stdout when omitted")
    m.add_argument("--gnuplot", help="also write a whitespace table of h2 per method")
    m.add_argument("--no-timing", action="store_true", help="blank wall_ms for byte-stable output")
    _add_solver_flags(m)
    m.set_defaults(func=cmd_bench_mesh)
    e = bsub.add_parser("example1", help="write the three-state example as a problem file")
    e.add_argument("--out")
    e.set_defaults(func=cmd_bench_example1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvarianceError, PatternError, WitnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
