from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import scipy.linalg as sla

from sparsinv.bench import example1
from sparsinv.sdp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    ConicProblem,
    MatrixVar,
    SdpaParseError,
    SolveOptions,
    assemble,
    build_restriction,
    default_eps,
    export_sdpa,
    parse_sdpa,
    solve,
    solve_sdpa,
)
from sparsinv.sparsity import PatternError, SparsityPattern, closure
from sparsinv.synthesis import LinearSystem

P = SparsityPattern
SYS1, S1, T1, R1 = example1()
BACKENDS = ["clarabel", "cvxopt"]

# Optimum of the Example 1 restriction, from an independent cvxpy model
# solved by SCS and by CVXOPT (both 18.03287, no strictness margin). The
# margin of the default eps raises the optimum by about 1.4e-4.
EX1_OBJ_NO_MARGIN = 18.03287
EX1_OBJ = 18.03301


def lqr_cost(sys) -> float:
    """Optimal centralized H2 cost from the Riccati equation (C'D = 0 here)."""
    X = sla.solve_continuous_are(sys.A, sys.B, sys.C.T @ sys.C, sys.D.T @ sys.D)
    return float(np.trace(sys.H.T @ X @ sys.H))


def scalar_problem(objective, block):
    v = [MatrixVar("x", 1, 1, P.ones(1))]
    return assemble(v, lambda x: objective(x[0, 0]), [("b", lambda x: block(x[0, 0]))])


def random_stable_system(rng, n, m):
    A = rng.standard_normal((n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
    B = rng.standard_normal((n, m))
    return LinearSystem(A, B, np.eye(n), np.vstack([np.eye(n), np.zeros((m, n))]),
                        np.vstack([np.zeros((n, m)), np.eye(m)]))


class TestBuild:
    def test_block_sizes_and_masks(self):
        p = build_restriction(SYS1, T1, R1)
        assert [b.size for b in p.blocks] == [6, 3, 3]
        names = {name for name, _, _ in p.index}
        assert names == {"X", "Y", "Z"}
        x_entries = [(i, j) for name, i, j in p.index if name == "X"]
        assert x_entries == [(0, 0), (0, 1), (1, 1), (2, 2)]
        y_entries = [(i, j) for name, i, j in p.index if name == "Y"]
        assert y_entries == T1.support()

    def test_objective_is_affine_trace(self):
        p = build_restriction(SYS1, T1, R1)
        rng = np.random.default_rng(0)
        x = rng.standard_normal(p.n_vars)
        v = p.unpack(x)
        X, Y, Z = v["X"], v["Y"], v["Z"]
        C, D = SYS1.C, SYS1.D
        expected = np.trace(C @ X @ C.T + D @ Y @ C.T + C @ Y.T @ D.T + D @ Z @ D.T)
        assert p.objective(x) == pytest.approx(expected, abs=1e-12)

    def test_default_eps(self):
        assert default_eps(SYS1.A, SYS1.H) == pytest.approx(8e-6)
        assert build_restriction(SYS1, T1, R1).eps == pytest.approx(8e-6)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_eps_must_be_positive(self, eps):
        with pytest.raises(ValueError):
            build_restriction(SYS1, T1, R1, eps=eps)

    def test_requires_closed_r(self):
        path = P([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
        with pytest.raises(PatternError):
            build_restriction(SYS1, T1, path)

    def test_shapes(self):
        with pytest.raises(PatternError):
            build_restriction(SYS1, P.ones(2, 3), R1)
        with pytest.raises(PatternError):
            build_restriction(SYS1, T1, P.ones(2))


class TestBackendConventions:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_off_diagonal_scaling(self, backend):
        # min x s.t. [[1, x], [x, 1]] >= 0 has optimum -1
        p = scalar_problem(lambda x: x, lambda x: np.array([[1.0, x], [x, 1.0]]))
        sol = solve(p, SolveOptions(backend=backend))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(-1.0, abs=1e-6)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_three_by_three(self, backend):
        # min x s.t. [[2, x, 0], [x, 2, x], [0, x, 2]] >= 0: eigenvalues 2 +- sqrt(2)|x|
        blk = lambda x: np.array([[2.0, x, 0.0], [x, 2.0, x], [0.0, x, 2.0]])
        sol = solve(scalar_problem(lambda x: x, blk), SolveOptions(backend=backend))
        assert sol.objective == pytest.approx(-np.sqrt(2.0), abs=1e-6)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_unbounded(self, backend):
        p = scalar_problem(lambda x: -x, lambda x: np.array([[x]]))
        assert solve(p, SolveOptions(backend=backend)).status == UNBOUNDED

    def test_presolve_unbounded(self):
        v = [MatrixVar("x", 2, 1, P.ones(2, 1))]
        p = assemble(v, lambda x: x[1, 0], [("b", lambda x: np.array([[1.0 + x[0, 0]]]))])
        sol = solve(p)
        assert sol.status == UNBOUNDED and sol.diagnostics["backend"] == "presolve"

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            solve(scalar_problem(lambda x: x, lambda x: np.array([[x]])), SolveOptions(backend="nope"))


class TestExample1:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_restriction_optimum(self, backend):
        p = build_restriction(SYS1, T1, R1)
        sol = solve(p, SolveOptions(backend=backend))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(EX1_OBJ, abs=2e-4)
        assert sol.objective >= EX1_OBJ_NO_MARGIN - 1e-5

    def test_masked_entries_exactly_zero(self):
        sol = solve(build_restriction(SYS1, T1, R1))
        assert np.all(sol.X[~R1.bits] == 0.0)
        assert np.all(sol.Y[~T1.bits] == 0.0)

    def test_post_hoc_eigenvalues(self):
        sol = solve(build_restriction(SYS1, T1, R1))
        assert min(sol.diagnostics["block_min_eig"].values()) >= -1e-6
        X, Y, Z = sol.X, sol.Y, sol.Z
        eps = build_restriction(SYS1, T1, R1).eps
        lyap = -(SYS1.A @ X + X @ SYS1.A.T + SYS1.B @ Y + Y.T @ SYS1.B.T + np.eye(3))
        assert np.linalg.eigvalsh(lyap)[0] >= eps - 1e-6
        assert np.linalg.eigvalsh(np.block([[Z, Y], [Y.T, X]]))[0] >= -1e-6

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_centralized_matches_riccati(self, backend):
        sol = solve(build_restriction(SYS1, P.ones(3), P.ones(3)), SolveOptions(backend=backend))
        assert sol.status == OPTIMAL
        ref = lqr_cost(SYS1)
        assert ref == pytest.approx(11.44292, abs=1e-5)
        assert sol.objective == pytest.approx(ref, rel=1e-4)
        assert sol.objective >= ref - 1e-6

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_diagonal_restriction_infeasible(self, backend):
        sol = solve(build_restriction(SYS1, S1, P.identity(3)), SolveOptions(backend=backend))
        assert sol.status == INFEASIBLE
        cert = sol.diagnostics["certificate"]
        assert cert["valid"] and cert["const_term"] < 0
        assert not sol.has_values

    def test_nested_patterns_never_worse(self):
        chain_T = [P([[1, 0, 0], [0, 1, 0], [0, 0, 1]]), P([[1, 1, 0], [0, 1, 0], [0, 0, 1]]), T1]
        objs = []
        for T in chain_T:
            sol = solve(build_restriction(SYS1, T, R1))
            objs.append(sol.objective if sol.status == OPTIMAL else np.inf)
        objs.append(solve(build_restriction(SYS1, P.ones(3), P.ones(3))).objective)
        assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))
        assert np.isfinite(objs[-2])


def test_monotone_on_random_systems():
    rng = np.random.default_rng(12)
    for _ in range(5):
        n, m = 4, 2
        sysm = random_stable_system(rng, n, m)
        T_small = P(rng.random((m, n)) < 0.4)
        T_big = P(T_small.bits | (rng.random((m, n)) < 0.4))
        R_small = P.identity(n)
        R_big = closure(P([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]))
        vals = []
        for T, R in [(T_small, R_small), (T_big, R_small), (T_big, R_big), (P.ones(m, n), P.ones(n))]:
            sol = solve(build_restriction(sysm, T, R))
            assert sol.status in (OPTIMAL, INFEASIBLE)
            # an infeasible restriction counts as +inf
            vals.append(sol.objective if sol.status == OPTIMAL else np.inf)
        assert all(b <= a + 1e-6 * (1 + abs(b)) for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(lqr_cost(sysm), rel=1e-4)


def test_concurrent_solves_are_independent():
    problems = [build_restriction(SYS1, T1, R1), build_restriction(SYS1, P.ones(3), P.ones(3))] * 3
    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(solve, problems))
    serial = [solve(p) for p in problems[:2]]
    for k, res in enumerate(results):
        assert res.objective == pytest.approx(serial[k % 2].objective, abs=1e-8)


class TestSdpa:
    def test_round_trip_data(self):
        p = build_restriction(SYS1, T1, R1)
        q = parse_sdpa(export_sdpa(p))
        assert q.index == p.index
        assert np.array_equal(q.c, p.c) and q.offset == p.offset
        assert [b.name for b in q.blocks] == [b.name for b in p.blocks]
        for a, b in zip(p.blocks, q.blocks):
            assert np.array_equal(a.const, b.const)
            assert np.array_equal(a.coef.toarray(), b.coef.toarray())
        assert [v.mask for v in q.variables] == [v.mask for v in p.variables]

    def test_byte_stable(self):
        a = export_sdpa(build_restriction(SYS1, T1, R1))
        b = export_sdpa(build_restriction(SYS1, T1, R1))
        assert a == b

    def test_masked_entries_absent(self):
        text = export_sdpa(build_restriction(SYS1, T1, R1))
        assert "* var" in text
        assert "X 0 2" not in text and "Y 0 2" not in text

    def test_external_route_matches_embedded(self):
        p = build_restriction(SYS1, T1, R1)
        embedded = solve(p)
        external = solve_sdpa(export_sdpa(p))
        assert external.diagnostics["backend"] == "cvxopt"
        assert external.objective == pytest.approx(embedded.objective, rel=1e-5)
        assert np.allclose(external.X[~R1.bits], 0.0)

    def test_header_only(self):
        p = ConicProblem([], [], np.zeros(0), [])
        text = export_sdpa(p)
        assert "0 = mDIM" in text and "0 = nBLOCK" in text
        q = parse_sdpa(text)
        assert q.n_vars == 0 and q.blocks == []
        assert solve(q).status == OPTIMAL

    def test_plain_sdpa_file(self):
        text = '"min x s.t. [[1, x], [x, 1]] >= 0"\n1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n{1.0}\n0 1 1 1 -1.0\n0 1 2 2 -1.0\n1 1 1 2 1.0\n'
        q = parse_sdpa(text)
        assert q.variables[0].name == "x"
        sol = solve_sdpa(text)
        assert sol.objective == pytest.approx(-1.0, abs=1e-6)

    @pytest.mark.parametrize(
        "text",
        ["", "1 = mDIM\n", "1 = mDIM\n1 = nBLOCK\n-2 = bLOCKsTRUCT\n{1}\n",
         "1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n{1}\n1 1 1\n"],
        ids=["empty", "truncated", "diagonal-block", "short-entry"],
    )
    def test_parse_errors(self, text):
        with pytest.raises(SdpaParseError):
            parse_sdpa(text)
