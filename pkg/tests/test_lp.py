"""LP engine tests: examples, certification, and oracle equivalence
against exhaustive vertex enumeration.
"""

import itertools

import numpy as np
import pytest

from lshaped.errors import SecondStageInfeasible, SecondStageUnbounded
from lshaped.instance import Scenario, TwoStageProblem
from lshaped.lp import LinearProgram, solve_lp
from lshaped.recourse import SecondStageEngine, solve_second_stage

INF = float("inf")


def test_single_var_cover():
    lp = LinearProgram(c=[1.0], A=[[1.0]], senses=[">="], rhs=[1.0], lb=[0.0], ub=[INF])
    s = solve_lp(lp)
    assert s.optimal
    assert s.x[0] == pytest.approx(1.0, abs=1e-9)
    assert s.objective == pytest.approx(1.0, abs=1e-9)
    assert s.duals[0] == pytest.approx(1.0, abs=1e-8)


def test_single_var_pack():
    lp = LinearProgram(c=[-1.0], A=[[1.0]], senses=["<="], rhs=[2.0], lb=[0.0], ub=[INF])
    s = solve_lp(lp)
    assert s.x[0] == pytest.approx(2.0, abs=1e-9)
    assert s.objective == pytest.approx(-2.0, abs=1e-9)


def test_two_rows_binding_dual():
    # min -2y s.t. y <= 0.5, y <= 1, y >= 0: binding row carries dual -2
    lp = LinearProgram(c=[-2.0], A=[[1.0], [1.0]], senses=["<=", "<="], rhs=[0.5, 1.0], lb=[0.0], ub=[INF])
    s = solve_lp(lp)
    assert s.x[0] == pytest.approx(0.5, abs=1e-9)
    assert s.objective == pytest.approx(-1.0, abs=1e-9)
    assert s.duals == pytest.approx([-2.0, 0.0], abs=1e-8)


def test_infeasible_and_unbounded():
    lp = LinearProgram(c=[1.0, 1.0], A=[[1.0, 1.0]], senses=["="], rhs=[5.0], lb=[0.0, 0.0], ub=[1.0, 1.0])
    assert solve_lp(lp).status == "infeasible"
    lp = LinearProgram(c=[-1.0], A=np.zeros((0, 1)), senses=[], rhs=[], lb=[0.0], ub=[INF])
    assert solve_lp(lp).status == "unbounded"


def _enumerate_vertices(lp: LinearProgram):
    """Brute-force optimum over all basic feasible points of a bounded LP."""
    n = lp.n
    cons = []  # (coeffs, rhs) treated as potential equalities
    for i in range(lp.m):
        cons.append((lp.A[i], lp.rhs[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cons.append((e.copy(), lp.lb[j]))
        cons.append((e.copy(), lp.ub[j]))
    best = None
    for combo in itertools.combinations(range(len(cons)), n):
        M = np.array([cons[i][0] for i in combo])
        b = np.array([cons[i][1] for i in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b)
        if np.any(x < lp.lb - 1e-8) or np.any(x > lp.ub + 1e-8):
            continue
        ok = True
        for i in range(lp.m):
            v = lp.A[i] @ x - lp.rhs[i]
            sense = lp.senses[i]
            if sense == "<=" and v > 1e-8:
                ok = False
            elif sense == ">=" and v < -1e-8:
                ok = False
            elif sense == "=" and abs(v) > 1e-8:
                ok = False
        if not ok:
            continue
        val = float(lp.c @ x)
        if best is None or val < best:
            best = val
    return best


def test_vertex_enumeration_agreement():
    rng = np.random.default_rng(7)
    for trial in range(90):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(0, 7 if n <= 4 else 4))
        A = rng.normal(size=(m, n)).round(2)
        b = rng.normal(size=m).round(2)
        senses = [str(rng.choice(["<=", ">=", "="])) for _ in range(m)]
        lb = np.zeros(n)
        ub = rng.uniform(0.5, 3.0, n).round(2)
        lp = LinearProgram(c=rng.normal(size=n).round(2), A=A, senses=senses, rhs=b, lb=lb, ub=ub)
        sol = solve_lp(lp)
        ref = _enumerate_vertices(lp)
        if ref is None:
            assert sol.status == "infeasible"
        else:
            assert sol.optimal
            assert sol.objective == pytest.approx(ref, abs=1e-7)


def test_determinism():
    rng = np.random.default_rng(3)
    lp = LinearProgram(
        c=rng.normal(size=5), A=rng.normal(size=(3, 5)), senses=["<=", ">=", "="],
        rhs=rng.normal(size=3), lb=np.zeros(5), ub=np.full(5, 2.0),
    )
    a = solve_lp(lp)
    b = solve_lp(lp)
    assert a.status == b.status
    if a.optimal:
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.duals, b.duals)
        assert np.array_equal(a.reduced_costs, b.reduced_costs)


# ----------------------------------------------------------------- recourse


def test_second_stage_examples(tiny):
    sc2, sc4 = tiny.distribution.scenarios
    r = solve_second_stage(tiny, sc2, [0.5])
    assert r.value == pytest.approx(-1.0, abs=1e-9)
    assert r.subgrad[0] == pytest.approx(-2.0, abs=1e-8)
    r = solve_second_stage(tiny, sc4, [0.5])
    assert r.value == pytest.approx(-1.0, abs=1e-9)
    assert r.subgrad[0] == pytest.approx(-2.0, abs=1e-8)
    r = solve_second_stage(tiny, sc2, [3.0])
    assert r.value == pytest.approx(-2.0, abs=1e-9)
    assert r.subgrad[0] == pytest.approx(0.0, abs=1e-8)


def test_dual_feasibility(tiny):
    # reported duals satisfy W'u <= q within tolerance (dual constraint)
    rng = np.random.default_rng(11)
    eng = SecondStageEngine(tiny)
    for _ in range(40):
        x = rng.uniform(0, 10, 1)
        scen = tiny.distribution.scenarios[int(rng.integers(2))]
        res = eng.solve(scen, x)
        _, q, _ = scen.apply(tiny)
        assert np.all(tiny.W.T @ res.dual <= q + 1e-7)


def test_subgradient_inequality(tiny):
    # Q(x'; xi) >= Q(x; xi) + g(x)'(x' - x) - 1e-7 (convexity of Q)
    rng = np.random.default_rng(13)
    eng = SecondStageEngine(tiny)
    for _ in range(60):
        x, xp = rng.uniform(0, 10, 2)
        scen = tiny.distribution.scenarios[int(rng.integers(2))]
        r = eng.solve(scen, [x])
        rp = eng.solve(scen, [xp])
        assert rp.value >= r.value + r.subgrad[0] * (xp - x) - 1e-7


def test_second_stage_infeasible_surfaces():
    # W y = h - T x with W = [1], y >= 0 and negative rhs is infeasible
    prob = TwoStageProblem(
        c=[0.0], A=np.zeros((0, 1)), senses=[], rhs=[], lb=[0.0], ub=[1.0],
        W=[[1.0]], base_T=[[0.0]], base_q=[1.0], base_h=[-1.0],
        distribution=__import__("lshaped.instance", fromlist=["FiniteList"]).FiniteList([Scenario([], 1.0)]),
    )
    with pytest.raises(SecondStageInfeasible):
        solve_second_stage(prob, prob.distribution.scenarios[0], [0.5])


def test_second_stage_unbounded_surfaces():
    prob = TwoStageProblem(
        c=[0.0], A=np.zeros((0, 1)), senses=[], rhs=[], lb=[0.0], ub=[1.0],
        W=[[1.0, -1.0]], base_T=[[0.0]], base_q=[-1.0, 0.0], base_h=[1.0],
        distribution=__import__("lshaped.instance", fromlist=["FiniteList"]).FiniteList([Scenario([], 1.0)]),
    )
    with pytest.raises(SecondStageUnbounded):
        solve_second_stage(prob, prob.distribution.scenarios[0], [0.5])


def test_warm_restart_matches_cold(tiny):
    # chained solves across scenarios/points agree with fresh solves
    rng = np.random.default_rng(17)
    eng = SecondStageEngine(tiny)
    for _ in range(30):
        x = rng.uniform(0, 10, 1)
        scen = tiny.distribution.scenarios[int(rng.integers(2))]
        warm = eng.solve(scen, x)
        cold = solve_second_stage(tiny, scen, x)
        assert warm.value == pytest.approx(cold.value, abs=1e-9)


def test_warm_restart_with_cost_changes():
    # q-stochastic scenarios force resolve_cost + resolve_rhs chains
    from conftest import make_test_instance
    p = make_test_instance(0)  # seed 0 has stochastic q
    assert any(ov[0] == "q" for s in p.distribution.scenarios for ov in s.overrides)
    rng = np.random.default_rng(5)
    eng = SecondStageEngine(p)
    for _ in range(40):
        x = rng.uniform(p.lb, np.minimum(p.ub, 3.0))
        scen = p.distribution.scenarios[int(rng.integers(len(p.distribution.scenarios)))]
        warm = eng.solve(scen, x)
        cold = solve_second_stage(p, scen, x)
        assert warm.value == pytest.approx(cold.value, abs=1e-8)


def test_free_variable_handling():
    lp = LinearProgram(c=[1.0], A=[[1.0]], senses=[">="], rhs=[-3.0], lb=[-INF], ub=[INF])
    s = solve_lp(lp)
    assert s.x[0] == pytest.approx(-3.0, abs=1e-9)
    lp = LinearProgram(c=[-1.0, 2.0], A=[[1.0, 1.0]], senses=["="], rhs=[1.0],
                       lb=[-INF, 0.0], ub=[INF, INF])
    s = solve_lp(lp)
    assert s.objective == pytest.approx(-1.0, abs=1e-9)
    assert s.x == pytest.approx([1.0, 0.0], abs=1e-9)


def test_degenerate_lp_still_solves():
    # many redundant rows through the same vertex: heavy degeneracy
    A = np.array([[1.0, 1.0], [2.0, 2.0], [1.0, 1.0], [3.0, 3.0], [1.0, 0.0]])
    lp = LinearProgram(c=[-1.0, -1.0], A=A, senses=["<="] * 5, rhs=[1.0, 2.0, 1.0, 3.0, 1.0],
                       lb=[0.0, 0.0], ub=[INF, INF])
    s = solve_lp(lp)
    assert s.objective == pytest.approx(-1.0, abs=1e-9)
