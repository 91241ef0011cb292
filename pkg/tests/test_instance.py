"""Problem model: validation, generators, extensive form, distributions."""

import numpy as np
import pytest

from conftest import box_grid, make_test_instance, tiny_f
from lshaped.errors import (
    BadInput,
    BadParameter,
    BadProbabilities,
    EnumerationCapExceeded,
    TooLarge,
    UnboundedFirstStage,
)
from lshaped.instance import (
    FiniteList,
    IndependentDiscrete,
    Scenario,
    TwoStageProblem,
    build_extensive_form,
    gen_inventory,
    gen_random,
    validate,
)
from lshaped.lp import solve_lp
from lshaped.oracle import Estimator, exact_objective, exact_sample_set

INF = float("inf")


def test_validate_tiny(tiny):
    rep = validate(tiny)
    assert rep.feasible
    assert rep.diameter == pytest.approx(10.0)
    assert rep.scenario_count == 2


def test_validate_unbounded():
    p = TwoStageProblem(
        c=[1.0], A=np.zeros((0, 1)), senses=[], rhs=[], lb=[0.0], ub=[INF],
        W=[[1.0]], base_T=[[0.0]], base_q=[0.0], base_h=[0.0],
        distribution=FiniteList([Scenario([], 1.0)]),
    )
    with pytest.raises(UnboundedFirstStage):
        validate(p)


def test_validate_implied_bound_from_row():
    # x free above but a budget row implies x <= 5 after tightening
    p = TwoStageProblem(
        c=[1.0], A=[[2.0]], senses=["<="], rhs=[10.0], lb=[0.0], ub=[INF],
        W=[[1.0]], base_T=[[0.0]], base_q=[0.0], base_h=[0.0],
        distribution=FiniteList([Scenario([], 1.0)]),
    )
    rep = validate(p)
    assert rep.ub_tight[0] == pytest.approx(5.0)
    assert rep.diameter == pytest.approx(5.0)


def test_validate_bad_probabilities(tiny):
    bad = FiniteList([Scenario([], 0.5), Scenario([], 0.4)])
    p = TwoStageProblem(
        c=tiny.c, A=tiny.A, senses=tiny.senses, rhs=tiny.rhs, lb=tiny.lb, ub=tiny.ub,
        W=tiny.W, base_T=tiny.base_T, base_q=tiny.base_q, base_h=tiny.base_h,
        distribution=bad,
    )
    with pytest.raises(BadProbabilities):
        validate(p)


def test_tiny_closed_form_against_grid(tiny):
    # independent oracle: closed form vs grid brute force vs LP-based f
    xs = np.arange(0.0, 10.0001, 1e-3)
    vals = np.array([tiny_f(float(x)) for x in xs])
    i = int(np.argmin(vals))
    assert xs[i] == pytest.approx(1.0, abs=1e-3)
    assert vals[i] == pytest.approx(-0.9, abs=1e-9)
    for x in (0.0, 0.5, 1.0, 1.7, 3.0, 8.2):
        assert exact_objective(tiny, [x]) == pytest.approx(tiny_f(x), abs=1e-9)
    assert tiny_f(0.5) == pytest.approx(-0.45)


def test_deterministic_variant_closed_form():
    p = gen_inventory(n=1, p=1.0, h=0.1, b=10.0, s=2.0, r=0.5, customer_table=[(1.0, [2.0])])
    sol = solve_lp(build_extensive_form(p))
    assert sol.objective == pytest.approx(-0.9, abs=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    for x in (0.0, 0.7, 1.5):
        assert exact_objective(p, [x]) == pytest.approx(1.1 * x - 2 * min(x, 1.0), abs=1e-9)


def test_gen_inventory_parameter_errors():
    with pytest.raises(BadParameter):
        gen_inventory(1, p=-1.0, h=0.1, b=10, s=2.0, r=0.5, customer_table=[(1.0, [2.0])])
    with pytest.raises(BadParameter):
        gen_inventory(1, p=1.0, h=0.1, b=10, s=2.0, r=1.5, customer_table=[(1.0, [2.0])])
    with pytest.raises(BadParameter):
        gen_inventory(1, p=1.0, h=0.1, b=10, s=2.0, r=0.5)  # no customer distribution


def test_gen_inventory_randomized_validates():
    rng = np.random.default_rng(23)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        table = []
        k = int(rng.integers(1, 5))
        probs = rng.random(k) + 0.05
        probs /= probs.sum()
        probs[-1] = 1.0 - probs[:-1].sum()
        for i in range(k):
            table.append((float(probs[i]), rng.uniform(0, 6, n)))
        p = gen_inventory(
            n=n,
            p=rng.uniform(0.2, 3.0, n),
            h=rng.uniform(0.01, 1.0, n),
            b=float(rng.uniform(1.0, 50.0)),
            s=rng.uniform(0.5, 4.0, n),
            r=float(rng.uniform(0.05, 0.95)),
            customer_table=table,
        )
        rep = validate(p)
        assert rep.feasible and np.isfinite(rep.diameter)


def test_extensive_form_tiny(tiny):
    lp = build_extensive_form(tiny)
    # x plus one sale variable per scenario = 3 structural columns
    assert tiny.second_stage_structural == 1
    assert 1 + 2 * tiny.second_stage_structural == 3
    assert lp.n == 1 + 2 * tiny.l
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-0.9, abs=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)


def test_extensive_form_single_scenario(tiny):
    only = [Scenario(list(tiny.distribution.scenarios[0].overrides), 1.0)]
    sol = solve_lp(build_extensive_form(tiny, scenarios=only))
    assert sol.objective == pytest.approx(-0.9, abs=1e-9)


def test_extensive_form_degenerate_inputs(tiny):
    with pytest.raises(BadInput):
        build_extensive_form(tiny, scenarios=[])
    with pytest.raises(TooLarge):
        build_extensive_form(tiny, cap=3)
    bad = [Scenario([], 0.4), Scenario([], 0.4)]
    with pytest.raises(BadInput):
        build_extensive_form(tiny, scenarios=bad)


def test_extensive_equals_exhaustive_min():
    # extensive optimum == min_x f(x) with f from exhaustive second-stage
    # solves, to 1e-8 relative: (a) f at the extensive argmin reproduces the
    # optimum, (b) no grid point does better
    for seed in (0, 4, 9):
        p = gen_random(seed, n=2, r_rows=2, l_extra=2, n_scenarios=8)
        rep = validate(p)
        sol = solve_lp(build_extensive_form(p))
        est = Estimator(p)
        full = exact_sample_set(p)
        f_at_argmin = est.estimate(full, sol.x[: p.n]).value
        assert abs(f_at_argmin - sol.objective) <= 1e-8 * (1 + abs(sol.objective))
        grid = box_grid(rep.lb_tight, rep.ub_tight, 41)
        for x in grid:
            assert est.estimate(full, x).value >= sol.objective - 1e-8


def test_scenario_apply_is_pure(tiny):
    scen = tiny.distribution.scenarios[0]
    h_before = tiny.base_h.copy()
    T1, q1, h1 = scen.apply(tiny)
    T2, q2, h2 = scen.apply(tiny)
    assert np.array_equal(h1, h2) and np.array_equal(T1, T2) and np.array_equal(q1, q2)
    assert np.array_equal(tiny.base_h, h_before)
    h1[0] = 99.0
    assert np.array_equal(tiny.base_h, h_before)


def test_independent_distribution_enumeration_cap():
    marg = [(("h", i, 0), [0.0, 1.0], [0.5, 0.5]) for i in range(3)]
    dist = IndependentDiscrete(marg)
    assert dist.scenario_count() == 8
    assert len(dist.enumerate()) == 8
    weights = [s.weight for s in dist.enumerate()]
    assert sum(weights) == pytest.approx(1.0)
    with pytest.raises(EnumerationCapExceeded):
        dist.enumerate(cap=7)


def test_address_range_checked(tiny):
    bad = FiniteList([Scenario([("h", 99, 0, 1.0)], 1.0)])
    p = TwoStageProblem(
        c=tiny.c, A=tiny.A, senses=tiny.senses, rhs=tiny.rhs, lb=tiny.lb, ub=tiny.ub,
        W=tiny.W, base_T=tiny.base_T, base_q=tiny.base_q, base_h=tiny.base_h,
        distribution=bad,
    )
    with pytest.raises(BadInput):
        validate(p)


def test_generated_instances_validate():
    for seed in range(10):
        rep = validate(make_test_instance(seed))
        assert rep.feasible
