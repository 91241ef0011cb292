"""SMPS triplet parsing and native-format round trips."""

import numpy as np
import pytest

from conftest import make_test_instance
from lshaped.errors import (
    BadProbabilities,
    MalformedDocument,
    MalformedLine,
    StochasticRecourse,
    UnknownRowOrColumn,
    UnsupportedSection,
)
from lshaped.instance import BlockDiscrete, IndependentDiscrete, tiny_inventory
from lshaped.lp import solve_lp
from lshaped.instance import build_extensive_form
from lshaped.smps import SmpsTriplet, parse_native, parse_smps, write_native

CORE = """* tiny inventory, one item
NAME          TINYINV
ROWS
 N  COST
 L  BUDGET
 L  LINK
 L  CAP
COLUMNS
    X1        COST      1.1        BUDGET    1.0
    X1        LINK      -1.0
    Y1        COST      -2.0       LINK      1.0
    Y1        CAP       1.0
RHS
    RHS       BUDGET    10.0       LINK      0.0
    RHS       CAP       1.0
BOUNDS
 UP BND       X1        10.0
ENDATA
"""

TIME = """TIME          TINYINV
PERIODS       IMPLICIT
    X1        BUDGET                 PERIOD1
    Y1        LINK                   PERIOD2
ENDATA
"""

STOCH = """STOCH         TINYINV
INDEP         DISCRETE
    RHS       CAP       1.0        PERIOD2   0.5
    RHS       CAP       2.0        PERIOD2   0.5
ENDATA
"""


def triplet(core=CORE, time=TIME, stoch=STOCH):
    return SmpsTriplet(core, time, stoch, "core", "time", "stoch")


def test_parse_tiny_dimensions_and_optimum():
    p = parse_smps(triplet())
    assert (p.n, p.m, p.second_stage_structural, p.r) == (1, 1, 1, 2)
    assert p.l == 3  # two slack columns appended for the <= rows
    assert p.distribution.scenario_count() == 2
    assert solve_lp(build_extensive_form(p)).objective == pytest.approx(-0.9, abs=1e-9)


def test_stage_split_is_partition():
    p = parse_smps(triplet())
    assert set(p.first_stage_names) == {"X1"}
    assert set(p.second_stage_names) == {"Y1"}
    assert not set(p.first_stage_names) & set(p.second_stage_names)


def test_empty_stoch_is_deterministic():
    p = parse_smps(triplet(stoch="STOCH  TINYINV\nENDATA\n"))
    assert p.distribution.scenario_count() == 1
    assert p.distribution.scenarios[0].weight == 1.0


def test_stochastic_recourse_rejected():
    bad = """STOCH  TINYINV
INDEP  DISCRETE
    Y1        CAP       1.0     0.5
    Y1        CAP       2.0     0.5
ENDATA
"""
    with pytest.raises(StochasticRecourse):
        parse_smps(triplet(stoch=bad))


def test_indep_probability_sum_checked():
    bad = STOCH.replace("0.5\nENDATA", "0.4\nENDATA")
    with pytest.raises(BadProbabilities):
        parse_smps(triplet(stoch=bad))


def test_whitespace_and_blank_line_insensitive():
    noisy = CORE.replace("\n", "   \n").replace("ROWS", "ROWS\n\n")
    p1 = parse_smps(triplet())
    p2 = parse_smps(triplet(core=noisy))
    assert np.array_equal(p1.W, p2.W)
    assert np.array_equal(p1.base_h, p2.base_h)


def test_blocks_section():
    stoch = """STOCH  TINYINV
BLOCKS  DISCRETE
 BL BLK1  PERIOD2  0.5
    RHS       CAP       1.0
 BL BLK1  PERIOD2  0.5
    RHS       CAP       2.0
ENDATA
"""
    p = parse_smps(triplet(stoch=stoch))
    assert isinstance(p.distribution, BlockDiscrete)
    assert p.distribution.scenario_count() == 2
    assert solve_lp(build_extensive_form(p)).objective == pytest.approx(-0.9, abs=1e-9)


def test_mixed_indep_and_blocks_become_blocks():
    stoch = """STOCH  TINYINV
BLOCKS  DISCRETE
 BL BLK1  PERIOD2  0.5
    RHS       CAP       1.0
 BL BLK1  PERIOD2  0.5
    RHS       CAP       2.0
INDEP  DISCRETE
    RHS       LINK      0.0       0.7
    RHS       LINK      0.5       0.3
ENDATA
"""
    p = parse_smps(triplet(stoch=stoch))
    assert isinstance(p.distribution, BlockDiscrete)
    assert p.distribution.scenario_count() == 4


def test_scenarios_section_unsupported():
    with pytest.raises(UnsupportedSection):
        parse_smps(triplet(stoch="STOCH X\nSCENARIOS DISCRETE\nENDATA\n"))


def test_second_n_row_rejected():
    bad = CORE.replace(" L  BUDGET", " N  COST2\n L  BUDGET")
    with pytest.raises(UnsupportedSection):
        parse_smps(triplet(core=bad))


def test_unknown_row_in_stoch():
    bad = STOCH.replace("CAP", "NOPE")
    with pytest.raises(UnknownRowOrColumn):
        parse_smps(triplet(stoch=bad))


def test_malformed_line_carries_position():
    bad = CORE.replace("    Y1        CAP       1.0", "    Y1        CAP")
    with pytest.raises(MalformedLine) as exc:
        parse_smps(triplet(core=bad))
    assert "core:" in str(exc.value)


def test_three_periods_rejected():
    bad = TIME.replace("ENDATA", "    Z1        W1                     PERIOD3\nENDATA")
    with pytest.raises(UnsupportedSection):
        parse_smps(triplet(time=bad))


def test_first_stage_ranges_duplicate_row():
    core = CORE.replace("BOUNDS", "RANGES\n    RNG       BUDGET    4.0\nBOUNDS")
    p = parse_smps(triplet(core=core))
    assert p.m == 2  # BUDGET <= 10 plus implied BUDGET >= 6
    assert sorted(p.senses) == ["<=", ">="]
    assert solve_lp(build_extensive_form(p)).optimal


def test_second_stage_upper_bound_becomes_row():
    core = CORE.replace(" UP BND       X1        10.0", " UP BND       X1        10.0\n UP BND       Y1        0.8")
    p = parse_smps(triplet(core=core))
    assert p.r == 3  # extra row y <= 0.8
    sol = solve_lp(build_extensive_form(p))
    # selling now caps at 0.8 in both scenarios: f(x) = 1.1x - 2*min(x, 0.8)
    assert sol.objective == pytest.approx(1.1 * 0.8 - 2 * 0.8, abs=1e-8)


def test_lands_shaped_synthetic_dimensions():
    """Synthetic triplet with the LandS shape: (4, 2, 12, 7), 10^6 scenarios."""
    rows = [" N  OBJ", " G  MINCAP", " L  BUDGET"]
    rows += [f" L  CAP{i}" for i in range(1, 5)]
    rows += [f" G  DEM{j}" for j in range(1, 4)]
    cols = []
    for i in range(1, 5):
        cols.append(f"    X{i}        OBJ       {[10.0,7.0,16.0,6.0][i-1]}      MINCAP    1.0")
        cols.append(f"    X{i}        BUDGET    {[10.0,7.0,16.0,6.0][i-1]}      CAP{i}      -1.0")
    for i in range(1, 5):
        for j in range(1, 4):
            cols.append(f"    Y{i}{j}       OBJ       {1.0+i+0.1*j}      CAP{i}      1.0")
            cols.append(f"    Y{i}{j}       DEM{j}      1.0")
    core = "NAME  SYNTH\nROWS\n" + "\n".join(rows) + "\nCOLUMNS\n" + "\n".join(cols)
    core += "\nRHS\n    RHS       MINCAP    12.0      BUDGET    120.0\n"
    core += "    RHS       DEM1      3.0       DEM2      2.0\n    RHS       DEM3      1.0\nENDATA\n"
    time = "TIME SYNTH\nPERIODS IMPLICIT\n    X1  MINCAP  P1\n    Y11  CAP1  P2\nENDATA\n"
    lines = ["STOCH SYNTH", "INDEP DISCRETE"]
    for j in range(1, 4):
        for kk in range(100):
            lines.append(f"    RHS   DEM{j}   {0.04*kk:.2f}   P2   0.01")
    stoch = "\n".join(lines) + "\nENDATA\n"
    p = parse_smps(SmpsTriplet(core, time, stoch))
    assert (p.n, p.m, p.second_stage_structural, p.r) == (4, 2, 12, 7)
    assert p.distribution.scenario_count() == 10**6
    assert isinstance(p.distribution, IndependentDiscrete)


# ----------------------------------------------------------------- native


def test_native_round_trip_tiny(tiny):
    text = write_native(tiny)
    p2 = parse_native(text)
    assert write_native(p2) == text
    for a, b in ((tiny.W, p2.W), (tiny.base_T, p2.base_T), (tiny.base_q, p2.base_q),
                 (tiny.base_h, p2.base_h), (tiny.c, p2.c), (tiny.lb, p2.lb), (tiny.ub, p2.ub)):
        assert np.array_equal(a, b)


def test_native_round_trip_generated():
    for seed in range(6):
        p = make_test_instance(seed)
        text = write_native(p)
        p2 = parse_native(text)
        assert write_native(p2) == text
        assert [s.key() for s in p.distribution.scenarios] == [s.key() for s in p2.distribution.scenarios]


def test_native_round_trip_smps():
    p = parse_smps(triplet())
    text = write_native(p)
    p2 = parse_native(text)
    assert write_native(p2) == text
    assert np.array_equal(p.W, p2.W)


def test_native_truncated_document():
    text = write_native(tiny_inventory())
    with pytest.raises(MalformedDocument):
        parse_native(text[: len(text) // 2])
    with pytest.raises(MalformedDocument):
        parse_native("{}")
    with pytest.raises(MalformedDocument):
        parse_native(text.replace('"finite"', '"nope"'))


def test_name_mismatch_warns_not_fails(caplog):
    import logging

    time_other = TIME.replace("TINYINV", "OTHERNAME")
    with caplog.at_level(logging.WARNING, logger="lshaped.smps"):
        p = parse_smps(triplet(time=time_other))
    assert p.n == 1
    assert any("NAME mismatch" in rec.message for rec in caplog.records)


def test_stochastic_t_entry():
    # X1's coefficient in the stage-2 LINK row varies by scenario
    stoch = """STOCH  TINYINV
INDEP  DISCRETE
    X1        LINK      -1.0       0.5
    X1        LINK      -0.5       0.5
ENDATA
"""
    p = parse_smps(triplet(stoch=stoch))
    assert isinstance(p.distribution, IndependentDiscrete)
    (addr, values, probs), = p.distribution.marginals
    assert addr == ("T", 0, 0)
    assert values == [-1.0, -0.5]
    sol = solve_lp(build_extensive_form(p))
    # scenario T = -0.5 halves the sale cap: f(x) = 1.1x - min(x,1) - min(x/2,1)
    xs = np.arange(0, 10.001, 1e-3)
    f = 1.1 * xs - np.minimum(np.minimum(xs, 1), 1) * 0 - (np.minimum(xs, 1.0) + np.minimum(0.5 * xs, 1.0))
    assert sol.objective == pytest.approx(f.min(), abs=1e-6)


def test_stochastic_q_entry():
    # the selling price (objective coefficient of Y1) varies by scenario
    stoch = """STOCH  TINYINV
INDEP  DISCRETE
    Y1        COST      -2.0       0.5
    Y1        COST      -4.0       0.5
ENDATA
"""
    p = parse_smps(triplet(stoch=stoch))
    (addr, values, probs), = p.distribution.marginals
    assert addr == ("q", 0, 0)
    sol = solve_lp(build_extensive_form(p))
    # f(x) = 1.1x - 3*min(x,1): minimum at x = 1
    assert sol.objective == pytest.approx(1.1 - 3.0, abs=1e-8)


def test_first_stage_bound_kinds():
    core = CORE.replace(
        " UP BND       X1        10.0",
        " LO BND       X1        0.5\n UP BND       X1        9.0",
    )
    p = parse_smps(triplet(core=core))
    assert p.lb[0] == 0.5 and p.ub[0] == 9.0
    core_fx = CORE.replace(" UP BND       X1        10.0", " FX BND       X1        2.0")
    p = parse_smps(triplet(core=core_fx))
    assert p.lb[0] == 2.0 and p.ub[0] == 2.0
    assert solve_lp(build_extensive_form(p)).x[0] == pytest.approx(2.0)


def test_objsense_min_accepted_max_rejected():
    core = CORE.replace("NAME          TINYINV", "NAME          TINYINV\nOBJSENSE\n    MIN")
    assert parse_smps(triplet(core=core)).n == 1
    core = CORE.replace("NAME          TINYINV", "NAME          TINYINV\nOBJSENSE\n    MAX")
    with pytest.raises(UnsupportedSection):
        parse_smps(triplet(core=core))


def test_equality_row_with_range():
    # E row + range r >= 0 becomes b <= ax <= b + r
    core = CORE.replace(" L  BUDGET", " E  BUDGET").replace(
        "BOUNDS", "RANGES\n    RNG       BUDGET    4.0\nBOUNDS"
    )
    p = parse_smps(triplet(core=core))
    assert p.m == 2
    assert sorted(p.senses) == ["<=", ">="]
    sol = solve_lp(build_extensive_form(p))
    # budget now forces p'x in [10, 14] i.e. x in [10, 14] capped by ub=10
    assert sol.optimal
    assert sol.x[0] == pytest.approx(10.0, abs=1e-8)
