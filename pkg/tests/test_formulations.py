from fractions import Fraction
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from gen import random_grid, rng_for
from protplace import external
from protplace.errors import PreconditionError, SerializationError, SolutionError, ValidationError
from protplace.formulations import (
    BINARY,
    CONTINUOUS,
    GE,
    INTEGER,
    LE,
    LinearModel,
    build_domination,
    build_domination_mixed,
    build_mtz_full,
    build_mtz_mixed,
    extract_plan,
    read_solution,
    validate_solution,
)
from protplace.grid import Grid, MeasurementConfig, ProtectionPlan, load_case, uniform_config
from protplace.lpio import write_lp, write_mps

needs_highs = pytest.mark.skipif(not external.available(), reason="highspy not installed")


@pytest.fixture(scope="module")
def case9():
    return load_case("case9")


@pytest.fixture(scope="module")
def nine_unit(case9):
    return case9, uniform_config(case9, (4, 6, 8))


def test_mtz_counts(nine_unit):
    grid, config = nine_unit
    full = build_mtz_full(grid, config)
    assert len(full.variables) == 9 + 9 + 9 + 18 + 2 * (9 + 9) + 10 == 91
    assert full.count(BINARY) == 81
    assert full.count(INTEGER) == 10
    mixed = build_mtz_mixed(grid, config)
    assert len(mixed.variables) == 91
    assert mixed.count(BINARY) == 9 + 36 == 45
    full.validate()


def test_mtz_dense_w(nine_unit):
    grid, config = nine_unit
    dense = build_mtz_full(grid, config, dense_w=True)
    assert dense.count(role="w") == 9 * 9
    off = [v for v in dense.variables if v.name == "w_1_4__2"][0]
    assert off.upper == 0


def test_mtz_names_and_rows(nine_unit):
    grid, config = nine_unit
    model = build_mtz_full(grid, config)
    names = {v.name for v in model.variables}
    assert {"x_4", "y_1_4", "z_7", "w_1_4__1", "f_1_4", "f_4_1", "f_1_ROOT", "f_ROOT_1", "u_ROOT"} <= names
    rows = {r.name: r for r in model.constraints}
    mtz = rows["mtz_1_4"]
    coef = {model.variables[k].name: c for k, c in mtz.terms}
    vbar = 10
    assert coef == {"f_1_4": vbar - 1, "f_4_1": vbar - 3, "u_1": 1, "u_4": -1}
    assert mtz.rhs == vbar - 2
    assert rows["total"].rhs == 9


def test_unmeasured_variables_are_fixed_to_zero(case9):
    config = MeasurementConfig({1}, (), {4}, {1: 5}, {}, {4: 2})
    model = build_mtz_full(case9, config)
    assert model.var("x_2").upper == 0
    assert model.var("y_1_4").upper == 0
    assert model.var("x_1").upper == 1
    assert model.objective == {model.index["x_1"]: 5, model.index["z_4"]: 2}


def test_domination_preconditions(case9):
    with pytest.raises(PreconditionError, match="M_L"):
        build_domination(case9, uniform_config(case9))
    split = Grid((1, 2, 3), [(1, 2)])
    with pytest.raises(PreconditionError, match="connected"):
        build_domination(split, uniform_config(split, line_flows=False))


def test_domination_shape(case9):
    model = build_domination(case9, uniform_config(case9, (4, 6, 8), line_flows=False))
    assert len(model.variables) == 9 + 9 + (9 + 2 * 9)
    assert [r.name for r in model.constraints][-1] == "pne"
    relaxed = build_domination_mixed(case9, uniform_config(case9, line_flows=False))
    assert relaxed.count(BINARY) == 9


def test_extract_plan_from_pmu_values(case9):
    model = build_domination(case9, uniform_config(case9, (4, 6, 8), line_flows=False))
    plan = extract_plan(model, {"z_4": 1, "z_7": 1})
    assert plan == ProtectionPlan((), (), {4, 7})


def test_read_solution(case9):
    model = build_domination(case9, uniform_config(case9, (4, 6, 8), line_flows=False))
    text = "# PMUs\nz_4 1\nz_7 1\nx_6 1\nx_8 1\nw_2_8 1   # bus 2 through the injection at 8\nw_3_6 1\n"
    values = read_solution(model, text)
    assert values["w_2_8"] == 1 and values["x_1"] == 0
    plan = extract_plan(model, values)
    assert plan == ProtectionPlan({6, 8}, (), {4, 7})
    with pytest.raises(SolutionError, match="unknown"):
        read_solution(model, "q_1 1")
    with pytest.raises(SolutionError, match="integrality"):
        read_solution(model, "z_4 0.5")
    with pytest.raises(SolutionError, match="bounds"):
        read_solution(model, "z_4 2")
    with pytest.raises(SolutionError, match="infeasible solution"):
        read_solution(model, "z_4 1\nz_7 1")


def test_add_var_checks():
    m = LinearModel("t")
    m.add_var("a")
    with pytest.raises(ValidationError):
        m.add_var("a")
    with pytest.raises(ValidationError):
        m.add_var("b", 0, 2, BINARY)


def test_add_row_merges_terms():
    m = LinearModel("t")
    a = m.add_var("a")
    b = m.add_var("b")
    m.add_row("r", [(a, 1), (b, 2), (a, 2), (b, -2)], LE, 2)
    assert m.constraints[0].terms == ((a, 3),)
    assert m.violations({"a": 1, "b": 0}) == ["row:r"]
    assert m.violations({"a": Fraction(1, 2), "b": 0}) == ["integrality:a"]


# ------------------------------------------------------------------ writers

def tiny_model():
    m = LinearModel(tag="tiny")
    x = m.add_var("x", 0, 1, BINARY, cost=1)
    u = m.add_var("u", 0, 3, INTEGER)
    m.add_var("c", 0, None, CONTINUOUS)
    m.add_row("r1", [(x, 2), (u, -1)], LE, 1)
    m.add_row("r2", [(x, 1), (u, 1)], GE, Fraction(1, 2))
    return m


GOLDEN_LP = """Minimize
 obj: x + 0 c
Subject To
 r1: 2 x - u <= 1
 r2: x + u >= 0.5
Bounds
 0 <= u <= 3
Generals
 u
Binaries
 x
End
"""

GOLDEN_MPS = """NAME          tiny
ROWS
 N  obj
 L  r1
 G  r2
COLUMNS
    M0        'MARKER'                 'INTORG'
    x         obj       1
    x         r1        2
    x         r2        1
    u         r1        -1
    u         r2        1
    M1        'MARKER'                 'INTEND'
    c         obj       0
RHS
    RHS       r1        1
    RHS       r2        0.5
BOUNDS
 BV BND       x
 UP BND       u         3
ENDATA
"""


def test_golden_lp():
    assert write_lp(tiny_model()) == GOLDEN_LP


def test_golden_fixed_mps():
    assert write_mps(tiny_model()) == GOLDEN_MPS


def test_single_binary_lp():
    m = LinearModel("t")
    m.add_var("x", cost=1)
    assert write_lp(m) == "Minimize\n obj: x\nSubject To\nBinaries\n x\nEnd\n"


def test_lp_rejects_bad_names():
    m = LinearModel("t")
    m.add_var("has space")
    with pytest.raises(SerializationError):
        write_lp(m)


def test_fixed_mps_name_limit(nine_unit):
    model = build_mtz_full(*nine_unit)
    with pytest.raises(SerializationError, match="fixed"):
        write_mps(model)
    assert write_mps(model, free=True).endswith("ENDATA\n")


def test_long_rows_wrap(nine_unit):
    text = write_lp(build_mtz_full(*nine_unit))
    assert max(len(line) for line in text.splitlines()) < 255


@needs_highs
@pytest.mark.parametrize("via", ["lp", "mps"])
@pytest.mark.parametrize("builder", [build_mtz_full, build_mtz_mixed])
def test_highs_nine_bus_mtz(nine_unit, via, builder):
    model = builder(*nine_unit)
    result = external.solve(model, via=via)
    assert result.status == "optimal"
    assert result.objective == pytest.approx(2)


@needs_highs
@pytest.mark.parametrize("builder", [build_domination, build_domination_mixed])
def test_highs_nine_bus_domination(case9, builder):
    model = builder(case9, uniform_config(case9, (4, 6, 8), line_flows=False))
    result = external.solve(model, via="lp")
    assert result.objective == pytest.approx(2)
    validate_solution(model, result.values)


@needs_highs
def test_highs_star_domination():
    star = Grid((1, 2, 3, 4, 5), [(1, k) for k in range(2, 6)])
    config = MeasurementConfig((), (), star.bus_ids, {}, {}, {b: 1 for b in star.bus_ids})
    result = external.solve(build_domination(star, config))
    assert result.objective == pytest.approx(1)
    assert extract_plan(build_domination(star, config), result.values).protected_pmus == {1}


@needs_highs
def test_highs_parses_fixed_mps():
    result = external.solve(tiny_model(), via="fixed-mps")
    assert result.status == "optimal"
    assert result.objective == pytest.approx(0)


def min_dominating_set(grid):
    for size in range(1, grid.n + 1):
        for combo in itertools.combinations(grid.bus_ids, size):
            covered = set(combo)
            for b in combo:
                covered |= grid.neighbors(b)
            if len(covered) == grid.n:
                return size
    return 0


@needs_highs
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_domination_without_injections_is_mds(seed):
    grid = random_grid(rng_for(seed), 7, connected=True)
    config = MeasurementConfig((), (), grid.bus_ids, {}, {}, {b: 1 for b in grid.bus_ids})
    result = external.solve(build_domination(grid, config))
    assert round(result.objective) == min_dominating_set(grid)
