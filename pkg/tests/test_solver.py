import pytest
from hypothesis import given, settings, strategies as st

from gen import random_config, random_grid, rng_for
from protplace.formulations import build_mtz_full
from protplace.grid import Grid, MeasurementConfig, ProtectionPlan, load_bundled_instance
from protplace.observability import is_topologically_observable
from protplace.solver import (
    BUDGET,
    INFEASIBLE,
    OPTIMAL,
    certify_formulation,
    entity_list,
    enumerate_minimum,
    exhaustive_completion,
    greedy_upper_bound,
    solve_exact,
    verify_plan,
)


@pytest.fixture(scope="module")
def nine():
    return load_bundled_instance("ieee9_unit")


def fixed_values(grid, plan):
    values = {f"x_{b}": 1 for b in plan.protected_injections}
    values.update({f"y_{grid.line_label(e)}": 1 for e in plan.protected_lines})
    values.update({f"z_{b}": 1 for b in plan.protected_pmus})
    return values


def test_nine_bus_optimum(nine):
    grid, config = nine
    report = solve_exact(grid, config)
    assert report.status == OPTIMAL and report.is_optimal
    assert report.optimal_cost == 2
    assert report.certified
    assert config.cost(report.plan) == 2
    assert {4, 6, 8} <= report.plan.protected_injections
    assert verify_plan(grid, config, report.plan)


def test_nine_bus_greedy_is_an_upper_bound(nine):
    grid, config = nine
    plan = greedy_upper_bound(grid, config)
    assert is_topologically_observable(grid, plan)[0]
    assert config.cost(plan) >= 2
    # inclusion-minimal
    for kind in ("protected_injections", "protected_lines", "protected_pmus"):
        for item in getattr(plan, kind):
            parts = {k: set(getattr(plan, k)) for k in ("protected_injections", "protected_lines", "protected_pmus")}
            parts[kind].discard(item)
            assert not is_topologically_observable(grid, ProtectionPlan(**parts))[0]


def test_greedy_infeasible_and_already_minimal():
    g = Grid((1, 2), [(1, 2)])
    no_pmu = MeasurementConfig({1, 2}, (), (), {1: 1, 2: 1}, {}, {})
    assert greedy_upper_bound(g, no_pmu) is None
    single = MeasurementConfig((), (), {1}, {}, {}, {1: 3})
    assert greedy_upper_bound(g, single) == ProtectionPlan((), (), {1})


def test_all_zero_costs():
    g = Grid((1, 2, 3), [(1, 2), (2, 3)])
    config = MeasurementConfig({1, 2, 3}, {0, 1}, {1, 2, 3}, dict.fromkeys((1, 2, 3), 0),
                               {0: 0, 1: 0}, dict.fromkeys((1, 2, 3), 0))
    report = solve_exact(g, config)
    assert report.optimal_cost == 0
    assert report.plan == config.all_protected()


def test_infeasible_status():
    g = Grid((1, 2), [(1, 2)])
    report = solve_exact(g, MeasurementConfig({1}, (), (), {1: 1}, {}, {}))
    assert report.status == INFEASIBLE
    assert report.plan is None and report.optimal_cost is None


def test_budget_status(nine):
    report = solve_exact(*nine, budget=2)
    assert report.status == BUDGET
    assert report.plan is not None  # greedy incumbent
    assert not report.certified


def test_enumeration_limit(nine):
    from protplace.errors import SizeLimitError

    with pytest.raises(SizeLimitError):
        enumerate_minimum(*nine)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_enumeration(seed):
    rng = rng_for(seed)
    grid = random_grid(rng, 5, extra=4)
    config = random_config(rng, grid)
    if len(entity_list(config)[0]) > 16:
        return
    report = solve_exact(grid, config, certify=False)
    best = enumerate_minimum(grid, config)
    if best is None:
        assert report.status == INFEASIBLE
    else:
        assert report.optimal_cost == best[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 7))
def test_cost_scaling_keeps_plan(seed, factor):
    rng = rng_for(seed)
    grid = random_grid(rng, 6)
    config = random_config(rng, grid)
    scaled = MeasurementConfig(
        config.measured_injections, config.measured_lines, config.pmu_buses,
        {k: v * factor for k, v in config.cost_injection.items()},
        {k: v * factor for k, v in config.cost_line.items()},
        {k: v * factor for k, v in config.cost_pmu.items()},
    )
    a = solve_exact(grid, config, certify=False)
    b = solve_exact(grid, scaled, certify=False)
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert b.optimal_cost == factor * a.optimal_cost
        assert a.plan == b.plan


def test_certify_two_bus_tree():
    g = Grid((1, 2), [(1, 2)])
    config = MeasurementConfig((), (), {1}, {}, {}, {1: 1})
    ok, bundle = certify_formulation(g, config, ProtectionPlan((), (), {1}))
    assert ok
    assert bundle.labels[0] == 2 and bundle.labels[1] == 1
    assert bundle.labels[2] in (1, 2)
    assert bundle.values["u_ROOT"] == 2


def test_certify_rejects_unobservable():
    g = Grid((1, 2, 3), [(1, 2), (2, 3)])
    config = MeasurementConfig((), (), {1}, {}, {}, {1: 1})
    ok, bundle = certify_formulation(g, config, ProtectionPlan((), (), {1}))
    assert not ok and bundle.values == {}


def test_certify_nine_bus(nine):
    grid, config = nine
    plan = ProtectionPlan({4, 6, 8}, (), {4, 7})
    model = build_mtz_full(grid, config)
    ok, bundle = certify_formulation(grid, config, plan, model)
    assert ok
    assert len(bundle.tree_arcs) == 9
    assert not model.violations(bundle.values, tol=0)


def test_exhaustive_completion_nine_bus(nine):
    grid, config = nine
    model = build_mtz_full(grid, config)
    good = ProtectionPlan({4, 6, 8}, (), {4, 7})
    point = exhaustive_completion(model, fixed_values(grid, good))
    assert point is not None and not model.violations(point, tol=0)
    bad = ProtectionPlan({4, 6, 8}, (), {4})
    assert exhaustive_completion(model, fixed_values(grid, bad)) is None


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_completion_matches_oracle(seed):
    rng = rng_for(seed)
    grid = random_grid(rng, 4, parallel=True)
    config = random_config(rng, grid, p=0.8)
    model = build_mtz_full(grid, config)
    plan = ProtectionPlan(
        [b for b in config.measured_injections if rng.random() < 0.5],
        [e for e in config.measured_lines if rng.random() < 0.5],
        [b for b in config.pmu_buses if rng.random() < 0.5],
    )
    ok, _ = is_topologically_observable(grid, plan)
    found = exhaustive_completion(model, fixed_values(grid, plan))
    assert ok == (found is not None)
    assert certify_formulation(grid, config, plan, model)[0] == ok
