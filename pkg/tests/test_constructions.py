import pytest
from hypothesis import given, settings, strategies as st

from gen import random_grid, random_subset, rng_for
from protplace.constructions import (
    brute_force_h_search,
    g_connects,
    g_from_h,
    h_from_g,
    verify_condition_b,
)
from protplace.errors import PreconditionError
from protplace.grid import Grid, ProtectionPlan, load_case, pmu_coverage
from protplace.observability import brute_force_g_search, is_topologically_observable

PATH3 = Grid((1, 2, 3), [(1, 2), (2, 3)])
TRIANGLE = Grid((1, 2, 3), [(1, 2), (2, 3), (1, 3)])


def test_condition_b_examples():
    assert verify_condition_b(PATH3, (), {1, 2, 3}, {})
    assert not verify_condition_b(PATH3, {2}, {1}, {2: 3})
    assert verify_condition_b(PATH3, {2}, {1, 2}, {2: 3})
    assert not verify_condition_b(PATH3, {2}, {1, 2}, {2: 2, 1: 3})  # 1 is not an injection
    assert not verify_condition_b(Grid((1, 2, 3), [(1, 2)]), {1}, {1, 2}, {1: 3})  # not adjacent


def test_h_from_g_on_path():
    g = {2: PATH3.find_line(1, 2), 3: PATH3.find_line(2, 3)}
    h = h_from_g(PATH3, {2, 3}, {1}, g)
    assert h[3] == 3 and h[2] in (2, 3)
    assert verify_condition_b(PATH3, {2, 3}, {1}, h)


def test_h_from_g_empty():
    assert h_from_g(PATH3, (), {1, 2, 3}, {}) == {}


def test_h_from_g_requires_condition_a():
    with pytest.raises(PreconditionError):
        h_from_g(PATH3, {2}, {1}, {2: 0})


def test_g_from_h_cycle():
    h = {2: 3, 3: 2}
    g = g_from_h(TRIANGLE, {2, 3}, {1}, h)
    assert g_connects(TRIANGLE, {2, 3}, {1}, g)


def test_g_from_h_identity():
    grid = Grid((1, 2, 3, 4), [(1, 2), (2, 3), (3, 4)])
    h = {2: 2, 3: 3, 4: 4}
    g = g_from_h(grid, {2, 3, 4}, {1}, h)
    assert g_connects(grid, {2, 3, 4}, {1}, g)


def test_g_from_h_empty():
    assert g_from_h(PATH3, (), {1, 2, 3}, {}) == {}


@pytest.mark.parametrize(
    "grid,covered,h",
    [
        (PATH3, set(), {}),
        (Grid((1, 2, 3), [(1, 2)]), {1, 2}, {3: 3}),
        (PATH3, {1}, {2: 2}),
    ],
)
def test_g_from_h_preconditions(grid, covered, h):
    with pytest.raises(PreconditionError):
        g_from_h(grid, set(h), covered, h)


def test_nine_bus_pipeline():
    grid = load_case("case9")
    plan = ProtectionPlan({4, 6, 8}, (), {4, 7})
    covered = pmu_coverage(grid, plan.protected_pmus)
    _, g = is_topologically_observable(grid, plan)
    h = h_from_g(grid, {4, 6, 8}, covered, g)
    assert verify_condition_b(grid, {4, 6, 8}, covered, h)
    assert g_connects(grid, {4, 6, 8}, covered, g_from_h(grid, {4, 6, 8}, covered, h))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trips(seed):
    rng = rng_for(seed)
    grid = random_grid(rng, 8, connected=True, n_min=2)
    inj = set(random_subset(rng, grid.bus_ids, 0.6))
    pmus = random_subset(rng, grid.bus_ids, 0.2) or [grid.bus_ids[0]]
    covered = pmu_coverage(grid, pmus)
    plan = ProtectionPlan(inj, (), pmus)
    ok, g = is_topologically_observable(grid, plan)
    h = brute_force_h_search(grid, inj, covered)
    assert ok == (h is not None)
    if ok:
        h2 = h_from_g(grid, inj, covered, g)
        assert verify_condition_b(grid, inj, covered, h2)
        for cand in (h, h2):
            assert g_connects(grid, inj, covered, g_from_h(grid, inj, covered, cand))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_a_implies_b_on_disconnected_graphs(seed):
    rng = rng_for(seed)
    grid = random_grid(rng, 7)
    inj = set(random_subset(rng, grid.bus_ids, 0.6))
    pmus = random_subset(rng, grid.bus_ids, 0.4)
    covered = pmu_coverage(grid, pmus)
    g = brute_force_g_search(grid, ProtectionPlan(inj, (), pmus))
    if g is not None:
        assert verify_condition_b(grid, inj, covered, h_from_g(grid, inj, covered, g))
