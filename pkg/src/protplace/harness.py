"""Experiment harness: benchmark runs, CSV reporting and the line-flow counterexample."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import astuple, dataclass, fields

from .errors import PreconditionError
from .formulations import BUILDERS, extract_plan
from .grid import ExperimentProfile, Grid, MeasurementConfig, ProtectionPlan, generate_experiment, pmu_coverage
from .observability import algebraic_rank_check, is_topologically_observable
from .solver import OPTIMAL, solve_exact, verify_plan


def naive_line_domination(grid, plan):
    """The refuted extension of domination to line flows.

    Every bus not covered by a PMU must be claimed by a distinct protected
    measurement: an injection at the bus or a neighbour, or a protected line
    incident to it.  Decided by bipartite matching.
    """
    todo = sorted(set(grid.bus_ids) - pmu_coverage(grid, plan.protected_pmus))
    options = {}
    for v in todo:
        opts = [("I", j) for j in sorted(({v} | grid.neighbors(v)) & plan.protected_injections)]
        opts += [("L", e) for e in grid.incident_lines(v) if e in plan.protected_lines]
        options[v] = opts
    owner = {}

    def augment(v, seen):
        for res in options[v]:
            if res in seen:
                continue
            seen.add(res)
            if res not in owner or augment(owner[res], seen):
                owner[res] = v
                return True
        return False

    return all(augment(v, set()) for v in todo)


def line_flow_counterexample():
    """Path 1-2-3-4 with a PMU at 1, the flow on {3,4} and the injection at 4.

    The injection at leaf 4 equals the flow on its only line, so the two
    protected measurements carry one piece of information between them.
    Both defining properties are checked before returning.
    """
    grid = Grid((1, 2, 3, 4), [(1, 2), (2, 3), (3, 4)])
    line34 = grid.find_line(3, 4)
    config = MeasurementConfig(
        measured_injections={4},
        measured_lines={line34},
        pmu_buses={1, 3},
        cost_injection={4: 1},
        cost_line={line34: 1},
        cost_pmu={1: 1, 3: 1},
    )
    plan = ProtectionPlan({4}, {line34}, {1})
    if not naive_line_domination(grid, plan):
        raise AssertionError("counterexample is not accepted by the naive check")
    if is_topologically_observable(grid, plan)[0] or algebraic_rank_check(grid, plan):
        raise AssertionError("counterexample is observable")
    return grid, config, plan


@dataclass
class BenchRecord:
    instance: str
    n_buses: int
    n_lines: int
    formulation: str
    solver: str
    optimal_cost: int | None
    wall_time: float
    nodes: int | None
    verified: bool


def run_internal(name, grid, config, budget=1_000_000):
    report = solve_exact(grid, config, budget=budget, certify=False)
    verified = report.plan is not None and verify_plan(grid, config, report.plan)
    cost = report.optimal_cost if report.status == OPTIMAL else None
    return BenchRecord(name, grid.n, grid.m, "oracle", "bnb", cost, report.wall_time,
                       report.nodes_explored, verified)


def run_external(name, grid, config, tag, time_limit=None):
    """Build one formulation, solve it with HiGHS, and re-verify the extracted plan.

    Returns ``None`` when the formulation's preconditions do not hold.
    """
    from . import external

    start = time.perf_counter()
    try:
        model = BUILDERS[tag](grid, config)
    except PreconditionError:
        return None
    result = external.solve(model, time_limit=time_limit)
    elapsed = time.perf_counter() - start
    cost = None
    verified = False
    if result.status == "optimal":
        plan = extract_plan(model, result.values)
        cost = config.cost(plan)
        verified = verify_plan(grid, config, plan)
    return BenchRecord(name, grid.n, grid.m, tag, "highs", cost, elapsed, result.nodes, verified)


def bench(grid, system, seeds, profile=None, formulations=tuple(BUILDERS), external=True,
          budget=1_000_000):
    """One internal-solver record per seed, plus one per applicable formulation when HiGHS is present."""
    from . import external as ext

    base = profile or ExperimentProfile()
    use_ext = external and ext.available()
    records = []
    for seed in seeds:
        prof = ExperimentProfile(base.zero_injection_fraction, base.cost_low, base.cost_high,
                                 base.pmu_cost_factor, base.line_flows_enabled, seed)
        config = generate_experiment(grid, prof)
        name = f"{system}-s{seed}"
        records.append(run_internal(name, grid, config, budget))
        if use_ext:
            for tag in formulations:
                rec = run_external(name, grid, config, tag)
                if rec is not None:
                    records.append(rec)
    return records


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(BenchRecord)])
    for rec in records:
        row = list(astuple(rec))
        row[6] = f"{rec.wall_time:.6f}"
        writer.writerow(["" if v is None else v for v in row])
    return buf.getvalue()
