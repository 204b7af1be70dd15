"""Command-line entry point: ``protplace <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import external
from .constructions import g_from_h, h_from_g, verify_condition_b
from .errors import ProtplaceError
from .formulations import BUILDERS
from .grid import (
    ExperimentProfile,
    ProtectionPlan,
    generate_experiment,
    instance_to_dict,
    load_bundled_instance,
    load_case,
    load_instance,
    pmu_coverage,
    save_instance,
)
from .harness import bench, line_flow_counterexample, naive_line_domination, records_to_csv
from .lpio import write_lp, write_mps
from .observability import (
    algebraic_rank_check,
    brute_force_g_search,
    is_topologically_observable,
    physical_rank_check,
)
from .solver import BUDGET, INFEASIBLE, certify_formulation, solve_exact

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


class InputError(Exception):
    pass


def _read_instance(ref):
    path = Path(ref)
    if path.exists():
        return load_instance(path.read_text())
    try:
        return load_bundled_instance(ref)
    except FileNotFoundError:
        raise InputError(f"no instance file or bundled instance named {ref!r}") from None


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _seeds(text):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def cmd_gen(args):
    grid = load_case(args.case)
    profile = ExperimentProfile(args.zero_fraction, args.cost_low, args.cost_high,
                                args.pmu_factor, not args.no_line_flows, args.seed)
    _emit(save_instance(grid, generate_experiment(grid, profile)), args.output)
    return EXIT_OK


def cmd_formulate(args):
    grid, config = _read_instance(args.instance)
    model = BUILDERS[args.formulation](grid, config)
    if args.format == "lp":
        text = write_lp(model)
    else:
        text = write_mps(model, free=args.format == "free-mps")
    _emit(text, args.output)
    return EXIT_OK


def cmd_solve(args):
    grid, config = _read_instance(args.instance)
    report = solve_exact(grid, config, budget=args.budget)
    result = {
        "status": report.status,
        "optimal_cost": report.optimal_cost,
        "nodes_explored": report.nodes_explored,
        "wall_time": round(report.wall_time, 6),
        "certified": report.certified,
        "plan": None if report.plan is None else report.plan.to_json_dict(grid),
    }
    if args.plan_out and report.plan is not None:
        Path(args.plan_out).write_text(_dump(report.plan.to_json_dict(grid)))
    _emit(_dump(result), args.output)
    if report.status == INFEASIBLE:
        return EXIT_INFEASIBLE
    if report.status == BUDGET:
        return EXIT_BUDGET
    return EXIT_OK


def _check_report(grid, config, plan, brute):
    plan.validate(config)
    ok, g = is_topologically_observable(grid, plan)
    result = {
        "topologically_observable": ok,
        "g": None if g is None else {str(b): list(grid.lines[e]) for b, e in g.items()},
        "algebraic_rank_full": algebraic_rank_check(grid, plan),
        "physical_rank_full": physical_rank_check(grid, plan),
        "cost": config.cost(plan),
    }
    if brute:
        found = brute_force_g_search(grid, plan)
        result["brute_force_observable"] = found is not None
    if ok:
        result["mtz_certified"] = certify_formulation(grid, config, plan)[0]
    return ok, result


def cmd_check(args):
    grid, config = _read_instance(args.instance)
    plan = ProtectionPlan.from_json_dict(_read_json(args.plan), grid)
    ok, result = _check_report(grid, config, plan, args.brute_force)
    _emit(_dump(result), args.output)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_convert(args):
    grid, config = _read_instance(args.instance)
    plan = ProtectionPlan.from_json_dict(_read_json(args.plan), grid)
    plan.validate(config)
    if plan.protected_lines:
        raise InputError("conversion needs a plan without protected line flows")
    covered = pmu_coverage(grid, plan.protected_pmus)
    inj = plan.protected_injections
    if args.h is None:
        ok, g = is_topologically_observable(grid, plan)
        if not ok:
            _emit(_dump({"g": None, "h": None}), args.output)
            return EXIT_INFEASIBLE
        h = h_from_g(grid, inj, covered, g)
    else:
        h = {int(k): int(v) for k, v in _read_json(args.h).items()}
        if not verify_condition_b(grid, inj, covered, h):
            raise InputError("h does not satisfy the covering condition")
        g = g_from_h(grid, inj, covered, h)
    result = {
        "g": {str(b): list(grid.lines[e]) for b, e in sorted(g.items())},
        "h": {str(b): v for b, v in sorted(h.items())},
    }
    _emit(_dump(result), args.output)
    return EXIT_OK


def cmd_bench(args):
    grid = load_case(args.system)
    profile = ExperimentProfile(line_flows_enabled=not args.no_line_flows)
    use_ext = not args.internal_only
    if use_ext and not external.available():
        print("highspy not installed; running the internal solver only", file=sys.stderr)
    name = Path(args.system).stem
    records = bench(grid, name, _seeds(args.seeds), profile, external=use_ext, budget=args.budget)
    _emit(records_to_csv(records), args.output)
    return EXIT_OK


def cmd_counterexample(args):
    grid, config, plan = line_flow_counterexample()
    ok, result = _check_report(grid, config, plan, brute=True)
    result["naive_domination_accepts"] = naive_line_domination(grid, plan)
    result["instance"] = instance_to_dict(grid, config)
    result["plan"] = plan.to_json_dict(grid)
    _emit(_dump(result), args.output)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="protplace", description="Protection placement against false data injection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("-o", "--output", help="write to this file instead of stdout")
        return p

    p = add("gen", cmd_gen, "random instance from a case file")
    p.add_argument("case", help="bundled case name or MATPOWER file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-fraction", default="1/10")
    p.add_argument("--cost-low", type=int, default=1)
    p.add_argument("--cost-high", type=int, default=100)
    p.add_argument("--pmu-factor", default="4/5")
    p.add_argument("--no-line-flows", action="store_true")

    p = add("formulate", cmd_formulate, "write an optimisation model")
    p.add_argument("instance")
    p.add_argument("--formulation", choices=sorted(BUILDERS), default="mtz")
    p.add_argument("--format", choices=["lp", "mps", "free-mps"], default="lp")

    p = add("solve", cmd_solve, "exact branch-and-bound solve")
    p.add_argument("instance")
    p.add_argument("--budget", type=int, default=1_000_000, help="node limit")
    p.add_argument("--plan-out", help="also write the plan JSON here")

    p = add("check", cmd_check, "observability verdicts for a plan")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--brute-force", action="store_true", help="also enumerate assignments")

    p = add("convert", cmd_convert, "convert between line and bus assignments")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--h", help="JSON bus->bus map; convert it to a line assignment")

    p = add("bench", cmd_bench, "benchmark over seeds, CSV out")
    p.add_argument("--system", default="case9")
    p.add_argument("--seeds", default="1..20", help="range like 1..20 or list like 1,2,5")
    p.add_argument("--no-line-flows", action="store_true")
    p.add_argument("--internal-only", action="store_true")
    p.add_argument("--budget", type=int, default=1_000_000)

    add("counterexample", cmd_counterexample, "line-flow domination counterexample")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ProtplaceError, InputError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
