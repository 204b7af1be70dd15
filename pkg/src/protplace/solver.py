"""Exact search over protection decisions, and witness certification.

The search is best-first branch-and-bound on the committed cost.  Its only
feasibility test is the observability oracle, which is monotone: adding
protected measurements never destroys perfect protection.  So a node whose
relaxed set (everything not yet rejected) fails the oracle has no feasible
completion and is pruned.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeLimitError
from .formulations import EQ, GE, LE, build_mtz_full, exact
from .grid import ProtectionPlan, pmu_coverage
from .observability import (
    ROOT,
    algebraic_rank_check,
    is_topologically_observable,
    observe_masks,
)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
BUDGET = "budget"
ENUMERATION_LIMIT = 20


@dataclass
class SolveReport:
    status: str
    optimal_cost: int | None
    plan: ProtectionPlan | None
    nodes_explored: int
    wall_time: float
    certified: bool = False
    oracle_calls: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL


@dataclass
class WitnessBundle:
    g: dict = field(default_factory=dict)
    tree_arcs: tuple = ()  # (child, parent, line index or None); ROOT is 0
    labels: dict = field(default_factory=dict)  # node -> u value
    values: dict = field(default_factory=dict)  # full MTZ variable assignment


def entity_list(config):
    """Decision entities in canonical order: injections, lines, PMUs."""
    ents = [("I", b) for b in sorted(config.measured_injections)]
    ents += [("L", e) for e in sorted(config.measured_lines)]
    ents += [("P", b) for b in sorted(config.pmu_buses)]
    costs = []
    for kind, key in ents:
        table = {"I": config.cost_injection, "L": config.cost_line, "P": config.cost_pmu}[kind]
        costs.append(table[key])
    return ents, costs


def plan_from_entities(ents, chosen):
    inj = [key for (kind, key), on in zip(ents, chosen) if on and kind == "I"]
    lines = [key for (kind, key), on in zip(ents, chosen) if on and kind == "L"]
    pmus = [key for (kind, key), on in zip(ents, chosen) if on and kind == "P"]
    return ProtectionPlan(inj, lines, pmus)


class MaskOracle:
    """Observability oracle on entity bitmasks, memoised."""

    def __init__(self, grid, ents):
        self.grid = grid
        self.n_ent = len(ents)
        idx = grid.index
        kinds = np.array(["ILP".index(k) for k, _ in ents], dtype=np.int64)
        refs = np.array([key if k == "L" else idx[key] for k, key in ents], dtype=np.int64)
        self._inj = refs[kinds == 0]
        self._line = refs[kinds == 1]
        self._pmu = refs[kinds == 2]
        self._kind_slices = (kinds == 0, kinds == 1, kinds == 2)
        self.cache = {}
        self.calls = 0

    def bits(self, mask):
        return np.array([(mask >> k) & 1 for k in range(self.n_ent)], dtype=np.bool_)

    def __call__(self, mask):
        hit = self.cache.get(mask)
        if hit is not None:
            return hit
        self.calls += 1
        on = self.bits(mask)
        inj = np.zeros(self.grid.n, dtype=np.bool_)
        line = np.zeros(self.grid.m, dtype=np.bool_)
        pmu = np.zeros(self.grid.n, dtype=np.bool_)
        inj[self._inj[on[self._kind_slices[0]]]] = True
        line[self._line[on[self._kind_slices[1]]]] = True
        pmu[self._pmu[on[self._kind_slices[2]]]] = True
        ok, _ = observe_masks(self.grid, inj, line, pmu)
        ok = bool(ok)
        self.cache[mask] = ok
        return ok


def _members(mask):
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def _mask_of(indices):
    m = 0
    for k in indices:
        m |= 1 << k
    return m


def _greedy_mask(oracle, costs, full):
    if not oracle(full):
        return None
    order = sorted(range(len(costs)), key=lambda k: (costs[k], k), reverse=True)
    current = full
    for k in order:
        trial = current & ~(1 << k)
        if oracle(trial):
            current = trial
    return current


def greedy_upper_bound(grid, config):
    """Inclusion-minimal feasible plan by cost-descending removal, or ``None``."""
    config.validate(grid)
    ents, costs = entity_list(config)
    oracle = MaskOracle(grid, ents)
    mask = _greedy_mask(oracle, costs, (1 << len(ents)) - 1)
    if mask is None:
        return None
    return plan_from_entities(ents, [(mask >> k) & 1 for k in range(len(ents))])


def solve_exact(grid, config, budget=1_000_000, certify=True):
    """Minimum-cost perfect-protection plan.

    Ties between optimal plans go to the lexicographically smallest sorted
    entity-index tuple (injections by bus, then lines, then PMUs).
    Zero-cost entities are always protected.
    """
    start = time.perf_counter()
    config.validate(grid)
    ents, costs = entity_list(config)
    n_ent = len(ents)
    full = (1 << n_ent) - 1
    oracle = MaskOracle(grid, ents)

    def report(status, best, nodes):
        plan = cost = None
        if best is not None:
            cost = best[0]
            plan = plan_from_entities(ents, [k in set(best[1]) for k in range(n_ent)])
        rep = SolveReport(status, cost, plan, nodes, time.perf_counter() - start, False, oracle.calls)
        if certify and plan is not None and status == OPTIMAL:
            rep.certified = certify_formulation(grid, config, plan)[0] and verify_plan(grid, config, plan)
            rep.wall_time = time.perf_counter() - start
        return rep

    if not oracle(full):
        return report(INFEASIBLE, None, 0)

    free = _mask_of(k for k in range(n_ent) if costs[k] == 0)
    best = None
    greedy = _greedy_mask(oracle, costs, full)
    if greedy is not None:
        greedy |= free
        members = tuple(_members(greedy))
        best = (sum(costs[k] for k in members), members)

    counter = itertools.count()
    heap = [(0, next(counter), free, 0)]
    nodes = 0
    exhausted = False
    while heap:
        committed, _, inm, outm = heapq.heappop(heap)
        if best is not None and committed > best[0]:
            break
        if nodes >= budget:
            exhausted = True
            break
        nodes += 1
        relaxed = full & ~outm
        if not oracle(relaxed):
            continue
        if oracle(inm):
            cand = (committed, tuple(_members(inm)))
            if best is None or cand < best:
                best = cand
            continue
        if best is not None and committed >= best[0]:
            continue
        undecided = _members(relaxed & ~inm)
        critical = [k for k in undecided if not oracle(relaxed & ~(1 << k))]
        if critical:
            # the "reject" branch of a critical entity is infeasible, so take them all
            add = sum(costs[k] for k in critical)
            if best is None or committed + add <= best[0]:
                heapq.heappush(heap, (committed + add, next(counter), inm | _mask_of(critical), outm))
            continue
        pick = max(undecided, key=lambda k: (costs[k], -k))
        bit = 1 << pick
        if best is None or committed + costs[pick] <= best[0]:
            heapq.heappush(heap, (committed + costs[pick], next(counter), inm | bit, outm))
        heapq.heappush(heap, (committed, next(counter), inm, outm | bit))

    if exhausted:
        return report(BUDGET, best, nodes)
    return report(OPTIMAL, best, nodes)


def enumerate_minimum(grid, config):
    """Reference minimum by exhaustive enumeration of every plan (small instances).

    Returns ``(cost, plan)`` or ``None`` when no plan is feasible.
    """
    ents, costs = entity_list(config)
    n_ent = len(ents)
    if n_ent > ENUMERATION_LIMIT:
        raise SizeLimitError(f"{n_ent} entities exceed the enumeration limit {ENUMERATION_LIMIT}")
    oracle = MaskOracle(grid, ents)
    masks = np.arange(1 << n_ent, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n_ent)) & 1).astype(np.uint8)
    totals = bits.astype(np.int64) @ np.array(costs, dtype=np.int64).reshape(n_ent)
    for k in np.argsort(totals, kind="stable"):
        if oracle(int(masks[k])):
            return int(totals[k]), plan_from_entities(ents, bits[k].astype(bool))
    return None


# ------------------------------------------------------------ certification

def verify_plan(grid, config, plan, seed=0):
    """Combinatorial and algebraic perfect-protection checks must both pass."""
    plan.validate(config)
    ok, _ = is_topologically_observable(grid, plan)
    return ok and algebraic_rank_check(grid, plan, seed=seed)


def _tree_from_g(grid, plan, g):
    """BFS spanning tree of the enabled augmented graph rooted at node 0.

    Returns ``(parent_arc, depth)``: ``parent_arc[v] = (parent, line or None)``.
    """
    adj = {v: [] for v in (ROOT,) + grid.bus_ids}
    for b in sorted(pmu_coverage(grid, plan.protected_pmus)):
        adj[ROOT].append((b, None))
        adj[b].append((ROOT, None))
    enabled = sorted(set(plan.protected_lines) | set(g.values()))
    for e in enabled:
        i, j = grid.lines[e]
        adj[i].append((j, e))
        adj[j].append((i, e))
    for v in adj:
        adj[v].sort(key=lambda t: (t[0], -1 if t[1] is None else t[1]))
    depth = {ROOT: 0}
    parent_arc = {}
    queue = [ROOT]
    for v in queue:
        for w, e in adj[v]:
            if w not in depth:
                depth[w] = depth[v] + 1
                parent_arc[w] = (v, e)
                queue.append(w)
    return parent_arc, depth


def certify_formulation(grid, config, plan, model=None):
    """Build an explicit MTZ point for an accepted plan and check every row exactly."""
    plan.validate(config)
    ok, g = is_topologically_observable(grid, plan)
    if not ok:
        return False, WitnessBundle()
    if model is None:
        model = build_mtz_full(grid, config)
    parent_arc, depth = _tree_from_g(grid, plan, g)
    if len(depth) != grid.n + 1:
        return False, WitnessBundle(g=g)
    n = grid.n
    labels = {v: n - d for v, d in depth.items()}
    values = {}
    for b in plan.protected_injections:
        values[f"x_{b}"] = 1
    for e in plan.protected_lines:
        values[f"y_{grid.line_label(e)}"] = 1
    for b in plan.protected_pmus:
        values[f"z_{b}"] = 1
    for b, e in g.items():
        values[f"w_{grid.line_label(e)}__{b}"] = 1
    role_of = {role[1]: name for name, role in model.roles.items() if role[0] == "f"}
    arcs = []
    for child, (par, e) in sorted(parent_arc.items()):
        values[role_of[child, par, e]] = 1
        arcs.append((child, par, e))
    for v, lab in labels.items():
        values["u_" + ("ROOT" if v == ROOT else str(v))] = lab
    full = {v.name: values.get(v.name, 0) for v in model.variables}
    bundle = WitnessBundle(g=g, tree_arcs=tuple(arcs), labels=labels, values=full)
    return not model.violations(full, tol=0), bundle


# ------------------------------------------------- exhaustive MTZ completion



def exhaustive_completion(model, fixed):
    """Search all (w, f, u) completions of an MTZ model with x, y, z fixed.

    ``fixed`` maps x/y/z variable names to 0/1; absent ones are 0.  w is
    enumerated as one incident line (or none) per protected injection, f as
    one outgoing arc per non-root node with bound pruning on the rows free of
    u, and u is solved exactly as a system of difference constraints.
    Returns a full assignment satisfying every row, or None.  Only the
    model's own rows and bounds are consulted.
    """
    idx = model.index
    nvar = len(model.variables)
    roles = [model.roles[v.name] for v in model.variables]
    base = [None] * nvar
    for k, (role, _) in enumerate(roles):
        if role in "xyzw":
            base[k] = 0
    for name, v in fixed.items():
        base[idx[name]] = exact(v)

    w_by_owner = {}
    f_by_tail = {}
    for k, (role, key) in enumerate(roles):
        up = model.variables[k].upper
        if role == "w" and up is not None and up > 0:
            w_by_owner.setdefault(key[1], []).append(k)
        elif role == "f":
            f_by_tail.setdefault(key[0], []).append(k)
    u_vars = [k for k, (role, _) in enumerate(roles) if role == "u"]
    is_u = [role == "u" for role, _ in roles]
    is_f = [role == "f" for role, _ in roles]
    tails = sorted(t for t in f_by_tail if t != 0)

    rows_u, rows_plain = [], []
    for r in model.constraints:
        compiled = ([(k, exact(c)) for k, c in r.terms], r.sense, exact(r.rhs))
        (rows_u if any(is_u[k] for k, _ in r.terms) else rows_plain).append(compiled)
    f_rows = {}  # f var -> [(row position, coefficient)]
    for pos, (terms, _, _) in enumerate(rows_plain):
        for k, c in terms:
            if is_f[k]:
                f_rows.setdefault(k, []).append((pos, c))

    owners = [o for o in sorted(w_by_owner) if base[idx[f"x_{o}"]]]
    w_choices = [[None] + w_by_owner[o] for o in owners]
    for w_pick in itertools.product(*w_choices):
        values = list(base)
        for k in w_pick:
            if k is not None:
                values[k] = 1
        found = _search_arcs(model, values, tails, f_by_tail, f_rows, rows_plain, rows_u, u_vars, is_f)
        if found is not None:
            return found
    return None


def _search_arcs(model, values, tails, f_by_tail, f_rows, rows_plain, rows_u, u_vars, is_f):
    # activity of each u-free row from fixed variables, and its f-range so far
    act, low, high = [], [], []
    for terms, _, _ in rows_plain:
        a = lo = hi = 0
        for k, c in terms:
            if is_f[k]:
                lo += min(c, 0)
                hi += max(c, 0)
            else:
                a += c * values[k]
        act.append(a)
        low.append(lo)
        high.append(hi)

    def feasible(pos):
        _, sense, rhs = rows_plain[pos]
        if sense == LE:
            return act[pos] + low[pos] <= rhs
        if sense == GE:
            return act[pos] + high[pos] >= rhs
        return act[pos] + low[pos] <= rhs <= act[pos] + high[pos]

    if not all(feasible(p) for p in range(len(rows_plain))):
        return None
    tail_arcs = [f_by_tail[t] for t in tails]
    chosen = []

    def settle(arcs, pick, sign):
        # fix every arc of one tail: ``pick`` to 1, the rest to 0
        touched = set()
        for k in arcs:
            for pos, c in f_rows.get(k, ()):
                low[pos] -= sign * min(c, 0)
                high[pos] -= sign * max(c, 0)
                if k == pick:
                    act[pos] += sign * c
                touched.add(pos)
        return touched

    def dfs(depth):
        if depth == len(tails):
            point = list(values)
            for ks in tail_arcs:
                for k in ks:
                    point[k] = 0
            for k in f_by_tail.get(0, ()):
                point[k] = 0
            for k in chosen:
                point[k] = 1
            u_vals = _difference_solve(model, rows_u, point, u_vars)
            if u_vals is None:
                return None
            for k, val in u_vals.items():
                point[k] = val
            full = {model.variables[k].name: point[k] for k in range(len(point))}
            return None if model.violations(full, tol=0) else full
        arcs = tail_arcs[depth]
        for pick in arcs:
            touched = settle(arcs, pick, 1)
            if all(feasible(p) for p in touched):
                chosen.append(pick)
                found = dfs(depth + 1)
                if found is not None:
                    return found
                chosen.pop()
            settle(arcs, pick, -1)
        return None

    # arcs leaving the root are free in the search; they only enter rows through their bounds
    for k in f_by_tail.get(0, ()):
        settle([k], None, 1)
    return dfs(0)


def _difference_solve(model, rows, point, u_vars):
    """Bellman-Ford on u_a - u_b <= c rows plus the u bounds; None if infeasible."""
    source = -1
    u_set = set(u_vars)
    edges = []
    for k in u_vars:
        v = model.variables[k]
        edges.append((source, k, exact(v.upper)))  # u_k - s <= upper
        edges.append((k, source, -exact(v.lower)))  # s - u_k <= -lower
    for terms, sense, rhs in rows:
        rest = 0
        us = []
        for k, c in terms:
            if k in u_set:
                us.append((k, c))
            else:
                rest += c * point[k]
        bound = rhs - rest
        senses = {LE: [(1, bound)], GE: [(-1, -bound)], EQ: [(1, bound), (-1, -bound)]}[sense]
        for sign, lim in senses:
            pos = [k for k, c in us if sign * c == 1]
            neg = [k for k, c in us if sign * c == -1]
            if len(pos) + len(neg) != len(us) or len(pos) > 1 or len(neg) > 1:
                raise NotImplementedError("row is not a difference constraint")
            if not us:
                if lim < 0:
                    return None
                continue
            a = pos[0] if pos else source
            b = neg[0] if neg else source
            edges.append((b, a, lim))  # u_a - u_b <= lim
    nodes = [source] + list(u_vars)
    dist = {v: 0 for v in nodes}
    for _ in range(len(nodes)):
        changed = False
        for b, a, w in edges:
            if dist[b] + w < dist[a]:
                dist[a] = dist[b] + w
                changed = True
        if not changed:
            break
    else:
        return None
    return {k: dist[k] - dist[source] for k in u_vars}
