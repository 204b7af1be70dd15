"""Perfect-protection (topological observability) tests.

The main decision procedure contracts the always-available edges (protected
lines and the PMU links to the reference node ``0``) and then asks whether
one incident line per protected injection can join the remaining
components, which is a graphic x partition matroid intersection.  Two
independent oracles back it up: exhaustive enumeration of the injection
assignment, and a randomised exact rank test of the protected measurement
matrix over a 61-bit prime field.

Assignments ``g`` are dicts ``{injection bus: line index}``.  A protected
injection at a bus with no incident line is a zero row of the measurement
matrix; it is left out of the domain of ``g``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod

import numpy as np

from . import kernels
from .errors import SizeLimitError
from .grid import pmu_coverage

ROOT = 0
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class AugmentedGraph:
    nodes: tuple
    base_edges: tuple
    pmu_edges: frozenset


def build_augmented(grid, plan):
    covered = pmu_coverage(grid, plan.protected_pmus)
    return AugmentedGraph(
        nodes=(ROOT,) + grid.bus_ids,
        base_edges=grid.lines,
        pmu_edges=frozenset((b, ROOT) for b in covered),
    )


def plan_masks(grid, plan):
    """Boolean ``(inj_on, line_on, pmu_on)`` arrays on internal indices."""
    idx = grid.index
    inj = np.zeros(grid.n, dtype=np.bool_)
    pmu = np.zeros(grid.n, dtype=np.bool_)
    line = np.zeros(grid.m, dtype=np.bool_)
    inj[[idx[b] for b in plan.protected_injections]] = True
    pmu[[idx[b] for b in plan.protected_pmus]] = True
    line[list(plan.protected_lines)] = True
    return inj, line, pmu


def observe_masks(grid, inj, line, pmu, use_root=True):
    ptr, nbr, edge = grid.csr
    eu, ev = grid.endpoints
    return kernels.observe(grid.n, eu, ev, ptr, nbr, edge, inj, line, pmu, use_root)


def _g_dict(grid, g_arr, injections):
    return {b: int(g_arr[grid.index[b]]) for b in sorted(injections) if g_arr[grid.index[b]] >= 0}


def is_topologically_observable(grid, plan):
    """``(True, g)`` when the protected set gives perfect protection, else ``(False, None)``."""
    inj, line, pmu = plan_masks(grid, plan)
    ok, g_arr = observe_masks(grid, inj, line, pmu)
    if not ok:
        return False, None
    return True, _g_dict(grid, g_arr, plan.protected_injections)


def is_observable_no_pmu(grid, injections, lines):
    """Observability up to a common angle shift: some ``g`` makes ``(V, L + g(I))`` connected."""
    inj = np.zeros(grid.n, dtype=np.bool_)
    inj[[grid.index[b] for b in injections]] = True
    line = np.zeros(grid.m, dtype=np.bool_)
    line[list(lines)] = True
    ok, _ = observe_masks(grid, inj, line, np.zeros(grid.n, dtype=np.bool_), use_root=False)
    return bool(ok)


# --------------------------------------------------------------- brute force

def _connected_with(grid, plan, chosen_lines, covered):
    """Pure-Python union-find over V + {0}; shares nothing with the kernels."""
    parent = {v: v for v in (ROOT,) + grid.bus_ids}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    groups = len(parent)
    edges = [grid.lines[e] for e in plan.protected_lines]
    edges += [grid.lines[e] for e in chosen_lines]
    edges += [(b, ROOT) for b in covered]
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            groups -= 1
    return groups == 1


def brute_force_g_search(grid, plan, limit=BRUTE_FORCE_LIMIT):
    """First connecting assignment in lexicographic line order, or ``None``."""
    domain = [b for b in sorted(plan.protected_injections) if grid.incident_lines(b)]
    choices = [grid.incident_lines(b) for b in domain]
    total = prod(len(c) for c in choices)
    if total > limit:
        raise SizeLimitError(f"{total} assignments exceed the brute-force limit {limit}")
    covered = pmu_coverage(grid, plan.protected_pmus)
    for combo in itertools.product(*choices):
        if _connected_with(grid, plan, combo, covered):
            return dict(zip(domain, combo))
    return None


def verify_g(grid, plan, g):
    """Check an assignment: domain inside I, each line incident, graph connected."""
    for bus, e in g.items():
        if bus not in plan.protected_injections:
            return False
        if not 0 <= e < grid.m or bus not in grid.lines[e]:
            return False
    covered = pmu_coverage(grid, plan.protected_pmus)
    return _connected_with(grid, plan, list(g.values()), covered)


# ------------------------------------------------------------ algebraic rank

def protected_matrix(grid, plan, weights):
    """Protected measurement matrix over F_p for line weights ``weights`` (Python ints mod p)."""
    p = kernels.MERSENNE61
    idx = grid.index
    eu, ev = grid.endpoints
    covered = sorted(pmu_coverage(grid, plan.protected_pmus))
    injections = sorted(plan.protected_injections)
    lines = sorted(plan.protected_lines)
    rows = np.zeros((len(injections) + len(lines) + len(covered), grid.n), dtype=np.uint64)
    r = 0
    for b in injections:
        acc = {}
        k = idx[b]
        for e in grid.incident_lines(b):
            other = int(ev[e]) if eu[e] == k else int(eu[e])
            acc[k] = (acc.get(k, 0) + weights[e]) % p
            acc[other] = (acc.get(other, 0) - weights[e]) % p
        for col, val in acc.items():
            rows[r, col] = val
        r += 1
    for e in lines:
        rows[r, eu[e]] = weights[e] % p
        rows[r, ev[e]] = (-weights[e]) % p
        r += 1
    for b in covered:
        rows[r, idx[b]] = 1
        r += 1
    return rows


def algebraic_rank_check(grid, plan, seed=0, repeats=3):
    """Full column rank for random line weights; majority vote over ``repeats`` draws."""
    votes = 0
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        draws = rng.integers(1, kernels.MERSENNE61, size=grid.m, dtype=np.uint64)
        weights = [int(w) for w in draws]
        if kernels.rank_mod_p(protected_matrix(grid, plan, weights)) == grid.n:
            votes += 1
    return votes * 2 > repeats


def physical_rank_check(grid, plan):
    """Same rank test with the physical weights 1/x; ``None`` without reactances.

    Informational only: perfect protection is defined for generic weights.
    """
    if grid.reactance is None or any(x is None for x in grid.reactance):
        return None
    p = kernels.MERSENNE61
    weights = [x.denominator * pow(x.numerator, p - 2, p) % p for x in grid.reactance]
    return kernels.rank_mod_p(protected_matrix(grid, plan, weights)) == grid.n
