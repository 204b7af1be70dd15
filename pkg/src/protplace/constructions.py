"""Conversions between the two equivalent protection certificates.

Condition (a) is an injection-to-line assignment ``g`` that makes the
augmented graph connected.  Condition (b) is an injection-to-bus assignment
``h`` (a bus or one of its neighbours) such that the PMU-covered set plus
``h(I)`` is all of V.  Both functions here take the *covered* bus set, not
the PMU buses themselves, and assume no protected line flows.

``g`` maps bus -> line index; ``h`` maps bus -> bus.
"""

from __future__ import annotations

from .errors import PreconditionError

ROOT = 0


def verify_condition_b(grid, injections, covered, h):
    """Every h(i) is i or a neighbour of i, and covered + h(I) spans V."""
    injections = set(injections)
    for i, j in h.items():
        if i not in injections:
            return False
        if j != i and j not in grid.neighbors(i):
            return False
    return set(covered) | set(h.values()) == set(grid.bus_ids)


def g_connects(grid, injections, covered, g):
    """Condition (a) with no protected lines: (V + {0}, E_P0 + g(I)) is connected."""
    injections = set(injections)
    parent = {v: v for v in (ROOT,) + grid.bus_ids}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    edges = [(b, ROOT) for b in covered]
    for i, e in g.items():
        if i not in injections or not 0 <= e < grid.m or i not in grid.lines[e]:
            return False
        edges.append(grid.lines[e])
    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in parent}) == 1


def h_from_g(grid, injections, covered, g):
    """Build h from a connecting g via a BFS tree rooted at the reference node."""
    injections = set(injections)
    covered = set(covered)
    if not g_connects(grid, injections, covered, g):
        raise PreconditionError("g does not connect the augmented graph")

    adj = {v: set() for v in (ROOT,) + grid.bus_ids}
    for b in covered:
        adj[ROOT].add(b)
        adj[b].add(ROOT)
    for e in g.values():
        i, j = grid.lines[e]
        adj[i].add(j)
        adj[j].add(i)
    depth = {ROOT: 0}
    children = {v: [] for v in adj}
    order = [ROOT]
    for v in order:
        for w in sorted(adj[v]):
            if w not in depth:
                depth[w] = depth[v] + 1
                children[v].append(w)
                order.append(w)

    g_pair = {i: frozenset(grid.lines[e]) for i, e in g.items()}
    h = {}
    # reverse level order, truncated before the root: its children are covered
    for i in reversed(order[1:]):
        for j in children[i]:
            edge = frozenset((i, j))
            if j in injections and g_pair.get(j) == edge:
                h[j] = j
            elif i in injections and g_pair.get(i) == edge:
                h[i] = j
            else:
                raise AssertionError(f"tree edge {sorted(edge)} is not in g(I)")
    for i in injections:
        h.setdefault(i, i)
    return h


def g_from_h(grid, injections, covered, h):
    """Build a connecting g from an h satisfying condition (b).

    Preimage chains are grown from uncovered buses until they reach the
    absorbed region R (starting at covered + {0}) or close into an h-cycle.
    Cycles are attached to R afterwards through a single adjacent edge.
    """
    injections = set(injections)
    covered = set(covered)
    if not covered:
        raise PreconditionError("the covered set must be nonempty")
    if not grid.is_connected():
        raise PreconditionError("the grid must be connected")
    if not verify_condition_b(grid, injections, covered, h):
        raise PreconditionError("h does not satisfy condition (b)")

    preimages = {}
    for i in sorted(h):
        preimages.setdefault(h[i], []).append(i)

    def line(a, b):
        return grid.find_line(a, b)

    g = {}
    region = covered | {ROOT}
    cycles = []
    in_cycle = set()
    for start in grid.bus_ids:
        if start in region or start in in_cycle:
            continue
        chain = [start]
        while True:
            pre = preimages.get(chain[-1])
            if not pre:
                raise AssertionError(f"bus {chain[-1]} has no preimage under h")
            nxt = pre[0]
            if nxt in region:
                chain.append(nxt)
                for k in range(1, len(chain)):
                    g[chain[k]] = line(chain[k], chain[k - 1])
                region.update(chain)
                break
            if nxt == chain[0]:
                for k in range(1, len(chain)):
                    g[chain[k]] = line(chain[k], chain[k - 1])
                if len(chain) > 1:
                    g[chain[0]] = line(chain[0], chain[-1])
                cycles.append(chain)
                in_cycle.update(chain)
                break
            if nxt in chain:
                raise AssertionError("preimage chain revisited an interior node")
            chain.append(nxt)

    pending = list(cycles)
    while pending:
        best = None
        for idx, cyc in enumerate(pending):
            for v in cyc:
                for u in grid.neighbors(v):
                    if u in region and (best is None or (u, v) < best[:2]):
                        best = (u, v, idx)
        if best is None:
            raise AssertionError("no cycle is adjacent to the absorbed region")
        u, v, idx = best
        cyc = pending.pop(idx)
        # v's own cycle edge is the redundant one; reroute it to the region
        g[v] = line(v, u)
        region.update(cyc)
    return g


def brute_force_h_search(grid, injections, covered):
    """Backtracking search for any h satisfying condition (b), or ``None``."""
    injections = set(injections)
    todo = sorted(set(grid.bus_ids) - set(covered))
    used = {}

    def place(k):
        if k == len(todo):
            return True
        v = todo[k]
        for j in sorted(({v} | grid.neighbors(v)) & injections):
            if j not in used:
                used[j] = v
                if place(k + 1):
                    return True
                del used[j]
        return False

    if not place(0):
        return None
    h = dict(used)
    for i in injections:
        h.setdefault(i, i)
    return h
