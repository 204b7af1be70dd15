"""Solver-agnostic linear models of the protection placement problem.

Four builders:

* ``build_mtz_full``          - pure integer program with Miller-Tucker-Zemlin
  spanning-tree constraints on the graph augmented with reference node 0.
* ``build_mtz_mixed``         - the same with x, y, w, u continuous.
* ``build_domination``        - line-flow-free domination program.
* ``build_domination_mixed``  - the same with x, w continuous.

Variable names: ``x_<bus>``, ``y_<i>_<j>``, ``z_<bus>``, ``w_<i>_<j>__<bus>``
(MTZ) or ``w_<i>_<j>`` (domination, meaning bus ``j``'s injection covers
``i``), ``f_<from>_<to>``, ``u_<node>``; node 0 is spelled ``ROOT``.  An
extra parallel copy of line ``i_j`` gets a ``_<k>`` suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import PreconditionError, SolutionError, ValidationError
from .grid import ProtectionPlan

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

LE, EQ, GE = "<=", "=", ">="

ROOT_NAME = "ROOT"

TOL = Fraction(1, 10**6)


def exact(value):
    """Exact number: int when integral (cheap arithmetic), Fraction otherwise."""
    q = Fraction(value)
    return int(q) if q.denominator == 1 else q


@dataclass(frozen=True)
class Variable:
    name: str
    lower: Fraction
    upper: Fraction | None  # None is +infinity
    kind: str


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple  # ((var index, coefficient), ...)
    sense: str
    rhs: Fraction


@dataclass
class LinearModel:
    """Minimisation model with exact rational data."""

    tag: str
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)  # var index -> coefficient
    roles: dict = field(default_factory=dict)  # var name -> (role, key)
    index: dict = field(default_factory=dict)  # var name -> var index

    def add_var(self, name, lower=0, upper=1, kind=BINARY, role=None, cost=0):
        if name in self.index:
            raise ValidationError(f"duplicate variable {name}")
        lower = exact(lower)
        upper = None if upper is None else exact(upper)
        if kind == BINARY and not (0 <= lower and upper is not None and upper <= 1):
            raise ValidationError(f"binary variable {name} needs bounds inside [0, 1]")
        k = len(self.variables)
        self.variables.append(Variable(name, lower, upper, kind))
        self.index[name] = k
        if role is not None:
            self.roles[name] = role
        if cost:
            self.objective[k] = exact(cost)
        return k

    def add_row(self, name, terms, sense, rhs):
        merged = {}
        for k, c in terms:
            merged[k] = merged.get(k, 0) + exact(c)
        row = tuple((k, c) for k, c in merged.items() if c != 0)
        self.constraints.append(Constraint(name, row, sense, exact(rhs)))

    def var(self, name):
        return self.variables[self.index[name]]

    def count(self, kind=None, role=None):
        total = 0
        for v in self.variables:
            if kind is not None and v.kind != kind:
                continue
            if role is not None and self.roles.get(v.name, (None,))[0] != role:
                continue
            total += 1
        return total

    def validate(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValidationError("variable names are not unique")
        n = len(self.variables)
        for row in self.constraints:
            for k, _ in row.terms:
                if not 0 <= k < n:
                    raise ValidationError(f"row {row.name} references variable {k}")
        return self

    def objective_value(self, values):
        return sum(c * values.get(self.variables[k].name, 0) for k, c in self.objective.items())

    def violations(self, values, tol=TOL):
        """Names of violated bounds, integrality and rows for a ``{name: value}`` point."""
        bad = []
        for v in self.variables:
            x = values.get(v.name, 0)
            if x < v.lower - tol or (v.upper is not None and x > v.upper + tol):
                bad.append(f"bound:{v.name}")
            if v.kind != CONTINUOUS and abs(x - round(x)) > tol:
                bad.append(f"integrality:{v.name}")
        for row in self.constraints:
            lhs = sum(c * values.get(self.variables[k].name, 0) for k, c in row.terms)
            if (
                (row.sense == LE and lhs > row.rhs + tol)
                or (row.sense == GE and lhs < row.rhs - tol)
                or (row.sense == EQ and abs(lhs - row.rhs) > tol)
            ):
                bad.append(f"row:{row.name}")
        return bad


def _node_name(node):
    return ROOT_NAME if node == 0 else str(node)


# ---------------------------------------------------------------------- MTZ

def _build_mtz(grid, config, relaxed, dense_w, tag):
    model = LinearModel(tag=tag)
    n = grid.n
    vbar = n + 1
    cont_xy = CONTINUOUS if relaxed else BINARY

    for b in grid.bus_ids:
        on = b in config.measured_injections
        model.add_var(f"x_{b}", 0, 1 if on else 0, cont_xy, ("x", b),
                      config.cost_injection.get(b, 0) if on else 0)
    for e in range(grid.m):
        on = e in config.measured_lines
        model.add_var(f"y_{grid.line_label(e)}", 0, 1 if on else 0, cont_xy, ("y", e),
                      config.cost_line.get(e, 0) if on else 0)
    for b in grid.bus_ids:
        on = b in config.pmu_buses
        model.add_var(f"z_{b}", 0, 1 if on else 0, BINARY, ("z", b),
                      config.cost_pmu.get(b, 0) if on else 0)

    w = {}
    for e in range(grid.m):
        label = grid.line_label(e)
        owners = grid.bus_ids if dense_w else grid.lines[e]
        for b in owners:
            incident = b in grid.lines[e]
            w[e, b] = model.add_var(f"w_{label}__{b}", 0, 1 if incident else 0, cont_xy, ("w", (e, b)))

    # arcs of the bidirected augmented edge set: (tail, head, line or None)
    arcs = []
    for e, (i, j) in enumerate(grid.lines):
        arcs.append((i, j, e))
        arcs.append((j, i, e))
    for b in grid.bus_ids:
        arcs.append((b, 0, None))
        arcs.append((0, b, None))
    f = {}
    for a, b, e in arcs:
        suffix = "" if e is None or grid._parallel_rank[e] == 0 else f"_{grid._parallel_rank[e]}"
        name = f"f_{_node_name(a)}_{_node_name(b)}{suffix}"
        f[a, b, e] = model.add_var(name, 0, 1, BINARY, ("f", (a, b, e)))

    u_kind = CONTINUOUS if relaxed else INTEGER
    u = {}
    for node in (0,) + grid.bus_ids:
        u[node] = model.add_var(f"u_{_node_name(node)}", 0, n, u_kind, ("u", node))

    for a, b, e in arcs:
        arc = model.variables[f[a, b, e]].name[2:]
        model.add_row(
            f"mtz_{arc}",
            [(f[a, b, e], vbar - 1), (f[b, a, e], vbar - 3), (u[a], 1), (u[b], -1)],
            LE,
            vbar - 2,
        )
    outgoing = {node: [] for node in grid.bus_ids}
    for a, b, e in arcs:
        if a != 0:
            outgoing[a].append((f[a, b, e], 1))
    for node in grid.bus_ids:
        model.add_row(f"out_{node}", outgoing[node], EQ, 1)
    model.add_row("in_ROOT", [(f[a, b, e], 1) for a, b, e in arcs if b == 0], GE, 1)
    model.add_row("total", [(f[arc], 1) for arc in arcs], EQ, vbar - 1)

    z = {b: model.index[f"z_{b}"] for b in grid.bus_ids}
    for b in grid.bus_ids:
        terms = [(f[0, b, None], 1), (f[b, 0, None], 1), (z[b], -1)]
        terms += [(z[k], -1) for k in sorted(grid.neighbors(b))]
        model.add_row(f"pmu_{b}", terms, LE, 0)
    for e, (i, j) in enumerate(grid.lines):
        terms = [(f[i, j, e], 1), (f[j, i, e], 1), (model.index[f"y_{grid.line_label(e)}"], -1),
                 (w[e, i], -1), (w[e, j], -1)]
        model.add_row(f"en_{grid.line_label(e)}", terms, LE, 0)
    for b in grid.bus_ids:
        lines = range(grid.m) if dense_w else grid.incident_lines(b)
        terms = [(w[e, b], 1) for e in lines] + [(model.index[f"x_{b}"], -1)]
        model.add_row(f"asg_{b}", terms, LE, 0)
    return model


def build_mtz_full(grid, config, dense_w=False):
    """Integer program: MTZ spanning tree over enabled edges.

    ``dense_w`` keeps the w_{e,i} with i outside e as variables fixed at 0
    instead of omitting them.
    """
    config.validate(grid)
    return _build_mtz(grid, config, False, dense_w, "mtz")


def build_mtz_mixed(grid, config, dense_w=False):
    config.validate(grid)
    return _build_mtz(grid, config, True, dense_w, "mtz-mixed")


# --------------------------------------------------------------- domination

def check_domination_preconditions(grid, config):
    if config.measured_lines:
        labels = ", ".join(grid.line_label(e) for e in sorted(config.measured_lines))
        raise PreconditionError(f"domination formulation needs M_L empty; measured lines: {labels}")
    comps = grid.components()
    if len(comps) != 1:
        raise PreconditionError(f"domination formulation needs a connected grid; components: {comps}")


def _build_domination(grid, config, relaxed, tag):
    config.validate(grid)
    check_domination_preconditions(grid, config)
    model = LinearModel(tag=tag)
    kind = CONTINUOUS if relaxed else BINARY
    for b in grid.bus_ids:
        on = b in config.measured_injections
        model.add_var(f"x_{b}", 0, 1 if on else 0, kind, ("x", b),
                      config.cost_injection.get(b, 0) if on else 0)
    for b in grid.bus_ids:
        on = b in config.pmu_buses
        model.add_var(f"z_{b}", 0, 1 if on else 0, BINARY, ("z", b),
                      config.cost_pmu.get(b, 0) if on else 0)
    w = {}
    for i in grid.bus_ids:
        for j in sorted({i} | grid.neighbors(i)):
            w[i, j] = model.add_var(f"w_{i}_{j}", 0, 1, kind, ("w", (i, j)))
    x = {b: model.index[f"x_{b}"] for b in grid.bus_ids}
    z = {b: model.index[f"z_{b}"] for b in grid.bus_ids}
    for i in grid.bus_ids:
        terms = [(z[i], 1)] + [(z[k], 1) for k in sorted(grid.neighbors(i))]
        terms += [(w[i, j], 1) for j in sorted({i} | grid.neighbors(i))]
        model.add_row(f"dom_{i}", terms, GE, 1)
    for j in grid.bus_ids:
        terms = [(w[i, j], 1) for i in sorted({j} | grid.neighbors(j))] + [(x[j], -1)]
        model.add_row(f"cap_{j}", terms, LE, 0)
    model.add_row("pne", [(z[k], 1) for k in sorted(config.pmu_buses)], GE, 1)
    return model


def build_domination(grid, config):
    """Integer domination program (needs M_L empty and a connected grid)."""
    return _build_domination(grid, config, False, "dom")


def build_domination_mixed(grid, config):
    return _build_domination(grid, config, True, "dom-mixed")


BUILDERS = {
    "mtz": build_mtz_full,
    "mtz-mixed": build_mtz_mixed,
    "dom": build_domination,
    "dom-mixed": build_domination_mixed,
}


# ---------------------------------------------------------------- solutions

def read_solution(model, text):
    """Parse ``<name> <value>`` lines (``#`` comments) into a validated ``{name: Fraction}``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionError(f"line {lineno}: expected '<name> <value>'")
        name, token = parts
        if name not in model.index:
            raise SolutionError(f"line {lineno}: unknown variable {name!r}")
        try:
            values[name] = Fraction(token)
        except (ValueError, ZeroDivisionError):
            raise SolutionError(f"line {lineno}: bad value {token!r}") from None
    return validate_solution(model, values)


def validate_solution(model, values, tol=TOL):
    full = {v.name: Fraction(values.get(v.name, 0)) for v in model.variables}
    bad = model.violations(full, tol)
    integrality = [b for b in bad if b.startswith("integrality:")]
    if integrality:
        raise SolutionError("integrality violated: " + ", ".join(x.split(":", 1)[1] for x in integrality))
    bounds = [b for b in bad if b.startswith("bound:")]
    if bounds:
        raise SolutionError("bounds violated: " + ", ".join(x.split(":", 1)[1] for x in bounds))
    if bad:
        raise SolutionError("infeasible solution, violated rows: " + ", ".join(x.split(":", 1)[1] for x in bad))
    return full


def extract_plan(model, values):
    """Protected entities are those whose x / y / z value exceeds 1/2."""
    half = Fraction(1, 2)
    inj, lines, pmus = [], [], []
    for name, (role, key) in model.roles.items():
        if Fraction(values.get(name, 0)) <= half:
            continue
        if role == "x":
            inj.append(key)
        elif role == "y":
            lines.append(key)
        elif role == "z":
            pmus.append(key)
    return ProtectionPlan(inj, lines, pmus)
