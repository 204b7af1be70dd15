"""Grid, measurement configuration and instance I/O."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ParseError, ValidationError
from .rational import format_rational, to_fraction


@dataclass(frozen=True)
class Grid:
    """Undirected multigraph of buses and lines.

    The constructor canonicalises: bus ids ascending, every line stored as
    ``(low, high)`` and the line list sorted lexicographically (parallel
    lines keep their relative order).  Line indices always refer to this
    canonical order.
    """

    bus_ids: tuple
    lines: tuple
    reactance: tuple | None = None

    def __post_init__(self):
        buses = tuple(sorted(int(b) for b in self.bus_ids))
        if len(set(buses)) != len(buses):
            raise ValidationError("duplicate bus ids")
        if buses and buses[0] < 1:
            # 0 names the reference node of the augmented graph
            raise ValidationError("bus ids must be positive integers")
        known = set(buses)
        pairs = []
        for k, line in enumerate(self.lines):
            i, j = (int(v) for v in line)
            if i == j:
                raise ValidationError(f"line {k} is a self-loop at bus {i}")
            for b in (i, j):
                if b not in known:
                    raise ValidationError(f"line {k} references unknown bus {b}")
            pairs.append((min(i, j), max(i, j)))
        react = self.reactance
        if react is not None:
            if len(react) != len(pairs):
                raise ValidationError("reactance list must be parallel to lines")
            react = [None if x is None else to_fraction(x) for x in react]
            for k, x in enumerate(react):
                if x is not None and x <= 0:
                    raise ValidationError(f"reactance of line {k} must be positive")
        order = sorted(range(len(pairs)), key=lambda k: pairs[k])
        object.__setattr__(self, "bus_ids", buses)
        object.__setattr__(self, "lines", tuple(pairs[k] for k in order))
        if react is not None:
            object.__setattr__(self, "reactance", tuple(react[k] for k in order))

    @property
    def n(self):
        return len(self.bus_ids)

    @property
    def m(self):
        return len(self.lines)

    @cached_property
    def index(self):
        """bus id -> internal index."""
        return {b: k for k, b in enumerate(self.bus_ids)}

    @cached_property
    def endpoints(self):
        """Internal endpoint arrays ``(eu, ev)`` with ``eu < ev``."""
        idx = self.index
        eu = np.array([idx[i] for i, _ in self.lines], dtype=np.int64)
        ev = np.array([idx[j] for _, j in self.lines], dtype=np.int64)
        return eu, ev

    @cached_property
    def csr(self):
        """Incidence lists ``(ptr, nbr, edge)``; each bus's lines ascend by index."""
        n = self.n
        eu, ev = self.endpoints
        deg = np.zeros(n + 1, dtype=np.int64)
        np.add.at(deg, eu + 1, 1)
        np.add.at(deg, ev + 1, 1)
        ptr = np.cumsum(deg)
        nbr = np.empty(2 * self.m, dtype=np.int64)
        edge = np.empty(2 * self.m, dtype=np.int64)
        fill = ptr[:-1].copy()
        for e in range(self.m):
            a, b = eu[e], ev[e]
            nbr[fill[a]], edge[fill[a]] = b, e
            fill[a] += 1
            nbr[fill[b]], edge[fill[b]] = a, e
            fill[b] += 1
        return ptr, nbr, edge

    @cached_property
    def _incident(self):
        inc = {b: [] for b in self.bus_ids}
        for e, (i, j) in enumerate(self.lines):
            inc[i].append(e)
            inc[j].append(e)
        return {b: tuple(v) for b, v in inc.items()}

    def incident_lines(self, bus):
        """Line indices touching ``bus``, ascending."""
        return self._incident[bus]

    @cached_property
    def _neighbors(self):
        nb = {b: set() for b in self.bus_ids}
        for i, j in self.lines:
            nb[i].add(j)
            nb[j].add(i)
        return {b: frozenset(v) for b, v in nb.items()}

    def neighbors(self, bus):
        return self._neighbors[bus]

    def other_end(self, line, bus):
        i, j = self.lines[line]
        if bus == i:
            return j
        if bus == j:
            return i
        raise ValueError(f"bus {bus} is not an endpoint of line {line}")

    def components(self):
        """Connected components as sorted tuples of bus ids."""
        seen = set()
        comps = []
        for b in self.bus_ids:
            if b in seen:
                continue
            stack, comp = [b], []
            seen.add(b)
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in self.neighbors(v):
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(tuple(sorted(comp)))
        return comps

    def is_connected(self):
        return self.n > 0 and len(self.components()) == 1

    def line_label(self, line):
        """``i_j`` with a ``_k`` suffix for the k-th extra parallel copy."""
        i, j = self.lines[line]
        k = self._parallel_rank[line]
        return f"{i}_{j}" if k == 0 else f"{i}_{j}_{k}"

    @cached_property
    def _parallel_rank(self):
        seen = {}
        rank = []
        for pair in self.lines:
            rank.append(seen.get(pair, 0))
            seen[pair] = rank[-1] + 1
        return tuple(rank)

    def find_line(self, i, j, exclude=()):
        """Smallest line index joining ``i`` and ``j`` that is not excluded."""
        pair = (min(i, j), max(i, j))
        for e in self.incident_lines(pair[0]):
            if self.lines[e] == pair and e not in exclude:
                return e
        raise ValidationError(f"no line between buses {i} and {j}")


@dataclass(frozen=True)
class MeasurementConfig:
    measured_injections: frozenset = frozenset()
    measured_lines: frozenset = frozenset()
    pmu_buses: frozenset = frozenset()
    cost_injection: Mapping = field(default_factory=dict)
    cost_line: Mapping = field(default_factory=dict)
    cost_pmu: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for name in ("measured_injections", "measured_lines", "pmu_buses"):
            object.__setattr__(self, name, frozenset(int(v) for v in getattr(self, name)))
        for name in ("cost_injection", "cost_line", "cost_pmu"):
            costs = {int(k): int(v) for k, v in dict(getattr(self, name)).items()}
            object.__setattr__(self, name, costs)
        for label, members, costs in (
            ("c_I", self.measured_injections, self.cost_injection),
            ("c_L", self.measured_lines, self.cost_line),
            ("c_P", self.pmu_buses, self.cost_pmu),
        ):
            extra = set(costs) - members
            if extra:
                raise ValidationError(f"{label} has keys outside its measured set: {sorted(extra)}")
            missing = members - set(costs)
            if missing:
                raise ValidationError(f"{label} is missing costs for {sorted(missing)}")
            negative = [k for k, v in costs.items() if v < 0]
            if negative:
                raise ValidationError(f"{label} has negative costs at {sorted(negative)}")

    def validate(self, grid):
        buses = set(grid.bus_ids)
        for label, members in (("M_I", self.measured_injections), ("M_P", self.pmu_buses)):
            unknown = members - buses
            if unknown:
                raise ValidationError(f"{label} references unknown buses {sorted(unknown)}")
        bad = [e for e in self.measured_lines if not 0 <= e < grid.m]
        if bad:
            raise ValidationError(f"M_L references unknown lines {sorted(bad)}")
        return self

    def all_protected(self):
        return ProtectionPlan(self.measured_injections, self.measured_lines, self.pmu_buses)

    def cost(self, plan):
        return (
            sum(self.cost_injection[i] for i in plan.protected_injections)
            + sum(self.cost_line[e] for e in plan.protected_lines)
            + sum(self.cost_pmu[k] for k in plan.protected_pmus)
        )


@dataclass(frozen=True)
class ProtectionPlan:
    protected_injections: frozenset = frozenset()
    protected_lines: frozenset = frozenset()
    protected_pmus: frozenset = frozenset()

    def __post_init__(self):
        for name in ("protected_injections", "protected_lines", "protected_pmus"):
            object.__setattr__(self, name, frozenset(int(v) for v in getattr(self, name)))

    def validate(self, config):
        for label, sub, sup in (
            ("injections", self.protected_injections, config.measured_injections),
            ("lines", self.protected_lines, config.measured_lines),
            ("PMUs", self.protected_pmus, config.pmu_buses),
        ):
            extra = sub - sup
            if extra:
                raise ValidationError(f"protected {label} outside the measured set: {sorted(extra)}")
        return self

    def issubset(self, other):
        return (
            self.protected_injections <= other.protected_injections
            and self.protected_lines <= other.protected_lines
            and self.protected_pmus <= other.protected_pmus
        )

    def to_json_dict(self, grid):
        return {
            "protected_injections": sorted(self.protected_injections),
            "protected_lines": [list(grid.lines[e]) for e in sorted(self.protected_lines)],
            "protected_pmus": sorted(self.protected_pmus),
        }

    @classmethod
    def from_json_dict(cls, data, grid):
        lines = []
        for pair in data.get("protected_lines", []):
            if isinstance(pair, int):
                lines.append(pair)
            else:
                i, j = pair
                lines.append(grid.find_line(int(i), int(j), exclude=lines))
        return cls(data.get("protected_injections", []), lines, data.get("protected_pmus", []))


@dataclass(frozen=True)
class ExperimentProfile:
    zero_injection_fraction: Fraction = Fraction(1, 10)
    cost_low: int = 1
    cost_high: int = 100
    pmu_cost_factor: Fraction = Fraction(4, 5)
    line_flows_enabled: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "zero_injection_fraction", to_fraction(self.zero_injection_fraction))
        object.__setattr__(self, "pmu_cost_factor", to_fraction(self.pmu_cost_factor))
        if not 0 <= self.zero_injection_fraction <= 1:
            raise ValidationError("zero_injection_fraction must lie in [0, 1]")
        if self.cost_low > self.cost_high:
            raise ValidationError("cost_low exceeds cost_high")
        if self.pmu_cost_factor <= 0:
            raise ValidationError("pmu_cost_factor must be positive")


# ------------------------------------------------------------------ MATPOWER

_BLOCK_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*\[(.*)$")


def _strip_comment(line):
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _matpower_blocks(text):
    """Map block name -> list of (lineno, numeric-token row)."""
    blocks = {}
    current = None
    rows = None
    pending = []
    pending_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if "..." in line:
            line = line[: line.index("...")]
            continuation = True
        else:
            continuation = False
        if current is None:
            match = _BLOCK_START.match(line)
            if not match:
                continue
            current = match.group(1)
            rows = []
            line = match.group(2)
        end = line.find("]")
        body = line if end < 0 else line[:end]
        for piece_no, piece in enumerate(body.split(";")):
            if piece_no > 0 and pending:
                rows.append((pending_line, pending))
                pending = []
            tokens = [t for t in re.split(r"[\s,]+", piece) if t]
            if tokens and not pending:
                pending_line = lineno
            pending.extend(tokens)
        if not continuation and pending:
            rows.append((pending_line, pending))
            pending = []
        if end >= 0:
            if current in blocks:
                raise ParseError(f"duplicate mpc.{current} block", lineno)
            blocks[current] = rows
            current = None
    if current is not None:
        raise ParseError(f"unterminated mpc.{current} block", lineno)
    return blocks


def _number(token, lineno):
    try:
        return to_fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"malformed number {token!r}", lineno) from None


def parse_matpower(text):
    """Build a Grid from MATPOWER M-file text (``mpc.bus`` and ``mpc.branch`` only)."""
    blocks = _matpower_blocks(text)
    for name in ("bus", "branch"):
        if name not in blocks:
            raise ParseError(f"missing mpc.{name} block")
    buses = []
    for lineno, row in blocks["bus"]:
        bus = _number(row[0], lineno)
        if bus.denominator != 1:
            raise ParseError(f"bus id {row[0]!r} is not an integer", lineno)
        buses.append(int(bus))
    if not buses:
        raise ValidationError("case has no buses")
    lines, react = [], []
    known = set(buses)
    for lineno, row in blocks["branch"]:
        if len(row) < 4:
            raise ParseError("branch row needs at least 4 columns", lineno)
        f, t, x = (_number(v, lineno) for v in (row[0], row[1], row[3]))
        if f.denominator != 1 or t.denominator != 1:
            raise ParseError("branch endpoints must be integers", lineno)
        f, t = int(f), int(t)
        for b in (f, t):
            if b not in known:
                raise ValidationError(f"line {lineno}: branch references unknown bus {b}")
        lines.append((f, t))
        react.append(x if x > 0 else None)
    return Grid(tuple(buses), tuple(lines), tuple(react))


BUNDLED_CASES = ("case9", "case14", "case24_ieee_rts", "case30", "case39", "case57", "case118")


def bundled_text(name):
    return resources.files("protplace.data").joinpath(name).read_text()


def load_case(name_or_path):
    """Grid from a bundled case name (``case9``...) or a path to an M-file."""
    path = Path(name_or_path)
    if path.exists():
        return parse_matpower(path.read_text())
    stem = name_or_path[:-2] if name_or_path.endswith(".m") else name_or_path
    if stem in BUNDLED_CASES:
        return parse_matpower(bundled_text(f"{stem}.m"))
    raise FileNotFoundError(f"no case file or bundled case named {name_or_path!r}")


# ------------------------------------------------------------ instance JSON

def instance_to_dict(grid, config):
    data = {
        "buses": list(grid.bus_ids),
        "lines": [list(p) for p in grid.lines],
        "M_I": sorted(config.measured_injections),
        "M_L": sorted(config.measured_lines),
        "M_P": sorted(config.pmu_buses),
        "c_I": {str(k): v for k, v in sorted(config.cost_injection.items())},
        "c_L": {str(k): v for k, v in sorted(config.cost_line.items())},
        "c_P": {str(k): v for k, v in sorted(config.cost_pmu.items())},
    }
    if grid.reactance is not None:
        data["reactance"] = [None if x is None else format_rational(x) for x in grid.reactance]
    return data


def instance_from_dict(data):
    try:
        buses = data["buses"]
        lines = data["lines"]
    except KeyError as exc:
        raise ValidationError(f"instance is missing key {exc.args[0]!r}") from None
    react = data.get("reactance")
    raw = Grid(tuple(buses), tuple(tuple(p) for p in lines), None if react is None else tuple(react))
    # line keys in the file refer to file order; remap when the file is not canonical
    file_pairs = [(min(int(i), int(j)), max(int(i), int(j))) for i, j in lines]
    remap = {}
    taken = set()
    for k, pair in enumerate(file_pairs):
        e = raw.find_line(*pair, exclude=taken)
        taken.add(e)
        remap[k] = e

    def line_ref(k):
        k = int(k)
        if k not in remap:
            raise ValidationError(f"unknown line index {k}")
        return remap[k]

    config = MeasurementConfig(
        measured_injections=data.get("M_I", []),
        measured_lines=[line_ref(k) for k in data.get("M_L", [])],
        pmu_buses=data.get("M_P", []),
        cost_injection={int(k): v for k, v in data.get("c_I", {}).items()},
        cost_line={line_ref(k): v for k, v in data.get("c_L", {}).items()},
        cost_pmu={int(k): v for k, v in data.get("c_P", {}).items()},
    )
    config.validate(raw)
    return raw, config


def save_instance(grid, config):
    """Canonical JSON text (sorted keys, canonical line order)."""
    return json.dumps(instance_to_dict(grid, config), sort_keys=True, indent=1) + "\n"


def load_instance(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if not isinstance(data, dict):
        raise ValidationError("instance JSON must be an object")
    return instance_from_dict(data)


def load_bundled_instance(name):
    return load_instance(bundled_text(f"{name}.json"))


# -------------------------------------------------------------- experiments

def _round_half_up(q):
    return math.floor(q + Fraction(1, 2))


def generate_experiment(grid, profile):
    """Random measurement configuration in the style of the benchmark studies."""
    if grid.n == 0:
        raise ValidationError("grid has no buses")
    rng = np.random.default_rng(profile.rng_seed)
    n_zero = _round_half_up(profile.zero_injection_fraction * grid.n)
    zero_idx = rng.choice(grid.n, size=n_zero, replace=False)
    zero = {grid.bus_ids[k] for k in zero_idx}
    line_cost = rng.integers(profile.cost_low, profile.cost_high, size=grid.m, endpoint=True)
    inj_cost = rng.integers(profile.cost_low, profile.cost_high, size=grid.n, endpoint=True)
    c_line = {e: int(c) for e, c in enumerate(line_cost)}
    c_inj = {b: 0 if b in zero else int(inj_cost[k]) for k, b in enumerate(grid.bus_ids)}
    c_pmu = {
        b: math.ceil(profile.pmu_cost_factor * sum(c_line[e] for e in grid.incident_lines(b)))
        for b in grid.bus_ids
    }
    lines = frozenset(range(grid.m)) if profile.line_flows_enabled else frozenset()
    return MeasurementConfig(
        measured_injections=grid.bus_ids,
        measured_lines=lines,
        pmu_buses=grid.bus_ids,
        cost_injection=c_inj,
        cost_line={e: c_line[e] for e in lines},
        cost_pmu=c_pmu,
    )


def uniform_config(grid, zero_injections=(), cost=1, line_flows=True):
    """Every measurement eligible at ``cost``; listed zero-injection buses cost 0."""
    zero = set(zero_injections)
    lines = range(grid.m) if line_flows else ()
    return MeasurementConfig(
        measured_injections=grid.bus_ids,
        measured_lines=lines,
        pmu_buses=grid.bus_ids,
        cost_injection={b: 0 if b in zero else cost for b in grid.bus_ids},
        cost_line={e: cost for e in lines},
        cost_pmu={b: cost for b in grid.bus_ids},
    )


# ------------------------------------------------------------ graph helpers

def pmu_coverage(grid, protected_pmus: Iterable[int]):
    """Buses whose phasor is read by some protected PMU (the PMU bus and its neighbours)."""
    covered = set()
    for k in protected_pmus:
        covered.add(k)
        covered.update(grid.neighbors(k))
    return frozenset(covered)


def incidence_matrix(grid):
    """Signed |V| x |E| incidence: +1 at the lower internal index, -1 at the other."""
    a = np.zeros((grid.n, grid.m), dtype=np.int8)
    eu, ev = grid.endpoints
    cols = np.arange(grid.m)
    a[eu, cols] = 1
    a[ev, cols] = -1
    return a
