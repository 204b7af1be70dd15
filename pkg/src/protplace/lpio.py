"""CPLEX-LP and MPS writers for LinearModel."""

from __future__ import annotations

import re

from .errors import SerializationError
from .formulations import BINARY, CONTINUOUS, EQ, GE, LE
from .rational import format_rational

LP_NAME_LIMIT = 255
MPS_FIXED_NAME_LIMIT = 8
MPS_FIXED_NUMBER_WIDTH = 12
TERMS_PER_LINE = 8

_LP_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def _check_lp_name(name):
    if len(name) > LP_NAME_LIMIT or not _LP_NAME.match(name):
        raise SerializationError(f"name {name!r} is not representable in LP format")


def _is_plain_binary(v):
    return v.kind == BINARY and v.lower == 0 and v.upper == 1


def _lp_expr(model, terms):
    parts = []
    for k, c in terms:
        name = model.variables[k].name
        mag = abs(c)
        body = name if mag == 1 else f"{format_rational(mag)} {name}"
        if not parts:
            parts.append(body if c > 0 else f"- {body}")
        else:
            parts.append(f"{'+' if c > 0 else '-'} {body}")
    if not parts:
        parts = [f"0 {model.variables[0].name}"]
    lines = [" ".join(parts[i:i + TERMS_PER_LINE]) for i in range(0, len(parts), TERMS_PER_LINE)]
    return "\n   ".join(lines)


def write_lp(model):
    """CPLEX LP text; variable and row order follow the model."""
    for v in model.variables:
        _check_lp_name(v.name)
    for row in model.constraints:
        _check_lp_name(row.name)
    used = set(model.objective)
    for row in model.constraints:
        used.update(k for k, _ in row.terms)
    obj_terms = sorted(model.objective.items())
    # a variable that occurs nowhere would vanish on read-back
    obj_terms += [(k, 0) for k in range(len(model.variables)) if k not in used]
    out = ["Minimize", f" obj: {_lp_obj(model, obj_terms)}", "Subject To"]
    for row in model.constraints:
        out.append(f" {row.name}: {_lp_expr(model, row.terms)} {row.sense} {format_rational(row.rhs)}")
    bounds, generals, binaries = [], [], []
    for v in model.variables:
        if _is_plain_binary(v):
            binaries.append(v.name)
            continue
        if v.kind != CONTINUOUS:
            generals.append(v.name)
        if v.upper is not None and v.lower == v.upper:
            bounds.append(f" {v.name} = {format_rational(v.lower)}")
        elif v.upper is None:
            if v.lower != 0:
                bounds.append(f" {v.name} >= {format_rational(v.lower)}")
        else:
            bounds.append(f" {format_rational(v.lower)} <= {v.name} <= {format_rational(v.upper)}")
    if bounds:
        out.append("Bounds")
        out.extend(bounds)
    if generals:
        out.append("Generals")
        out.extend(f" {name}" for name in generals)
    if binaries:
        out.append("Binaries")
        out.extend(f" {name}" for name in binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def _lp_obj(model, terms):
    text = _lp_expr(model, [(k, c) for k, c in terms if c != 0])
    extra = [f"+ 0 {model.variables[k].name}" for k, c in terms if c == 0]
    return " ".join([text] + extra)


# ---------------------------------------------------------------------- MPS

_FIELD_COLS = (1, 4, 14, 24, 39, 49)  # 0-based starts of fields 1..6


def _fixed_line(*fields):
    line = [" "] * 61
    for start, text in zip(_FIELD_COLS, fields):
        for k, ch in enumerate(text):
            line[start + k] = ch
    return "".join(line).rstrip()


def _mps_number(value, fixed):
    text = format_rational(value)
    if fixed and len(text) > MPS_FIXED_NUMBER_WIDTH:
        raise SerializationError(f"number {text} does not fit a fixed MPS field")
    return text


def write_mps(model, free=False):
    """MPS text.  Fixed-column layout by default (names up to 8 characters);
    ``free=True`` writes whitespace-separated free MPS with long names."""
    fixed = not free
    limit = MPS_FIXED_NAME_LIMIT if fixed else LP_NAME_LIMIT
    names = [v.name for v in model.variables] + [r.name for r in model.constraints] + ["obj"]
    for name in names:
        if len(name) > limit or " " in name or not name:
            kind = "fixed" if fixed else "free"
            raise SerializationError(f"name {name!r} exceeds the {kind} MPS limit of {limit}")

    def line(*fields):
        if fixed:
            return _fixed_line(*fields)
        return " " + " ".join(f for f in fields if f)

    rows_of = [[] for _ in model.variables]
    for k, c in sorted(model.objective.items()):
        rows_of[k].append(("obj", c))
    sense_code = {LE: "L", GE: "G", EQ: "E"}
    for row in model.constraints:
        for k, c in row.terms:
            rows_of[k].append((row.name, c))

    out = [f"NAME          {model.tag}", "ROWS", line("N", "obj")]
    out += [line(sense_code[r.sense], r.name) for r in model.constraints]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for k, v in enumerate(model.variables):
        want_int = v.kind != CONTINUOUS
        if want_int != in_int:
            tag = "'INTORG'" if want_int else "'INTEND'"
            out.append(line("", f"M{marker}", "'MARKER'", "", tag))
            marker += 1
            in_int = want_int
        entries = rows_of[k] or [("obj", 0)]
        for rname, c in entries:
            out.append(line("", v.name, rname, _mps_number(c, fixed)))
    if in_int:
        out.append(line("", f"M{marker}", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    for r in model.constraints:
        if r.rhs != 0:
            out.append(line("", "RHS", r.name, _mps_number(r.rhs, fixed)))
    out.append("BOUNDS")
    for v in model.variables:
        if _is_plain_binary(v):
            out.append(line("BV", "BND", v.name))
        elif v.upper is not None and v.lower == v.upper:
            out.append(line("FX", "BND", v.name, _mps_number(v.lower, fixed)))
        else:
            if v.lower != 0:
                out.append(line("LO", "BND", v.name, _mps_number(v.lower, fixed)))
            if v.upper is None:
                if v.kind != CONTINUOUS:
                    out.append(line("PL", "BND", v.name))
            else:
                out.append(line("UP", "BND", v.name, _mps_number(v.upper, fixed)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"
