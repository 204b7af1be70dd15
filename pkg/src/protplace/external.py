"""Optional bridge to the HiGHS solver (``pip install highspy``).

Models travel through the text writers, so every external solve also
exercises the LP / MPS serialisation.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction

from .formulations import CONTINUOUS
from .lpio import write_lp, write_mps

try:
    import highspy
except ImportError:  # pragma: no cover - optional dependency
    highspy = None


def available():
    return highspy is not None


@dataclass
class ExternalResult:
    status: str  # "optimal", "infeasible" or the raw HiGHS status text
    objective: float | None
    values: dict
    nodes: int | None = None


def _require():
    if highspy is None:
        raise RuntimeError("highspy is not installed")


def _encode(model, via):
    if via == "lp":
        return write_lp(model), ".lp"
    if via == "mps":
        return write_mps(model, free=True), ".mps"
    if via == "fixed-mps":
        return write_mps(model), ".mps"
    raise ValueError(f"unknown transport {via!r}")


def load_text(text, suffix, time_limit=None):
    """A fresh Highs instance holding the model parsed from ``text``."""
    _require()
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    fd, path = tempfile.mkstemp(suffix=suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        status = h.readModel(path)
    finally:
        os.unlink(path)
    if status != highspy.HighsStatus.kOk:
        raise ValueError(f"HiGHS rejected the model text: {status}")
    return h


def solve(model, via="mps", time_limit=None):
    text, suffix = _encode(model, via)
    h = load_text(text, suffix, time_limit)
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kInfeasible:
        return ExternalResult("infeasible", None, {})
    if status != highspy.HighsModelStatus.kOptimal:
        return ExternalResult(h.modelStatusToString(status), None, {})
    names = list(h.getLp().col_names_)
    raw = dict(zip(names, h.getSolution().col_value))
    values = {}
    for v in model.variables:
        x = raw.get(v.name, 0.0)
        if v.kind != CONTINUOUS and abs(x - round(x)) <= 1e-6:
            values[v.name] = Fraction(round(x))
        else:
            values[v.name] = Fraction(repr(float(x)))
    info = h.getInfo()
    nodes = int(info.mip_node_count) if info.mip_node_count >= 0 else None
    return ExternalResult("optimal", info.objective_function_value, values, nodes)
