"""Canonical JSON and CSV writers for reports, and the experiment spec record.

JSON output has sorted keys, two-space indentation, LF line endings and floats
written with 17 significant digits, so identical inputs give identical bytes
and every float parses back to the same value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, MalformedInputError
from .perm_core import check_seed

SCHEMA_VERSION = 1

COMMANDS = ("moments", "bounds", "tails", "verify", "indep-test", "power-check")


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidParameterError(f"non-finite value {x!r} cannot be serialized")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".eE"):
        s += ".0"
    return s


def _plain(obj):
    """Convert dataclasses, numpy values and tuples to JSON-ready builtins."""
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise InvalidParameterError(f"cannot serialize object of type {type(obj).__name__}")


def _emit(obj, indent: int, out: list[str]) -> None:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, key in enumerate(sorted(obj)):
            out.append(f"{pad}{json.dumps(key)}: ")
            _emit(obj[key], indent + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append("  " * indent + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for k, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append("  " * indent + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    else:
        out.append(json.dumps(obj, ensure_ascii=False))


def to_canonical_json(obj) -> str:
    out: list[str] = []
    _emit(_plain(obj), 0, out)
    return "".join(out) + "\n"


def serialize_report(report) -> str:
    """Canonical JSON for a report object, a dict, or a list of reports.

    A list is wrapped as ``{"reports": [...]}``. The schema version is added
    at the top level.
    """
    body = _plain(report)
    if isinstance(body, list):
        body = {"reports": body}
    if not isinstance(body, dict):
        raise InvalidParameterError("a report must serialize to a JSON object")
    body = dict(body)
    body["schema_version"] = SCHEMA_VERSION
    return to_canonical_json(body)


def parse_report(text: str) -> dict:
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(body, dict) or "schema_version" not in body:
        raise MalformedInputError("report has no schema_version field")
    if body["schema_version"] != SCHEMA_VERSION:
        raise MalformedInputError(f"unsupported schema version {body['schema_version']!r}")
    body.pop("schema_version")
    return body


def rows_to_csv(header: list[str], rows) -> str:
    """CSV with LF endings; floats at 17 significant digits, None as empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else format_float(v) if isinstance(v, float) else v
                    for v in row])
    return buf.getvalue()


def curve_to_csv(curve) -> str:
    return rows_to_csv(["t", "tail_prob", "count"],
                       zip(curve.grid, curve.tail_probs, curve.counts))


@dataclass
class ExperimentSpec:
    """One CLI invocation as data: command, inputs, seed, parameters, output."""

    command: str
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidParameterError(f"unknown command {self.command!r}")
        if self.seed is not None:
            self.seed = check_seed(self.seed)

    def to_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "inputs": dict(self.inputs),
                "params": dict(self.params), "output": self.output}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        extra = set(d) - {"command", "seed", "inputs", "params", "output", "schema_version"}
        if extra:
            raise InvalidParameterError(f"unknown experiment spec keys {sorted(extra)}")
        if "command" not in d:
            raise InvalidParameterError("experiment spec needs a command")
        return cls(d["command"], d.get("seed"), dict(d.get("inputs") or {}),
                   dict(d.get("params") or {}), d.get("output"))
