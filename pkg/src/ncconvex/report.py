"""Structured verification reports and their JSON encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

PASS, FAIL, ERROR = "pass", "fail", "error"


@dataclass
class Outcome:
    name: str
    value: float
    bound: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "bound": self.bound, "pass": bool(self.passed)}


@dataclass
class VerificationReport:
    """Outcome list of one verification run.

    ``status`` is derived: ``pass`` iff every outcome passes, unless an
    error was recorded with :meth:`fail_with_error`.
    """

    command: str
    params: dict[str, Any] = field(default_factory=dict)
    outcomes: list[Outcome] = field(default_factory=list)
    seed: int = 0
    elapsed: float = 0.0
    error: str | None = None

    def add(self, name: str, value: float, bound: float, passed: bool) -> Outcome:
        out = Outcome(name, float(value), float(bound), bool(passed))
        self.outcomes.append(out)
        return out

    def check_ge(self, name: str, value: float, bound: float) -> Outcome:
        return self.add(name, value, bound, value >= bound)

    def check_le(self, name: str, value: float, bound: float) -> Outcome:
        return self.add(name, value, bound, value <= bound)

    def fail_with_error(self, message: str) -> None:
        self.error = message

    @property
    def status(self) -> str:
        if self.error is not None:
            return ERROR
        return PASS if all(o.passed for o in self.outcomes) else FAIL

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def extend(self, other: "VerificationReport", prefix: str = "") -> None:
        for o in other.outcomes:
            self.add(prefix + o.name, o.value, o.bound, o.passed)
        if other.error is not None and self.error is None:
            self.error = other.error

    def to_dict(self) -> dict:
        d = {
            "command": self.command,
            "params": dict(self.params),
            "outcomes": [o.to_dict() for o in self.outcomes],
            "seed": int(self.seed),
            "elapsed_s": self.elapsed,
            "status": self.status,
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        rep = cls(
            command=d["command"],
            params=dict(d.get("params", {})),
            seed=int(d.get("seed", 0)),
            elapsed=float(d.get("elapsed_s", 0.0)),
            error=d.get("error"),
        )
        for o in d.get("outcomes", []):
            rep.outcomes.append(Outcome(o["name"], _num(o["value"]), _num(o["bound"]), bool(o["pass"])))
        return rep

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def table(self) -> str:
        rows = [(o.name, _fmt(o.value), _fmt(o.bound), "PASS" if o.passed else "FAIL") for o in self.outcomes]
        header = ("outcome", "value", "bound", "result")
        widths = [max(len(r[i]) for r in rows + [header]) for i in range(4)]
        line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
        out = [f"# {self.command}  seed={self.seed}", line, "-" * len(line)]
        for r in rows:
            out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        out.append(f"status: {self.status.upper()}" + (f" ({self.error})" if self.error else ""))
        return "\n".join(out)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _num(v) -> float:
    # "nan" / "inf" / "-inf" strings decode through float() as well
    return float(v)


def _encode_float(v: float) -> str:
    # non-finite values become strings so the document stays valid JSON
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    s = format(v, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON encoder emitting floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _encode_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot encode {type(obj).__name__}")
