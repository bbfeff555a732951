"""Derivation traces and their JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .syntax import Formula, parse, show

JUSTIFICATIONS = ("FO", "I", "S", "T", "DEF")


@dataclass(frozen=True)
class TraceStep:
    rule: str
    path: tuple
    before: Formula
    after: Formula
    just: str
    # the Standardization instance an S step relies on
    instance: Optional[Formula] = None

    def to_json(self):
        out = {"rule": self.rule, "path": list(self.path), "before": show(self.before),
               "after": show(self.after), "just": self.just}
        if self.instance is not None:
            out["instance"] = show(self.instance)
        return out

    @classmethod
    def from_json(cls, d):
        inst = d.get("instance")
        return cls(d["rule"], tuple(d["path"]), parse(d["before"]), parse(d["after"]),
                   d["just"], parse(inst) if inst else None)


@dataclass
class Trace:
    input: Formula
    steps: list = field(default_factory=list)
    output: Optional[Formula] = None
    status: str = "reduced"
    ctx: tuple = ()

    def to_json(self):
        return {
            "input": show(self.input),
            "ctx": sorted(self.ctx),
            "steps": [s.to_json() for s in self.steps],
            "output": show(self.output) if self.output is not None else None,
            "status": self.status,
        }

    def dumps(self):
        return json.dumps(self.to_json(), ensure_ascii=False)

    @classmethod
    def from_json(cls, d):
        out = d.get("output")
        return cls(parse(d["input"]), [TraceStep.from_json(s) for s in d["steps"]],
                   parse(out) if out else None, d.get("status", "reduced"),
                   tuple(d.get("ctx", ())))

    @classmethod
    def loads(cls, text):
        return cls.from_json(json.loads(text))
