"""Interaction plans: intent and click steps that drive an app to a target."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Optional

import jsonschema

from .callgraph import ConditionNote, Path
from .ir import AppModel

MAX_VARIANTS = 16

_STEP_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "component", "trigger"],
         "properties": {
             "kind": {"const": "intent"},
             "component": {"enum": ["activity", "receiver"]},
             "trigger": {"oneOf": [
                 {"type": "object", "additionalProperties": False, "required": ["action"],
                  "properties": {"action": {"type": "string"}}},
                 {"type": "object", "additionalProperties": False, "required": ["class"],
                  "properties": {"class": {"type": "string"}}}]}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "activity", "widget_id"],
         "properties": {"kind": {"const": "click"}, "activity": {"type": "string"},
                        "widget_id": {"type": "string"}}},
    ]
}

PLAN_FILE_SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["plans"],
    "properties": {"plans": {"type": "array", "items": {
        "type": "object", "additionalProperties": False,
        "required": ["target", "call_sequence", "conditions", "steps"],
        "properties": {
            "target": {"type": "string"},
            "call_sequence": {"type": "array", "items": {"type": "string"}},
            "conditions": {"type": "array", "items": {
                "type": "object", "additionalProperties": False,
                "required": ["subject", "required", "resolved"],
                "properties": {"subject": {"type": "string"}, "required": {"type": "string"},
                               "resolved": {"type": "boolean"}}}},
            "steps": {"type": "array", "items": _STEP_SCHEMA}}}}},
}


class PlanFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    kind: str
    component: Optional[str] = None   # intent: activity | receiver
    by: Optional[str] = None          # intent: action | class
    value: Optional[str] = None       # intent: the action string or class name
    activity: Optional[str] = None    # click
    widget_id: Optional[str] = None   # click

    @classmethod
    def intent(cls, component: str, by: str, value: str) -> "Step":
        return cls("intent", component=component, by=by, value=value)

    @classmethod
    def click(cls, activity: str, widget_id: str) -> "Step":
        return cls("click", activity=activity, widget_id=widget_id)

    def to_json(self) -> dict:
        if self.kind == "intent":
            return {"kind": "intent", "component": self.component,
                    "trigger": {self.by: self.value}}
        return {"kind": "click", "activity": self.activity, "widget_id": self.widget_id}

    @classmethod
    def from_json(cls, d: dict) -> "Step":
        if d["kind"] == "intent":
            (by, value), = d["trigger"].items()
            return cls.intent(d["component"], by, value)
        return cls.click(d["activity"], d["widget_id"])


@dataclass(frozen=True)
class Plan:
    target: str
    steps: tuple[Step, ...]
    call_sequence: tuple[str, ...]
    conditions: tuple[ConditionNote, ...] = ()

    @property
    def resolved(self) -> bool:
        return all(c.resolved for c in self.conditions)

    def to_json(self) -> dict:
        return {"target": self.target, "call_sequence": list(self.call_sequence),
                "conditions": [{"subject": c.subject, "required": c.required,
                                "resolved": c.resolved} for c in self.conditions],
                "steps": [s.to_json() for s in self.steps]}

    @classmethod
    def from_json(cls, d: dict) -> "Plan":
        return cls(d["target"], tuple(Step.from_json(s) for s in d["steps"]),
                   tuple(d["call_sequence"]),
                   tuple(ConditionNote(c["subject"], c["required"], c["resolved"])
                         for c in d["conditions"]))


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Partial:
    steps: tuple[Step, ...]
    foreground: Optional[str]


class _Synth:
    def __init__(self, model: AppModel):
        self.model = model
        launcher = model.launcher
        self.launcher = launcher.class_name if launcher else None

    def convert(self, path: Path, start: _Partial) -> list[_Partial]:
        """All step sequences (one per widget choice) executing ``path`` after
        ``start``."""
        states = [start]
        if path.entry_prefix is not None:
            states = self._then(states, path.entry_prefix)
        for segs in path.condition_segments:
            for seg in segs:
                states = self._then(states, seg)
        states = [self._entry(path, s) for s in states]
        for j, e in enumerate(path.edges):
            if e.kind == "icc" and self._is_activity(e.component):
                states = [_Partial(s.steps, e.component) for s in states]
            elif e.kind == "callback":
                bindings = path.edge_bindings[j] if j < len(path.edge_bindings) else ()
                states = [_Partial(s.steps + (Step.click(b.activity, b.widget_id),), s.foreground)
                          for s, b in itertools.product(states, bindings)][:MAX_VARIANTS]
        return states[:MAX_VARIANTS]

    def _is_activity(self, cls: Optional[str]) -> bool:
        decl = self.model.component(cls) if cls else None
        return decl is not None and decl.kind == "activity"

    def _then(self, states: list[_Partial], seg: Path) -> list[_Partial]:
        out: list[_Partial] = []
        for s in states:
            out += self.convert(seg, s)
        return out[:MAX_VARIANTS]

    def _entry(self, path: Path, s: _Partial) -> _Partial:
        t = path.trigger
        decl = self.model.component(t.component)
        kind = decl.kind if decl is not None else "receiver"
        if kind == "activity":
            if s.foreground == t.component:
                return s
            step = Step.intent("activity", "class" if t.kind == "by_class_name" else "action",
                               t.component if t.kind == "by_class_name" else t.action)
            return _Partial(s.steps + (step,), t.component)
        step = Step.intent("receiver", "class" if t.kind == "by_class_name" else "action",
                           t.component if t.kind == "by_class_name" else t.action)
        return _Partial(s.steps + (step,), s.foreground)


def _all_conditions(path: Path) -> list[ConditionNote]:
    out: list[ConditionNote] = []
    if path.entry_prefix is not None:
        out += _all_conditions(path.entry_prefix)
    for segs in path.condition_segments:
        for seg in segs:
            out += _all_conditions(seg)
    out += path.conditions
    return out


def _omit_reason(path: Path) -> Optional[str]:
    if path.trigger is None:
        return "no_entry_trigger"
    stack = [path]
    while stack:
        p = stack.pop()
        if "unresolved_widget" in p.flags:
            return "unresolved_widget"
        if p.trigger is None:
            return "no_entry_trigger"
        if p.entry_prefix is not None:
            stack.append(p.entry_prefix)
        for segs in p.condition_segments:
            stack.extend(segs)
    return None


def synthesize(paths: Iterable[Path], icc=None, model: Optional[AppModel] = None,
               diagnostics: Optional[list] = None) -> list[Plan]:
    if model is None:
        raise ValueError("synthesize needs the app model")
    diag = diagnostics if diagnostics is not None else []
    synth = _Synth(model)
    plans: list[Plan] = []
    seen: set = set()
    for path in paths:
        reason = _omit_reason(path)
        if reason is not None:
            diag.append({"kind": reason, "path": [str(n) for n in path.nodes]})
            continue
        conditions = tuple(dict.fromkeys(_all_conditions(path)))
        for variant in synth.convert(path, _Partial((), synth.launcher)):
            steps = variant.steps
            if (not steps or steps[0].kind != "intent") and synth.launcher is not None:
                steps = (Step.intent("activity", "class", synth.launcher),) + steps
            if steps in seen:
                continue
            seen.add(steps)
            plans.append(Plan(str(path.target), steps, tuple(str(n) for n in path.nodes),
                              conditions))
    return plans


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _plan_order(p: Plan) -> tuple:
    return (p.target, len(p.steps), json.dumps(p.to_json(), sort_keys=True))


def serialize(plans: Iterable[Plan]) -> bytes:
    doc = {"plans": [p.to_json() for p in sorted(plans, key=_plan_order)]}
    return canonical_json(doc)


def canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def deserialize(data: bytes | str) -> list[Plan]:
    try:
        doc = json.loads(data)
        jsonschema.validate(doc, PLAN_FILE_SCHEMA)
    except (json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise PlanFormatError(str(e).splitlines()[0]) from e
    return [Plan.from_json(p) for p in doc["plans"]]
