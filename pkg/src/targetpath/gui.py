"""GUI event resolution: which widget fires a handler, and in which activity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .callgraph import Path
from .ir import AppModel, MethodRef
from .ir.framework import FIND_VIEW_BY_ID


class UnknownResourceId(KeyError):
    def __init__(self, numeric: int):
        super().__init__(f"unknown resource id 0x{numeric & 0xFFFFFFFF:08x}")
        self.numeric = numeric

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class GuiBinding:
    activity: str
    widget_id: str
    handler: MethodRef
    registration_site: tuple[MethodRef, int]
    event: str = "click"

    def to_json(self) -> dict:
        return {"activity": self.activity, "widget_id": self.widget_id, "event": self.event,
                "handler": str(self.handler),
                "registration_site": f"{self.registration_site[0]}@{self.registration_site[1]}"}


def literal_id(numeric: int, model: AppModel) -> str:
    name = model.resource_name(numeric)
    if name is None:
        raise UnknownResourceId(numeric)
    return name


def _scope(model: AppModel, registering_class: str, activity: Optional[str]) -> set[str]:
    """Classes whose findViewById sites may define a registered widget: the
    registering class and the activity, each with its in-model ancestors."""
    out = set(model.superclasses(registering_class))
    if activity is not None:
        out |= set(model.superclasses(activity))
    return out


def resolve_gui_events(handler: MethodRef, activity: Optional[str], path: Path,
                       model: AppModel, dataflow, diagnostics: Optional[list] = None
                       ) -> list[GuiBinding]:
    """Bindings for the callback edge entering ``handler`` at the end of ``path``."""
    diag = diagnostics if diagnostics is not None else []
    edge = path.edges[-1] if path.edges else None
    if edge is None or edge.kind != "callback" or edge.callee != handler:
        raise ValueError("handler must be entered by the last (callback) edge of the path")
    index = dataflow.index
    site = (edge.caller, edge.site)
    reg_ins = index.instruction(site)
    scope = _scope(model, edge.caller.cls, activity)
    context = path.prefix(len(path.nodes) - 2)

    out: list[GuiBinding] = []
    problems: list[str] = []
    for o in dataflow.points_to(reg_ins.args[0], site, context):
        if o.kind in ("static_field", "instance_field") and o.value is None:
            continue  # a null field default cannot register a listener
        if o.kind != "framework_call_result" or o.api != FIND_VIEW_BY_ID:
            problems.append(f"widget origin {o.kind}")
            continue
        fm, fi = o.site
        if fm.cls not in scope:
            problems.append(f"findViewById outside scope in {fm.cls}")
            continue
        call = index.instruction(o.site)
        owner = _activity_of(dataflow, o, call.args[0], activity)
        if owner is None:
            problems.append("no activity for widget")
            continue
        for idv in dataflow.trace_from(o, call.args[1]):
            constant = idv.kind in ("const_literal", "static_field", "instance_field")
            if not constant or isinstance(idv.value, bool) or not isinstance(idv.value, int):
                problems.append(f"non-constant widget id ({idv.kind})")
                continue
            try:
                name = literal_id(idv.value, model)
            except UnknownResourceId as e:
                problems.append(str(e))
                continue
            out.append(GuiBinding(owner, name, handler, site))
    if problems or not out:
        diag.append({"kind": "unresolved_widget" if not out else "partial_widget",
                     "handler": str(handler), "site": f"{site[0]}@{site[1]}",
                     "scope": sorted(scope), "reasons": sorted(set(problems))})
    return sorted(set(out), key=lambda b: (b.activity, b.widget_id, str(b.registration_site[0]),
                                           b.registration_site[1]))


def _activity_of(dataflow, origin, receiver_reg: int, fallback: Optional[str]) -> Optional[str]:
    """The activity whose view hierarchy a findViewById call searches."""
    index = dataflow.index
    model = dataflow.model
    for r in dataflow.trace_from(origin, receiver_reg):
        if r.kind == "parameter" and r.cls is not None and index.is_activity_class(r.cls):
            if fallback is not None and model.is_subclass(fallback, r.cls):
                return fallback
            if model.component(r.cls) is not None:
                return r.cls
    if fallback is not None and index.is_activity_class(fallback):
        return fallback
    return None
