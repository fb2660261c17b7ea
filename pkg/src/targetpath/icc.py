"""Inter-component communication: how each component can be triggered."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

from .callgraph import Path, build_partial_cg, extract_paths
from .ir import AppModel, ClassLiteral, MethodRef
from .ir.framework import (
    FILTER_INIT_ACTION,
    INTENT_INIT_ACTION,
    INTENT_INIT_CLASS,
    INTENT_SET_ACTION,
    REGISTER_RECEIVER,
    SEND_BROADCAST,
    START_ACTIVITY,
)

SOURCES = ("manifest_exported", "manifest_filter", "dynamic_registration", "intra_app_path")
ENTRY_SOURCES = SOURCES[:3]
MAX_REGISTRATION_PATHS = 4


@dataclass(frozen=True)
class IccTrigger:
    component: str
    kind: str  # by_class_name | by_action
    source: str
    action: Optional[str] = None
    requires_registration_path: bool = False
    registration_site: Optional[tuple[MethodRef, int]] = None
    registration_paths: tuple[Path, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if (self.kind == "by_action") != (self.action is not None):
            raise ValueError("by_action triggers carry an action, others do not")

    def sort_key(self) -> tuple:
        site = ("", -1) if self.registration_site is None else (
            str(self.registration_site[0]), self.registration_site[1])
        return (SOURCES.index(self.source), self.kind, self.action or "", site)

    def to_json(self) -> dict:
        out = {"component": self.component, "kind": self.kind, "source": self.source}
        if self.action is not None:
            out["action"] = self.action
        if self.requires_registration_path:
            out["requires_registration_path"] = True
            out["registration_site"] = f"{self.registration_site[0]}@{self.registration_site[1]}"
            out["registration_paths"] = [[str(n) for n in p.nodes]
                                         for p in self.registration_paths]
        return out


@dataclass(frozen=True)
class IccPath:
    sender: MethodRef
    site: int
    target: str
    api: str
    action: Optional[str] = None

    def to_json(self) -> dict:
        out = {"sender": str(self.sender), "site": self.site, "target": self.target,
               "api": self.api}
        if self.action is not None:
            out["action"] = self.action
        return out


@dataclass(frozen=True)
class IccMap:
    triggers: Mapping[str, tuple[IccTrigger, ...]]
    icc_paths: tuple[IccPath, ...]
    diagnostics: tuple[dict, ...] = ()

    def triggers_for(self, cls: str) -> tuple[IccTrigger, ...]:
        return self.triggers.get(cls, ())

    def entry_classes(self) -> list[str]:
        return sorted(c for c, ts in self.triggers.items()
                      if any(t.source in ENTRY_SOURCES for t in ts))

    def entry_trigger(self, cls: str) -> Optional[IccTrigger]:
        """The cheapest external trigger of ``cls``."""
        ts = [t for t in self.triggers_for(cls) if t.source in ENTRY_SOURCES]
        return min(ts, key=IccTrigger.sort_key) if ts else None

    def icc_paths_to(self, cls: str) -> list[IccPath]:
        return [p for p in self.icc_paths if p.target == cls]

    def to_json(self) -> dict:
        return {"triggers": {c: [t.to_json() for t in ts]
                             for c, ts in sorted(self.triggers.items())},
                "icc_paths": [p.to_json() for p in self.icc_paths],
                "diagnostics": list(self.diagnostics)}


def _site(s) -> str:
    return f"{s[0]}@{s[1]}"


def _ctor_values(engine, origin, api: str, arg: int) -> tuple[list, bool]:
    """Constant values passed as argument ``arg`` of every ``api`` call whose
    receiver is the object allocated at ``origin``."""
    index = engine.index
    method, alloc = origin.site
    body = index.methods[method].body
    values: list = []
    unresolved = False
    for i in sorted(index.reachable_from(method, alloc)):
        ins = body[i]
        if ins.kind != "invoke" or index.targets.get((method, i)):
            continue
        if index.framework.api_for(ins.method) != api or not ins.args:
            continue
        receivers = engine.trace_from(origin, ins.args[0], i)
        if not any(r.kind == "new_instance" and r.site == origin.site for r in receivers):
            continue
        for o in engine.trace_from(origin, ins.args[arg], i):
            if o.kind == "const_literal" and o.value is not None:
                values.append(o.value)
            else:
                unresolved = True
    return values, unresolved


def intent_targets(engine, site) -> tuple[list[tuple[str, object]], bool]:
    """(by, value) pairs an intent argument may carry: ("class", FQCN) or
    ("action", string).  The flag is true when some flow stayed unresolved."""
    ins = engine.index.instruction(site)
    if len(ins.args) < 2:
        return [], True
    out: list[tuple[str, object]] = []
    unresolved = False
    pending = list(engine.points_to(ins.args[1], site))
    seen = set()
    while pending:
        o = pending.pop()
        if o in seen:
            continue
        seen.add(o)
        if o.kind == "new_instance":
            classes, u1 = _ctor_values(engine, o, INTENT_INIT_CLASS, 2)
            actions, u2 = _ctor_values(engine, o, INTENT_INIT_ACTION, 1)
            set_actions, u3 = _ctor_values(engine, o, INTENT_SET_ACTION, 1)
            unresolved |= u1 or u2 or u3
            out += [("class", c.name) for c in classes if isinstance(c, ClassLiteral)]
            out += [("action", a) for a in actions + set_actions if isinstance(a, str)]
        elif o.kind == "framework_call_result" and o.api == INTENT_SET_ACTION:
            call = engine.index.instruction(o.site)
            pending += engine.trace_from(o, call.args[0])
            for a in engine.trace_from(o, call.args[1]):
                if a.kind == "const_literal" and isinstance(a.value, str):
                    out.append(("action", a.value))
                else:
                    unresolved = True
        else:
            unresolved = True
    return sorted(set(out)), unresolved or not out


def map_icc(model: AppModel, dataflow=None) -> IccMap:
    from .dataflow import DataflowEngine
    engine = dataflow if dataflow is not None else DataflowEngine(model)
    index = engine.index
    triggers: dict[str, list[IccTrigger]] = {}
    diagnostics: list[dict] = []

    def add(t: IccTrigger) -> None:
        lst = triggers.setdefault(t.component, [])
        if t not in lst:
            lst.append(t)

    for c in model.components:
        if c.exported:
            add(IccTrigger(c.class_name, "by_class_name", "manifest_exported"))
        for a in c.intent_actions:
            add(IccTrigger(c.class_name, "by_action", "manifest_filter", a))

    dynamic: list[IccTrigger] = []
    for site in index.api_sites.get(REGISTER_RECEIVER, ()):
        ins = index.instruction(site)
        if len(ins.args) < 3:
            continue
        receivers, unknown = engine.object_classes(ins.args[1], site)
        receivers = [r for r in receivers if index.is_receiver_class(r)]
        if unknown or not receivers:
            diagnostics.append({"kind": "unresolved_receiver", "site": _site(site)})
        actions: list[str] = []
        unresolved = False
        for o in engine.points_to(ins.args[2], site):
            if o.kind != "new_instance":
                unresolved = True
                continue
            vals, u = _ctor_values(engine, o, FILTER_INIT_ACTION, 1)
            unresolved |= u
            actions += [v for v in vals if isinstance(v, str)]
        if unresolved or not actions:
            diagnostics.append({"kind": "unresolved_filter_action", "site": _site(site)})
        for r in receivers:
            for a in sorted(set(actions)):
                dynamic.append(IccTrigger(r, "by_action", "dynamic_registration", a,
                                          True, site))

    icc_paths: list[IccPath] = []
    for api, kind in ((START_ACTIVITY, "activity"), (SEND_BROADCAST, "receiver")):
        for site in index.api_sites.get(api, ()):
            found, unresolved = intent_targets(engine, site)
            if unresolved:
                diagnostics.append({"kind": "unresolved_intent", "site": _site(site)})
            for by, value in found:
                if by == "class":
                    ok = value in model.classes and (
                        index.is_activity_class(value) if kind == "activity"
                        else index.is_receiver_class(value))
                    targets = [value] if ok else []
                else:
                    targets = sorted({c.class_name for c in model.components
                                      if c.kind == kind and value in c.intent_actions})
                    if kind == "receiver":
                        targets = sorted(set(targets) | {t.component for t in dynamic
                                                         if t.action == value})
                if not targets:
                    diagnostics.append({"kind": "unmatched_intent", "site": _site(site),
                                        by: value if isinstance(value, str) else str(value)})
                for t in targets:
                    icc_paths.append(IccPath(site[0], site[1], t, api,
                                             value if by == "action" else None))
                    add(IccTrigger(t, "by_action" if by == "action" else "by_class_name",
                                   "intra_app_path", value if by == "action" else None))
    icc_paths.sort(key=lambda p: (str(p.sender), p.site, p.target, p.action or ""))

    for t in dynamic:
        add(t)
    prelim = _freeze(triggers, icc_paths, diagnostics)
    if dynamic:
        pre_engine = engine.with_icc(prelim)
        for cls, ts in triggers.items():
            triggers[cls] = [_with_registration(t, model, prelim, pre_engine)
                             if t.requires_registration_path else t for t in ts]
    return _freeze(triggers, icc_paths, diagnostics)


def _with_registration(t: IccTrigger, model, prelim, engine) -> IccTrigger:
    method, idx = t.registration_site
    cg = build_partial_cg(model, prelim, method, engine)
    paths = [Path(p.nodes, p.edges, p.entry_component, goal=idx)
             for p in extract_paths(cg, MAX_REGISTRATION_PATHS)]
    return IccTrigger(t.component, t.kind, t.source, t.action, True,
                      t.registration_site, tuple(paths))


def _freeze(triggers, icc_paths, diagnostics) -> IccMap:
    frozen = {c: tuple(sorted(ts, key=IccTrigger.sort_key))
              for c, ts in sorted(triggers.items())}
    return IccMap(MappingProxyType(frozen), tuple(icc_paths), tuple(diagnostics))
