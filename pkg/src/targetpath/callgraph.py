"""Backward, demand-driven partial call graphs and entry-to-target paths."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping, Optional

from .ir import AppModel, MethodRef

if TYPE_CHECKING:  # pragma: no cover
    from .dataflow import BranchPath, CondSite, DataflowEngine
    from .gui import GuiBinding
    from .icc import IccMap, IccTrigger

EDGE_KINDS = ("explicit_invoke", "callback", "lifecycle", "icc")
ASYNC_KINDS = ("callback", "icc")
DEFAULT_MAX_PATHS = 16


class TargetNotFound(LookupError):
    pass


class AnalysisTimeout(TimeoutError):
    pass


def check_deadline(deadline: Optional[float]) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise AnalysisTimeout("per-target time budget exceeded")


@dataclass(frozen=True, order=True)
class CgEdge:
    caller: MethodRef
    callee: MethodRef
    site: int
    kind: str
    # icc edges name the component being started
    component: Optional[str] = None

    @property
    def key(self) -> tuple:
        return (str(self.caller), str(self.callee), self.site, self.kind, self.component or "")

    def to_json(self) -> dict:
        out = {"caller": str(self.caller), "callee": str(self.callee),
               "site": self.site, "kind": self.kind}
        if self.component is not None:
            out["component"] = self.component
        return out


@dataclass(frozen=True)
class ConditionNote:
    subject: str
    required: str
    resolved: bool


@dataclass(frozen=True)
class Path:
    nodes: tuple[MethodRef, ...]
    edges: tuple[CgEdge, ...] = ()
    entry_component: Optional[str] = None
    conditional_sites: tuple["CondSite", ...] = ()
    # one entry per conditional site; None when the guard stayed unresolved
    attached_branch_paths: tuple[Optional["BranchPath"], ...] = ()
    # condition-establishing segments for each attached branch path, enriched
    condition_segments: tuple[tuple["Path", ...], ...] = ()
    # bindings for each edge (empty tuples for non-callback edges)
    edge_bindings: tuple[tuple["GuiBinding", ...], ...] = ()
    conditions: tuple[ConditionNote, ...] = ()
    trigger: Optional["IccTrigger"] = None
    entry_prefix: Optional["Path"] = None
    flags: tuple[str, ...] = ()
    enriched: bool = False
    # instruction in the last node that must be reached (None: method entry)
    goal: Optional[int] = None

    def __post_init__(self):
        if len(self.edges) != len(self.nodes) - 1:
            raise ValueError("a path needs exactly one edge between consecutive nodes")

    @classmethod
    def single(cls, ref: MethodRef) -> "Path":
        return cls((ref,))

    @property
    def entry(self) -> MethodRef:
        return self.nodes[0]

    @property
    def target(self) -> MethodRef:
        return self.nodes[-1]

    @property
    def gui_bindings(self) -> list["GuiBinding"]:
        return [b for bs in self.edge_bindings for b in bs]

    @property
    def resolved(self) -> bool:
        return all(c.resolved for c in self.conditions)

    def prefix(self, k: int) -> "Path":
        """The bare path up to and including node ``k``."""
        return Path(self.nodes[:k + 1], self.edges[:k], self.entry_component)

    def extend(self, edge: CgEdge) -> "Path":
        return Path(self.nodes + (edge.callee,), self.edges + (edge,), self.entry_component)

    def bare(self) -> "Path":
        return Path(self.nodes, self.edges, self.entry_component)

    def components(self, model: AppModel) -> list[Optional[str]]:
        """Component driving execution at each node: the entry component,
        replaced by the started component at every icc edge."""
        out = [self.entry_component]
        cur = self.entry_component
        for e in self.edges:
            if e.kind == "icc" and e.component is not None:
                cur = e.component
            out.append(cur)
        return out

    def sort_key(self) -> tuple:
        return (len(self.nodes), tuple(str(n) for n in self.nodes),
                tuple(e.key for e in self.edges), self.entry_component or "")

    def to_json(self) -> dict:
        return {"nodes": [str(n) for n in self.nodes],
                "edges": [e.to_json() for e in self.edges],
                "entry_component": self.entry_component}


@dataclass(frozen=True)
class PartialCallGraph:
    target: MethodRef
    nodes: frozenset[MethodRef]
    edges: frozenset[CgEdge]
    # entry node -> components whose external trigger reaches it
    entry_nodes: Mapping[MethodRef, tuple[str, ...]]
    iterations: int = 0
    diagnostics: tuple = ()

    def to_json(self) -> dict:
        return {"target": str(self.target),
                "nodes": sorted(str(n) for n in self.nodes),
                "entry_nodes": sorted(str(n) for n in self.entry_nodes),
                "edges": [e.to_json() for e in sorted(self.edges, key=lambda e: e.key)]}


def _engine(model: AppModel, dataflow, icc=None):
    if dataflow is not None:
        return dataflow
    from .dataflow import DataflowEngine
    return DataflowEngine(model, icc=icc)


def entry_components(model: AppModel, icc: "IccMap", index) -> dict[MethodRef, tuple[str, ...]]:
    """Lifecycle methods reachable from outside the app, with their components."""
    out: dict[MethodRef, set[str]] = {}
    for cls in icc.entry_classes():
        for ref in index.lifecycle(cls, index.lifecycle_subs(cls)):
            out.setdefault(ref, set()).add(cls)
    return {k: tuple(sorted(v)) for k, v in out.items()}


def find_new_nodes(node: MethodRef, model: AppModel, icc: "IccMap",
                   engine: "DataflowEngine", diagnostics: list) -> list[CgEdge]:
    """Predecessor edges of ``node``: explicit calls, callbacks and icc starts."""
    index = engine.index
    out: list[CgEdge] = []
    for caller, i in index.callers.get(node, ()):
        out.append(CgEdge(caller, node, i, "explicit_invoke"))

    for cb in index.framework.callbacks_named(node.sub):
        for site in index.api_sites.get(cb.api, ()):
            ins = index.instruction(site)
            if cb.listener_arg >= len(ins.args):
                continue
            classes, unknown = engine.object_classes(
                ins.args[cb.listener_arg], site, Path.single(site[0]))
            if unknown:
                diagnostics.append({"kind": "unknown_listener", "site": _site_str(site)})
            for c in classes:
                m = model.resolve_method(c, cb.callback)
                if m is not None and m.ref == node:
                    out.append(CgEdge(site[0], node, site[1], "callback"))
                    break

    for owner in index.owners_of(node):
        if node.sub not in index.lifecycle_subs(owner):
            continue
        for p in icc.icc_paths_to(owner):
            out.append(CgEdge(p.sender, node, p.site, "icc", owner))
    return sorted(set(out), key=lambda e: e.key)


def build_partial_cg(model: AppModel, icc: "IccMap", target: MethodRef,
                     dataflow: Optional["DataflowEngine"] = None,
                     deadline: Optional[float] = None) -> PartialCallGraph:
    engine = _engine(model, dataflow, icc)
    index = engine.index
    if target not in index.methods:
        raise TargetNotFound(f"target method not found: {target}")
    entries = entry_components(model, icc, index)

    diagnostics: list = []
    worklist = [target]
    seen = {target}
    nodes = {target}
    edges: set[CgEdge] = set()
    entry_nodes: dict[MethodRef, tuple[str, ...]] = {}
    iterations = 0
    while worklist:
        check_deadline(deadline)
        node = worklist.pop(0)
        iterations += 1
        if node in entries:
            entry_nodes[node] = entries[node]
            continue
        for e in find_new_nodes(node, model, icc, engine, diagnostics):
            edges.add(e)
            nodes.add(e.caller)
            if e.caller not in seen:
                seen.add(e.caller)
                worklist.append(e.caller)
    return PartialCallGraph(target, frozenset(nodes), frozenset(edges),
                            entry_nodes, iterations, tuple(diagnostics))


def extract_paths(cg: PartialCallGraph, max_paths: int = DEFAULT_MAX_PATHS,
                  deadline: Optional[float] = None, budget: int = 200_000) -> list[Path]:
    """Simple entry-to-target paths, shortest first, ties broken lexicographically."""
    if max_paths <= 0:
        raise ValueError("max_paths must be positive")
    out_edges: dict[MethodRef, list[CgEdge]] = {}
    for e in cg.edges:
        out_edges.setdefault(e.caller, []).append(e)

    heap: list = []
    tie = 0
    for entry in cg.entry_nodes:
        for comp in cg.entry_nodes[entry]:
            p = Path((entry,), (), comp)
            heapq.heappush(heap, (p.sort_key(), tie, p))
            tie += 1
    result: list[Path] = []
    pops = 0
    while heap and len(result) < max_paths and pops < budget:
        pops += 1
        if pops % 256 == 0:
            check_deadline(deadline)
        _, _, p = heapq.heappop(heap)
        last = p.nodes[-1]
        if last == cg.target:
            result.append(p)
            continue
        for e in out_edges.get(last, ()):
            if e.callee in p.nodes:
                continue
            q = p.extend(e)
            heapq.heappush(heap, (q.sort_key(), tie, q))
            tie += 1
    return result


def _site_str(site) -> str:
    return f"{site[0]}@{site[1]}"


# ---------------------------------------------------------------------------
# Enrichment: guards, branch paths and GUI bindings
# ---------------------------------------------------------------------------

MAX_NESTING = 4


def guard_sites(engine: "DataflowEngine", ref: MethodRef, goal: int) -> list[tuple[int, str]]:
    """if-instructions that decide whether ``goal`` is reached from the
    method entry, with the outcome that keeps it reachable."""
    index = engine.index
    m = index.methods[ref]
    live = index.reachable_from(ref, 0)
    out = []
    for i in sorted(live):
        ins = m.body[i]
        if ins.kind != "if_cmp" or not index.reaches(ref, i, goal) or i == goal:
            continue
        fall, taken = i + 1, m.labels[ins.label]
        f_ok = index.reaches(ref, fall, goal)
        t_ok = index.reaches(ref, taken, goal)
        if f_ok and not t_ok:
            out.append((i, "fallthrough"))
        elif t_ok and not f_ok:
            out.append((i, "taken"))
    return out


@dataclass
class Enricher:
    model: AppModel
    icc: "IccMap"
    engine: "DataflowEngine"
    gui: object = None
    deadline: Optional[float] = None
    diagnostics: list = field(default_factory=list)
    _memo: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gui is None:
            from . import gui as gui_module
            self.gui = gui_module

    def enrich(self, path: Path, depth: int = 0) -> Optional[Path]:
        key = (path.nodes, path.edges, path.entry_component, path.goal, depth)
        if key not in self._memo:
            self._memo[key] = None  # breaks cycles between mutually dependent segments
            self._memo[key] = self._enrich(path, depth)
        return self._memo[key]

    def _enrich(self, path: Path, depth: int) -> Optional[Path]:
        check_deadline(self.deadline)
        engine = self.engine
        flags: list[str] = []
        sites, branches, segments, notes = [], [], [], []

        trigger = self.icc.entry_trigger(path.entry_component) if path.entry_component else None
        entry_prefix = None
        if trigger is not None and trigger.requires_registration_path:
            entry_prefix = self._registration_prefix(trigger, depth)
            if entry_prefix is None:
                flags.append("unresolved_registration")

        for k, ref in enumerate(path.nodes):
            goal = path.edges[k].site if k < len(path.edges) else path.goal
            if goal is None:
                continue
            for idx, outcome in guard_sites(engine, ref, goal):
                cond = engine.cond_site(ref, idx)
                res = engine.resolve_conditional(cond, path.prefix(k))
                chosen = None
                capped = False
                for bp in res.ordered(outcome):
                    if depth >= MAX_NESTING and bp.segments:
                        capped = True
                        flags.append("nesting_cap")
                        continue
                    segs = self._segments(bp, depth)
                    if segs is not None:
                        chosen = (bp, segs)
                        break
                subject = engine.subject_of(cond, path.prefix(k))
                sites.append(cond)
                if chosen is not None:
                    bp, segs = chosen
                    branches.append(bp)
                    segments.append(segs)
                    notes.append(_note(cond, bp, subject, outcome, not res.unresolvable
                                       and all(s.resolved for s in segs)))
                elif res.unresolvable or capped:
                    branches.append(None)
                    segments.append(())
                    notes.append(ConditionNote(subject, f"{cond.comparator}:{outcome}", False))
                else:
                    self.diagnostics.append({
                        "kind": "path_dropped", "reason": "unsatisfiable_condition",
                        "site": _site_str(cond.location), "path": [str(n) for n in path.nodes]})
                    return None

        bindings = []
        comps = path.components(self.model)
        for j, e in enumerate(path.edges):
            if e.kind != "callback":
                bindings.append(())
                continue
            bs = self.gui.resolve_gui_events(e.callee, comps[j], path.prefix(j + 1),
                                             self.model, engine, self.diagnostics)
            if not bs:
                flags.append("unresolved_widget")
            bindings.append(tuple(bs))

        if entry_prefix is not None and not entry_prefix.resolved:
            notes.append(ConditionNote("registration", "reachable", False))
        return replace(path, conditional_sites=tuple(sites),
                       attached_branch_paths=tuple(branches),
                       condition_segments=tuple(segments),
                       edge_bindings=tuple(bindings), conditions=tuple(notes),
                       trigger=trigger, entry_prefix=entry_prefix,
                       flags=tuple(dict.fromkeys(flags)), enriched=True)

    def _segments(self, bp, depth: int) -> Optional[tuple[Path, ...]]:
        """Enriched establishing segments of ``bp``, trying alternatives in turn."""
        out = []
        for cands in bp.candidates:
            for c in cands:
                q = self.enrich(c, depth + 1)
                if q is not None and "unresolved_widget" not in q.flags:
                    out.append(q)
                    break
            else:
                return None
        return tuple(out)

    def _registration_prefix(self, trigger, depth: int) -> Optional[Path]:
        if depth >= MAX_NESTING:
            return None
        for p in trigger.registration_paths:
            q = self.enrich(p, depth + 1)
            if q is not None and "unresolved_widget" not in q.flags:
                return q
        return None


def _note(cond, bp, subject: str, outcome: str, resolved: bool) -> ConditionNote:
    from .dataflow import describe_value
    return ConditionNote(subject, describe_value(bp.satisfying_values[0].value), resolved)


def enrich_paths(paths: list[Path], model: AppModel, icc: "IccMap",
                 dataflow: "DataflowEngine", gui=None,
                 diagnostics: Optional[list] = None,
                 deadline: Optional[float] = None) -> list[Path]:
    en = Enricher(model, icc, dataflow, gui, deadline)
    out = []
    for p in paths:
        q = en.enrich(p)
        if q is not None:
            out.append(q)
    if diagnostics is not None:
        diagnostics.extend(en.diagnostics)
    return out
