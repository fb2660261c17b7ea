"""Points-to analysis, constant propagation and conditional resolution.

Tracing is backward over reaching definitions.  Method boundaries are only
crossed along the edges of a context path (caller argument to callee
parameter) or one level into a callee to follow its return registers.
Fields are tracked per FieldRef: a read may see every write site of the
field in the program plus the declared (or default) initial value.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

from .callgraph import ASYNC_KINDS, CgEdge, Path, build_partial_cg, extract_paths
from .ir import (
    AppModel,
    ClassLiteral,
    Const,
    FieldRef,
    IfCmp,
    InstanceGet,
    Invoke,
    MethodRef,
    Move,
    NewInstance,
    StaticGet,
    format_literal,
)
from .ir.model import default_value, descriptor_to_fqcn
from .program import ProgramIndex

DEF_BUDGET = 10_000
MAX_ASSIGNMENT_PATHS = 4

ORIGIN_KINDS = ("const_literal", "new_instance", "framework_call_result",
                "static_field", "instance_field", "parameter", "unknown")


@dataclass(frozen=True)
class NonNull:
    """Abstract value of a freshly allocated object."""

    cls: str

    def __str__(self) -> str:
        return f"new {self.cls}"


@dataclass(frozen=True)
class Origin:
    kind: str
    site: Optional[tuple[MethodRef, int]] = None
    value: object = None
    cls: Optional[str] = None
    api: Optional[str] = None
    field: Optional[FieldRef] = None
    # field writes the value flowed through, outermost first
    writes: tuple = ()
    param: Optional[int] = None
    reason: Optional[str] = None
    implicit_default: bool = False
    # (context path, trace context); lets callers keep tracing from here
    ctx: tuple = dc_field(default=(), compare=False, hash=False, repr=False)

    def sort_key(self) -> tuple:
        site = ("", -1) if self.site is None else (str(self.site[0]), self.site[1])
        return (self.kind, site, repr(self.value), tuple(
            (str(m), i) for m, i in self.writes), str(self.field or ""), self.reason or "")


@dataclass(frozen=True)
class ConstFact:
    value: object
    # None for values that hold from app start (field initializers)
    assignment_path: Optional[Path]
    # the assignment already happens along the context path
    on_context: bool = False
    origin: Optional[Origin] = dc_field(default=None, compare=False)
    alternatives: tuple[Path, ...] = dc_field(default=(), compare=False)

    @property
    def segment_candidates(self) -> tuple[Path, ...]:
        if self.on_context or self.assignment_path is None:
            return ()
        return (self.assignment_path,) + self.alternatives


@dataclass(frozen=True)
class CondSite:
    location: tuple[MethodRef, int]
    comparator: str
    lhs: int
    rhs: Optional[int] = None

    @property
    def unary(self) -> bool:
        return self.rhs is None


@dataclass(frozen=True)
class BranchPath:
    satisfying_values: tuple[ConstFact, ConstFact]
    # condition-establishing segments followed by the main path
    merged_path: tuple[Path, ...]
    outcome: str
    candidates: tuple[tuple[Path, ...], ...] = dc_field(default=(), compare=False)

    @property
    def segments(self) -> tuple[Path, ...]:
        return self.merged_path[:-1]

    @property
    def main_path(self) -> Path:
        return self.merged_path[-1]


@dataclass(frozen=True)
class CondResolution:
    cond: CondSite
    branch_paths: tuple[BranchPath, ...]
    unresolvable: bool
    lhs_facts: tuple[ConstFact, ...] = ()
    rhs_facts: tuple[ConstFact, ...] = ()

    def ordered(self, outcome: str) -> list[BranchPath]:
        """Branch paths with ``outcome``, cheapest establishing work first."""
        picked = [bp for bp in self.branch_paths if bp.outcome == outcome]
        picked.sort(key=lambda bp: (len(bp.segments), sum(len(s.nodes) for s in bp.segments),
                                    tuple(s.sort_key() for s in bp.segments)))
        return picked


# ---------------------------------------------------------------------------
# Condition evaluation
# ---------------------------------------------------------------------------

def _numeric(v) -> Optional[float]:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (int, float)):
        return v
    return None


def _is_ref(v) -> bool:
    return v is None or isinstance(v, (NonNull, str, ClassLiteral))


def verify_condition(lhs, rhs, comparator: str) -> Optional[bool]:
    """Evaluate ``lhs <comparator> rhs``; None when the values are incomparable.

    For eqz/nez pass ``rhs = 0``.  Booleans compare as integers, strings and
    class literals by equality only, and a fresh object is never null.
    """
    if comparator in ("eqz", "nez"):
        n = _numeric(lhs)
        if n is not None:
            zero = n == 0
        elif _is_ref(lhs):
            zero = lhs is None
        else:
            return None
        return zero if comparator == "eqz" else not zero

    ln, rn = _numeric(lhs), _numeric(rhs)
    if ln is not None and rn is not None:
        return {"eq": ln == rn, "ne": ln != rn, "lt": ln < rn, "le": ln <= rn,
                "gt": ln > rn, "ge": ln >= rn}[comparator]
    if comparator not in ("eq", "ne"):
        return None
    if not (_is_ref(lhs) and _is_ref(rhs)):
        return None
    if lhs is None or rhs is None:
        same = lhs is None and rhs is None
    elif isinstance(lhs, NonNull) or isinstance(rhs, NonNull):
        if isinstance(lhs, NonNull) and isinstance(rhs, NonNull):
            return None  # identity of two allocations is not tracked
        same = False
    elif type(lhs) is not type(rhs):
        return None
    else:
        same = lhs == rhs
    return same if comparator == "eq" else not same


def describe_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, NonNull):
        return str(value)
    return format_literal(value)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class _Query:
    def __init__(self, engine: "DataflowEngine", path: Path):
        self.engine = engine
        self.index = engine.index
        self.model = engine.model
        self.path = path
        self.seen: set = set()
        self.defs = 0
        self.out: set[Origin] = set()
        self.exhausted = False
        self.pending: list = []

    def emit(self, origin: Origin, ctx) -> None:
        self.out.add(Origin(**{**origin.__dict__, "ctx": (self.path, ctx)}))

    def trace(self, reg: int, method: MethodRef, at: int, ctx: tuple,
              writes: tuple = (), fld: Optional[FieldRef] = None) -> None:
        self.pending.append((reg, method, at, ctx, writes, fld))

    def run(self) -> set[Origin]:
        while self.pending and not self.exhausted:
            self._trace_one(*self.pending.pop())
        return self.out

    def _trace_one(self, reg: int, method: MethodRef, at: int, ctx: tuple,
                   writes: tuple, fld: Optional[FieldRef]) -> None:
        defs, from_entry = self.index.reaching_defs(method, reg, at)
        for d in sorted(defs):
            key = (ctx, method, d, writes)
            if key in self.seen:
                continue
            self.seen.add(key)
            self.defs += 1
            if self.defs > DEF_BUDGET:
                self.exhausted = True
                self.emit(Origin("unknown", (method, d), reason="budget"), ctx)
                return
            self.visit_def(method, d, ctx, writes, fld)
        if from_entry:
            m = self.index.methods[method]
            p = m.param_index(reg)
            if p is None:
                self.emit(Origin("unknown", (method, at), reason="undefined_register",
                                 writes=writes, field=fld), ctx)
            else:
                self.cross(method, p, ctx, writes, fld)

    def visit_def(self, method: MethodRef, d: int, ctx: tuple, writes: tuple,
                  fld: Optional[FieldRef]) -> None:
        ins = self.index.methods[method].body[d]
        site = (method, d)
        if isinstance(ins, Const):
            self.emit(Origin("const_literal", site, ins.value, writes=writes, field=fld), ctx)
        elif isinstance(ins, Move):
            self.trace(ins.src, method, d, ctx, writes, fld)
        elif isinstance(ins, NewInstance):
            self.emit(Origin("new_instance", site, NonNull(ins.cls), cls=ins.cls,
                             writes=writes, field=fld), ctx)
        elif isinstance(ins, Invoke):
            targets = self.index.targets.get(site, ())
            if not targets:
                api = self.index.framework.api_for(ins.method)
                self.emit(Origin("framework_call_result", site, api=api or str(ins.method),
                                 writes=writes, field=fld), ctx)
            elif ctx[0] == "call":
                self.emit(Origin("unknown", site, reason="nested_return",
                                 writes=writes, field=fld), ctx)
            else:
                for t in targets:
                    for ri, rreg in self.index.returns(t):
                        self.trace(rreg, t, ri, ("call", method, d, t, ctx), writes, fld)
        elif isinstance(ins, (StaticGet, InstanceGet)):
            self.read_field(ins, site, ctx, writes, fld)
        else:  # pragma: no cover - defs() only reports the kinds above
            self.emit(Origin("unknown", site, reason="unhandled_def"), ctx)

    def read_field(self, ins, site, ctx, writes, fld) -> None:
        canon = self.model.resolve_field(ins.field)
        kind = "static_field" if isinstance(ins, StaticGet) else "instance_field"
        if writes:
            self.emit(Origin("unknown", site, reason="field_chain", writes=writes,
                             field=fld), ctx)
            return
        fd = self.model.field_def(canon)
        if fd is None:
            self.emit(Origin("unknown", site, reason="framework_field", field=canon), ctx)
            return
        value = fd.initializer if fd.has_initializer else default_value(fd.type)
        self.emit(Origin(kind, site, value, field=canon,
                         implicit_default=not fd.has_initializer), ctx)
        for wm, wi in sorted(self.index.field_writes.get(canon, ()), key=lambda s: (str(s[0]), s[1])):
            w = self.index.methods[wm].body[wi]
            self.trace(w.src, wm, wi, ("free",), ((wm, wi),), canon)

    def cross(self, method: MethodRef, p: int, ctx: tuple, writes, fld) -> None:
        """Follow parameter slot ``p`` of ``method`` into its caller."""
        tag = ctx[0]
        if tag == "path" and ctx[1] > 0:
            k = ctx[1]
            edge = self.path.edges[k - 1]
            caller = self.path.nodes[k - 1]
            ins = self.index.methods[caller].body[edge.site]
            if edge.kind == "explicit_invoke" and p < len(ins.args):
                self.trace(ins.args[p], caller, edge.site, ("path", k - 1), writes, fld)
                return
            if edge.kind == "callback":
                api = self.index.framework.api_for(ins.method)
                cb = self.index.framework.callback_for(api) if api else None
                if cb is not None and p < len(cb.param_sources):
                    src = cb.param_sources[p]
                    if src is not None and src < len(ins.args):
                        self.trace(ins.args[src], caller, edge.site, ("path", k - 1), writes, fld)
                        return
        elif tag == "call":
            _, cm, ci, _callee, parent = ctx
            ins = self.index.methods[cm].body[ci]
            if p < len(ins.args):
                self.trace(ins.args[p], cm, ci, parent, writes, fld)
                return
        self.emit(self.parameter_origin(method, p, writes, fld), ctx)

    def parameter_origin(self, method: MethodRef, p: int, writes, fld) -> Origin:
        m = self.index.methods[method]
        if not m.static:
            if p == 0:
                return Origin("parameter", (method, -1), cls=method.cls, param=0,
                              writes=writes, field=fld)
            p_type = method.params[p - 1]
        else:
            p_type = method.params[p]
        cls = descriptor_to_fqcn(p_type) if p_type.startswith("L") else None
        return Origin("parameter", (method, -1), cls=cls, param=p, writes=writes, field=fld)


class DataflowEngine:
    """Query facade over one AppModel.

    ``icc`` is only needed to reconstruct assignment paths for values written
    outside the context path; without it such facts carry no path.
    """

    def __init__(self, model: AppModel, index: Optional[ProgramIndex] = None, icc=None):
        self.model = model
        self.index = index if index is not None else ProgramIndex(model)
        self.icc = icc
        self.stats: Counter = Counter()
        self._lock = threading.Lock()
        self._pt_cache: dict = {}
        self._paths_cache: dict = {}

    def with_icc(self, icc) -> "DataflowEngine":
        return DataflowEngine(self.model, self.index, icc)

    def _count(self, key: str, n: int = 1) -> None:
        with self._lock:
            self.stats[key] += n

    # -- points-to ------------------------------------------------------------

    def points_to(self, reg: int, site: tuple[MethodRef, int], path: Optional[Path] = None
                  ) -> tuple[Origin, ...]:
        """Origins of the value of ``reg`` just before instruction ``site``."""
        method, at = site
        if path is None:
            path = Path.single(method)
        if path.nodes[-1] != method:
            raise ValueError("operand must occur in the last method of the context path")
        key = (reg, site, path.nodes, path.edges)
        hit = self._pt_cache.get(key)
        if hit is not None:
            return hit
        q = _Query(self, path)
        q.trace(reg, method, at, ("path", len(path.nodes) - 1))
        out = tuple(sorted(q.run(), key=Origin.sort_key))
        self._pt_cache[key] = out
        return out

    def trace_from(self, origin: Origin, reg: int, at: Optional[int] = None
                   ) -> tuple[Origin, ...]:
        """Origins of ``reg`` before instruction ``at`` (default: the origin's
        own site) of the origin's method, in the origin's trace context."""
        path, ctx = origin.ctx
        q = _Query(self, path)
        q.trace(reg, origin.site[0], origin.site[1] if at is None else at, ctx)
        return tuple(sorted(q.run(), key=Origin.sort_key))

    def object_classes(self, reg: int, site, path: Optional[Path] = None
                       ) -> tuple[list[str], bool]:
        """Possible runtime classes of the object in ``reg``; flag marks unknowns."""
        classes: set[str] = set()
        unknown = False
        for o in self.points_to(reg, site, path):
            if o.kind == "new_instance":
                classes.add(o.cls)
            elif o.kind == "parameter" and o.cls is not None:
                classes.update(self.index.possible_classes(o.cls))
            elif o.kind in ("unknown", "framework_call_result"):
                unknown = True
        return sorted(classes), unknown

    # -- constant propagation -------------------------------------------------

    def constant_propagation(self, origins, context: Optional[Path] = None,
                             cond_index: Optional[int] = None
                             ) -> tuple[list[ConstFact], bool]:
        """Facts for the value-bearing origins; flag is true when some origin
        yielded no fact (unknown, parameter, opaque framework result, or an
        assignment unreachable from any entry point)."""
        facts: list[ConstFact] = []
        missing = False
        for o in origins:
            fact = self._fact(o, context, cond_index)
            if fact is None:
                missing = True
                self._count(f"no_fact:{o.kind}" + (f":{o.reason}" if o.reason else ""))
            else:
                facts.append(fact)
        return facts, missing

    def _fact(self, o: Origin, context: Optional[Path], cond_index) -> Optional[ConstFact]:
        if o.kind in ("static_field", "instance_field"):
            return ConstFact(o.value, None, False, o)
        if o.kind not in ("const_literal", "new_instance"):
            return None
        value = o.value
        path, ctx = o.ctx if o.ctx else (None, ("free",))
        chain = []
        while ctx[0] == "call":
            _, cm, ci, callee, parent = ctx
            chain.append(CgEdge(cm, callee, ci, "explicit_invoke"))
            ctx = parent
        chain.reverse()

        if ctx[0] == "path":
            base = path.prefix(ctx[1])
            return ConstFact(value, _extend(base, chain), True, o)

        # value reached the read through a field write outside the context
        wm, wi = o.writes[0]
        if context is not None:
            j = self._subsumed_at(context, wm, wi, cond_index)
            if j is not None:
                return ConstFact(value, _extend(context.prefix(j), chain), True, o)
        if self.icc is None:
            return ConstFact(value, None, False, o)
        paths = self.paths_to(wm)
        if not paths:
            self._count("unreachable_assignment")
            return None
        full = [_extend(replace(p, goal=wi), chain) if not chain else _extend(p, chain)
                for p in paths]
        return ConstFact(value, full[0], False, o, tuple(full[1:]))

    def _subsumed_at(self, context: Path, wm: MethodRef, wi: int, cond_index) -> Optional[int]:
        last = len(context.nodes) - 1
        for j, n in enumerate(context.nodes):
            if n != wm:
                continue
            if j == last:
                if cond_index is not None and self.index.reaches(wm, wi, cond_index) \
                        and wi != cond_index:
                    return j
            else:
                e = context.edges[j]
                if e.kind in ASYNC_KINDS or self.index.reaches(wm, wi, e.site):
                    return j
        return None

    def paths_to(self, method: MethodRef) -> tuple[Path, ...]:
        """Shortest entry paths to ``method`` (cached)."""
        hit = self._paths_cache.get(method)
        if hit is None:
            cg = build_partial_cg(self.model, self.icc, method, self)
            hit = tuple(extract_paths(cg, MAX_ASSIGNMENT_PATHS))
            self._paths_cache[method] = hit
        return hit

    # -- conditionals -----------------------------------------------------------

    def cond_site(self, method: MethodRef, idx: int) -> CondSite:
        ins = self.index.methods[method].body[idx]
        if not isinstance(ins, IfCmp):
            raise ValueError(f"{method}@{idx} is not a conditional")
        return CondSite((method, idx), ins.cmp, ins.a, ins.b)

    def operand_facts(self, reg: Optional[int], cond: CondSite, path: Path
                      ) -> tuple[list[ConstFact], bool]:
        if reg is None:
            return [ConstFact(0, None, True)], False
        origins = self.points_to(reg, cond.location, path)
        facts, missing = self.constant_propagation(origins, path, cond.location[1])
        return facts, missing or not facts

    def resolve_conditional(self, cond: CondSite, path: Path) -> CondResolution:
        method, idx = cond.location
        if path.nodes[-1] != method:
            raise ValueError("conditional must lie in the last method of the path")
        lhs, l_missing = self.operand_facts(cond.lhs, cond, path)
        rhs, r_missing = self.operand_facts(cond.rhs, cond, path)
        out: list[BranchPath] = []
        for lf in lhs:
            for rf in rhs:
                ok = verify_condition(lf.value, rf.value, cond.comparator)
                if ok is None:
                    continue
                segs: list[Path] = []
                cands: list[tuple[Path, ...]] = []
                for f in (lf, rf):
                    c = f.segment_candidates
                    if c and c[0] not in segs:
                        segs.append(c[0])
                        cands.append(c)
                out.append(BranchPath((lf, rf), tuple(segs) + (path,),
                                      "taken" if ok else "fallthrough", tuple(cands)))
        return CondResolution(cond, tuple(out), l_missing or r_missing, tuple(lhs), tuple(rhs))

    def subject_of(self, cond: CondSite, path: Path) -> str:
        """The field a guard reads, or a register description."""
        fields = {o.field for o in self.points_to(cond.lhs, cond.location, path)
                  if o.field is not None}
        if len(fields) == 1:
            return str(fields.pop())
        return f"{cond.location[0]}@{cond.location[1]}:v{cond.lhs}"


def _extend(base: Path, chain: list[CgEdge]) -> Path:
    for e in chain:
        base = base.extend(e)
    return base


# Module-level conveniences mirroring the engine methods

def points_to(reg: int, site, path: Optional[Path], model: AppModel,
              engine: Optional[DataflowEngine] = None) -> tuple[Origin, ...]:
    return (engine or DataflowEngine(model)).points_to(reg, site, path)


def constant_propagation(origins, model: AppModel, engine: Optional[DataflowEngine] = None,
                         context: Optional[Path] = None) -> list[ConstFact]:
    return (engine or DataflowEngine(model)).constant_propagation(origins, context)[0]


def resolve_conditional(cond: CondSite, path: Path, model: AppModel,
                        engine: Optional[DataflowEngine] = None) -> CondResolution:
    return (engine or DataflowEngine(model)).resolve_conditional(cond, path)
