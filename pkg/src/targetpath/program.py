"""Model-wide indices shared by every analysis over one AppModel.

Everything here is a pure function of the (immutable) model, so a single
:class:`ProgramIndex` may be shared by concurrent per-target analyses.
"""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from typing import Optional

from .ir import (
    AppModel,
    Goto,
    IfCmp,
    InstancePut,
    Invoke,
    MethodDef,
    MethodRef,
    NewInstance,
    Return,
    StaticPut,
)
from .ir.framework import ON_CLICK

Site = tuple  # (MethodRef, instruction index)


class ProgramIndex:
    def __init__(self, model: AppModel):
        self.model = model
        self.framework = model.framework_table
        self.methods: dict[MethodRef, MethodDef] = {m.ref: m for m in model.all_methods()}
        self._succ: dict[MethodRef, list[tuple[int, ...]]] = {}
        self._pred: dict[MethodRef, list[list[int]]] = {}
        for ref, m in self.methods.items():
            succ = [self._successors(m, i) for i in range(len(m.body))]
            pred: list[list[int]] = [[] for _ in m.body]
            for i, ss in enumerate(succ):
                for s in ss:
                    pred[s].append(i)
            self._succ[ref] = succ
            self._pred[ref] = pred

        self.instantiated: set[str] = {c.class_name for c in model.components}
        self.field_writes: dict = defaultdict(list)
        self.api_sites: dict[str, list[Site]] = defaultdict(list)
        self.invoke_sites: list[Site] = []
        for ref, m in self.methods.items():
            for i, ins in enumerate(m.body):
                if isinstance(ins, NewInstance):
                    self.instantiated.add(ins.cls)
                elif isinstance(ins, (StaticPut, InstancePut)):
                    self.field_writes[model.resolve_field(ins.field)].append((ref, i))
                elif isinstance(ins, Invoke):
                    self.invoke_sites.append((ref, i))

        self.targets: dict[Site, tuple[MethodRef, ...]] = {}
        self.callers: dict[MethodRef, list[Site]] = defaultdict(list)
        for site in self.invoke_sites:
            ins = self.instruction(site)
            targets = self.resolve_invoke(ins)
            self.targets[site] = targets
            for t in targets:
                self.callers[t].append(site)
            if not targets:
                api = self.framework.api_for(ins.method)
                if api is not None:
                    self.api_sites[api].append(site)

    # -- instructions and control flow ---------------------------------------

    def instruction(self, site: Site):
        ref, i = site
        return self.methods[ref].body[i]

    @staticmethod
    def _successors(m: MethodDef, i: int) -> tuple[int, ...]:
        ins = m.body[i]
        if isinstance(ins, Return):
            return ()
        if isinstance(ins, Goto):
            return (m.labels[ins.label],)
        if isinstance(ins, IfCmp):
            tgt = m.labels[ins.label]
            return (i + 1,) if tgt == i + 1 else (i + 1, tgt)
        return (i + 1,)

    def successors(self, ref: MethodRef, i: int) -> tuple[int, ...]:
        return self._succ[ref][i]

    def predecessors(self, ref: MethodRef, i: int) -> list[int]:
        return self._pred[ref][i]

    @lru_cache(maxsize=None)
    def reachable_from(self, ref: MethodRef, start: int) -> frozenset[int]:
        """Instruction indices reachable from ``start`` (inclusive)."""
        seen = {start}
        stack = [start]
        succ = self._succ[ref]
        while stack:
            for s in succ[stack.pop()]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return frozenset(seen)

    def reaches(self, ref: MethodRef, start: int, goal: int) -> bool:
        return goal in self.reachable_from(ref, start)

    @lru_cache(maxsize=None)
    def reaching_defs(self, ref: MethodRef, reg: int, at: int) -> tuple[frozenset[int], bool]:
        """Definitions of ``reg`` that reach the use at ``at``.

        The flag is true when some path from the method entry reaches ``at``
        without redefining ``reg`` (the value is a parameter or undefined).
        """
        m = self.methods[ref]
        pred = self._pred[ref]
        defs: set[int] = set()
        entry = False
        seen: set[int] = set()
        stack = [at]
        while stack:
            x = stack.pop()
            if x == 0:
                entry = True
            for q in pred[x]:
                if q in seen:
                    continue
                seen.add(q)
                if reg in m.body[q].defs():
                    defs.add(q)
                else:
                    stack.append(q)
        return frozenset(defs), entry

    def returns(self, ref: MethodRef) -> list[tuple[int, int]]:
        """(index, register) of every value-returning instruction."""
        m = self.methods[ref]
        return [(i, ins.reg) for i, ins in enumerate(m.body)
                if isinstance(ins, Return) and ins.reg is not None]

    # -- class hierarchy -------------------------------------------------------

    def resolve_invoke(self, ins: Invoke) -> tuple[MethodRef, ...]:
        """App-defined targets of an invoke under class-hierarchy analysis."""
        model = self.model
        ref = ins.method
        if ins.dispatch in ("static", "direct"):
            m = model.resolve_method(ref.cls, ref.sub)
            return () if m is None else (m.ref,)
        if ref.cls not in model.classes:
            return ()
        out: list[MethodRef] = []
        candidates = [c for c in (ref.cls,) + model.subclasses(ref.cls)
                      if c in self.instantiated]
        if not candidates:
            candidates = [ref.cls]
        for c in candidates:
            m = model.resolve_method(c, ref.sub)
            if m is not None and m.ref not in out:
                out.append(m.ref)
        return tuple(sorted(out, key=str))

    def possible_classes(self, cls: str) -> list[str]:
        """Instantiable classes an object statically typed ``cls`` may have."""
        out = [c for c in (cls,) + self.model.subclasses(cls) if c in self.instantiated]
        return out or ([cls] if cls in self.model.classes else [])

    def owners_of(self, ref: MethodRef) -> list[str]:
        """Classes whose virtual lookup of ``ref.sub`` lands on ``ref``."""
        model = self.model
        if ref.cls not in model.classes:
            return []
        out = []
        for c in (ref.cls,) + model.subclasses(ref.cls):
            m = model.resolve_method(c, ref.sub)
            if m is not None and m.ref == ref:
                out.append(c)
        return out

    def lifecycle(self, cls: str, subs: tuple[str, ...]) -> list[MethodRef]:
        out = []
        for sub in subs:
            m = self.model.resolve_method(cls, sub)
            if m is not None:
                out.append(m.ref)
        return out

    def lifecycle_subs(self, cls: str) -> tuple[str, ...]:
        if self.is_activity_class(cls):
            return self.framework.activity_lifecycle
        if self.is_receiver_class(cls):
            return self.framework.receiver_lifecycle
        return ()

    def is_activity_class(self, cls: str) -> bool:
        base = self.model.framework_base(cls)
        return base in ("android.app.Activity", "androidx.appcompat.app.AppCompatActivity")

    def is_receiver_class(self, cls: str) -> bool:
        return self.model.framework_base(cls) == "android.content.BroadcastReceiver"

    def click_handlers(self) -> list[MethodRef]:
        return [r for r in self.methods if r.sub == ON_CLICK]

    def method_def(self, ref: MethodRef) -> Optional[MethodDef]:
        return self.methods.get(ref)
