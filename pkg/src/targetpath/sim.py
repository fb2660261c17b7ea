"""Deterministic app simulator: plan execution and exhaustive exploration.

The app starts with its launcher activity in the foreground (lifecycle
already run).  Activity launches and broadcasts requested while a handler
runs are queued and processed after the handler returns.  Unknown framework
calls are no-ops that return null.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .ir import (
    AppModel,
    ClassLiteral,
    Const,
    FieldRef,
    Goto,
    IfCmp,
    InstanceGet,
    InstancePut,
    Invoke,
    MethodDef,
    MethodRef,
    Move,
    NewInstance,
    Return,
    StaticGet,
    StaticPut,
)
from .ir.framework import (
    FILTER_INIT_ACTION,
    FIND_VIEW_BY_ID,
    INTENT_INIT_ACTION,
    INTENT_INIT_CLASS,
    INTENT_SET_ACTION,
    REGISTER_RECEIVER,
    SEND_BROADCAST,
    START_ACTIVITY,
)
from .ir.model import default_value

INSTRUCTION_BUDGET = 1_000_000
MAX_CALL_DEPTH = 10_000
MAX_ORACLE_DEPTH = 12

WIDGET_CLASS = "android.view.View"


class SimHalt(Exception):
    """The current event stopped abnormally (crash or malformed request)."""


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class Ref:
    id: int


@dataclass
class Obj:
    cls: str
    fields: dict = field(default_factory=dict)
    # framework payload: intent target/action, filter action, widget identity
    extra: dict = field(default_factory=dict)

    def copy(self) -> "Obj":
        return Obj(self.cls, dict(self.fields), dict(self.extra))


Value = Union[int, float, bool, str, None, ClassLiteral, Ref]


@dataclass
class SimState:
    heap: dict[int, Obj] = field(default_factory=dict)
    statics: dict[FieldRef, Value] = field(default_factory=dict)
    foreground: Optional[tuple[str, int]] = None
    # (receiver object id, action) in registration order
    receivers: list[tuple[int, str]] = field(default_factory=list)
    # (activity object id, resource id or None) -> (listener id, widget id, api)
    widgets: dict[tuple[int, Optional[int]], tuple[Value, int, str]] = field(default_factory=dict)
    next_id: int = 1

    def copy(self) -> "SimState":
        return SimState({k: o.copy() for k, o in self.heap.items()}, dict(self.statics),
                         self.foreground, list(self.receivers), dict(self.widgets), self.next_id)

    def alloc(self, cls: str, **extra) -> Ref:
        oid = self.next_id
        self.next_id += 1
        self.heap[oid] = Obj(cls, {}, dict(extra))
        return Ref(oid)

    def canonical(self) -> tuple:
        """Hashable form with heap ids renumbered by reachability from roots."""
        order: dict[int, int] = {}
        queue: deque[int] = deque()

        def visit(v):
            if isinstance(v, Ref):
                if v.id not in order:
                    order[v.id] = len(order)
                    queue.append(v.id)
                return ("ref", order[v.id])
            return (type(v).__name__, v if not isinstance(v, ClassLiteral) else v.name)

        def drain():
            while queue:
                o = self.heap[queue.popleft()]
                for k in sorted(o.fields, key=str):
                    visit(o.fields[k])
                for k in sorted(o.extra):
                    visit(o.extra[k])

        fg = None
        if self.foreground is not None:
            fg = (self.foreground[0], visit(Ref(self.foreground[1])))
        drain()
        statics = []
        for k in sorted(self.statics, key=str):
            statics.append((str(k), visit(self.statics[k])))
            drain()
        recv = []
        for oid, action in self.receivers:
            recv.append((visit(Ref(oid)), action))
            drain()
        widgets = []
        for (aid, rid), (lis, wid, api) in sorted(self.widgets.items(),
                                                  key=lambda kv: (kv[0][0], kv[0][1] is None,
                                                                  kv[0][1] or 0)):
            widgets.append((visit(Ref(aid)), rid, visit(lis), visit(Ref(wid)), api))
            drain()
        heap = []
        for oid, idx in sorted(order.items(), key=lambda kv: kv[1]):
            o = self.heap[oid]
            heap.append((o.cls,
                         tuple((str(k), _flat(o.fields[k], order)) for k in sorted(o.fields, key=str)),
                         tuple((k, _flat(o.extra[k], order)) for k in sorted(o.extra))))
        return (fg, tuple(statics), tuple(recv), tuple(widgets), tuple(heap))


def _flat(v, order):
    if isinstance(v, Ref):
        return ("ref", order[v.id])
    if isinstance(v, ClassLiteral):
        return ("class", v.name)
    return (type(v).__name__, v)


@dataclass
class _Frame:
    method: MethodDef
    regs: list
    pc: int = 0
    result_reg: Optional[int] = None


class Interpreter:
    """Executes events against a :class:`SimState`, logging entered methods."""

    def __init__(self, model: AppModel, state: SimState, budget: int = INSTRUCTION_BUDGET):
        self.model = model
        self.framework = model.framework_table
        self.state = state
        self.budget = budget
        self.executed = 0
        self.log: list[MethodRef] = []
        self.visits: list[tuple[MethodRef, int]] = []
        self.record_visits = False
        self.pending: deque = deque()

    # -- values ----------------------------------------------------------------

    def _field_default(self, ref: FieldRef) -> Value:
        fd = self.model.field_def(ref)
        if fd is None:
            return None
        return fd.initializer if fd.has_initializer else default_value(fd.type)

    def _obj(self, v: Value, what: str) -> Obj:
        if not isinstance(v, Ref):
            raise SimHalt(f"null or non-object {what}")
        return self.state.heap[v.id]

    # -- method execution --------------------------------------------------------

    def call(self, ref: MethodRef, args: list) -> Value:
        """Run ``ref`` (an app method) to completion and return its result."""
        m = self.model.method(ref)
        frames = [self._frame(m, args, None)]
        result = None
        while frames:
            f = frames[-1]
            ins = f.method.body[f.pc]
            self.executed += 1
            if self.record_visits:
                self.visits.append((f.method.ref, f.pc))
            if self.executed > self.budget:
                raise BudgetExhausted()
            f.pc += 1
            if isinstance(ins, Return):
                value = None if ins.reg is None else f.regs[ins.reg]
                frames.pop()
                if frames:
                    if f.result_reg is not None:
                        frames[-1].regs[f.result_reg] = value
                else:
                    result = value
            elif isinstance(ins, Invoke):
                vals = [f.regs[a] for a in ins.args]
                callee = self._dispatch(ins, vals)
                if callee is not None:
                    if len(frames) >= MAX_CALL_DEPTH:
                        raise SimHalt("call depth exceeded")
                    frames.append(self._frame(callee, vals, ins.result))
                else:
                    value = self._framework(ins, vals)
                    if ins.result is not None:
                        f.regs[ins.result] = value
            else:
                self._step(f, ins)
        return result

    def _frame(self, m: MethodDef, args: list, result_reg) -> _Frame:
        self.log.append(m.ref)
        regs = [None] * m.total_registers
        regs[m.register_count:m.register_count + len(args)] = args
        return _Frame(m, regs, 0, result_reg)

    def _step(self, f: _Frame, ins) -> None:
        r = f.regs
        st = self.state
        if isinstance(ins, Const):
            r[ins.dest] = ins.value
        elif isinstance(ins, Move):
            r[ins.dest] = r[ins.src]
        elif isinstance(ins, NewInstance):
            r[ins.dest] = st.alloc(ins.cls)
        elif isinstance(ins, StaticGet):
            key = self.model.resolve_field(ins.field)
            r[ins.dest] = st.statics[key] if key in st.statics else self._field_default(key)
        elif isinstance(ins, StaticPut):
            st.statics[self.model.resolve_field(ins.field)] = r[ins.src]
        elif isinstance(ins, InstanceGet):
            o = self._obj(r[ins.obj], "field receiver")
            key = self.model.resolve_field(ins.field)
            r[ins.dest] = o.fields[key] if key in o.fields else self._field_default(key)
        elif isinstance(ins, InstancePut):
            o = self._obj(r[ins.obj], "field receiver")
            o.fields[self.model.resolve_field(ins.field)] = r[ins.src]
        elif isinstance(ins, IfCmp):
            b = None if ins.b is None else r[ins.b]
            if compare_values(r[ins.a], b, ins.cmp):
                f.pc = f.method.labels[ins.label]
        elif isinstance(ins, Goto):
            f.pc = f.method.labels[ins.label]
        else:  # pragma: no cover - the parser admits no other kinds
            raise SimHalt(f"unsupported instruction {ins.kind}")

    def _dispatch(self, ins: Invoke, vals: list) -> Optional[MethodDef]:
        ref = ins.method
        if ins.dispatch in ("static", "direct"):
            return self.model.resolve_method(ref.cls, ref.sub)
        recv = vals[0] if vals else None
        if recv is None:
            raise SimHalt(f"null receiver calling {ref}")
        if isinstance(recv, Ref):
            return self.model.resolve_method(self.state.heap[recv.id].cls, ref.sub)
        return None

    def _framework(self, ins: Invoke, vals: list) -> Value:
        api = self.framework.api_for(ins.method)
        st = self.state
        if api == FIND_VIEW_BY_ID:
            act = self._obj(vals[0], "findViewById receiver")
            key = f"view:{vals[1]}"
            if key not in act.extra:
                act.extra[key] = st.alloc(WIDGET_CLASS, activity=vals[0], res_id=vals[1])
            return act.extra[key]
        cb = self.framework.callback_for(api) if api else None
        if cb is not None:
            widget = self._obj(vals[0], "widget")
            aid = widget.extra.get("activity")
            if aid is None:
                if st.foreground is None:
                    raise SimHalt("widget without activity")
                aid = Ref(st.foreground[1])
            key = (aid.id, widget.extra.get("res_id"))
            listener = vals[cb.listener_arg]
            if listener is None:
                st.widgets.pop(key, None)
            else:
                st.widgets[key] = (listener, vals[0].id, api)
            return None
        if api == START_ACTIVITY:
            self.pending.append(("start", self._obj(vals[1], "intent").extra.copy()))
        elif api == SEND_BROADCAST:
            self.pending.append(("broadcast", self._obj(vals[1], "intent").extra.copy()))
        elif api == REGISTER_RECEIVER:
            self._obj(vals[1], "receiver")
            action = self._obj(vals[2], "intent filter").extra.get("action")
            if isinstance(action, str):
                st.receivers.append((vals[1].id, action))
        elif api == INTENT_INIT_CLASS:
            cls = vals[2]
            self._obj(vals[0], "intent").extra["component"] = \
                cls.name if isinstance(cls, ClassLiteral) else None
        elif api in (INTENT_INIT_ACTION, FILTER_INIT_ACTION):
            self._obj(vals[0], "intent").extra["action"] = vals[1]
        elif api == INTENT_SET_ACTION:
            self._obj(vals[0], "intent").extra["action"] = vals[1]
            return vals[0]
        return None

    # -- events ------------------------------------------------------------------

    def launch(self, cls: str) -> None:
        decl = self.model.component(cls)
        if decl is None or decl.kind != "activity":
            raise SimHalt(f"unknown activity {cls}")
        st = self.state
        act = st.alloc(cls)
        st.foreground = (cls, act.id)
        st.widgets = {}  # no back stack: earlier activity instances are gone
        for sub in self.framework.activity_lifecycle:
            m = self.model.resolve_method(cls, sub)
            if m is not None:
                self.call(m.ref, [act] + [None] * m.ref.arity)
        self.drain()

    def deliver(self, targets: list[Ref], intent: dict) -> None:
        intent_obj = self.state.alloc("android.content.Intent", **intent)
        for recv in targets:
            cls = self.state.heap[recv.id].cls
            for sub in self.framework.receiver_lifecycle:
                m = self.model.resolve_method(cls, sub)
                if m is not None:
                    ctx = Ref(self.state.foreground[1]) if self.state.foreground else None
                    args = [recv, ctx, intent_obj][:m.param_count]
                    args += [None] * (m.param_count - len(args))
                    self.call(m.ref, args)
        self.drain()

    def broadcast_targets(self, action: str) -> list[Ref]:
        st = self.state
        out = [Ref(oid) for oid, a in st.receivers if a == action]
        for c in self.model.components:
            if c.kind == "receiver" and action in c.intent_actions:
                out.append(st.alloc(c.class_name))
        return out

    def click(self, aid: int, rid: Optional[int]) -> None:
        listener, wid, api = self.state.widgets[(aid, rid)]
        cb = self.framework.callback_for(api)
        if isinstance(listener, Ref):
            m = self.model.resolve_method(self.state.heap[listener.id].cls, cb.callback)
            if m is not None:
                reg_args = {cb.listener_arg: listener, 0: Ref(wid)}
                args = [reg_args.get(src) if src is not None else None
                        for src in cb.param_sources]
                args += [None] * (m.param_count - len(args))
                self.call(m.ref, args[:m.param_count])
        self.drain()

    def drain(self) -> None:
        while self.pending:
            kind, intent = self.pending.popleft()
            comp, action = intent.get("component"), intent.get("action")
            if kind == "start":
                if comp is not None:
                    self.launch(comp)
                else:
                    acts = [c.class_name for c in self.model.components
                            if c.kind == "activity" and action in c.intent_actions]
                    if not acts:
                        raise SimHalt(f"no activity handles {action!r}")
                    self.launch(acts[0])
            else:
                if comp is not None:
                    if comp not in self.model.classes:
                        raise SimHalt(f"unknown receiver {comp}")
                    targets = [self.state.alloc(comp)]
                else:
                    targets = self.broadcast_targets(action)
                self.deliver(targets, intent)


def compare_values(a: Value, b: Value, cmp: str) -> bool:
    """Runtime comparison; booleans act as integers, objects by identity."""
    def num(v):
        if isinstance(v, bool):
            return int(v)
        if isinstance(v, (int, float)):
            return v
        return None

    if cmp in ("eqz", "nez"):
        n = num(a)
        zero = (n == 0) if n is not None else a is None
        return zero if cmp == "eqz" else not zero
    na, nb = num(a), num(b)
    if na is not None and nb is not None:
        return {"eq": na == nb, "ne": na != nb, "lt": na < nb, "le": na <= nb,
                "gt": na > nb, "ge": na >= nb}[cmp]
    if cmp not in ("eq", "ne"):
        raise SimHalt(f"ordering comparison on non-numeric values {a!r}, {b!r}")
    same = a == b and type(a) is type(b) if not (a is None or b is None) else a is b
    return same if cmp == "eq" else not same


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    verdict: str  # target_reached | step_failed | budget_exhausted
    failed_step: Optional[int] = None
    reason: Optional[str] = None
    log: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "failed_step": self.failed_step,
                "reason": self.reason, "log": list(self.log)}


def start_app(model: AppModel, budget: int = INSTRUCTION_BUDGET) -> Interpreter:
    it = Interpreter(model, SimState(), budget)
    if model.launcher is not None:
        it.launch(model.launcher.class_name)
    return it


def apply_step(it: Interpreter, step) -> None:
    """Execute one plan step; raises SimHalt with a reason on failure."""
    model = it.model
    st = it.state
    if step.kind == "intent":
        if step.component == "activity":
            if step.by == "class":
                decl = model.component(step.value)
                if decl is None or decl.kind != "activity":
                    raise SimHalt(f"unknown activity {step.value}")
                if not decl.exported:
                    raise SimHalt(f"activity {step.value} is not exported")
                it.launch(step.value)
            else:
                acts = [c.class_name for c in model.components
                        if c.kind == "activity" and step.value in c.intent_actions]
                if not acts:
                    raise SimHalt(f"no activity handles {step.value!r}")
                it.launch(acts[0])
        else:
            if step.by == "class":
                decl = model.component(step.value)
                if decl is None or decl.kind != "receiver" or not decl.exported:
                    raise SimHalt(f"receiver {step.value} cannot be started externally")
                it.deliver([st.alloc(step.value)], {"component": step.value})
            else:
                targets = it.broadcast_targets(step.value)
                if not targets:
                    raise SimHalt(f"no receiver for action {step.value!r}")
                it.deliver(targets, {"action": step.value})
    elif step.kind == "click":
        rid = model.resources.get(step.widget_id)
        if rid is None:
            raise SimHalt(f"unknown widget {step.widget_id}")
        fg = st.foreground
        if fg is None or fg[0] != step.activity or (fg[1], rid) not in st.widgets:
            raise SimHalt("widget not live")
        it.click(fg[1], rid)
    else:
        raise SimHalt(f"unknown step kind {step.kind}")


def execute_plan(model: AppModel, plan, budget: int = INSTRUCTION_BUDGET) -> Verdict:
    target = MethodRef.parse(plan.target) if isinstance(plan.target, str) else plan.target
    if model.method(target) is None:
        return Verdict("step_failed", None, f"unknown target {plan.target}")
    it = Interpreter(model, SimState(), budget)

    def log() -> tuple[str, ...]:
        return tuple(str(m) for m in it.log)

    try:
        if model.launcher is not None:
            it.launch(model.launcher.class_name)
    except BudgetExhausted:
        return Verdict("budget_exhausted", None, "instruction budget exhausted", log())
    except SimHalt as e:
        return Verdict("step_failed", None, f"app start: {e}", log())
    for i, step in enumerate(plan.steps):
        try:
            apply_step(it, step)
        except BudgetExhausted:
            return Verdict("budget_exhausted", i, "instruction budget exhausted", log())
        except SimHalt as e:
            if target in it.log:
                break
            return Verdict("step_failed", i, str(e), log())
    if target in it.log:
        return Verdict("target_reached", None, None, log())
    return Verdict("step_failed", len(plan.steps), "target not invoked", log())


# ---------------------------------------------------------------------------
# Exhaustive exploration
# ---------------------------------------------------------------------------

def enabled_events(model: AppModel, state: SimState) -> list[tuple]:
    """External events available in ``state``, in a fixed order."""
    out: list[tuple] = []
    for c in model.components:
        if c.kind == "activity" and c.exported:
            out.append(("launch_class", c.class_name))
    acts = sorted({a for c in model.components if c.kind == "activity" for a in c.intent_actions})
    out += [("launch_action", a) for a in acts]
    for c in model.components:
        if c.kind == "receiver" and c.exported:
            out.append(("receiver_class", c.class_name))
    actions = {a for c in model.components if c.kind == "receiver" for a in c.intent_actions}
    actions |= {a for _, a in state.receivers}
    out += [("broadcast", a) for a in sorted(actions)]
    if state.foreground is not None:
        fid = state.foreground[1]
        rids = sorted((rid for aid, rid in state.widgets if aid == fid),
                      key=lambda r: (r is None, r or 0))
        out += [("click", rid) for rid in rids]
    return out


def apply_event(it: Interpreter, event: tuple) -> None:
    kind, arg = event
    model = it.model
    if kind == "launch_class":
        it.launch(arg)
    elif kind == "launch_action":
        acts = [c.class_name for c in model.components
                if c.kind == "activity" and arg in c.intent_actions]
        it.launch(acts[0])
    elif kind == "receiver_class":
        it.deliver([it.state.alloc(arg)], {"component": arg})
    elif kind == "broadcast":
        it.deliver(it.broadcast_targets(arg), {"action": arg})
    elif kind == "click":
        it.click(it.state.foreground[1], arg)
    else:
        raise ValueError(f"unknown event {kind}")


def exhaustive_explore(model: AppModel, depth: int,
                       budget: int = INSTRUCTION_BUDGET) -> set[MethodRef]:
    """Methods executed by any event sequence of length <= ``depth``."""
    if depth < 0 or depth > MAX_ORACLE_DEPTH:
        raise ValueError(f"depth must be within 0..{MAX_ORACLE_DEPTH}")
    reachable: set[MethodRef] = set()
    it = Interpreter(model, SimState(), budget)
    try:
        if model.launcher is not None:
            it.launch(model.launcher.class_name)
    except (SimHalt, BudgetExhausted):
        reachable.update(it.log)
        return reachable
    reachable.update(it.log)
    frontier = [it.state]
    seen = {it.state.canonical()}
    for _ in range(depth):
        nxt: list[SimState] = []
        for state in frontier:
            for event in enabled_events(model, state):
                run = Interpreter(model, state.copy(), budget)
                try:
                    apply_event(run, event)
                    ok = True
                except (SimHalt, BudgetExhausted):
                    ok = False
                reachable.update(run.log)
                if not ok:
                    continue
                key = run.state.canonical()
                if key not in seen:
                    seen.add(key)
                    nxt.append(run.state)
        frontier = nxt
        if not frontier:
            break
    return reachable


def sorted_methods(refs: Iterable[MethodRef]) -> list[str]:
    return sorted(str(r) for r in refs)
