"""Canonical text form of an :class:`AppModel`."""

from __future__ import annotations

import hashlib

from .model import (
    AppModel,
    Const,
    Goto,
    IfCmp,
    InstanceGet,
    InstancePut,
    Invoke,
    MethodDef,
    Move,
    NewInstance,
    Return,
    StaticGet,
    StaticPut,
    format_literal,
)


def _reg(m: MethodDef, r: int) -> str:
    p = m.param_index(r)
    return f"p{p}" if p is not None else f"v{r}"


def _instr(m: MethodDef, ins) -> str:
    R = lambda r: _reg(m, r)  # noqa: E731
    if isinstance(ins, Const):
        return f"const {R(ins.dest)}, {format_literal(ins.value)}"
    if isinstance(ins, Move):
        return f"move {R(ins.dest)}, {R(ins.src)}"
    if isinstance(ins, NewInstance):
        return f"new-instance {R(ins.dest)}, {ins.cls}"
    if isinstance(ins, Invoke):
        args = ", ".join(R(a) for a in ins.args)
        tail = "" if ins.result is None else f" -> {R(ins.result)}"
        return f"invoke-{ins.dispatch} {{{args}}}, {ins.method}{tail}"
    if isinstance(ins, StaticGet):
        return f"sget {R(ins.dest)}, {ins.field}"
    if isinstance(ins, StaticPut):
        return f"sput {R(ins.src)}, {ins.field}"
    if isinstance(ins, InstanceGet):
        return f"iget {R(ins.dest)}, {R(ins.obj)}, {ins.field}"
    if isinstance(ins, InstancePut):
        return f"iput {R(ins.src)}, {R(ins.obj)}, {ins.field}"
    if isinstance(ins, IfCmp):
        if ins.b is None:
            return f"if-{ins.cmp} {R(ins.a)}, :{ins.label}"
        return f"if-{ins.cmp} {R(ins.a)}, {R(ins.b)}, :{ins.label}"
    if isinstance(ins, Goto):
        return f"goto :{ins.label}"
    if isinstance(ins, Return):
        return "return" if ins.reg is None else f"return {R(ins.reg)}"
    raise TypeError(f"unknown instruction {ins!r}")


def print_app(model: AppModel) -> str:
    out = [f".app {model.package_name}"]
    for c in model.components:
        parts = [".component", c.kind, c.class_name]
        if c.exported:
            parts.append("exported=true")
        if c.launcher:
            parts.append("launcher=true")
        parts.extend(f"action={format_literal(a)}" for a in c.intent_actions)
        out.append(" ".join(parts))
    for name, value in sorted(model.resources.items(), key=lambda kv: (kv[1], kv[0])):
        out.append(f".resource {name} 0x{value:08x}")
    for name in sorted(model.classes):
        cls = model.classes[name]
        out.append("")
        header = f".class {name}"
        if cls.superclass != "java.lang.Object":
            header += f" extends {cls.superclass}"
        out.append(header)
        for f in cls.fields:
            line = ".field " + ("static " if f.static else "") + f"{f.name} : {f.type}"
            if f.has_initializer:
                line += f" = {format_literal(f.initializer)}"
            out.append(line)
        for m in cls.methods.values():
            static = "static " if m.static else ""
            out.append(f".method {static}{m.ref.sub}")
            out.append(f"    .registers {m.register_count}")
            by_index: dict[int, list[str]] = {}
            for label, idx in sorted(m.labels.items()):
                by_index.setdefault(idx, []).append(label)
            for i, ins in enumerate(m.body):
                for label in by_index.get(i, ()):
                    out.append(f"  :{label}")
                out.append("    " + _instr(m, ins))
            out.append(".end")
        out.append(".endclass")
    return "\n".join(out) + "\n"


def fingerprint(model: AppModel) -> str:
    """Content hash of the canonical text; used to check immutability."""
    return hashlib.sha256(print_app(model).encode("utf-8")).hexdigest()
