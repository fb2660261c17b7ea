"""Independent reference implementations used to cross-check the analyses.

Nothing here imports the analysis modules; each oracle works directly on
the parsed model (or the raw IR text) with the simplest algorithm that is
obviously correct on small inputs.
"""

from __future__ import annotations

import re
from itertools import product

from targetpath.ir import AppModel, ClassLiteral, MethodRef

ACTIVITY_LIFECYCLE = ("onCreate(Landroid/os/Bundle;)V", "onStart()V")
RECEIVER_LIFECYCLE = ("onReceive(Landroid/content/Context;Landroid/content/Intent;)V",)
ON_CLICK = "onClick(Landroid/view/View;)V"


def _lookup(model: AppModel, cls: str, sub: str):
    while cls in model.classes:
        m = model.classes[cls].methods.get(sub)
        if m is not None:
            return m.ref
        cls = model.classes[cls].superclass
    return None


def _ancestry(model: AppModel, cls: str) -> list[str]:
    out = []
    while cls is not None and cls not in out:
        out.append(cls)
        cls = model.classes[cls].superclass if cls in model.classes else None
    return out


def _framework_root(model: AppModel, cls: str) -> str:
    return _ancestry(model, cls)[-1]


def forward_call_graph(model: AppModel) -> set[tuple]:
    """Over-approximate full call graph as edge keys
    (caller, callee, site, kind, component)."""
    instantiated = {c.class_name for c in model.components}
    for c in model.classes.values():
        for m in c.methods.values():
            instantiated |= {ins.cls for ins in m.body if ins.kind == "new_instance"}
    activities = sorted(c for c in model.classes if "Activity" in _framework_root(model, c))
    receivers = sorted(c for c in model.classes if "Receiver" in _framework_root(model, c))

    edges: set[tuple] = set()
    for c in model.classes.values():
        for m in c.methods.values():
            for i, ins in enumerate(m.body):
                if ins.kind != "invoke":
                    continue
                callee = ins.method
                targets = set()
                if ins.dispatch in ("static", "direct"):
                    targets.add(_lookup(model, callee.cls, callee.sub))
                else:
                    for k in instantiated:
                        if callee.cls in _ancestry(model, k):
                            targets.add(_lookup(model, k, callee.sub))
                for t in targets - {None}:
                    edges.add((str(m.ref), str(t), i, "explicit_invoke", ""))
                name = callee.name
                if name == "setOnClickListener":
                    for k in instantiated:
                        t = _lookup(model, k, ON_CLICK)
                        if t is not None:
                            edges.add((str(m.ref), str(t), i, "callback", ""))
                if name in ("startActivity", "sendBroadcast"):
                    group = activities if name == "startActivity" else receivers
                    subs = ACTIVITY_LIFECYCLE if name == "startActivity" else RECEIVER_LIFECYCLE
                    for k in group:
                        for sub in subs:
                            t = _lookup(model, k, sub)
                            if t is not None:
                                edges.add((str(m.ref), str(t), i, "icc", k))
    return edges


def simple_paths(edges, entries, target) -> list[tuple]:
    """Every simple path from an entry to ``target`` as (nodes, edges),
    found by plain depth-first enumeration."""
    out_edges: dict = {}
    for e in edges:
        out_edges.setdefault(e.caller, []).append(e)
    found = []

    def dfs(nodes, path_edges):
        last = nodes[-1]
        if last == target:
            found.append((tuple(nodes), tuple(path_edges)))
            return
        for e in out_edges.get(last, ()):
            if e.callee not in nodes:
                dfs(nodes + [e.callee], path_edges + [e])

    for entry in entries:
        dfs([entry], [])
    return found


def backward_scan(model: AppModel, chain: list[tuple[MethodRef, int]], reg: int):
    """Defining instruction of ``reg`` for straight-line code.

    ``chain`` lists (method, index) frames outermost first: each earlier
    frame's index is the invoke entering the next method, the last frame's
    index is the use site.  Moves are followed; a parameter crosses into the
    calling frame's argument register.  Returns (method, index) of the
    defining instruction."""
    frames = list(chain)
    method, at = frames.pop()
    while True:
        body = model.method(method).body
        for i in range(at - 1, -1, -1):
            ins = body[i]
            dest = getattr(ins, "dest", None)
            if ins.kind == "invoke":
                dest = ins.result
            if dest != reg:
                continue
            if ins.kind == "move":
                reg = ins.src
                continue
            return method, i
        mdef = model.method(method)
        p = reg - mdef.register_count
        if p < 0 or not frames:
            return None
        method, at = frames.pop()
        reg = model.method(method).body[at].args[p]


def evaluate(lhs, rhs, cmp: str):
    """Reference comparator: None when the pair cannot be compared."""
    def num(v):
        if isinstance(v, bool):
            return int(v)
        return v if isinstance(v, (int, float)) else None

    if cmp in ("eqz", "nez"):
        if lhs is None or isinstance(lhs, (str, ClassLiteral)):
            zero = lhs is None
        elif num(lhs) is not None:
            zero = num(lhs) == 0
        else:  # a fresh object
            zero = False
        return zero if cmp == "eqz" else not zero
    a, b = num(lhs), num(rhs)
    if a is not None and b is not None:
        return {"eq": a == b, "ne": a != b, "lt": a < b, "le": a <= b,
                "gt": a > b, "ge": a >= b}[cmp]
    if cmp in ("eq", "ne") and not (a is not None or b is not None):
        fresh = [v for v in (lhs, rhs) if not (v is None or isinstance(v, (str, ClassLiteral)))]
        if len(fresh) == 2:
            return None  # two allocations: identity unknown
        same = lhs == rhs
        return same if cmp == "eq" else not same
    return None


def brute_force_outcomes(lhs_values, rhs_values, cmp: str) -> list[tuple]:
    """(lhs, rhs, outcome) for every comparable pair of the value product."""
    out = []
    for a, b in product(lhs_values, rhs_values):
        r = evaluate(a, b, cmp)
        if r is not None:
            out.append((a, b, "taken" if r else "fallthrough"))
    return out


_SPUT = re.compile(r"^\s*sput\s+v(\d+),\s*(\S+)")
_CONST = re.compile(r"^\s*const\s+v(\d+),\s*(\S+)")
_METHOD = re.compile(r"^\s*\.method\s+(?:static\s+)?(\S+)")
_CLASS = re.compile(r"^\s*\.class\s+(\S+)")


def grep_sput_values(text: str, field: str) -> list[tuple[str, str]]:
    """(class.method, literal text) for every ``sput`` of ``field``, pairing
    each with the closest preceding ``const`` to the same register."""
    out = []
    cls = meth = None
    consts: dict[str, str] = {}
    for line in text.splitlines():
        if m := _CLASS.match(line):
            cls = m.group(1)
        elif m := _METHOD.match(line):
            meth, consts = m.group(1).split("(")[0], {}
        elif m := _CONST.match(line):
            consts[m.group(1)] = m.group(2)
        elif (m := _SPUT.match(line)) and m.group(2) == field:
            out.append((f"{cls}.{meth}", consts.get(m.group(1))))
    return out
