"""Line-oriented parser and validator for the textual app IR."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Optional

from .framework import DEFAULT_FRAMEWORK, FrameworkModel
from .model import (
    COMPARATORS,
    COMPONENT_KINDS,
    UNARY_COMPARATORS,
    AppModel,
    ClassDef,
    ClassLiteral,
    ComponentDecl,
    Const,
    FieldDef,
    FieldRef,
    Goto,
    IfCmp,
    InstanceGet,
    InstancePut,
    Instruction,
    Invoke,
    Literal,
    MethodDef,
    MethodRef,
    Move,
    NewInstance,
    Return,
    StaticGet,
    StaticPut,
    descriptor_to_fqcn,
    is_type,
    literal_matches_type,
    split_descriptors,
)

_FQCN = r"[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*"
_FQCN_RE = re.compile(_FQCN + r"$")
_NAME_RE = re.compile(r"[A-Za-z_$][\w$]*$|<init>$")
_REG_RE = re.compile(r"([vp])(\d+)$")
_LABEL_RE = re.compile(r":([\w$]+)$")


class ParseError(Exception):
    """A syntax or validation failure, located by line and column."""

    def __init__(self, category: str, message: str, line: int = 0, column: int = 0):
        self.category = category
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {category}: {message}")


# --------------------------------------------------------------------------
# lexical helpers
# --------------------------------------------------------------------------


def _strip_comment(text: str) -> str:
    in_str = False
    escaped = False
    for i, ch in enumerate(text):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return text[:i]
    return text


def _split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside string literals and braces."""
    parts, cur = [], []
    in_str = escaped = False
    depth = 0
    for ch in text:
        if in_str:
            cur.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def parse_string(tok: str) -> str:
    if len(tok) < 2 or tok[0] != '"' or tok[-1] != '"':
        raise ValueError(f"bad string literal {tok}")
    out = []
    i = 1
    while i < len(tok) - 1:
        ch = tok[i]
        if ch == "\\":
            i += 1
            if i >= len(tok) - 1:
                raise ValueError("dangling escape")
            esc = tok[i]
            out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc))
            if out[-1] is None:
                raise ValueError(f"unknown escape \\{esc}")
        elif ch == '"':
            raise ValueError("unescaped quote inside string")
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def parse_literal(tok: str) -> Literal:
    tok = tok.strip()
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok == "null":
        return None
    if tok.startswith('"'):
        return parse_string(tok)
    if tok.startswith("L") and tok.endswith(";"):
        return ClassLiteral(descriptor_to_fqcn(tok))
    if re.fullmatch(r"-?0[xX][0-9a-fA-F]+", tok):
        return int(tok, 16)
    if re.fullmatch(r"-?\d+", tok):
        return int(tok)
    if re.fullmatch(r"-?\d+\.\d*(?:[eE][-+]?\d+)?", tok):
        return float(tok)
    raise ValueError(f"bad literal {tok!r}")


# --------------------------------------------------------------------------
# builders (mutable while parsing, frozen afterwards)
# --------------------------------------------------------------------------


@dataclass
class _RawInstr:
    op: str
    fields: dict
    line: int
    col: int


@dataclass
class _MethodBuilder:
    name: str
    params: tuple[str, ...]
    ret: str
    static: bool
    line: int
    register_count: Optional[int] = None
    body: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)
    label_lines: dict = field(default_factory=dict)
    pending_labels: list = field(default_factory=list)


@dataclass
class _ClassBuilder:
    name: str
    superclass: str
    line: int
    fields: list = field(default_factory=list)
    field_lines: dict = field(default_factory=dict)
    methods: dict = field(default_factory=dict)


class _Parser:
    def __init__(self, text: str, framework: FrameworkModel):
        self.lines = text.splitlines()
        self.framework = framework
        self.package: Optional[str] = None
        self.components: list[tuple[ComponentDecl, int]] = []
        self.resources: dict[str, int] = {}
        self.resource_lines: dict[str, int] = {}
        self.classes: dict[str, ClassDef] = {}
        self.class_lines: dict[str, int] = {}
        self.cls: Optional[_ClassBuilder] = None
        self.meth: Optional[_MethodBuilder] = None
        self.lineno = 0
        self.raw = ""

    # -- error helpers -----------------------------------------------------

    def err(self, category: str, message: str, token: Optional[str] = None,
            line: Optional[int] = None) -> ParseError:
        col = 1
        if token and line is None:
            idx = self.raw.find(token)
            if idx >= 0:
                col = idx + 1
        elif line is None:
            col = len(self.raw) - len(self.raw.lstrip()) + 1
        return ParseError(category, message, line or self.lineno, col)

    # -- driver ------------------------------------------------------------

    def run(self) -> AppModel:
        for i, raw in enumerate(self.lines, start=1):
            self.lineno = i
            self.raw = raw
            text = _strip_comment(raw).strip()
            if not text:
                continue
            try:
                self.line(text)
            except ParseError:
                raise
            except ValueError as exc:
                raise self.err("syntax", str(exc)) from None
        self.lineno = len(self.lines) + 1
        self.raw = ""
        if self.meth is not None:
            raise ParseError("syntax", f"unterminated method {self.meth.name}",
                             self.meth.line, 1)
        if self.cls is not None:
            raise ParseError("syntax", f"unterminated class {self.cls.name}",
                             self.cls.line, 1)
        if self.package is None:
            raise ParseError("syntax", "missing .app header", 1, 1)
        return self.finish()

    def line(self, text: str) -> None:
        head, _, rest = text.partition(" ")
        rest = rest.strip()
        if self.package is None:
            if head != ".app":
                raise self.err("syntax", "file must start with .app")
            if not _FQCN_RE.match(rest):
                raise self.err("syntax", f"bad package name {rest!r}", rest)
            self.package = rest
            return
        if head == ".app":
            raise self.err("duplicate", "second .app header")
        if self.meth is not None:
            self.method_line(head, rest, text)
        elif self.cls is not None:
            self.class_line(head, rest)
        elif head == ".component":
            self.component(rest)
        elif head == ".resource":
            self.resource(rest)
        elif head == ".class":
            self.class_header(rest)
        else:
            raise self.err("syntax", f"unexpected {head!r} at top level", head)

    # -- top-level declarations ---------------------------------------------

    def component(self, rest: str) -> None:
        parts = rest.split(None, 2)
        if len(parts) < 2:
            raise self.err("syntax", ".component needs KIND and FQCN")
        kind, name = parts[0], parts[1]
        if kind not in COMPONENT_KINDS:
            raise self.err("syntax", f"unknown component kind {kind!r}", kind)
        if not _FQCN_RE.match(name):
            raise self.err("syntax", f"bad class name {name!r}", name)
        opts = {"exported": False, "launcher": False}
        actions: list[str] = []
        tail = parts[2] if len(parts) > 2 else ""
        for m in re.finditer(r'\s*(\w+)=("(?:[^"\\]|\\.)*"|\S+)', tail):
            key, val = m.group(1), m.group(2)
            if key in opts:
                if val not in ("true", "false"):
                    raise self.err("syntax", f"{key} expects true/false", val)
                opts[key] = val == "true"
            elif key == "action":
                actions.append(parse_string(val))
            else:
                raise self.err("syntax", f"unknown component option {key!r}", key)
        leftover = re.sub(r'\s*(\w+)=("(?:[^"\\]|\\.)*"|\S+)', "", tail).strip()
        if leftover:
            raise self.err("syntax", f"unexpected text {leftover!r}", leftover)
        decl = ComponentDecl(name, kind, opts["exported"], opts["launcher"],
                             tuple(actions))
        if decl.launcher and decl.kind != "activity":
            raise self.err("invariant", "launcher component must be an activity", name)
        if decl.launcher and not decl.exported:
            raise self.err("invariant", "launcher component must be exported", name)
        if any(c.class_name == name for c, _ in self.components):
            raise self.err("duplicate", f"component {name} declared twice", name)
        self.components.append((decl, self.lineno))

    def resource(self, rest: str) -> None:
        parts = rest.split()
        if len(parts) != 2:
            raise self.err("syntax", ".resource needs NAME and HEX32")
        name, num = parts
        if not _NAME_RE.match(name):
            raise self.err("syntax", f"bad resource name {name!r}", name)
        if not re.fullmatch(r"0[xX][0-9a-fA-F]{1,8}", num):
            raise self.err("syntax", f"resource id must be a 32-bit hex value", num)
        value = int(num, 16)
        if name in self.resources:
            raise self.err("duplicate", f"resource {name} declared twice", name)
        if value in self.resources.values():
            raise self.err("duplicate", f"resource id {num} declared twice", num)
        self.resources[name] = value
        self.resource_lines[name] = self.lineno

    def class_header(self, rest: str) -> None:
        parts = rest.split()
        if len(parts) not in (1, 3) or (len(parts) == 3 and parts[1] != "extends"):
            raise self.err("syntax", ".class FQCN [extends FQCN]")
        name = parts[0]
        sup = parts[2] if len(parts) == 3 else "java.lang.Object"
        for n in (name, sup):
            if not _FQCN_RE.match(n):
                raise self.err("syntax", f"bad class name {n!r}", n)
        if name in self.classes:
            raise self.err("duplicate", f"class {name} defined twice", name)
        self.cls = _ClassBuilder(name, sup, self.lineno)

    # -- class bodies --------------------------------------------------------

    def class_line(self, head: str, rest: str) -> None:
        if head == ".field":
            self.field_decl(rest)
        elif head == ".method":
            self.method_header(rest)
        elif head == ".endclass":
            if rest:
                raise self.err("syntax", "unexpected text after .endclass", rest)
            c = self.cls
            self.classes[c.name] = ClassDef(
                c.name, c.superclass, tuple(c.fields),
                MappingProxyType(dict(c.methods)))
            self.class_lines[c.name] = c.line
            self.cls = None
        else:
            raise self.err("syntax", f"unexpected {head!r} inside class", head)

    def field_decl(self, rest: str) -> None:
        m = re.fullmatch(r"(static\s+)?([\w$]+)\s*:\s*(\S+?)\s*(?:=\s*(.+))?", rest)
        if m is None:
            raise self.err("syntax", ".field [static] NAME : TYPE [= LITERAL]")
        static, name, typ, init = bool(m.group(1)), m.group(2), m.group(3), m.group(4)
        if not is_type(typ) or typ == "V":
            raise self.err("syntax", f"bad field type {typ!r}", typ)
        if name in self.cls.field_lines:
            raise self.err("duplicate", f"field {name} declared twice", name)
        has_init = init is not None
        value = parse_literal(init) if has_init else None
        if has_init and not literal_matches_type(value, typ):
            raise self.err("invariant",
                           f"initializer {init.strip()} does not match type {typ}",
                           init.strip())
        self.cls.fields.append(FieldDef(name, typ, static, value, has_init))
        self.cls.field_lines[name] = self.lineno

    def method_header(self, rest: str) -> None:
        compact = re.sub(r"\s+", " ", rest).strip()
        static = False
        if compact.startswith("static "):
            static = True
            compact = compact[len("static "):]
        m = re.fullmatch(r"([\w$<>]+)\s*\(([^)]*)\)\s*(\S+)", compact)
        if m is None:
            raise self.err("syntax", ".method [static] NAME(TYPES)RET")
        name = m.group(1)
        if not _NAME_RE.match(name):
            raise self.err("syntax", f"bad method name {name!r}", name)
        params = split_descriptors(m.group(2).replace(" ", ""))
        ret = m.group(3)
        if not is_type(ret):
            raise self.err("syntax", f"bad return type {ret!r}", ret)
        if "V" in params:
            raise self.err("syntax", "void parameter type")
        self.meth = _MethodBuilder(name, params, ret, static, self.lineno)
        sub = MethodRef(self.cls.name, name, params, ret).sub
        if sub in self.cls.methods:
            raise self.err("duplicate", f"method {sub} defined twice", name)

    # -- method bodies -------------------------------------------------------

    def method_line(self, head: str, rest: str, text: str) -> None:
        mb = self.meth
        if head == ".end":
            if rest:
                raise self.err("syntax", "unexpected text after .end", rest)
            self.finish_method()
            return
        if head == ".registers":
            if mb.body or mb.register_count is not None:
                raise self.err("syntax", ".registers must precede instructions")
            if not re.fullmatch(r"\d+", rest):
                raise self.err("syntax", ".registers expects a count", rest)
            mb.register_count = int(rest)
            return
        if head.startswith(":"):
            lm = _LABEL_RE.match(head)
            if lm is None:
                raise self.err("syntax", f"bad label {head!r}", head)
            label = lm.group(1)
            if label in mb.labels or label in mb.pending_labels:
                raise self.err("duplicate", f"label {label} defined twice", head)
            mb.pending_labels.append(label)
            mb.label_lines[label] = self.lineno
            if not rest:
                return
            head, _, rest = rest.partition(" ")
            rest = rest.strip()
        if head.startswith("."):
            raise self.err("syntax", f"unexpected directive {head!r} in method", head)
        instr = self.instruction(head, rest)
        for label in mb.pending_labels:
            mb.labels[label] = len(mb.body)
        mb.pending_labels.clear()
        mb.body.append(instr)

    def reg(self, tok: str) -> tuple[str, int]:
        tok = tok.strip()
        m = _REG_RE.match(tok)
        if m is None:
            raise self.err("syntax", f"expected register, got {tok!r}", tok or None)
        return (m.group(1), int(m.group(2)))

    def label_ref(self, tok: str) -> str:
        tok = tok.strip()
        m = _LABEL_RE.match(tok)
        if m is None:
            raise self.err("syntax", f"expected :label, got {tok!r}", tok or None)
        return m.group(1)

    def expect_args(self, parts: list[str], n: int, op: str) -> None:
        if len(parts) != n or any(not p for p in parts):
            raise self.err("syntax", f"{op} expects {n} operand(s)", op)

    def instruction(self, op: str, rest: str) -> _RawInstr:
        col = self.raw.find(op) + 1
        mk = lambda **kw: _RawInstr(op, kw, self.lineno, col)  # noqa: E731
        if op == "const":
            parts = _split_top(rest)
            self.expect_args(parts, 2, op)
            try:
                value = parse_literal(parts[1])
            except ValueError as exc:
                raise self.err("syntax", str(exc), parts[1]) from None
            return mk(dest=self.reg(parts[0]), value=value)
        if op == "move":
            parts = _split_top(rest)
            self.expect_args(parts, 2, op)
            return mk(dest=self.reg(parts[0]), src=self.reg(parts[1]))
        if op == "new-instance":
            parts = _split_top(rest)
            self.expect_args(parts, 2, op)
            if not _FQCN_RE.match(parts[1]):
                raise self.err("syntax", f"bad class name {parts[1]!r}", parts[1])
            return mk(dest=self.reg(parts[0]), cls=parts[1])
        if op.startswith("invoke-"):
            dispatch = op[len("invoke-"):]
            if dispatch not in ("virtual", "static", "direct"):
                raise self.err("syntax", f"unknown invoke kind {op!r}", op)
            m = re.fullmatch(r"\{([^}]*)\}\s*,\s*(\S+?)(?:\s*->\s*([vp]\d+))?", rest)
            if m is None:
                raise self.err("syntax", "invoke-KIND {regs}, METHODREF [-> vN]")
            regs = [r for r in (x.strip() for x in m.group(1).split(",")) if r]
            try:
                ref = MethodRef.parse(m.group(2))
            except ValueError as exc:
                raise self.err("syntax", str(exc), m.group(2)) from None
            result = self.reg(m.group(3)) if m.group(3) else None
            args = tuple(self.reg(r) for r in regs)
            expected = ref.arity + (0 if dispatch == "static" else 1)
            if len(args) != expected:
                raise self.err("invariant",
                               f"invoke passes {len(args)} argument(s), "
                               f"{ref} expects {expected}", m.group(2))
            if result is not None and ref.ret == "V":
                raise self.err("invariant", "void method has no result", m.group(3))
            return mk(dispatch=dispatch, args=args, method=ref, result=result)
        if op in ("sget", "sput"):
            parts = _split_top(rest)
            self.expect_args(parts, 2, op)
            try:
                fref = FieldRef.parse(parts[1])
            except ValueError as exc:
                raise self.err("syntax", str(exc), parts[1]) from None
            return mk(reg=self.reg(parts[0]), field=fref)
        if op in ("iget", "iput"):
            parts = _split_top(rest)
            self.expect_args(parts, 3, op)
            try:
                fref = FieldRef.parse(parts[2])
            except ValueError as exc:
                raise self.err("syntax", str(exc), parts[2]) from None
            return mk(reg=self.reg(parts[0]), obj=self.reg(parts[1]), field=fref)
        if op.startswith("if-"):
            cmp = op[3:]
            if cmp not in COMPARATORS:
                raise self.err("syntax", f"unknown comparator {op!r}", op)
            parts = _split_top(rest)
            if cmp in UNARY_COMPARATORS:
                self.expect_args(parts, 2, op)
                return mk(cmp=cmp, a=self.reg(parts[0]), b=None,
                          label=self.label_ref(parts[1]))
            self.expect_args(parts, 3, op)
            return mk(cmp=cmp, a=self.reg(parts[0]), b=self.reg(parts[1]),
                      label=self.label_ref(parts[2]))
        if op == "goto":
            return mk(label=self.label_ref(rest))
        if op == "return":
            return mk(reg=self.reg(rest) if rest else None)
        raise self.err("syntax", f"unknown opcode {op!r}", op)

    def finish_method(self) -> None:
        mb = self.meth
        if mb.pending_labels:
            label = mb.pending_labels[0]
            raise ParseError("invariant", f"label {label} does not precede an instruction",
                             mb.label_lines[label], 1)
        if not mb.body:
            raise ParseError("invariant", f"method {mb.name} has no body", mb.line, 1)
        if mb.register_count is None:
            vmax = -1
            for ins in mb.body:
                for val in ins.fields.values():
                    for r in _regs_in(val):
                        if r[0] == "v":
                            vmax = max(vmax, r[1])
            mb.register_count = vmax + 1
        nparams = len(mb.params) + (0 if mb.static else 1)
        total = mb.register_count + nparams

        def resolve(r, ins):
            kind, n = r
            idx = n if kind == "v" else mb.register_count + n
            if (kind == "v" and n >= mb.register_count) or (kind == "p" and n >= nparams):
                raise ParseError("invariant",
                                 f"register {kind}{n} out of range ({total} available)",
                                 ins.line, ins.col)
            return idx

        body: list[Instruction] = []
        for ins in mb.body:
            f = ins.fields
            for key in ("label",):
                if key in f and f[key] not in mb.labels:
                    raise ParseError("undefined_label",
                                     f"undefined label :{f[key]}", ins.line, ins.col)
            R = lambda r: resolve(r, ins)  # noqa: E731
            op = ins.op
            if op == "const":
                body.append(Const(R(f["dest"]), f["value"]))
            elif op == "move":
                body.append(Move(R(f["dest"]), R(f["src"])))
            elif op == "new-instance":
                body.append(NewInstance(R(f["dest"]), f["cls"]))
            elif op.startswith("invoke-"):
                body.append(Invoke(f["dispatch"], tuple(R(a) for a in f["args"]),
                                   f["method"],
                                   None if f["result"] is None else R(f["result"])))
            elif op == "sget":
                body.append(StaticGet(R(f["reg"]), f["field"]))
            elif op == "sput":
                body.append(StaticPut(R(f["reg"]), f["field"]))
            elif op == "iget":
                body.append(InstanceGet(R(f["reg"]), R(f["obj"]), f["field"]))
            elif op == "iput":
                body.append(InstancePut(R(f["reg"]), R(f["obj"]), f["field"]))
            elif op.startswith("if-"):
                body.append(IfCmp(f["cmp"], R(f["a"]),
                                  None if f["b"] is None else R(f["b"]), f["label"]))
            elif op == "goto":
                body.append(Goto(f["label"]))
            elif op == "return":
                reg = f["reg"]
                if (reg is None) != (mb.ret == "V"):
                    raise ParseError("invariant",
                                     "return form does not match return type "
                                     f"{mb.ret}", ins.line, ins.col)
                body.append(Return(None if reg is None else R(reg)))
        _check_termination(body, mb.labels, mb.body)
        ref = MethodRef(self.cls.name, mb.name, mb.params, mb.ret)
        self.cls.methods[ref.sub] = MethodDef(
            ref, mb.register_count, tuple(body),
            MappingProxyType(dict(mb.labels)), mb.static)
        self.meth = None

    # -- whole-model validation ---------------------------------------------

    def finish(self) -> AppModel:
        bases = self.framework.bases
        for name, c in self.classes.items():
            if c.superclass not in self.classes and c.superclass not in bases:
                raise ParseError("unknown_class",
                                 f"superclass {c.superclass} of {name} is neither "
                                 "defined nor a recognized framework class",
                                 self.class_lines[name], 1)
        _check_cycles(self.classes, self.class_lines)
        for decl, line in self.components:
            if decl.class_name not in self.classes:
                raise ParseError("unknown_class",
                                 f"component {decl.class_name} has no class definition",
                                 line, 1)
        return AppModel(
            self.package,
            tuple(d for d, _ in self.components),
            MappingProxyType(dict(sorted(self.classes.items()))),
            MappingProxyType(dict(self.resources)),
            self.framework,
        )


def _regs_in(val):
    if isinstance(val, tuple) and len(val) == 2 and val[0] in ("v", "p"):
        yield val
    elif isinstance(val, tuple):
        for v in val:
            yield from _regs_in(v)


def _check_termination(body, labels, raw) -> None:
    """Every reachable control path must end in a return."""
    seen = set()
    stack = [0]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        if i >= len(body):
            last = raw[-1]
            raise ParseError("invariant", "control falls off the end of the method",
                             last.line, last.col)
        ins = body[i]
        if isinstance(ins, Return):
            continue
        if isinstance(ins, Goto):
            stack.append(labels[ins.label])
            continue
        if isinstance(ins, IfCmp):
            stack.append(labels[ins.label])
        stack.append(i + 1)


def _check_cycles(classes, lines) -> None:
    for name in classes:
        seen = set()
        cur = name
        while cur in classes:
            if cur in seen:
                raise ParseError("invariant", f"cyclic inheritance through {name}",
                                 lines[name], 1)
            seen.add(cur)
            cur = classes[cur].superclass


def parse_app(source_text: str, framework: FrameworkModel = DEFAULT_FRAMEWORK) -> AppModel:
    """Parse and validate IR text into an :class:`AppModel`.

    Raises :class:`ParseError` carrying the line, column and category of the
    first problem found.
    """
    return _Parser(source_text, framework).run()
