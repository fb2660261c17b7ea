"""Immutable program model for the textual app IR.

All containers are tuples or read-only mappings; nothing in the analysis
layers is allowed to mutate a constructed :class:`AppModel`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import ClassVar, Iterator, Mapping, Optional, Union

from .framework import DEFAULT_FRAMEWORK, FrameworkModel

PRIMITIVE_TYPES = frozenset({"I", "Z", "F", "V"})
_DESCRIPTOR_RE = re.compile(r"I|Z|F|V|L[^;()\s]+;")


def fqcn_to_descriptor(name: str) -> str:
    return "L" + name.replace(".", "/") + ";"


def descriptor_to_fqcn(desc: str) -> str:
    if not (desc.startswith("L") and desc.endswith(";")):
        raise ValueError(f"not a class descriptor: {desc!r}")
    return desc[1:-1].replace("/", ".")


def split_descriptors(text: str) -> tuple[str, ...]:
    """Split a concatenated parameter list such as ``ILjava/lang/String;Z``."""
    out = []
    pos = 0
    while pos < len(text):
        m = _DESCRIPTOR_RE.match(text, pos)
        if m is None:
            raise ValueError(f"bad type descriptor at {text[pos:]!r}")
        out.append(m.group(0))
        pos = m.end()
    return tuple(out)


def is_type(desc: str) -> bool:
    return desc in PRIMITIVE_TYPES or (
        desc.startswith("L") and desc.endswith(";") and len(desc) > 2
    )


@dataclass(frozen=True)
class MethodRef:
    cls: str  # dotted FQCN
    name: str
    params: tuple[str, ...]
    ret: str

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def sub(self) -> str:
        """Sub-signature: name plus descriptor, without the declaring class."""
        return f"{self.name}({''.join(self.params)}){self.ret}"

    def with_class(self, cls: str) -> "MethodRef":
        return MethodRef(cls, self.name, self.params, self.ret)

    def __str__(self) -> str:
        return f"{fqcn_to_descriptor(self.cls)}->{self.sub}"

    @classmethod
    def parse(cls, text: str) -> "MethodRef":
        m = re.fullmatch(r"(L[^;]+;)->([\w$<>]+)\(([^)]*)\)(\S+)", text.strip())
        if m is None:
            raise ValueError(f"malformed method reference: {text!r}")
        ret = m.group(4)
        if not is_type(ret):
            raise ValueError(f"malformed return type in {text!r}")
        return cls(descriptor_to_fqcn(m.group(1)), m.group(2),
                   split_descriptors(m.group(3)), ret)

    @classmethod
    def from_sub(cls, owner: str, sub: str) -> "MethodRef":
        return cls.parse(f"{fqcn_to_descriptor(owner)}->{sub}")


@dataclass(frozen=True)
class FieldRef:
    cls: str
    name: str
    type: str

    def with_class(self, cls: str) -> "FieldRef":
        return FieldRef(cls, self.name, self.type)

    def __str__(self) -> str:
        return f"{fqcn_to_descriptor(self.cls)}->{self.name}:{self.type}"

    @classmethod
    def parse(cls, text: str) -> "FieldRef":
        m = re.fullmatch(r"(L[^;]+;)->([\w$]+):(\S+)", text.strip())
        if m is None or not is_type(m.group(3)) or m.group(3) == "V":
            raise ValueError(f"malformed field reference: {text!r}")
        return cls(descriptor_to_fqcn(m.group(1)), m.group(2), m.group(3))


@dataclass(frozen=True)
class ClassLiteral:
    """A ``const-class`` style literal naming a class."""

    name: str

    def __str__(self) -> str:
        return fqcn_to_descriptor(self.name)


Literal = Union[int, float, str, bool, None, ClassLiteral]


def format_literal(value: Literal) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        out = ['"']
        for ch in value:
            if ch in '"\\':
                out.append("\\" + ch)
            elif ch == "\n":
                out.append("\\n")
            elif ch == "\t":
                out.append("\\t")
            else:
                out.append(ch)
        out.append('"')
        return "".join(out)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int) and value >= 0x10000:
        return f"0x{value:08x}"
    return str(value)


def literal_matches_type(value: Literal, desc: str) -> bool:
    if desc == "Z":
        return isinstance(value, bool)
    if desc == "I":
        return (isinstance(value, int) and not isinstance(value, bool)
                and -(2 ** 31) <= value < 2 ** 32)
    if desc == "F":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if desc == "Ljava/lang/String;":
        return value is None or isinstance(value, str)
    if desc == "Ljava/lang/Class;":
        return value is None or isinstance(value, ClassLiteral)
    if desc.startswith("L"):
        return value is None
    return False


def default_value(desc: str) -> Literal:
    if desc == "Z":
        return False
    if desc == "I":
        return 0
    if desc == "F":
        return 0.0
    return None


# --------------------------------------------------------------------------
# Instructions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Instruction:
    kind: ClassVar[str] = ""

    def defs(self) -> tuple[int, ...]:
        return ()

    def uses(self) -> tuple[int, ...]:
        return ()


@dataclass(frozen=True)
class Const(Instruction):
    kind: ClassVar[str] = "const"
    dest: int
    value: Literal

    def defs(self):
        return (self.dest,)


@dataclass(frozen=True)
class Move(Instruction):
    kind: ClassVar[str] = "move"
    dest: int
    src: int

    def defs(self):
        return (self.dest,)

    def uses(self):
        return (self.src,)


@dataclass(frozen=True)
class NewInstance(Instruction):
    kind: ClassVar[str] = "new_instance"
    dest: int
    cls: str

    def defs(self):
        return (self.dest,)


@dataclass(frozen=True)
class Invoke(Instruction):
    kind: ClassVar[str] = "invoke"
    dispatch: str  # virtual | static | direct
    args: tuple[int, ...]
    method: MethodRef
    result: Optional[int] = None

    def defs(self):
        return () if self.result is None else (self.result,)

    def uses(self):
        return self.args


@dataclass(frozen=True)
class StaticGet(Instruction):
    kind: ClassVar[str] = "sget"
    dest: int
    field: FieldRef

    def defs(self):
        return (self.dest,)


@dataclass(frozen=True)
class StaticPut(Instruction):
    kind: ClassVar[str] = "sput"
    src: int
    field: FieldRef

    def uses(self):
        return (self.src,)


@dataclass(frozen=True)
class InstanceGet(Instruction):
    kind: ClassVar[str] = "iget"
    dest: int
    obj: int
    field: FieldRef

    def defs(self):
        return (self.dest,)

    def uses(self):
        return (self.obj,)


@dataclass(frozen=True)
class InstancePut(Instruction):
    kind: ClassVar[str] = "iput"
    src: int
    obj: int
    field: FieldRef

    def uses(self):
        return (self.src, self.obj)


COMPARATORS = ("eq", "ne", "lt", "le", "gt", "ge", "eqz", "nez")
UNARY_COMPARATORS = ("eqz", "nez")


@dataclass(frozen=True)
class IfCmp(Instruction):
    kind: ClassVar[str] = "if_cmp"
    cmp: str
    a: int
    b: Optional[int]
    label: str

    def uses(self):
        return (self.a,) if self.b is None else (self.a, self.b)


@dataclass(frozen=True)
class Goto(Instruction):
    kind: ClassVar[str] = "goto"
    label: str


@dataclass(frozen=True)
class Return(Instruction):
    kind: ClassVar[str] = "return"
    reg: Optional[int] = None

    def uses(self):
        return () if self.reg is None else (self.reg,)


# --------------------------------------------------------------------------
# Declarations
# --------------------------------------------------------------------------

COMPONENT_KINDS = ("activity", "receiver", "service")


@dataclass(frozen=True)
class ComponentDecl:
    class_name: str
    kind: str
    exported: bool = False
    launcher: bool = False
    intent_actions: tuple[str, ...] = ()


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: str
    static: bool = False
    initializer: Literal = None
    has_initializer: bool = False


@dataclass(frozen=True)
class MethodDef:
    ref: MethodRef
    register_count: int
    body: tuple[Instruction, ...]
    labels: Mapping[str, int] = field(default_factory=lambda: MappingProxyType({}))
    static: bool = False

    @property
    def param_count(self) -> int:
        return self.ref.arity + (0 if self.static else 1)

    @property
    def total_registers(self) -> int:
        return self.register_count + self.param_count

    def param_index(self, reg: int) -> Optional[int]:
        """Parameter slot of ``reg`` (``this`` is slot 0 for instance methods)."""
        if self.register_count <= reg < self.total_registers:
            return reg - self.register_count
        return None

    def target(self, label: str) -> int:
        return self.labels[label]


@dataclass(frozen=True)
class ClassDef:
    name: str
    superclass: str
    fields: tuple[FieldDef, ...]
    methods: Mapping[str, MethodDef]

    def field_def(self, name: str) -> Optional[FieldDef]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class AppModel:
    package_name: str
    components: tuple[ComponentDecl, ...]
    classes: Mapping[str, ClassDef]
    resources: Mapping[str, int]
    framework_table: FrameworkModel = DEFAULT_FRAMEWORK

    # -- lookups -----------------------------------------------------------

    @cached_property
    def _components(self) -> dict[str, ComponentDecl]:
        return {c.class_name: c for c in self.components}

    @cached_property
    def _resource_names(self) -> dict[int, str]:
        return {v: k for k, v in self.resources.items()}

    @cached_property
    def _subclasses(self) -> dict[str, tuple[str, ...]]:
        direct: dict[str, list[str]] = {}
        for c in self.classes.values():
            direct.setdefault(c.superclass, []).append(c.name)
        out: dict[str, tuple[str, ...]] = {}
        for name in self.classes:
            seen: list[str] = []
            stack = [name]
            while stack:
                cur = stack.pop()
                for sub in sorted(direct.get(cur, ())):
                    if sub not in seen:
                        seen.append(sub)
                        stack.append(sub)
            out[name] = tuple(sorted(seen))
        return out

    def component(self, cls: str) -> Optional[ComponentDecl]:
        return self._components.get(cls)

    @property
    def launcher(self) -> Optional[ComponentDecl]:
        for c in self.components:
            if c.launcher:
                return c
        return None

    def resource_name(self, numeric: int) -> Optional[str]:
        return self._resource_names.get(numeric)

    def superclasses(self, cls: str) -> Iterator[str]:
        """``cls`` and its in-model ancestors, nearest first."""
        seen = set()
        while cls in self.classes and cls not in seen:
            seen.add(cls)
            yield cls
            cls = self.classes[cls].superclass

    def subclasses(self, cls: str) -> tuple[str, ...]:
        """Transitive in-model subclasses of ``cls`` (excluding ``cls``)."""
        return self._subclasses.get(cls, ())

    def is_subclass(self, cls: str, base: str) -> bool:
        if cls == base:
            return True
        cur = cls
        seen = set()
        while cur in self.classes and cur not in seen:
            seen.add(cur)
            cur = self.classes[cur].superclass
            if cur == base:
                return True
        return False

    def framework_base(self, cls: str) -> Optional[str]:
        """The framework class at the top of ``cls``'s in-model hierarchy."""
        cur = cls
        seen = set()
        while cur in self.classes and cur not in seen:
            seen.add(cur)
            cur = self.classes[cur].superclass
        return None if cur in self.classes else cur

    def method(self, ref: MethodRef) -> Optional[MethodDef]:
        c = self.classes.get(ref.cls)
        if c is None:
            return None
        return c.methods.get(ref.sub)

    def resolve_method(self, cls: str, sub: str) -> Optional[MethodDef]:
        """Virtual lookup of ``sub`` starting at ``cls`` and walking up."""
        for c in self.superclasses(cls):
            m = self.classes[c].methods.get(sub)
            if m is not None:
                return m
        return None

    def resolve_field(self, ref: FieldRef) -> FieldRef:
        """Canonicalize ``ref`` to the class that declares the field."""
        for c in self.superclasses(ref.cls):
            fd = self.classes[c].field_def(ref.name)
            if fd is not None:
                return ref.with_class(c)
        return ref

    def field_def(self, ref: FieldRef) -> Optional[FieldDef]:
        canon = self.resolve_field(ref)
        c = self.classes.get(canon.cls)
        return None if c is None else c.field_def(canon.name)

    def all_methods(self) -> list[MethodDef]:
        out = [m for c in self.classes.values() for m in c.methods.values()]
        out.sort(key=lambda m: str(m.ref))
        return out
