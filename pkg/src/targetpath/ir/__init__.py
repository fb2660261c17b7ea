"""Textual app IR: model types, parser and canonical printer."""

from .framework import DEFAULT_FRAMEWORK, CallbackMapping, FrameworkModel
from .model import (
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
    MethodDef,
    MethodRef,
    Move,
    NewInstance,
    Return,
    StaticGet,
    StaticPut,
    format_literal,
)
from .parser import ParseError, parse_app
from .printer import fingerprint, print_app

__all__ = [
    "AppModel", "CallbackMapping", "ClassDef", "ClassLiteral", "ComponentDecl",
    "Const", "DEFAULT_FRAMEWORK", "FieldDef", "FieldRef", "FrameworkModel", "Goto",
    "IfCmp", "InstanceGet", "InstancePut", "Instruction", "Invoke", "MethodDef",
    "MethodRef", "Move", "NewInstance", "ParseError", "Return", "StaticGet",
    "StaticPut", "fingerprint", "format_literal", "parse_app", "print_app",
]
