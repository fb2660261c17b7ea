"""Fixture loading and small helpers shared by the test modules."""

from __future__ import annotations

import json
import random
from collections import Counter
from functools import lru_cache
from pathlib import Path

from targetpath.callgraph import Path as CgPath
from targetpath.dataflow import DataflowEngine, NonNull
from targetpath.icc import map_icc
from targetpath.ir import AppModel, MethodRef, parse_app
from targetpath.pipeline import Analyzer

from gen import NEW, random_conditional
from oracles import brute_force_outcomes, evaluate

FIXTURES = Path(__file__).parent / "fixtures"
FIXTURE_NAMES = sorted(p.stem for p in FIXTURES.glob("*.ir"))
LISTINGS_TARGET = "Lcom/example/ActivityA;->target_method()V"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.ir"


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(name: str) -> AppModel:
    return parse_app(fixture_text(name))


@lru_cache(maxsize=None)
def analyzer(name: str) -> Analyzer:
    return Analyzer(load(name))


def expectation(name: str) -> dict:
    return json.loads((FIXTURES / f"{name}.expect.json").read_text(encoding="utf-8"))


def all_methods(model: AppModel) -> list[str]:
    return sorted(str(m.ref) for c in model.classes.values() for m in c.methods.values())


def ref(text: str) -> MethodRef:
    return MethodRef.parse(text)


def _norm(v):
    if isinstance(v, NonNull):
        return NEW
    return (type(v).__name__, v)


def conditional_outcomes(seed: int) -> tuple[Counter, Counter]:
    """(analysis outcomes, brute-force outcomes) for one generated conditional."""
    c = random_conditional(random.Random(seed))
    model = parse_app(c.text)
    engine = DataflowEngine(model, icc=map_icc(model))
    start = ref("Lcom/gen/Main;->onStart()V")
    res = engine.resolve_conditional(engine.cond_site(start, c.cond_index),
                                     CgPath((start,), (), "com.gen.Main"))
    got = Counter((_norm(bp.satisfying_values[0].value), _norm(bp.satisfying_values[1].value),
                   bp.outcome) for bp in res.branch_paths)
    lhs = [NonNull("com.gen.Obj") if v == NEW else v for v in c.lhs_values]
    rhs = [NonNull("com.gen.Obj") if v == NEW else v for v in c.rhs_values]
    want = Counter((_norm(a), _norm(b), o) for a, b, o in brute_force_outcomes(lhs, rhs, c.comparator))
    assert sum(want.values()) <= len(lhs) * len(rhs)
    for bp in res.branch_paths:
        l, r = (f.value for f in bp.satisfying_values)
        assert evaluate(l, r, c.comparator) == (bp.outcome == "taken")
    return got, want
