import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from targetpath.callgraph import ConditionNote, build_partial_cg, enrich_paths, extract_paths
from targetpath.dataflow import DataflowEngine
from targetpath.plan import Plan, PlanFormatError, Step, deserialize, serialize, synthesize

from support import FIXTURE_NAMES, LISTINGS_TARGET, all_methods, analyzer, load, ref


def _steps(plan):
    return [s.to_json() for s in plan.steps]


def test_listings_plan():
    (p,) = analyzer("listings").analyze(LISTINGS_TARGET).plans
    assert _steps(p) == [
        {"kind": "intent", "component": "receiver", "trigger": {"action": "com.example.SET_ACCESS"}},
        {"kind": "click", "activity": "com.example.MainActivity", "widget_id": "button_main"},
        {"kind": "click", "activity": "com.example.ActivityA", "widget_id": "button_a"},
    ]
    assert p.conditions == (ConditionNote("Lcom/example/ActivityA;->access:Z", "true", True),)
    assert p.call_sequence[-1] == LISTINGS_TARGET and p.resolved


def test_entry_target_is_a_single_launch():
    (p,) = analyzer("listings").analyze("Lcom/example/MainActivity;->onStart()V").plans
    assert _steps(p) == [{"kind": "intent", "component": "activity",
                          "trigger": {"class": "com.example.MainActivity"}}]


def test_nested_conditions_are_established_in_order():
    (p,) = analyzer("nested_condition").analyze("Lcom/nest/Main;->target()V").plans
    assert [(s.by, s.value) for s in p.steps[:2]] == [("action", "com.nest.S1"),
                                                    ("action", "com.nest.S2")]
    assert [c.required for c in p.conditions] == ["1", "2"]


def test_dynamic_registration_precedes_broadcast():
    (p,) = analyzer("dynamic_chain").analyze("Lcom/dc/Rx;->target()V").plans
    assert [s.kind for s in p.steps] == ["intent", "click", "intent"]
    assert p.steps[-1] == Step.intent("receiver", "action", "com.dc.PING")


def test_synthesis_deduplicates_identical_steps():
    a = analyzer("listings")
    report = a.analyze(LISTINGS_TARGET)
    (p,) = report.plans
    engine = DataflowEngine(a.model, a.index, a.icc)
    cg = build_partial_cg(a.model, a.icc, ref(LISTINGS_TARGET), engine)
    (q,) = enrich_paths(extract_paths(cg), a.model, a.icc, engine)
    assert synthesize([q, q], a.icc, a.model) == [p]


def test_synthesis_requires_model():
    with pytest.raises(ValueError):
        synthesize([])


def test_empty_serialization():
    assert serialize([]) == b'{"plans":[]}'
    assert deserialize(b'{"plans":[]}') == []


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_serialization_round_trip_and_determinism(name):
    plans = [p for t in all_methods(load(name)) for p in analyzer(name).analyze(t).plans]
    data = serialize(plans)
    assert data == serialize(list(reversed(plans)))
    again = deserialize(data)
    assert serialize(again) == data
    assert sorted(again, key=repr) == sorted(plans, key=repr)


BAD_DOCS = [
    "not json",
    "[]",
    '{"plans": [], "extra": 1}',
    '{"plans": [{"target": "x", "call_sequence": [], "conditions": []}]}',
    '{"plans": [{"target": "x", "call_sequence": [], "conditions": [], '
    '"steps": [{"kind": "intent", "component": "service", "trigger": {"class": "a"}}]}]}',
    '{"plans": [{"target": "x", "call_sequence": [], "conditions": [], '
    '"steps": [{"kind": "intent", "component": "activity", "trigger": {"class": "a", "action": "b"}}]}]}',
    '{"plans": [{"target": "x", "call_sequence": [], "conditions": [], '
    '"steps": [{"kind": "click", "activity": "a"}]}]}',
    '{"plans": [{"target": "x", "call_sequence": [], "conditions": [{"subject": "s"}], "steps": []}]}',
]


@pytest.mark.parametrize("doc", BAD_DOCS)
def test_schema_violations_are_rejected(doc):
    with pytest.raises(PlanFormatError):
        deserialize(doc)


_NAMES = st.text(alphabet="abcdefghij.", min_size=1, max_size=10)
_STEPS = st.one_of(
    st.builds(Step.intent, st.sampled_from(["activity", "receiver"]),
              st.sampled_from(["action", "class"]), _NAMES),
    st.builds(Step.click, _NAMES, _NAMES))
_PLANS = st.builds(Plan, _NAMES, st.lists(_STEPS, max_size=5).map(tuple),
                   st.lists(_NAMES, max_size=4).map(tuple),
                   st.lists(st.builds(ConditionNote, _NAMES, _NAMES, st.booleans()),
                            max_size=3).map(tuple))


@settings(max_examples=100, deadline=None)
@given(st.lists(_PLANS, max_size=6))
def test_round_trip_property(plans):
    data = serialize(plans)
    json.loads(data)
    assert serialize(deserialize(data)) == data
    assert sorted(deserialize(data), key=repr) == sorted(plans, key=repr)
