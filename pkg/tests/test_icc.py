import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from targetpath.icc import IccTrigger, map_icc
from targetpath.ir import parse_app
from targetpath.pipeline import Analyzer
from targetpath.sim import execute_plan

from support import FIXTURE_NAMES, fixture_text, load, ref


def _keys(icc):
    return {(c, t.kind, t.source, t.action) for c, ts in icc.triggers.items() for t in ts}


def test_listings_dynamic_trigger_and_icc_path():
    icc = map_icc(load("listings"))
    ts = icc.triggers_for("com.example.AccessReceiver")
    assert [(t.kind, t.action, t.source) for t in ts] == [
        ("by_action", "com.example.SET_ACCESS", "dynamic_registration")]
    assert ts[0].requires_registration_path
    assert [[str(n) for n in p.nodes] for p in ts[0].registration_paths] == [
        ["Lcom/example/MainActivity;->onStart()V"]]
    (p,) = icc.icc_paths_to("com.example.ActivityA")
    assert (str(p.sender), p.site, p.api) == (
        "Lcom/example/MainActivity;->onClick(Landroid/view/View;)V", 3, "startActivity")


def test_exported_component_gets_class_trigger():
    icc = map_icc(load("listings"))
    assert ("com.example.MainActivity", "by_class_name", "manifest_exported", None) in _keys(icc)


def test_action_through_move_matches_direct_case():
    moved = fixture_text("icc_move")
    direct = moved.replace('    move v3, v2\n', '').replace("{v1, v3}", "{v1, v2}")
    assert direct != moved
    t_moved = map_icc(parse_app(moved)).triggers_for("com.iccmove.Rx")
    t_direct = map_icc(parse_app(direct)).triggers_for("com.iccmove.Rx")
    assert [(t.kind, t.action, t.source) for t in t_moved] == [
        ("by_action", "com.iccmove.PING", "dynamic_registration")]
    assert [(t.kind, t.action, t.source) for t in t_moved] == \
        [(t.kind, t.action, t.source) for t in t_direct]


def test_trigger_kind_requires_action():
    with pytest.raises(ValueError):
        IccTrigger("a.B", "by_action", "manifest_filter")
    with pytest.raises(ValueError):
        IccTrigger("a.B", "by_class_name", "manifest_exported", "x")


def test_send_broadcast_and_set_action_paths():
    sb = map_icc(load("send_broadcast"))
    assert {(p.target, p.action) for p in sb.icc_paths} == {
        ("com.sb.ByAction", "com.sb.GO"), ("com.sb.ByClass", None)}
    ai = map_icc(load("action_intent"))
    assert {(p.target, p.action) for p in ai.icc_paths} == {
        ("com.ai.Viewer", "com.ai.VIEW"), ("com.ai.Editor", "com.ai.EDIT")}


def test_unresolved_intent_is_diagnosed_not_dropped():
    text = fixture_text("diamond").replace(
        "    const v1, Lcom/diamond/Target;\n    invoke-direct {v0, p0, v1}",
        "    invoke-static {}, Landroid/os/Opaque;->cls()Ljava/lang/Class; -> v1\n"
        "    invoke-direct {v0, p0, v1}", 1)
    icc = map_icc(parse_app(text))
    assert any(d["kind"] == "unresolved_intent" for d in icc.diagnostics)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_every_exported_component_has_a_trigger(name):
    m = load(name)
    icc = map_icc(m)
    for c in m.components:
        if c.exported:
            assert icc.triggers_for(c.class_name)
    assert all(cls in m.classes for cls in icc.triggers)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_dynamic_triggers_deliver_in_simulator(name):
    a = Analyzer(load(name))
    for cls, ts in a.icc.triggers.items():
        for t in ts:
            if t.source != "dynamic_registration":
                continue
            on_receive = ref(f"L{cls.replace('.', '/')};->onReceive"
                             "(Landroid/content/Context;Landroid/content/Intent;)V")
            report = a.analyze(str(on_receive))
            broadcasts = [p for p in report.plans
                          if p.steps[-1].by == "action" and p.steps[-1].value == t.action]
            assert broadcasts
            for p in broadcasts:
                assert execute_plan(a.model, p).verdict == "target_reached"


_ACTIONS = st.text(alphabet="abcdefghijklmnopqrstuvwxyz.", min_size=1, max_size=12)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FIXTURE_NAMES), _ACTIONS)
def test_adding_filter_action_adds_exactly_one_trigger(name, action):
    text = fixture_text(name)
    m = parse_app(text)
    comp = m.components[0]
    if action in comp.intent_actions:
        return
    line = next(ln for ln in text.splitlines()
                if ln.startswith(".component") and ln.split()[2] == comp.class_name)
    mutated = text.replace(line, f'{line} action="{action}"', 1)
    before = _keys(map_icc(m))
    after = _keys(map_icc(parse_app(mutated)))
    assert before <= after
    assert after - before == {(comp.class_name, "by_action", "manifest_filter", action)}
