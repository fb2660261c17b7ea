import pytest

from targetpath.callgraph import build_partial_cg, enrich_paths, extract_paths
from targetpath.dataflow import DataflowEngine
from targetpath.gui import UnknownResourceId, literal_id, resolve_gui_events
from targetpath.ir import parse_app
from targetpath.pipeline import Analyzer
from targetpath.plan import synthesize
from targetpath.sim import Interpreter, SimState, apply_step

from support import (FIXTURE_NAMES, LISTINGS_TARGET, all_methods, analyzer, fixture_text,
                     load, ref)


def _enriched(name, target, diagnostics=None):
    a = analyzer(name)
    engine = DataflowEngine(a.model, a.index, a.icc)
    cg = build_partial_cg(a.model, a.icc, ref(target), engine)
    return enrich_paths(extract_paths(cg), a.model, a.icc, engine, diagnostics=diagnostics)


def _callback_prefix(name, target, handler_name):
    """The first extracted path cut right after the callback edge entering ``handler_name``."""
    a = analyzer(name)
    cg = build_partial_cg(a.model, a.icc, ref(target))
    p = extract_paths(cg)[0]
    k = next(i for i, n in enumerate(p.nodes) if str(n) == handler_name)
    return a, p.prefix(k)


def test_listings_first_binding():
    handler = "Lcom/example/MainActivity;->onClick(Landroid/view/View;)V"
    a, path = _callback_prefix("listings", LISTINGS_TARGET, handler)
    engine = DataflowEngine(a.model, a.index, a.icc)
    (b,) = resolve_gui_events(ref(handler), "com.example.MainActivity", path, a.model, engine)
    assert (b.activity, b.widget_id, b.event) == ("com.example.MainActivity", "button_main", "click")
    assert b.registration_site == (ref("Lcom/example/MainActivity;->onStart()V"), 10)


def test_handler_must_enter_by_callback_edge():
    a, path = _callback_prefix("listings", LISTINGS_TARGET,
                               "Lcom/example/MainActivity;->onStart()V")
    with pytest.raises(ValueError):
        resolve_gui_events(path.target, None, path, a.model, DataflowEngine(a.model))


def test_non_constant_id_is_unresolved():
    original = fixture_text("listings")
    mutated = original.replace("    const v2, 0x7f080001\n",
                               "    invoke-static {}, Landroid/os/Opaque;->id()I -> v2\n", 1)
    assert mutated != original
    report = Analyzer(parse_app(mutated)).analyze(LISTINGS_TARGET)
    assert report.plans == []
    assert "unresolved_widget" in {i["kind"] for i in report.diagnostics["issues"]}


def test_widget_stored_in_field_resolves():
    (q,) = _enriched("gui_field", "Lcom/guifield/Main;->target()V")
    assert [(b.activity, b.widget_id) for b in q.gui_bindings] == [("com.guifield.Main", "btn_go")]


def test_programmatic_widget_is_flagged():
    diags = []
    (q,) = _enriched("unsupported_widget", "Lcom/uw/Main;->target()V", diags)
    assert "unresolved_widget" in q.flags
    assert any(d["kind"] == "unresolved_widget" for d in diags)


def test_literal_id_lookup():
    m = load("listings")
    assert literal_id(0x7f080001, m) == "button_main"
    with pytest.raises(UnknownResourceId):
        literal_id(0, m)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_literal_id_is_a_bijection(name):
    m = load(name)
    names = [literal_id(v, m) for v in m.resources.values()]
    assert sorted(names) == sorted(m.resources)
    assert len(set(m.resources.values())) == len(m.resources)


def _bindings(path, out):
    for b in path.gui_bindings:
        out.setdefault((b.activity, b.widget_id), set()).add(b.handler)
    if path.entry_prefix is not None:
        _bindings(path.entry_prefix, out)
    for segs in path.condition_segments:
        for s in segs:
            _bindings(s, out)
    return out


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_every_planned_click_fires_its_handler(name):
    a = analyzer(name)
    for t in all_methods(a.model):
        for q in _enriched(name, t):
            handlers = _bindings(q, {})
            for plan in synthesize([q], a.icc, a.model):
                it = Interpreter(a.model, SimState())
                it.launch(a.model.launcher.class_name)
                for step in plan.steps:
                    before = len(it.log)
                    apply_step(it, step)
                    if step.kind == "click":
                        fired = set(it.log[before:])
                        assert fired & handlers[(step.activity, step.widget_id)], (t, step)
