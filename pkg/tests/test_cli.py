import json
import subprocess
import sys

import pytest

from targetpath.cli import EXIT_INCOMPLETE, EXIT_INPUT, EXIT_OK, main

from support import LISTINGS_TARGET, fixture_path

LISTINGS = str(fixture_path("listings"))


def _analyze(tmp_path, *extra, app=LISTINGS, name="plans.json"):
    out = tmp_path / name
    code = main(["analyze", "--app", app, "--out", str(out), *extra])
    return code, out


def test_analyze_listings(tmp_path):
    code, out = _analyze(tmp_path, "--target", LISTINGS_TARGET)
    assert code == EXIT_OK
    (plan,) = json.loads(out.read_bytes())["plans"]
    assert len(plan["steps"]) == 3
    diag = json.loads((tmp_path / "plans.diagnostics.json").read_bytes())
    assert diag["summary"] == {"targets": 1, "plans": 1, "status": {"planned": 1}}
    timings = json.loads((tmp_path / "plans.timings.json").read_bytes())
    assert [t["target"] for t in timings["targets"]] == [LISTINGS_TARGET]


def test_simulate_round_trip(tmp_path):
    _, plans = _analyze(tmp_path, "--target", LISTINGS_TARGET)
    verdicts = tmp_path / "verdicts.json"
    assert main(["simulate", "--app", LISTINGS, "--plan", str(plans),
                 "--out", str(verdicts)]) == EXIT_OK
    assert [v["verdict"] for v in json.loads(verdicts.read_bytes())["verdicts"]] == [
        "target_reached"]


def test_empty_plan_file(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text('{"plans": []}')
    out = tmp_path / "v.json"
    assert main(["simulate", "--app", LISTINGS, "--plan", str(empty), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_bytes()) == {"verdicts": []}


def test_tampered_widget_fails_simulation(tmp_path):
    _, plans = _analyze(tmp_path, "--target", LISTINGS_TARGET)
    doc = json.loads(plans.read_bytes())
    doc["plans"][0]["steps"][2]["widget_id"] = "button_main"
    plans.write_text(json.dumps(doc))
    out = tmp_path / "v.json"
    assert main(["simulate", "--app", LISTINGS, "--plan", str(plans),
                 "--out", str(out)]) == EXIT_INCOMPLETE
    (v,) = json.loads(out.read_bytes())["verdicts"]
    assert (v["verdict"], v["failed_step"]) == ("step_failed", 2)


def test_schema_violation_is_input_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"plans": [{"target": 1}]}')
    assert main(["simulate", "--app", LISTINGS, "--plan", str(bad)]) == EXIT_INPUT


def test_isolated_method_has_no_entry(tmp_path):
    app = tmp_path / "iso.ir"
    app.write_text(""".app com.iso
.component activity com.iso.Main exported=true launcher=true
.class com.iso.Main extends android.app.Activity
.method onStart()V
    return
.end
.method lonely()V
    return
.end
.endclass
""")
    code, out = _analyze(tmp_path, "--target", "Lcom/iso/Main;->lonely()V", app=str(app))
    assert code == EXIT_INCOMPLETE
    diag = json.loads((tmp_path / "plans.diagnostics.json").read_bytes())
    assert [i["kind"] for i in diag["targets"][0]["issues"]] == ["no_entry_trigger"]


@pytest.mark.parametrize("argv", [
    ["analyze", "--app", LISTINGS, "--sample", "2"],
    ["analyze", "--app", LISTINGS, "--target", LISTINGS_TARGET, "--timeout", "0"],
    ["analyze", "--app", LISTINGS, "--target", LISTINGS_TARGET, "--max-paths", "0"],
    ["analyze", "--app", LISTINGS, "--target", "x", "--all-methods"],
    ["analyze", "--app", "/nonexistent.ir", "--all-methods"],
    ["oracle", "--app", LISTINGS, "--depth", "13"],
    ["simulate", "--app", LISTINGS, "--plan", "/nonexistent.json"],
    ["bogus"],
])
def test_input_errors(argv):
    assert main(argv) == EXIT_INPUT


def test_unparsable_app(tmp_path):
    app = tmp_path / "bad.ir"
    app.write_text(".app com.bad\n.class com.bad.A\n.method f()V\n    goto :x\n.end\n.endclass\n")
    assert main(["oracle", "--app", str(app), "--depth", "1"]) == EXIT_INPUT


def test_sample_is_reproducible(tmp_path):
    app = str(fixture_path("diamond"))
    _, a = _analyze(tmp_path, "--sample", "3", "--seed", "7", app=app, name="a.json")
    _, b = _analyze(tmp_path, "--sample", "3", "--seed", "7", app=app, name="b.json")
    assert a.read_bytes() == b.read_bytes()
    da = json.loads((tmp_path / "a.diagnostics.json").read_bytes())
    assert da["summary"]["targets"] == 3


def test_oracle_depth_zero(tmp_path):
    out = tmp_path / "r.json"
    assert main(["oracle", "--app", LISTINGS, "--depth", "0", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_bytes()) == {"reachable": ["Lcom/example/MainActivity;->onStart()V"]}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "targetpath", "oracle", "--app", LISTINGS,
                        "--depth", "0"], capture_output=True, check=False)
    assert r.returncode == EXIT_OK
    assert json.loads(r.stdout)["reachable"] == ["Lcom/example/MainActivity;->onStart()V"]
