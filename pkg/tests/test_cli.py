import csv
import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from lacunary.cli import bundled_scenarios, main, run_scenario
from lacunary.reports import REPORT_SCHEMA, dumps, report_document, table_csv

SCENARIOS = bundled_scenarios()


def artifacts(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.name != "manifest.json"}


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_bundled_list():
    assert {"example43.json", "counterexample-integers.json"} <= set(SCENARIOS)
    for name in SCENARIOS:
        doc = json.loads((resources.files("lacunary") / "scenarios" / name).read_text())
        assert doc["description"].strip()


@pytest.fixture(scope="module")
def bundled_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    out = {}
    for name in SCENARIOS:
        d = root / name
        out[name] = (run_scenario(name, d), d)
    return out


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenario_passes(bundled_runs, name):
    status, d = bundled_runs[name]
    assert status == 0
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["failed_checks"] == []
    assert len(manifest["scenario_sha256"]) == 64
    assert all(c["wall_time_s"] >= 0 for c in manifest["commands"])
    for p in d.glob("*.json"):
        if p.name != "manifest.json":
            jsonschema.validate(json.loads(p.read_text()), REPORT_SCHEMA)


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenario_deterministic(bundled_runs, tmp_path, name):
    _, first = bundled_runs[name]
    assert run_scenario(name, tmp_path / "again", threads=4) == 0
    assert artifacts(tmp_path / "again") == artifacts(first)


def test_psi_scenario_zero_table(bundled_runs):
    _, d = bundled_runs["example43.json"]
    with open(d / "00_beta_zeros_zeros.csv") as fh:
        rows = list(csv.DictReader(fh))
    mods = sorted(float(r["eig_modulus"]) for r in rows)
    assert mods == pytest.approx(sorted(2.0 ** -n for n in range(2, 13)), rel=1e-9)


def test_counterexample_tables(bundled_runs):
    _, d = bundled_runs["counterexample-integers.json"]
    with open(d / "00_counterexample_blocks.csv") as fh:
        header = next(csv.reader(fh))
    assert {"S1_partial", "S2_partial", "sandwich_min", "max_log_sum_after_removal"} <= set(header)
    with open(d / "00_counterexample_defect.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["deficiency"] == row["expected"]


def test_schema_violation_exit_2(tmp_path):
    bad = write(tmp_path, {"name": "x", "commands": [{"op": "check_lacunary", "params": {}, "oops": 1}]})
    assert run_scenario(bad, tmp_path / "o") == 2
    gen = {"kind": "geometric", "ratio": 2, "count": 5}
    unknown = write(tmp_path, {"name": "x", "description": "d", "generator": gen, "commands": [{"op": "nope"}]}, "u.json")
    assert run_scenario(unknown, tmp_path / "o") == 2
    broken = tmp_path / "b.json"
    broken.write_text("{not json")
    assert run_scenario(broken, tmp_path / "o") == 2


def test_failed_assertion_exit_1(tmp_path):
    doc = {
        "name": "fail",
        "description": "dyadic ratio has epsilon 1/2",
        "generator": {"kind": "geometric", "ratio": 2.0, "count": 20},
        "commands": [{"op": "check_lacunary", "params": {}, "assert": {"best_epsilon": {"ge": 0.9}}}],
    }
    assert run_scenario(write(tmp_path, doc), tmp_path / "o") == 1
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert len(manifest["failed_checks"]) == 1
    doc["commands"][0]["assert"] = {"best_epsilon": {"eq": 0.5}}
    assert run_scenario(write(tmp_path, doc), tmp_path / "o2") == 0


def test_empty_commands(tmp_path):
    doc = {"name": "empty", "description": "nothing to do", "commands": []}
    assert run_scenario(write(tmp_path, doc), tmp_path / "o") == 0
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["manifest.json"]


def test_main_flags(tmp_path, capsys):
    assert main(["list"]) == 0
    assert "example43.json" in capsys.readouterr().out
    assert main(["run", "example43.json", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lacunary", "run", "random-oracle.json", "--out", str(tmp_path),
                        "--seed", "7"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 7


def test_report_helpers():
    doc = report_document("x", "ok", {"v": float("nan"), "w": 0.1}, {"t": {"columns": ["a", "b"], "rows": [[1, 2.5]]}})
    assert '"NaN"' in dumps(doc) or '"nan"' in dumps(doc)
    assert table_csv(doc["tables"]["t"]).splitlines()[0] == "a,b"
    with pytest.raises(jsonschema.ValidationError):
        report_document("x", "bogus", {}, {})
