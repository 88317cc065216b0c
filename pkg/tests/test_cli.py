import csv
import json
import subprocess
import sys
from dataclasses import replace

import pytest

from screenflow.calais import default_scenario
from screenflow.cli import main
from screenflow.reports import EXPECTATION_COLUMNS, REPLICATION_COLUMNS, SWEEP_COLUMNS
from screenflow.scenario import dump_scenario, scenario_to_dict, validate_scenario


def _rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def no_checks(tmp_path):
    s = default_scenario()
    s = replace(s, stages=tuple(replace(st, check_probability=0.0) for st in s.stages))
    path = tmp_path / "no_checks.json"
    dump_scenario(validate_scenario(s), path)
    return path


def test_run_writes_outputs_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "-R", "10", "--seed", "5", "--workers", "1", "--out", str(out)]) == 0
    rows = _rows(a / "replications.csv")
    assert len(rows) == 10
    assert list(rows[0])[: len(REPLICATION_COLUMNS)] == list(REPLICATION_COLUMNS)
    for name in ("replications.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    ma.pop("started_at"), mb.pop("started_at")
    ma["flags"].pop("out"), mb["flags"].pop("out")
    assert ma == mb and ma["master_seed"] == 5


def test_manifest_replays(tmp_path):
    a = tmp_path / "a"
    assert main(["run", "-R", "4", "--workers", "1", "--out", str(a)]) == 0
    m = json.loads((a / "manifest.json").read_text())
    f = m["flags"]
    b = tmp_path / "b"
    argv = ["run", "-R", str(f["replications"]), "--seed", str(m["master_seed"]), "--workers", "2", "--out", str(b)]
    assert main(argv) == 0
    assert (a / "replications.csv").read_bytes() == (b / "replications.csv").read_bytes()


def test_malformed_json_names_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "MALFORMED_JSON" in capsys.readouterr().err
    d = scenario_to_dict(default_scenario())
    d["stages"][0]["stations"][0]["tp_rate"] = 1.3
    bad.write_text(json.dumps(d))
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "PROBABILITY_OUT_OF_RANGE" in err and "stages[french].stations[PMMW].tp_rate" in err


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "-R", "2", "--workers", "1", "--out", str(blocker / "sub")]) == 2


def test_tree_outputs(tmp_path):
    assert main(["tree", "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "expectation.csv")
    assert tuple(row) == EXPECTATION_COLUMNS
    assert float(row["p_undetected"]) == pytest.approx(0.001452111799, abs=1e-12)
    assert (tmp_path / "tree.txt").read_text().startswith("1 lorry")


def test_tree_without_checks(tmp_path, no_checks):
    assert main(["tree", "--scenario", str(no_checks), "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "expectation.csv")
    assert float(row["p_undetected"]) == pytest.approx(0.004, abs=1e-15)
    assert float(row["annual_undetected_carriers"]) == pytest.approx(3600, abs=1e-6)
    assert float(row["annual_indirect_gbp"]) == pytest.approx(72_000_000, abs=1e-3)


def test_tree_node_cap(tmp_path, capsys):
    assert main(["tree", "--node-cap", "10", "--out", str(tmp_path)]) == 1
    assert "TREE_TOO_LARGE" in capsys.readouterr().err


def test_sweep_outputs(tmp_path):
    argv = ["sweep", "--param", "stages.british.check_probability", "--from", "0", "--to", "1", "--steps", "5",
            "-R", "10", "--workers", "1", "--out", str(tmp_path)]
    assert main(argv) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [float(r["value"]) for r in rows] == [0, 0.25, 0.5, 0.75, 1.0]
    assert all(r["verdict"] == "CONSISTENT" for r in rows)


def test_sweep_degenerate_and_bad(tmp_path):
    base = ["sweep", "--param", "carrier_probability", "-R", "3", "--workers", "1", "--out", str(tmp_path)]
    assert main(base + ["--from", "0.3", "--to", "0.1"]) == 1
    assert main(base + ["--from", "0.2", "--to", "0.9", "--steps", "1"]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert [float(r["value"]) for r in rows] == [0.2]
    bad = ["sweep", "--param", "nope.x", "--from", "0", "--to", "1", "-R", "3", "--workers", "1", "--out", str(tmp_path)]
    assert main(bad) == 1


def test_bounds_verdicts(tmp_path, capsys):
    assert main(["bounds", "--budget", "50000", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "feasibility.json").read_text())["verdict"] == "TOO_RARE_FOR_BUDGET"
    assert "TOO_RARE_FOR_BUDGET" in (tmp_path / "feasibility.txt").read_text()

    s = default_scenario()
    finite = replace(s, stages=tuple(replace(st, stations=tuple(replace(x, queue_capacity=30) for x in st.stations)) for st in s.stages))
    path = tmp_path / "finite.json"
    dump_scenario(validate_scenario(finite), path)
    assert main(["bounds", "--scenario", str(path), "--budget", "100000", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "feasibility.json").read_text())["verdict"] == "SIMULATION_USEFUL"

    path = tmp_path / "certain.json"
    dump_scenario(validate_scenario(replace(s, carrier_probability=1.0)), path)
    assert main(["bounds", "--scenario", str(path), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "feasibility.json").read_text())
    assert report["verdict"] == "TREE_SUFFICIENT" and report["required_replications"] == 0


def test_validate_and_default_scenario(tmp_path, capsys):
    path = tmp_path / "calais.json"
    assert main(["default-scenario", "--out", str(path)]) == 0
    assert main(["validate", "--scenario", str(path)]) == 0
    assert "valid scenario" in capsys.readouterr().out
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "screenflow", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
