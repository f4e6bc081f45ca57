import json
from importlib import resources
from pathlib import Path

import pytest

from arpfb import cli, harness
from arpfb.dynamics import IntegrationError


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_validate_ok(tmp_path, capsys):
    path = write(tmp_path, {"field": {"bz": 7.0}})
    assert cli.main(["validate", "--config", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", '{"field": {"bz": "seven"}}',
                                  '{"extra_key": 1}', '{"probe": {"pulse_period": 0}}'])
def test_validate_rejects(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert cli.main(["validate", "--config", str(path)]) == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


def test_run_closed_loop_outputs(tmp_path):
    path = write(tmp_path, {"field": {"bz": 7.0}, "dynamics": {"rabi_khz": 15.0}})
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(path), "--scenario", "closed_loop",
                     "--seed", "7", "--out", str(out)]) == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == ("t_ms,delta0_MHz,I,Q,A,p_2_2,p_2_1,p_2_0,p_2_-1,p_2_-2,"
                      "p_1_1,p_1_0,p_1_-1,lost")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["majority_state"] == "2,1" and summary["stopped"]
    record = json.loads((out / "record.json").read_text())
    assert record["seed"] == 7 and record["config"]["field"]["bz"] == 7.0


def test_run_defaults_without_config(tmp_path):
    out = tmp_path / "mc"
    assert cli.main(["run", "--scenario", "MONTE_CARLO", "--trials", "4", "--out", str(out)]) == 0
    rows = (out / "trials.csv").read_text().splitlines()
    assert len(rows) == 5


def test_run_stern_gerlach_outputs(tmp_path):
    path = write(tmp_path, {"field": {"bz": 7.0}, "dynamics": {"rabi_khz": 15.0}})
    out = tmp_path / "sg"
    assert cli.main(["run", "--config", str(path), "--scenario", "STERN_GERLACH",
                     "--out", str(out)]) == 0
    assert (out / "histogram.csv").exists() and (out / "profile.csv").exists()


def test_bad_arguments_exit_config(tmp_path):
    assert cli.main(["run", "--scenario", "MONTE_CARLO", "--trials", "0",
                     "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--scenario", "OPEN_LOOP_STOP", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["run", "--scenario", "CLOSED_LOOP", "--seed", "-1", "--out", str(tmp_path)])


def test_simulation_failure_exit_code(tmp_path, monkeypatch):
    def boom(sc, *a, **k):
        raise IntegrationError("step size underflow", 12.5)

    monkeypatch.setattr(harness, "run", boom)
    assert cli.main(["run", "--scenario", "CLOSED_LOOP", "--out", str(tmp_path / "x")]) == 3


DOCS = Path(__file__).resolve().parents[1] / "docs"


def test_docs_schema_matches_packaged():
    packaged = resources.files("arpfb").joinpath("schema/config.schema.json").read_text()
    assert json.loads((DOCS / "config.schema.json").read_text()) == json.loads(packaged)


@pytest.mark.parametrize("name", sorted(p.name for p in (DOCS / "examples").glob("*.json")))
def test_example_configs_validate(name):
    assert cli.main(["validate", "--config", str(DOCS / "examples" / name)]) == 0
