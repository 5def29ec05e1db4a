import json
import os

import pytest

from pcnsim.cli import main
from pcnsim.errors import ConfigError, StageError
from pcnsim.report import Report, Table, load_tables
from pcnsim.scenarios import ScenarioConfig, run_scenario, stage


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        ScenarioConfig.from_dict({"seed": 1, "bogus": 2})


def test_config_type_checked():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"trials": "many"})


def test_config_digest_tracks_content():
    a, b = ScenarioConfig(), ScenarioConfig()
    assert a.digest() == b.digest()
    b.seed = 2
    assert a.digest() != b.digest()


def test_stage_tags_errors():
    with pytest.raises(StageError, match="routing"):
        with stage("routing"):
            raise KeyError("x")


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        run_scenario("nope", ScenarioConfig())


def test_table_rejects_ragged_rows():
    t = Table(["a", "b"])
    with pytest.raises(ValueError):
        t.add(1)


def test_encoding_cost_rows():
    rep = run_scenario("table3", ScenarioConfig())
    t = rep.tables["table3"]
    rows = {r[0]: r for r in t.rows}
    assert any("44" in map(str, r) and "2813" in map(str, r) for r in rows.values())
    assert any("108" in map(str, r) and "215" in map(str, r) for r in rows.values())


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("table1", "table3", "table4", "table5", "fig8-timing", "poison", "auth"):
        assert name in out


def test_report_on_empty_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 0
    assert "empty report" in capsys.readouterr().out


def test_missing_config_is_usage_error(tmp_path):
    assert main(["run", "table1", "--config", str(tmp_path / "none.json")]) == 2


def test_bad_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"colour": "red"}))
    assert main(["run", "table1", "--config", str(p)]) == 2


def test_run_formation_costs_writes_csv_and_figures(tmp_path, capsys):
    out = tmp_path / "t1"
    assert main(["run", "table1", "--seed", "7", "--out", str(out)]) == 0
    tables = load_tables(str(out))
    servers = [int(x) for x in tables["table1"].column("servers")]
    assert servers == [10, 25, 50, 100]
    assert (out / "summary.json").exists()
    assert any(name.endswith(".png") for name in os.listdir(out))
    assert main(["report", str(out)]) == 0
    assert "seed 7" in capsys.readouterr().out


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PCNSIM_OUT", str(tmp_path))
    assert main(["run", "table3", "--no-figures"]) == 0
    assert (tmp_path / "table3" / "table3.csv").exists()


@pytest.mark.parametrize("name", ["table1", "table3", "table4", "fig8-timing", "auth"])
def test_rerun_is_byte_identical(name, tmp_path):
    cfg = ScenarioConfig.from_dict({"seed": 3, "forgeries": 20})
    a = run_scenario(name, cfg)
    b = run_scenario(name, ScenarioConfig.from_dict({"seed": 3, "forgeries": 20}))
    assert {k: t.to_csv() for k, t in a.tables.items()} == \
        {k: t.to_csv() for k, t in b.tables.items()}
    a.write(str(tmp_path / "a"), figures=False)
    b.write(str(tmp_path / "b"), figures=False)
    for f in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_report_summary_hashes():
    rep = Report("x", 1, "d")
    rep.table("t", ["a"]).add(1.5)
    assert rep.tables["t"].to_csv() == "a\n1.5\n"
    assert rep.summary()["tables"]["t"]["rows"] == 1
