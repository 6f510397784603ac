"""CLI surface: exit codes, determinism, formats, the full pipeline."""

import json

import pytest

from dprocess.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_simulate_happy_path(capsys):
    code, out, _ = _run(capsys, "simulate", "--n", "1000", "--d", "2",
                        "--seed", "7", "--format", "json")
    assert code == 0
    rec = json.loads(out)
    assert rec["T"][0] is not None
    assert rec["n"] == 1000


def test_simulate_parameter_error(capsys):
    code, _, err = _run(capsys, "simulate", "--n", "1", "--d", "1", "--seed", "0")
    assert code == 2
    assert "parameter error" in err


def test_simulate_deterministic_bytes(capsys):
    args = ("simulate", "--n", "500", "--d", "3", "--seed", "42",
            "--checkpoints", "0,100,750", "--format", "json")
    _, out1, _ = _run(capsys, *args)
    _, out2, _ = _run(capsys, *args)
    assert out1 == out2


def test_theory_trivial_point(capsys):
    code, out, _ = _run(capsys, "theory", "--d", "2", "--t", "0", "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["y"] == [1.0, 0.0]
    assert obj["s"] == [1.0, 1.0]


def test_theory_near_domain_edge(capsys):
    code, out, _ = _run(capsys, "theory", "--d", "3", "--t", "1.4999",
                        "--format", "json", "--tol", "1e-10")
    assert code == 0
    obj = json.loads(out)
    assert obj["residual_root"] < 1e-12 * 3
    assert obj["residual_sum"] < 1e-10


def test_theory_domain_error(capsys):
    code, _, err = _run(capsys, "theory", "--d", "2", "--t", "1.0")
    assert code == 4
    assert "domain" in err


def test_theory_grid_csv(capsys):
    code, out, _ = _run(capsys, "theory", "--d", "2", "--grid", "0:0.5:6")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,s0,s1"
    assert len(lines) == 7


def test_theory_step_form(capsys):
    code, out, _ = _run(capsys, "theory", "--d", "2", "--n", "100", "--i", "0",
                        "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["ns"][0] == 100.0
    assert "phase_bounds" in obj


def test_oracle_output(capsys):
    code, out, _ = _run(capsys, "oracle", "--n", "3", "--d", "2", "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["T"][0] == {"2": [1, 1]}
    code, out, _ = _run(capsys, "oracle", "--n", "4", "--d", "2")
    assert code == 0
    assert "p_stuck: 4/15" in out


def test_oracle_guard(capsys):
    code, _, err = _run(capsys, "oracle", "--n", "9", "--d", "2")
    assert code == 4
    assert "guard" in err


def test_pipeline_experiment_analyze(tmp_path, capsys):
    out_file = str(tmp_path / "batch.jsonl")
    code, out, _ = _run(capsys, "experiment", "--n", "3", "--d", "2",
                        "--trials", "200", "--seed", "11", "--out", out_file)
    assert code == 0
    assert "200 rows" in out
    code, out, _ = _run(capsys, "analyze", "--in", out_file, "--format", "json",
                        "--no-independence")
    assert code == 0
    report = json.loads(out)
    # degenerate instance: T0 = 2 always, so mean V is pinned
    assert report["per_ell"][0]["mean_V"] == pytest.approx(1.8204784532536746)
    assert report["per_ell"][0]["count"] == 200


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "analyze", "--in", str(tmp_path / "nope.jsonl"))
    assert code == 3
    assert "i/o error" in err


def test_analyze_empty_file(capsys, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code, _, err = _run(capsys, "analyze", "--in", str(empty))
    assert code == 2
    assert "no header" in err


def test_analyze_header_only(capsys, tmp_path):
    out_file = str(tmp_path / "b.jsonl")
    _run(capsys, "experiment", "--n", "10", "--d", "2", "--trials", "1",
         "--seed", "1", "--out", out_file)
    lines = open(out_file).read().splitlines()
    only_header = tmp_path / "h.jsonl"
    only_header.write_text(lines[0] + "\n")
    code, _, err = _run(capsys, "analyze", "--in", str(only_header))
    assert code == 2


def test_experiment_env_default_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DPROC_OUTPUT_DIR", str(tmp_path))
    code, out, _ = _run(capsys, "experiment", "--n", "10", "--d", "2",
                        "--trials", "3", "--seed", "5")
    assert code == 0
    assert (tmp_path / "exp_n10_d2_s5.jsonl").exists()


def test_experiment_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 20, "d": 2, "trials": 4, "master_seed": 9}))
    out_file = str(tmp_path / "b.jsonl")
    code, out, _ = _run(capsys, "experiment", "--config", str(cfg), "--out", out_file)
    assert code == 0
    assert "4 rows" in out
    # identical to the flag form
    flag_file = str(tmp_path / "c.jsonl")
    _run(capsys, "experiment", "--n", "20", "--d", "2", "--trials", "4",
         "--seed", "9", "--out", flag_file)
    assert open(out_file, "rb").read() == open(flag_file, "rb").read()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 20, "d": 2, "trials": 4, "master_seed": 9,
                               "bogus": 1}))
    code, _, err = _run(capsys, "experiment", "--config", str(bad))
    assert code == 2 and "unknown config keys" in err


def test_experiment_missing_flags(capsys):
    code, _, err = _run(capsys, "experiment", "--n", "20", "--d", "2")
    assert code == 2


def test_csv_exports_via_cli(tmp_path, capsys):
    out_file = str(tmp_path / "b.jsonl")
    _run(capsys, "experiment", "--n", "50", "--d", "2", "--trials", "30",
         "--seed", "2", "--out", out_file)
    vcsv = str(tmp_path / "v.csv")
    ecsv = str(tmp_path / "e.csv")
    code, _, _ = _run(capsys, "analyze", "--in", out_file, "--csv-out", vcsv,
                      "--ecdf-out", f"0:{ecsv}", "--no-independence")
    assert code == 0
    assert open(vcsv).readline().startswith("trial,V0")
    assert open(ecsv).readline().startswith("v,ecdf")
