"""Command-line entry point: exit codes and the files each command writes."""

import json
from pathlib import Path

import pytest
import yaml

from tsmr.cli import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main, parse_seeds
from tsmr.core import ConfigError
from tsmr.scenario_file import bundled_names, load, parse

GOLDEN = Path(__file__).parent / "golden"

SMALL = {
    "name": "tiny",
    "seed": 1,
    "topology": {"sites": ["a", "b", "c"], "uniform_rtt": 10},
    "protocol": {"r": 3, "f": 1, "partitions": 1},
    "workload": {"mode": "conflict", "clients_per_site": 1, "commands_per_client": 2},
}


def write(tmp_path, doc, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc) if not isinstance(doc, str) else doc)
    return str(path)


def test_run_writes_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, SMALL), "--out", str(out), "--trace"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] and report["commands"]["returned"] == 6
    assert (out / "trace.jsonl").exists()
    assert capsys.readouterr().out.startswith("ok tiny")


def test_malformed_scenario_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, "name: [unclosed"), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("mutate", [
    lambda d: d["protocol"].update(r=4),
    lambda d: d["protocol"].update(f=2),
    lambda d: d.update(colour="blue"),
    lambda d: d["workload"].update(conflict_rate=2),
    lambda d: d["topology"].update(uniform_rtt=-1),
    lambda d: d.pop("protocol"),
])
def test_invalid_scenarios_are_config_errors(mutate, tmp_path):
    doc = json.loads(json.dumps(SMALL))
    mutate(doc)
    with pytest.raises(ConfigError):
        parse(doc)
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_unknown_scenario_name():
    assert main(["run", "no_such_scenario"]) == EXIT_CONFIG


def test_selftest_exits_3_and_check_agrees(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "selftest_property1", "--out", str(out)]) == EXIT_VIOLATION
    printed = capsys.readouterr().out
    assert "FAIL" in printed and "property1_commit_agreement" in printed
    assert main(["check", str(out / "trace.jsonl")]) == EXIT_VIOLATION
    assert "FAIL property1_commit_agreement" in capsys.readouterr().out


def test_check_clean_trace(tmp_path):
    out = tmp_path / "out"
    main(["run", write(tmp_path, SMALL), "--out", str(out), "--trace"])
    assert main(["check", str(out / "trace.jsonl")]) == EXIT_OK


def test_check_rejects_foreign_files(tmp_path):
    bad = tmp_path / "t.jsonl"
    bad.write_text('{"kind": "send"}\n')
    assert main(["check", str(bad)]) == EXIT_CONFIG
    assert main(["check", str(tmp_path / "missing.jsonl")]) == EXIT_CONFIG


def test_sweep(tmp_path, capsys):
    code = main(["sweep", "safety_sweep", "--seeds", "0..5", "--workers", "1", "--out", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["runs"] == 6 and summary["passed"] == 6
    assert "6/6 seeds passed" in capsys.readouterr().out


def test_sweep_in_parallel_matches_sequential(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["sweep", "safety_sweep", "--seeds", "10..13", "--workers", "1", "--out", str(a)])
    main(["sweep", "safety_sweep", "--seeds", "10..13", "--workers", "2", "--out", str(b)])
    assert (a / "sweep.json").read_bytes() == (b / "sweep.json").read_bytes()


@pytest.mark.parametrize("text,seeds", [("3..5", [3, 4, 5]), ("7", [7])])
def test_parse_seeds(text, seeds):
    assert list(parse_seeds(text)) == seeds


@pytest.mark.parametrize("text", ["5..3", "x..y", ""])
def test_parse_seeds_rejects(text):
    with pytest.raises(ConfigError):
        parse_seeds(text)


def test_identical_invocations_give_identical_reports(tmp_path):
    for d in ("a", "b"):
        main(["run", "small_conflict", "--seed", "0", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_report_matches_golden(tmp_path):
    main(["run", "small_conflict", "--seed", "0", "--out", str(tmp_path)])
    assert (tmp_path / "report.json").read_text() == (GOLDEN / "small_conflict_seed0.json").read_text()


def test_every_bundled_scenario_loads():
    names = bundled_names()
    assert {"fairness_5sites_f1", "pathological", "coordinator_crash", "safety_sweep"} <= set(names)
    for name in names:
        load(name).build()


def test_crash_beyond_f_skips_liveness(tmp_path):
    assert main(["run", "crash_beyond_f", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["checks"]["liveness"]["skipped"]


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    assert "pathological" in capsys.readouterr().out.split()
