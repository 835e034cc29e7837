import json
import shutil
from pathlib import Path

import pytest

from casalab.cli import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main, parse_config, ConfigError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_english_fixture(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--config", SCENARIOS / "english.json", "--out-dir", tmp_path)
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "english" / "outcome.json").read_text())
    first = summary["runs"][0]
    assert first["outcome"]["revenue"] == 7.0
    assert first["outcome"]["winners"] == [0]
    assert first["bound_check"]["ok"]
    assert first["comparison"]["rank_guarantees"]["2"] == 7.0
    assert {p.name for p in (tmp_path / "english").iterdir()} == {
        "outcome.json", "transcript-seed0.jsonl", "transcript-seed1.jsonl"}


def test_run_is_byte_identical_across_invocations(tmp_path, capsys):
    for d in ("a", "b"):
        assert run_cli(capsys, "run", "--config", SCENARIOS / "substitutes.json", "--out-dir", tmp_path / d)[0] == 0
    for f in (tmp_path / "a").rglob("*"):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_replay_ok_and_tampered(tmp_path, capsys):
    run_cli(capsys, "run", "--config", SCENARIOS / "substitutes.json", "--out-dir", tmp_path, "--seed", 4)
    path = next((tmp_path).rglob("transcript-seed4.jsonl"))
    code, out, _ = run_cli(capsys, "replay", path)
    assert code == EXIT_OK and json.loads(out)["ok"]
    lines = path.read_text().splitlines()
    rec = json.loads(lines[2])
    rec["prices"][0] += 1
    lines[2] = json.dumps(rec, sort_keys=True)
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    code, out, _ = run_cli(capsys, "replay", bad)
    assert code == EXIT_VIOLATION and json.loads(out)["line"] == 3
    bad.write_text(lines[0] + "\n{oops\n")
    code, out, _ = run_cli(capsys, "replay", bad)
    assert code == EXIT_CONFIG and json.loads(out)["line"] == 2


def test_exposure_fixture_reports_negative_utility(tmp_path, capsys):
    run_cli(capsys, "run", "--config", SCENARIOS / "exposure.json", "--out-dir", tmp_path)
    summary = json.loads(next(tmp_path.rglob("outcome.json")).read_text())
    assert min(r["outcome"]["utilities"][0] for r in summary["runs"]) < 0


def test_pair_specialists_fixture_compares_vcg(tmp_path, capsys):
    run_cli(capsys, "run", "--config", SCENARIOS / "pair_specialists.json", "--out-dir", tmp_path)
    summary = json.loads(next(tmp_path.rglob("outcome.json")).read_text())
    comp = summary["runs"][0]["comparison"]
    assert comp["vcg"]["revenue"] == 0.0
    assert comp["rank_guarantees"]["3"] == 1.0


def test_bad_bundle_names_the_field(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", "--config", SCENARIOS / "bad_bundle.json", "--out-dir", tmp_path)
    assert code == EXIT_CONFIG
    assert "menu[2][1]" in json.loads(err)["message"]


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda c: c.pop("menu"), "menu"),
        (lambda c: c.update(schema_version=2), "schema_version"),
        (lambda c: c["grid"].update(epsilon=-1), "grid.epsilon"),
        (lambda c: c["bidders"].update(count=3), "bidders"),
        (lambda c: c.update(strategies={"name": "telepathy"}), "strategies"),
    ],
)
def test_schema_errors_name_the_field(mutate, field):
    cfg = json.loads((SCENARIOS / "english.json").read_text())
    mutate(cfg)
    with pytest.raises(ConfigError) as err:
        parse_config(cfg)
    assert field in str(err.value)


def test_invalid_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text('{"schema_version": 1,\n  "name": }')
    code, _, err = run_cli(capsys, "run", "--config", bad)
    assert code == EXIT_CONFIG and "line 2" in json.loads(err)["message"]


def test_wdp_and_guarantee_commands(capsys):
    code, out, _ = run_cli(capsys, "wdp", "--items", 2, "--menu", "[[0],[1],[0,1]]", "--weights", "[3,4,7]")
    assert code == 0 and json.loads(out)["selection"] == [0, 1]
    assert run_cli(capsys, "wdp", "--items", 2, "--menu", "[[0]]", "--weights", "[1,")[0] == EXIT_CONFIG
    code, out, _ = run_cli(capsys, "guarantee", "--config", SCENARIOS / "english.json", "--k", 2)
    assert code == 0 and json.loads(out)["guarantee"] == 7.0
    assert run_cli(capsys, "guarantee", "--config", SCENARIOS / "english.json", "--k", 9)[0] == EXIT_CONFIG


def test_verify_writes_report(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CASALAB_OUT", str(tmp_path))
    code, out, _ = run_cli(capsys, "verify", "--suite", "solver", "--trials", 200, "--seed", 1)
    assert code == EXIT_OK
    report = json.loads((tmp_path / "solver-seed1.json").read_text())
    assert report["ok"] and report["environment"]["seed"] == 1
    assert run_cli(capsys, "verify", "--suite", "nope")[0] == EXIT_CONFIG
    assert run_cli(capsys, "verify", "--suite", "solver", "--param", "bogus=1")[0] == EXIT_CONFIG


def test_usage_errors_exit_two(capsys):
    assert main([]) == EXIT_CONFIG
    assert main(["run"]) == EXIT_CONFIG
    assert main(["--version"]) == EXIT_OK
