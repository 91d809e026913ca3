import json

import pytest

from rescuesim.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main


def test_consensus_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["consensus", "--out", str(out), "--seed", "3", "--set", "consensus.heights=5",
               "--set", "network.delta=0.5"])
    assert rc == EXIT_OK
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["consensus"]["heights"] == 5 and eff["network"]["delta"] == 0.5
    assert eff["seeds"]["master"] == 3
    assert {p.name for p in out.iterdir()} >= {"heights.csv", "evidence.csv", "reputation.csv", "summary.json"}
    assert "heights 5" in capsys.readouterr().out


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RESCUESIM_SEED", "11")
    assert main(["consensus", "--out", str(tmp_path), "--set", "consensus.heights=2"]) == EXIT_OK
    assert json.loads((tmp_path / "effective_config.json").read_text())["seeds"]["master"] == 11
    monkeypatch.setenv("RESCUESIM_SEED", "eleven")
    assert main(["consensus", "--out", str(tmp_path), "--set", "consensus.heights=2"]) == EXIT_CONFIG


def test_config_errors_exit_one(tmp_path, capsys):
    assert main(["consensus", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "missing.json" in capsys.readouterr().err
    assert main(["consensus", "--set", "consensus.z=50", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["consensus", "--set", "bogus", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["report", str(tmp_path / "nothing")]) == EXIT_CONFIG


def test_strict_safety_exit_code(tmp_path, capsys):
    rc = main(["consensus", "--out", str(tmp_path), "--set", "adversary.byzantine_ratio=0.4",
               "--set", "adversary.strict_safety=true"])
    assert rc == EXIT_CONFIG
    assert "safety bound" in capsys.readouterr().err


def test_se_verify(tmp_path, capsys):
    assert main(["se-verify", "--samples", "5", "--grid", "200", "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "se_verify.csv").read_text().splitlines()
    assert len(text) == 6 and text[0].startswith("psi,alpha")


def test_offload_and_report(tmp_path, capsys):
    assert main(["offload", "--out", str(tmp_path), "--set", "offload.seeds=1"]) == EXIT_OK
    assert len((tmp_path / "offload.csv").read_text().splitlines()) == 1 + 12
    capsys.readouterr()
    assert main(["report", str(tmp_path)]) == EXIT_OK
    assert "offload.csv: 12 rows" in capsys.readouterr().out
    assert main(["report", str(tmp_path / "offload.csv")]) == EXIT_OK
    assert "delay_vfc" in capsys.readouterr().out


def test_learn_short(tmp_path):
    assert main(["learn", "--scheme", "greedy", "--slots", "20", "--out", str(tmp_path)]) == EXIT_OK
    s = json.loads((tmp_path / "learning_summary.json").read_text())
    assert s["scheme"] == "greedy" and s["slots"] == 20
    assert s["equilibrium"] == {"x": pytest.approx(6.0), "y": pytest.approx(1.2)}


@pytest.mark.parametrize("param,values", [("psi", "4,8"), ("chi", "0.01,0.02")])
def test_sweeps(tmp_path, param, values):
    assert main(["sweep", "--param", param, "--values", values, "--out", str(tmp_path),
                 "--set", "offload.seeds=1"]) == EXIT_OK
    lines = (tmp_path / f"sweep_{param}.csv").read_text().splitlines()
    assert len(lines) > 2


def test_sweep_bad_values(tmp_path):
    assert main(["sweep", "--param", "psi", "--values", "a,b", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_trace_report(tmp_path, capsys):
    assert main(["consensus", "--out", str(tmp_path), "--set", "consensus.heights=2",
                 "--set", "consensus.trace=true"]) == EXIT_OK
    capsys.readouterr()
    assert main(["report", str(tmp_path / "trace.jsonl")]) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_invariant_exit_code(monkeypatch, tmp_path):
    from rescuesim import cli
    from rescuesim.consensus import InvariantViolation

    def boom(args):
        raise InvariantViolation("two blocks at height 3")
    parser = cli.build_parser
    monkeypatch.setattr(cli, "build_parser", lambda: _patched(parser(), boom))
    assert cli.main(["consensus", "--out", str(tmp_path)]) == EXIT_INVARIANT


def _patched(ap, fn):
    ap._subparsers._group_actions[0].choices["consensus"].set_defaults(fn=fn)
    return ap
