import json
import subprocess
import sys

import pytest

from klrs.cli import COMMANDS, main
from klrs.experiments import gen_two_gaussian_toy, write_csv_dataset

FAST = ["--sgd-steps", "100", "--epsilon", "1e-3"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def toy_csv(tmp_path):
    p = tmp_path / "toy.csv"
    write_csv_dataset(gen_two_gaussian_toy(0), p, features=["x0", "x1"], group="group")
    return p


@pytest.mark.parametrize("cmd", sorted(COMMANDS))
def test_help_lists_every_flag(cmd, capsys):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0
    for flag in ("--config", "--seed", "--out", "--format"):
        assert flag in out
    for p in COMMANDS[cmd][1]:
        assert "--" + p.key.replace("_", "-") in out


def test_guarantees_values(capsys):
    code, out, _ = run(capsys, "guarantees", "--K", "2", "--N", "100", "--r", "0.05")
    rep = json.loads(out)
    assert code == 0
    assert rep["guarantees"]["chi2"] == pytest.approx(0.99843, abs=1e-5)
    assert rep["guarantees"]["chernoff"] == pytest.approx(0.96487, abs=1e-5)


def test_solve_feasible_and_infeasible(toy_csv, capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "solve", "--data", str(toy_csv), "--features", "x0,x1", "--tau", "1.0",
                     "--out", str(out), *FAST)
    rep = json.loads(out.read_text())
    assert code == 0 and rep["result"]["feasible"] and rep["trace"]
    assert rep["config"]["tau"] == 1.0 and rep["config"]["command"] == "solve"
    code, _, err = run(capsys, "solve", "--data", str(toy_csv), "--features", "x0,x1", "--tau", "0.5", *FAST)
    assert code == 2 and "infeasible" in err


def test_usage_and_data_errors(toy_csv, capsys, tmp_path):
    assert run(capsys, "solve", "--data", "nope.csv", "--features", "a", "--tau", "1")[0] == 1
    assert run(capsys, "solve", "--data", str(toy_csv), "--features", "x0,x1")[0] == 1  # no tau
    assert run(capsys, "solve", "--data", str(toy_csv), "--features", "zz", "--tau", "1")[0] == 1
    assert run(capsys, "solve", "--bogus")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "toy", "--seed", "-3")[0] == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tau": 1.0, "typo_key": 1}))
    code, _, err = run(capsys, "solve", "--config", str(cfg), "--data", str(toy_csv), "--features", "x0,x1")
    assert code == 1 and "typo_key" in err
    cfg.write_text("{not json")
    assert run(capsys, "guarantees", "--config", str(cfg))[0] == 1


def test_flags_override_config(toy_csv, capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tau": 0.5, "data": str(toy_csv), "features": ["x0", "x1"], "sgd_steps": 100,
                               "epsilon": 1e-3, "seed": 4}))
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--tau", "1.1")
    rep = json.loads(out)
    assert code == 0 and rep["config"]["tau"] == 1.1 and rep["config"]["seed"] == 4


def test_csv_format(toy_csv, capsys):
    code, out, _ = run(capsys, "solve", "--data", str(toy_csv), "--features", "x0,x1", "--tau", "1.0",
                       "--format", "csv", *FAST)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "lambda,objective,feasible" and len(lines) > 2


def test_toy_reproduces_split(capsys, tmp_path):
    code, out, _ = run(capsys, "toy", "--tau-factors", "1.1,1.3", "--sgd-steps", "200")
    rep = json.loads(out)
    assert code == 0 and rep["metrics"]["cluster_sizes"] == [80, 20]
    assert len(rep["metrics"]["sweep"]) == 2


def test_hsolve(toy_csv, capsys):
    code, out, _ = run(capsys, "hsolve", "--data", str(toy_csv), "--features", "x0,x1", "--group", "group",
                       "--tau", "1.2", "--w", "1", "--sgd-steps", "30", "--epsilon", "0.05")
    rep = json.loads(out)
    assert code == 0 and {"lambda1", "lambda2", "theta"} <= set(rep["result"])


def test_labelshift_zero_kl_keeps_share(capsys):
    code, out, _ = run(capsys, "labelshift", "--kls", "0", "--sgd-steps", "100", "--epsilon", "1e-2")
    rep = json.loads(out)
    shift = rep["metrics"]["shifts"][0]
    assert code == 0 and shift["pos_share"] == rep["metrics"]["train_pos_share"]


def test_fairpca(capsys):
    code, out, _ = run(capsys, "fairpca", "--r", "0.9", "--sgd-steps", "100", "--epsilon", "1e-2")
    rep = json.loads(out)
    assert code == 0 and len(rep["metrics"]["group_losses"]) == 2


def test_longtail_small(capsys):
    code, out, _ = run(capsys, "longtail", "--n-per-class", "60", "--rho", "0.2", "--sgd-steps", "20",
                       "--epsilon", "0.1", "--test-per-class", "50")
    rep = json.loads(out)
    assert code == 0 and rep["metrics"]["train_class_sizes"] == {"0": 60, "1": 12}


def test_determinism_subprocess(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        subprocess.run([sys.executable, "-m", "klrs.cli", "toy", "--seed", "5", "--tau-factors", "1.1,1.4",
                        "--sgd-steps", "150", "--out", str(p)], check=True)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
