import json
import shutil
import subprocess

import pytest

from smoothed2opt import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_then_solve_square(tmp_path, capsys):
    inst = tmp_path / "sq.json"
    code, _, err = run(["gen", "--kind", "grid", "--n", "4", "--d", "2", "--out", str(inst)], capsys)
    assert code == 0 and "config:" in err
    code, out, _ = run(["solve", "--instance", str(inst), "--pivot", "best"], capsys)
    assert code == 0
    assert "iterations=1 " in out and "certified=true" in out and "potential_ok=true" in out


def test_gen_deterministic(capsys):
    a = run(["gen", "--n", "12", "--sigma", "0.2", "--seed", "3"], capsys)[1]
    b = run(["gen", "--n", "12", "--sigma", "0.2", "--seed", "3"], capsys)[1]
    assert a == b and json.loads(a)["n"] == 12


def test_seed_env_fallback(monkeypatch, capsys):
    monkeypatch.setenv(cli.SEED_ENV, "3")
    a = run(["gen", "--n", "12", "--sigma", "0.2"], capsys)[1]
    monkeypatch.delenv(cli.SEED_ENV)
    b = run(["gen", "--n", "12", "--sigma", "0.2", "--seed", "3"], capsys)[1]
    assert a == b


def test_solve_trace_file(tmp_path, capsys):
    inst = tmp_path / "u.json"
    run(["gen", "--n", "15", "--sigma", "0.5", "--out", str(inst)], capsys)
    code, _, _ = run(["solve", "--instance", str(inst), "--initial", "random",
                      "--trace", str(tmp_path / "t.json")], capsys)
    assert code == 0
    assert json.loads((tmp_path / "t.json").read_text())["termination"] == "local-optimum"


def test_pairs_census(capsys):
    code, out, _ = run(["pairs", "--n", "6", "--seed", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["kinds"]["Type0"]["count"] == 360


def test_verify_math_default_passes(tmp_path, capsys):
    code, out, _ = run(["verify-math", "--grid", "default", "--out", str(tmp_path / "v.csv")], capsys)
    assert code == 0 and "violations=0" in out
    assert (tmp_path / "v.csv").read_text().startswith("lemma,")


def test_angle_mc_exit_codes(capsys):
    code, out, _ = run(["angle-mc", "--d", "3", "--s", "0", "--trials", "100000"], capsys)
    assert code == 0 and json.loads(out)["passed"]
    # an absurd tolerance makes the exact-vs-bound check fail
    code, _, _ = run(["angle-mc", "--d", "3", "--s", "0", "--trials", "100000", "--tolerance", "10"], capsys)
    assert code == 2


def test_tail_has_alpha_column(capsys):
    code, out, _ = run(["tail", "--quantity", "linked_min_type0", "--n", "6", "--trials", "2000"], capsys)
    header = out.splitlines()[0].split(",")
    assert code == 0 and "alpha_hat" in header


def test_experiment_and_export(tmp_path, capsys):
    prefix = tmp_path / "exp"
    code, _, _ = run(["experiment", "--n", "6,8", "--trials", "2", "--jobs", "1", "--out", str(prefix)],
                     capsys)
    assert code == 0
    code, _, _ = run(["export", "--input", f"{prefix}.json", "--output", str(tmp_path / "x.csv")], capsys)
    assert code == 0
    assert (tmp_path / "x.csv").read_text() == (tmp_path / "exp.csv").read_text()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_grid": [6], "trials": 3, "seed": 2}))
    prefix = tmp_path / "e"
    code, _, err = run(["experiment", "--config", str(cfg), "--trials", "1", "--jobs", "1",
                        "--out", str(prefix)], capsys)
    assert code == 0
    resolved = json.loads(err.split("config: ", 1)[1].splitlines()[0])
    assert resolved["n_grid"] == [6] and resolved["trials"] == 1 and resolved["seed"] == 2


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(["experiment", "--config", str(cfg)], capsys)[0] == 1


@pytest.mark.parametrize("argv", [["solve", "--instance", "/nonexistent.json"], ["gen", "--bogus"],
                                  ["nosuch"], ["gen", "--n", "2"]])
def test_usage_errors(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1 and err


@pytest.mark.parametrize("sub", ["gen", "solve", "pairs", "verify-math", "angle-mc", "tail",
                                 "experiment", "export"])
def test_help_lists_flags(sub, capsys):
    code, out, _ = run([sub, "--help"], capsys)
    assert code == 0 and "--seed" in out and "--config" in out


def test_console_script():
    exe = shutil.which("smoothed2opt")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = subprocess.run([exe, "gen", "--kind", "grid", "--n", "4"], capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["n"] == 4
