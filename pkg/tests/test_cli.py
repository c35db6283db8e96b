import json

import pytest

from ceopt.cli import main


def write_config(tmp_path, name="cfg.json", **overrides):
    doc = {
        "algorithm": "ce2nd",
        "objective": {"name": "griewank", "m": 2},
        "theta0": {"mu": 5.0, "q": 9.0},
        "schedules": {
            "rho": 0.05,
            "eps1": 0.9,
            "r": 1.0,
            "k_gamma": 3.0,
            "beta": {"kind": "power", "exponent": 0.6},
            "c": {"kind": "constant", "value": 0.1},
            "lambda": {"kind": "constant", "value": 0.01},
        },
        "replications": 1,
        "base_seed": 3,
        "budget": {"max_evals": 500},
        "trace_stride": 100,
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_bench_eval_known_point(capsys):
    assert main(["bench", "eval", "griewank", "2", "0", "0"]) == 0
    assert capsys.readouterr().out.strip() == "0.0"


def test_bench_eval_triangle(capsys):
    assert main(["bench", "eval", "triangle", "1", "-0.2"]) == 0
    assert capsys.readouterr().out.strip() == "1.5"


def test_bench_eval_bad_name(capsys):
    assert main(["bench", "eval", "sphere", "2", "0", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bench_eval_dimension_mismatch(capsys):
    assert main(["bench", "eval", "griewank", "3", "0", "0"]) == 2


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "results"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert (out / "rep000.csv").exists()
    assert (out / "summary.csv").exists()
    assert (out / "aggregate.json").exists()
    assert "success fraction" in capsys.readouterr().out


def test_run_overrides(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "results"
    assert main(["run", str(cfg), "--out", str(out), "--reps", "2", "--budget", "200", "--seed", "9"]) == 0
    assert (out / "rep001.csv").exists()


def test_run_missing_config_is_error(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_invalid_config_names_key(tmp_path, capsys):
    cfg = write_config(tmp_path)
    doc = json.loads(cfg.read_text())
    del doc["schedules"]["rho"]
    cfg.write_text(json.dumps(doc))
    assert main(["run", str(cfg)]) == 2
    assert "rho" in capsys.readouterr().err


def test_compare_two_configs(tmp_path, capsys):
    a = write_config(tmp_path, "a.json")
    b = write_config(tmp_path, "b.json", base_seed=4)
    out = tmp_path / "cmp"
    assert main(["compare", str(a), str(b), "--budget", "400", "--out", str(out)]) == 0
    assert (out / "comparison.csv").exists()
    assert (out / "report.json").exists()
    assert "target:" in capsys.readouterr().out


def test_oracle_quantile(capsys):
    code = main(
        [
            "oracle",
            "quantile",
            "--objective",
            "triangle",
            "--mu",
            "0",
            "--var",
            "1",
            "--rho",
            "0.5",
        ]
    )
    assert code == 0
    value = float(capsys.readouterr().out.strip())
    # median of the spike height under a wide model is 0 (most mass is flat)
    assert value == pytest.approx(0.0, abs=0.01)


def test_oracle_ideal_ce_steps(capsys):
    code = main(
        [
            "oracle",
            "ideal-ce",
            "--objective",
            "triangle",
            "--mu",
            "0.5",
            "--var",
            "1",
            "--rho",
            "0.1",
            "--r",
            "2",
            "--steps",
            "3",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 3 and out[0].startswith("step 1:")


def test_oracle_fixed_point(capsys):
    code = main(
        [
            "oracle",
            "fixed-point",
            "--objective",
            "triangle",
            "--mu",
            "0",
            "--var",
            "1",
            "--rho",
            "0.1",
            "--gamma",
            "1.0",
            "--r",
            "2",
            "--samples",
            "20000",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "xi0 =" in out and "elite fraction" in out
