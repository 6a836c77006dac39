"""Command line subcommands end to end."""

import json

import numpy as np
import pytest

from poisson_deconv.circular import FourierVector, WeightSequence
from poisson_deconv.cli import main, weight_arg
from poisson_deconv.simulate import Dataset

INTENSITY = '{"family":"cosine","tau":50,"beta":0.5}'
ERROR = '{"family":"poisson_kernel","rate":0.7}'


def test_weight_arg():
    assert weight_arg("flat") == WeightSequence.flat()
    assert weight_arg("pol:-1") == WeightSequence.pol(-1)
    assert weight_arg('{"kind":"exp","decay":0.7}') == WeightSequence.exp(-0.7)
    with pytest.raises(Exception):
        weight_arg("gauss:1")


def test_rates(capsys):
    assert main(["rates", "--gamma", "pol:1", "--alpha", "pol:-1", "-n", "100", "-m", "100", "--scenario", "pol,pol"]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.split() if "=" in line)
    assert out["k_star"] == "2"
    assert float(out["psi_n"]) == pytest.approx(0.25)
    assert float(out["phi_m"]) == pytest.approx(0.01)
    assert float(out["closed_form_n"]) == pytest.approx(100**-0.4)


def test_simulate_and_estimate(tmp_path):
    data_path = tmp_path / "data.csv"
    assert main(["simulate", "--intensity", INTENSITY, "--error", ERROR, "-n", "40", "-m", "500", "--seed", "2",
                 "--out", str(data_path)]) == 0
    data = Dataset.from_csv(data_path)
    assert data.n == 40 and data.m == 500

    est_path = tmp_path / "est.csv"
    assert main(["estimate", "--data", str(data_path), "--out", str(est_path), "--k", "2"]) == 0
    est = FourierVector.from_csv(est_path)
    assert est.K == 2
    meta = json.loads(est_path.with_suffix(".json").read_text())
    assert meta["k"] == 2 and len(meta["flags"]) == 5

    assert main(["estimate", "--data", str(data_path), "--out", str(est_path), "--select", "partial",
                 "--alpha", "exp:-0.7", "--constants-mode", "practical(1/500)"]) == 0
    meta = json.loads(est_path.with_suffix(".json").read_text())
    assert meta["selection"]["mode"] == "partial"
    assert meta["selection"]["constants_mode"] == "practical(0.002)"
    assert meta["k"] == meta["selection"]["k_selected"]

    assert main(["estimate", "--data", str(data_path), "--out", str(est_path)]) == 0
    assert json.loads(est_path.with_suffix(".json").read_text())["selection"]["mode"] == "full"


def test_partial_needs_alpha(tmp_path):
    with pytest.raises(SystemExit):
        main(["estimate", "--data", "x.csv", "--out", str(tmp_path / "e.csv"), "--select", "partial"])


def test_bench_reproducible_across_workers(tmp_path, monkeypatch):
    cfg = {
        "intensity": json.loads(INTENSITY), "error": json.loads(ERROR),
        "gamma": {"kind": "pol", "exponent": 1}, "r": 3000, "alpha": {"kind": "exp", "decay": 0.7}, "d": 1,
        "n_grid": [30, 60], "m_grid": [200], "reps": 6, "seed": 4, "estimators": ["oracle", "full", "fixed(1)"],
        "constants_mode": "practical(1/500)", "K_max": 16, "tail_K": 64, "output": str(tmp_path / "a.csv"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["bench", str(path), "--emit-gnuplot"]) == 0
    monkeypatch.setenv("POISSON_DECONV_THREADS", "2")
    assert main(["bench", str(path), "--output", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.gp").exists()


def test_check_exit_code_counts_failures(capsys):
    code = main(["check"])
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].startswith("1..")
    assert code == sum(line.startswith("not ok") for line in lines)
    assert code == 0
