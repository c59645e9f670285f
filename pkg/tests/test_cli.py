import json

import pytest

from pinning.cli import main
from pinning.scan import result_from_files


def test_annealed(capsys, tmp_path):
    out = tmp_path / "a.json"
    assert main(["annealed", "--c", "1.8", "--beta", "1.0", "--delta", "0.1", "--out", str(out)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec == json.loads(out.read_text())
    assert rec["delta_star"] > 0 and rec["delta0"] > 0


def test_annealed_finite_mean_has_no_delta0(capsys):
    assert main(["annealed", "--c", "2.5", "--delta", "0.01"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["delta0"] is None and rec["delta0_note"]


def test_quenched(capsys):
    args = ["quenched", "--c", "1.8", "--beta", "0.5", "--delta", "0.1", "--N", "256", "--seed", "4", "--stream", "2"]
    assert main(args) == 0
    a = json.loads(capsys.readouterr().out)
    assert main(args) == 0
    assert json.loads(capsys.readouterr().out) == a
    assert a["seed"] == 4 and a["stream_id"] == 2 and a["mode"] == "exact"
    assert a["f_q_hat"] <= a["f_a"] + 0.1


def test_scan_from_config(capsys, tmp_path):
    cfg = {"law": {"c": 1.8}, "betas": [0.5], "deltas": [0.5, 2.0], "Ns": [256], "replicas": 3,
           "delta_units": "delta0", "mode": "exact"}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "runs" / "s.csv"
    assert main(["scan", "--config", str(path), "--out", str(out), "--threads", "2", "--probe"]) == 0
    text = capsys.readouterr().out
    assert "2 points, 6 rows" in text
    res = result_from_files(out)
    assert len(res.points) == 2 and res.spec.master_seed == 0
    probe = json.loads((tmp_path / "runs" / "s.probe.json").read_text())
    assert "finite-size diagnostic" in probe["label"]

    plots = tmp_path / "plots"
    with pytest.raises(SystemExit):
        main(["plot-data", "--scan", str(tmp_path / "missing.csv"), "--out", str(plots)])
    assert main(["plot-data", "--scan", str(out), "--out", str(plots), "--kinds", "free_energy_vs_delta"]) == 0
    assert sorted(p.name for p in plots.iterdir()) == ["free_energy_vs_delta.dat", "free_energy_vs_delta.json"]
    cfg["output"] = str(out)
    path.write_text(json.dumps(cfg))
    assert main(["plot-data", "--config", str(path), "--out", str(plots)]) == 0
    assert (plots / "delta0_vs_beta.dat").exists()


def test_scan_reports_errors(capsys, tmp_path):
    out = tmp_path / "e.csv"
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({"law": {"c": 2.5}, "betas": [0.5], "deltas": [1.0], "Ns": [64], "delta_units": "delta0"}))
    assert main(["scan", "--config", str(cfg), "--out", str(out)]) == 1
    assert "ERROR NoRoot" in capsys.readouterr().out


def test_sample(capsys, tmp_path):
    dump = tmp_path / "paths.jsonl"
    args = ["sample", "--c", "1.8", "--beta", "0.5", "--delta", "0.05", "--N", "1024", "--paths", "50", "--R", "200",
            "--dump", str(dump)]
    assert main(args) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["paths"] == 50 and rec["violations"] == 0 and rec["config"]["block"] == 4
    lines = dump.read_text().splitlines()
    assert len(lines) == 50 and set(json.loads(lines[0])) == {"path", "lifted_skeleton"}


def test_sample_needs_R_when_annealed_scale_too_large():
    with pytest.raises(SystemExit):
        main(["sample", "--c", "1.8", "--beta", "0.5", "--delta", "0.001", "--N", "256", "--paths", "2"])


def test_verify(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.strip().splitlines()[-1].endswith("passed")
