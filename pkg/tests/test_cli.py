import csv
import json

import numpy as np
import pytest

from fbgforce.cli import EXIT_DATA, EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, main
from fbgforce.config import default_config, dump_config, load_config
from fbgforce import read_measurement

DX = 0.29 / 249


def run(*argv):
    return main([str(a) for a in argv])


def strip_timing(path):
    data = json.loads(open(path).read())
    data.pop("timing")
    return data


def test_simulate_then_estimate_round_trip(tmp_path):
    m, r = tmp_path / "m.csv", tmp_path / "r.json"
    assert run("simulate", "--force-mm", 200, 0.3, 0, "--out", m) == EXIT_OK
    assert read_measurement(m).count == 14
    assert run("estimate", "--input", m, "--out", r) == EXIT_OK
    rep = json.loads(r.read_text())
    assert rep["h"] == 1 and rep["threshold_met"] is True and rep["schema"] == "fbgforce.estimate/1"
    f = rep["forces"][0]
    assert abs(f["magnitude_N"] - 0.3) < 0.003 and abs(f["s_cal_m"] - 0.2) < DX
    assert f["s_est_m"] == pytest.approx(f["s_cal_m"] - 3.12e-3, abs=1e-15)
    assert rep["timing"]["elapsed_s"] > 0


def test_force_m_and_fixed_h(tmp_path):
    m, r = tmp_path / "m.csv", tmp_path / "r.json"
    run("simulate", "--force-m", 0.22, -0.5, 0.3, "--force-mm", 120, 0.6, 0, "--out", m)
    assert run("estimate", "--input", m, "--out", r, "--h", 2, "--q", 200) == EXIT_OK
    rep = json.loads(r.read_text())
    assert rep["h"] == 2 and rep["q"] == 200
    np.testing.assert_allclose([f["s_cal_m"] for f in rep["forces"]], [0.12, 0.22], atol=DX)


def test_empty_file_is_data_error(tmp_path, capsys):
    m = tmp_path / "empty.csv"
    m.write_text("")
    assert run("estimate", "--input", m, "--out", tmp_path / "r.json") == EXIT_DATA
    assert "empty.csv:1:" in capsys.readouterr().err


def test_missing_file_and_bad_config(tmp_path):
    assert run("estimate", "--input", tmp_path / "none.csv", "--out", tmp_path / "r.json") == EXIT_DATA
    cfg = tmp_path / "c.json"
    cfg.write_text('{"rod": {"length_mm": 100}}')
    assert run("simulate", "--config", cfg, "--force-mm", 50, 0.1, 0, "--out", tmp_path / "m.csv") == EXIT_DATA


@pytest.mark.parametrize("argv", [[], ["launch"], ["simulate", "--out", "x.csv"], ["estimate", "--input", "a.csv"],
                                  ["simulate", "--force-mm", "1", "2", "--out", "x.csv"],
                                  ["bench", "speed", "--out", "x.csv"]])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_threshold_unmet_still_writes_report(tmp_path):
    m, r, cfg = tmp_path / "m.csv", tmp_path / "r.json", tmp_path / "c.json"
    run("simulate", "--force-mm", 120, 0.6, 0, "--force-mm", 220, -0.5, 0.3, "--out", m)
    c = json.loads(json.dumps(__import__("fbgforce.config", fromlist=["x"]).config_to_dict(default_config())))
    c["estimator"]["max_force_count"] = 1
    cfg.write_text(json.dumps(c))
    assert run("estimate", "--config", cfg, "--input", m, "--out", r) == EXIT_THRESHOLD
    rep = json.loads(r.read_text())
    assert rep["threshold_met"] is False and rep["h"] == 1 and rep["loss"] > 3.0


def test_simulate_lossmap_argmin_at_truth(tmp_path, capsys):
    m, lm = tmp_path / "m.csv", tmp_path / "lm.csv"
    run("simulate", "--force-mm", 200, 0.3, 0, "--out", m)
    assert run("lossmap", "--input", m, "--out", lm) == EXIT_OK
    rows = list(csv.reader(lm.open()))[1:]
    assert len(rows) == 96 * 51
    best = min(rows, key=lambda r: float(r[2]))
    assert float(best[0]) == pytest.approx(0.2, abs=1e-12) and float(best[1]) == pytest.approx(0.3, abs=1e-12)
    assert "s=200.0000 mm f=0.3000 N" in capsys.readouterr().out


def test_lossmap_shape_from_truth(tmp_path):
    out = tmp_path / "s.csv"
    assert run("lossmap", "--truth-mm", 200, 0.3, "--kind", "shape", "--resolution", 20, 11, "--out", out) == EXIT_OK
    assert run("lossmap", "--kind", "shape", "--out", out) == EXIT_USAGE


def test_calibrate_writes_updated_config(tmp_path):
    cases = []
    for s in (120, 180, 240):
        path = tmp_path / f"c{s}.csv"
        run("simulate", "--force-mm", s + 3, 0.5, 0.2, "--out", path)
        cases.append({"measurement": path.name, "location_mm": s, "magnitude_n": float(np.hypot(0.5, 0.2))})
    manifest = tmp_path / "cases.json"
    manifest.write_text(json.dumps({"cases": cases}))
    out = tmp_path / "cal.json"
    assert run("calibrate", "--cases", manifest, "--out", out) == EXIT_OK
    cfg = load_config(out)
    assert cfg.location_bias == pytest.approx(-3e-3, abs=DX)
    assert cfg.rod.youngs_modulus == pytest.approx(67e9, rel=0.01)
    bad = tmp_path / "bad.json"
    bad.write_text('{"cases": []}')
    assert run("calibrate", "--cases", bad, "--out", out) == EXIT_DATA


def test_swap_node_weights_flag(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("simulate", "--force-mm", 201.3, 0.3, 0, "--q", 250, "--out", a)
    run("simulate", "--force-mm", 201.3, 0.3, 0, "--q", 250, "--paper-literal-weights", "--out", b)
    assert a.read_bytes() != b.read_bytes()


def test_config_subcommand(tmp_path, capsys):
    assert run("config") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["rod"]["youngs_modulus_gpa"] == 67.0
    out = tmp_path / "c.json"
    run("config", "--out", out)
    assert load_config(out) == default_config()


def test_bench_accuracy_csv(tmp_path):
    out = tmp_path / "acc.csv"
    assert run("bench", "accuracy", "--q-list", 50, 250, "--scenarios", 2, "--draws", 1, "--out", out) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["scenario", "q", "method", "mean_s", "std_s", "mag_rmse_N", "loc_rmse_m"]
    assert [r[1] for r in rows[1:]] == ["50", "250"]


def test_bench_noise_summary(tmp_path):
    out, summary = tmp_path / "n.csv", tmp_path / "n.json"
    assert run("bench", "noise", "--sigmas", 0.01, 0.05, "--draws", 2, "--out", out, "--summary", summary) == EXIT_OK
    data = json.loads(summary.read_text())
    assert data["sigma_rel"] == [0.01, 0.05] and isinstance(data["mag_brackets_reference"], bool)
