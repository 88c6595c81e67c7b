import csv
import io
import json
import subprocess
import sys

import pytest

from tridesign.cli import run

T2 = {"model": {"basis": {"type": "polynomial", "powers": [2]}, "interval": [1, 2]}}
CUBIC = {"model": {"basis": {"type": "polynomial", "powers": [1, 2, 3]}, "interval": [1, 2]}, "n": 5}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(p)


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_blue_quadratic(tmp_path, capsys):
    code, out, _ = invoke(capsys, "blue", "--config", write(tmp_path, T2))
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["C_inv"][0][0] == pytest.approx(3 / 31)
    assert rep["result"]["degenerate_kind"] == "none"


def test_blue_intercept_dispatch(tmp_path, capsys):
    cfg = {"model": {"basis": {"type": "polynomial", "powers": [0, 1]}, "interval": [0, 1]}}
    code, out, _ = invoke(capsys, "blue", "--config", write(tmp_path, cfg))
    res = json.loads(out)["result"]
    assert code == 0 and res["degenerate_kind"] == "intercept"
    assert res["var_theta1"] == pytest.approx(0.0) and res["var_tilde"] == [[pytest.approx(1.0)]]


@pytest.mark.parametrize("powers,offset,kind", [([2], 0.0, "f0_zero"), ([1], 1.0, "no_intercept_f0_nonzero")])
def test_blue_other_degenerate(tmp_path, capsys, powers, offset, kind):
    basis = {"type": "affine_shift", "base": {"type": "polynomial", "powers": powers}, "offset": offset}
    cfg = {"model": {"basis": basis, "interval": [0, 1]}}
    code, out, _ = invoke(capsys, "blue", "--config", write(tmp_path, cfg))
    assert code == 0 and json.loads(out)["result"]["degenerate_kind"] == kind


def test_malformed_json(tmp_path, capsys):
    code, _, err = invoke(capsys, "blue", "--config", write(tmp_path, '{"model": {"basis": }'))
    assert code == 2 and "line 1" in err


@pytest.mark.parametrize("cfg,field", [
    ({**T2, "colour": 1}, "colour"),
    ({"model": {"basis": {"type": "polynomial", "powers": [2]}, "interval": [1]}}, "model/interval"),
    ({**T2, "kernel": {"type": "exponential", "lambda": 0}}, "kernel/lambda"),
    ({**T2, "n": 1}, "n"),
    ({**T2, "pso": {"swarm": 4}}, "swarm"),
    ({"model": {"basis": {"type": "polynomial", "powers": [2, 2]}, "interval": [1, 2]}}, "model/basis"),
    ({"model": {"basis": {"type": "polynomial", "powers": [2]}, "interval": [2, 1]}}, "model/interval"),
    ({}, "model"),
])
def test_config_errors_name_field(tmp_path, capsys, cfg, field):
    code, _, err = invoke(capsys, "blue", "--config", write(tmp_path, cfg))
    assert code == 2
    assert field in err


def test_missing_config_file(capsys):
    code, _, err = invoke(capsys, "blue", "--config", "/nonexistent/cfg.json")
    assert code == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    cfg = {**CUBIC, "design": {"type": "explicit", "points": [1, 2]}}
    code, _, err = invoke(capsys, "weights", "--config", write(tmp_path, cfg))
    assert code == 1 and "error" in err


def test_design_uniform_skips_search(tmp_path, capsys):
    code, out, _ = invoke(capsys, "design", "--config", write(tmp_path, CUBIC), "--design", "uniform")
    res = json.loads(out)["result"]
    assert code == 0 and res["search"] is None
    assert 100 * res["efficiency_star"] == pytest.approx(93.82, abs=0.01)
    assert 100 * res["efficiency_wlse"] == pytest.approx(94.35, abs=0.01)


def test_design_csv(tmp_path, capsys):
    code, out, _ = invoke(capsys, "design", "--config", write(tmp_path, CUBIC), "--design", "uniform",
                          "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["index", "t", "w1", "w2", "w3"]
    assert len(rows) == 6
    assert [float(r[1]) for r in rows[1:]] == [1, 1.25, 1.5, 1.75, 2]


def test_design_search_and_round_trip(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, _, _ = invoke(capsys, "design", "--config", write(tmp_path, CUBIC), "--objective", "mse-star",
                        "--seed", "7", "--swarm", "20", "--iters", "80", "--restarts", "2",
                        "--out", str(out_path))
    assert code == 0
    rep = json.loads(out_path.read_text())
    assert rep["result"]["seed"] == 7
    assert rep["design"]["type"] == "explicit"
    code, out, _ = invoke(capsys, "efficiency", "--config", str(out_path))
    again = json.loads(out)
    assert code == 0
    assert again["result"]["design"] == rep["result"]["design"]
    assert again["result"]["efficiency_star"] == pytest.approx(rep["result"]["efficiency_star"], rel=1e-12)


def test_design_deterministic(tmp_path, capsys):
    args = ("design", "--config", write(tmp_path, CUBIC), "--swarm", "20", "--iters", "50",
            "--restarts", "2", "--objective", "wlse")
    _, first, _ = invoke(capsys, *args)
    _, second, _ = invoke(capsys, *args)
    assert first == second


@pytest.mark.slow
def test_design_table_row(tmp_path, capsys):
    code, out, _ = invoke(capsys, "design", "--config", write(tmp_path, CUBIC))
    pts = json.loads(out)["result"]["design"]
    assert code == 0
    assert max(abs(x - y) for x, y in zip(pts, [1, 1.444, 1.668, 1.846, 2])) <= 0.02


def test_weights_text(tmp_path, capsys):
    cfg = {**T2, "design": {"type": "uniform"}}
    code, out, _ = invoke(capsys, "weights", "--config", write(tmp_path, cfg), "--format", "text")
    assert code == 0 and "increment_weights" in out and "efficiency_star" in out


def test_simulate(tmp_path, capsys):
    cfg = {**CUBIC, "kernel": {"type": "exponential", "lambda": 1.0}, "design": {"type": "uniform"},
           "simulation": {"theta": [1, -0.5, 0.25], "replicates": 20000, "seed": 3}}
    code, out, _ = invoke(capsys, "simulate", "--config", write(tmp_path, cfg))
    res = json.loads(out)["result"]
    assert code == 0
    for name in ("star", "wlse"):
        assert res[name]["bias_ok"] and res[name]["mse_ok"]
    code, out2, _ = invoke(capsys, "simulate", "--config", write(tmp_path, cfg))
    assert out2 == out


def test_simulate_theta_length(tmp_path, capsys):
    cfg = {**CUBIC, "design": {"type": "uniform"}, "simulation": {"theta": [1.0]}}
    code, _, err = invoke(capsys, "simulate", "--config", write(tmp_path, cfg))
    assert code == 2 and "simulation/theta" in err


def test_reproduce_table1(capsys):
    code, out, _ = invoke(capsys, "reproduce", "table1")
    rep = json.loads(out)
    assert code == 0 and rep["all_pass"]
    rows = rep["result"]["table1"]["rows"]
    assert [round(r["computed"], 3) for r in rows] == [99.798, 99.798, 99.783, 99.783, 98.416, 98.416]


def test_reproduce_text_layout(capsys):
    code, out, _ = invoke(capsys, "reproduce", "table1", "--format", "text")
    assert code == 0 and "published only" in out and "99.798" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tridesign", "reproduce", "table1", "--format", "csv"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert proc.stdout.startswith("table,model,kernel")
