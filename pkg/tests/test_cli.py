import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from gre.cli import main

GAUSS_MODEL = {"bound": {"form": "monomial", "r": 1}, "kernel": {"family": "gaussian", "s": 0, "ell": [1.0], "dim": 1}}
MATERN_MODEL = {"bound": {"form": "monomial", "r": 2}, "kernel": {"family": "matern", "s": 1, "ell": [1.0], "dim": 1}}


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    write.dir = tmp_path
    return write


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_worked_example(files, capsys):
    data = files("d.csv", "x1,f\n0.5,1.5\n1.0,2.0\n")
    model = files("m.json", json.dumps(GAUSS_MODEL))
    code, out, _ = run(["extrapolate", "--data", data, "--model", model], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["mean_at_zero"] == pytest.approx(1.3520791349735763, rel=1e-12)
    assert doc["weights"] == pytest.approx([1.2958417300528473, -0.29584173005284725], rel=1e-12)


def test_fit_then_extrapolate_round_trip(files, capsys):
    data = files("d.csv", "x1,f\n0.2,1.04\n0.4,1.17\n0.6,1.35\n1.0,2.1\n")
    model = files("m.json", json.dumps(MATERN_MODEL))
    fitted = files.dir / "fit.json"
    assert run(["fit", "--data", data, "--model", model, "--out", fitted], capsys)[0] == 0
    doc = json.loads(fitted.read_text())
    assert doc["precision"] == "double" and "box_fill_distance" in doc["diagnostics"]
    code, out, _ = run(["extrapolate", "--fit", fitted], capsys)
    assert code == 0 and json.loads(out) == doc["summary"]
    assert not [p for p in files.dir.iterdir() if p.name.startswith(".") or p.suffix == ".tmp"]


def test_extended_precision(files, capsys):
    data = files("d.csv", "x1,f\n0.5,1.5\n1.0,2.0\n")
    model = files("m.json", json.dumps(GAUSS_MODEL))
    _, out, _ = run(["extrapolate", "--data", data, "--model", model, "--precision", "extended:40"], capsys)
    assert json.loads(out)["mean_at_zero"] == pytest.approx(1.3520791349735763, rel=1e-14)
    with pytest.raises(SystemExit) as info:
        main(["extrapolate", "--data", data, "--model", model, "--precision", "extended:8"])
    assert info.value.code == 2


def test_missing_file_is_usage_error(files, capsys):
    model = files("m.json", json.dumps(GAUSS_MODEL))
    missing = files.dir / "nope.csv"
    code, _, err = run(["extrapolate", "--data", missing, "--model", model], capsys)
    assert code == 2 and str(missing) in err


def test_domain_error_reports_json(files, capsys):
    data = files("d.csv", "x1,f\n0.5,1.5\n0.5,2.0\n")
    model = files("m.json", json.dumps(GAUSS_MODEL))
    code, out, err = run(["extrapolate", "--data", data, "--model", model], capsys)
    assert code == 1 and out == ""
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["error"] and "distinct" in doc["message"]


def test_bad_header(files, capsys):
    data = files("d.csv", "a,b\n0.5,1.5\n")
    model = files("m.json", json.dumps(GAUSS_MODEL))
    code, _, err = run(["extrapolate", "--data", data, "--model", model], capsys)
    assert code == 1 and "x1" in err


def test_design(files, capsys):
    xs = [1.0, 0.5, 0.25, 0.125]
    cand = files("c.csv", "x1,cost\n" + "".join(f"{x},{1 / x}\n" for x in xs))
    model = files("m.json", json.dumps(MATERN_MODEL))
    code, out, err = run(["design", "--candidates", cand, "--budget", 7, "--model", model], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["optimality_flag"] and doc["total_cost"] <= 7
    assert 0.125 not in [p[0] for p in doc["points"]]
    assert "total cost" in err


def test_estimate_order(files, capsys):
    xs = [1.0, 0.5, 0.25, 0.125, 0.0625]
    data = files("d.csv", "x1,f\n" + "".join(f"{x},{1 + x * x}\n" for x in xs))
    grid = files("g.json", json.dumps({"r": [1, 2, 3], "s": [0, 1]}))
    code, out, _ = run(["estimate-order", "--data", data, "--grid", grid], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["r_hat"] == 2
    assert len(read_csv(doc["surface_csv"])) > 0
    bad = files("bad.json", json.dumps({"r_values": [1, 2]}))
    assert run(["estimate-order", "--data", data, "--grid", bad], capsys)[0] == 1


@pytest.mark.parametrize("method,extra,limit", [
    ("richardson", ["--order", 2, "--step", 2], 1.0),
    ("thiele", ["--p", 1], 1.0),
])
def test_classical(files, capsys, method, extra, limit):
    xs = np.array([1.0, 0.5, 0.25, 0.125])
    ys = 1 + xs**2 if method == "richardson" else (1 + xs) / (1 + 2 * xs)
    data = files("s.csv", "x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(xs, ys)))
    code, out, _ = run(["classical", "--data", data, "--method", method, *extra], capsys)
    rows = read_csv(out)
    assert code == 0 and rows
    assert float(rows[-1]["y"]) == pytest.approx(limit, abs=1e-12)


def test_classical_shanks(files, capsys):
    data = files("s.csv", "y\n3.0\n2.0\n1.5\n")
    code, out, _ = run(["classical", "--data", data, "--method", "shanks"], capsys)
    assert code == 0 and float(read_csv(out)[0]["y"]) == 1.0


def test_study_trapezoid(files, capsys):
    out_csv = files.dir / "study.csv"
    summary = files.dir / "study.json"
    code, _, _ = run(["study", "--problem", "trapezoid", "--out", out_csv, "--summary", summary], capsys)
    rows = read_csv(out_csv.read_text())
    assert code == 0 and {r["method"] for r in rows} == {"gre:matern:2:1.0", "raw", "richardson"}
    doc = json.loads(summary.read_text())
    assert doc["methods"]["raw"]["slope"] == pytest.approx(2.0, abs=0.05)


def test_grid_extrapolation(files, capsys):
    rows = [(x, t, (1 + x * x) * (1 + t)) for x in (0.25, 0.5, 1.0) for t in (0.0, 1.0)]
    data = files("g.csv", "x1,t,f\n" + "".join(f"{x},{t},{f}\n" for x, t, f in rows))
    model = files("m.json", json.dumps(MATERN_MODEL))
    code, out, _ = run(["extrapolate", "--data", data, "--model", model], capsys)
    got = read_csv(out)
    assert code == 0 and [float(r["t"]) for r in got] == [0.0, 1.0]
    assert float(got[1]["mean"]) == pytest.approx(2 * float(got[0]["mean"]), rel=1e-10)


def test_workflow(files, capsys):
    vals = [0.5, 0.25, 0.125, 0.0625]
    config = {
        "simulator": {"command": [sys.executable, "-m", "gre.problems", "separable", "--x", "{x1}", "{x2}"],
                      "cost": {"kind": "reported", "path": "cost"}},
        "lofi": [0.5, 0.5],
        "sweeps": [vals, vals],
        "candidates": [[a, b] for a in vals for b in vals],
        "candidate_costs": [1 / (a * b) for a in vals for b in vals],
        "budget": 40,
        "ledger": "runs.jsonl",
    }
    cfg = files("wf.json", json.dumps(config))
    code, out, err = run(["workflow", "--config", cfg], capsys)
    rep = json.loads(out)
    assert code == 0 and [a["r"] for a in rep["axes"]] == [1.0, 2.0]
    assert abs(rep["mean_at_zero"] - 1) <= 1e-3
    assert (files.dir / "runs.jsonl").exists()
    code, out2, err2 = run(["workflow", "--config", cfg], capsys)
    assert json.loads(out2) == rep and "0 new simulator calls" in err2


def test_module_entry_point(files):
    data = files("d.csv", "x1,f\n0.5,1.5\n1.0,2.0\n")
    model = files("m.json", json.dumps(GAUSS_MODEL))
    proc = subprocess.run([sys.executable, "-m", "gre", "extrapolate", "--data", data, "--model", model],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["mean_at_zero"] == pytest.approx(1.3520791349735763, rel=1e-12)
