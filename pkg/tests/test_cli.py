import csv
import json

import numpy as np
import pytest

from sgdirichlet.cli import main
from sgdirichlet.gasket import build_level


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("m,nv,ne", [(1, 6, 9), (0, 3, 3)])
def test_build_gasket(tmp_path, m, nv, ne):
    assert main(["build-gasket", "--N", "3", "--m", str(m), "--out", str(tmp_path)]) == 0
    stem = tmp_path / f"gasket_N3_m{m}"
    d = json.loads(stem.with_suffix(".json").read_text())
    assert len(d["vertices"]) == nv and len(d["edges"]) == ne
    assert d["denominator"] == 2**m
    assert len(read_csv(f"{stem}_vertices.csv")) == nv
    assert len(read_csv(f"{stem}_edges.csv")) == ne


def test_build_gasket_invalid_N(tmp_path, capsys):
    assert main(["build-gasket", "--N", "1", "--m", "1", "--out", str(tmp_path)]) == 2
    assert "N must be an integer >= 2" in capsys.readouterr().err


def test_thresholds_table(capsys):
    assert main(["thresholds", "--N", "3", "--q", "4", "--lam", "none"]) == 0
    rows = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines())
    assert float(rows["R"]) == pytest.approx(1 / 81, rel=1e-15)


def test_thresholds_zero_lambda(capsys):
    assert main(["thresholds", "--lam", "0"]) == 0
    out = capsys.readouterr().out
    assert "u_lambda.degenerate  True" in out


def test_thresholds_auto(tmp_path, capsys):
    path = tmp_path / "thr.json"
    assert main(["thresholds", "--lam", "auto", "--json", str(path)]) == 0
    out = capsys.readouterr().out
    assert "lambda = Lambda / 2 (auto)" in out
    d = json.loads(path.read_text())
    assert d["lambda"] == d["Lambda"] / 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"N": 4, "m": 1, "out": str(tmp_path / "a")}))
    assert main(["build-gasket", "--config", str(cfg)]) == 0
    assert (tmp_path / "a" / "gasket_N4_m1.json").exists()
    assert main(["build-gasket", "--config", str(cfg), "--m", "2"]) == 0
    assert (tmp_path / "a" / "gasket_N4_m2.json").exists()


def test_bad_config_is_precondition_error(tmp_path):
    assert main(["build-gasket", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["three-solutions", "--lam", "abc", "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["three-solutions", "--out", str(out), "--seed", "7"])
    return out, code


def test_three_solutions_in_regime(run_dir):
    out, code = run_dir
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert set(doc["solutions"]) == {"u1", "u2", "u3"}
    assert doc["ordering_holds"] and doc["regime_flags"]["in_regime"]
    assert doc["config"]["seed"] == 7
    assert "wall_time" not in json.dumps(doc)
    assert len(read_csv(out / "summary.csv")) == 3
    assert "holds" in (out / "ordering.txt").read_text()
    n = build_level(3, 4).n_vertices
    assert len(read_csv(out / "solution_u3.csv")) == n


def test_three_solutions_deterministic(run_dir, tmp_path):
    out, _ = run_dir
    assert main(["three-solutions", "--out", str(tmp_path), "--seed", "7"]) == 0
    assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_three_solutions_out_of_regime(tmp_path, capsys):
    assert main(["three-solutions", "--lam", "0.01", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert not doc["regime_flags"]["in_regime"]
    assert "not enforced" in capsys.readouterr().out


def test_three_solutions_zero_lambda(tmp_path):
    assert main(["three-solutions", "--lam", "0", "--eta", "0", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert not doc["regime_flags"]["applicable"]


def test_verify_fresh_report(run_dir):
    out, _ = run_dir
    assert main(["verify", str(out / "report.json")]) == 0
    for k in ("u1", "u2", "u3"):
        assert main(["verify", str(out / f"solution_{k}.json")]) == 0


def test_verify_detects_perturbation(run_dir, tmp_path):
    out, _ = run_dir
    doc = json.loads((out / "solution_u3.json").read_text())
    doc["u"]["values"][20] += 1e-2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", str(bad)]) == 4


def test_verify_zero_solution(tmp_path, capsys):
    lev = build_level(3, 2)
    doc = {
        "problem": {"N": 3, "m": 2, "r": 1.5, "s": 1.8, "q": 4.0, "lambda": 0.001,
                    "eta": 0.0, "family": "power"},
        "kind": "minimizer", "energy": 0.0, "residual": 0.0, "norm": 0.0,
        "converged": True, "iterations": 0,
        "u": {"level_ref": {"N": 3, "m": 2}, "values": np.zeros(lev.n_vertices).tolist(),
              "zero_boundary": True},
    }
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", str(path)]) == 0
    assert "I=0.000000e+00" in capsys.readouterr().out
