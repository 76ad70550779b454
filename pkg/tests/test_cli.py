import json
import subprocess
import sys

import numpy as np
import pytest

from blaschke_lab import cli, io
from blaschke_lab.circle import spectrum
from blaschke_lab.errors import NoConvergence, ValidationError
from blaschke_lab.grid import BeltramiField, load
from blaschke_lab.moduli import make_standard
from blaschke_lab.spectra import PathSpec


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out), out


@pytest.fixture
def params(tmp_path):
    p = tmp_path / "f.json"
    io.write_params(p, make_standard(2, [0.5]))
    return p


@pytest.fixture
def params3(tmp_path):
    p = tmp_path / "g.json"
    io.write_params(p, make_standard(3, [0j, -0.3]))
    return p


@pytest.fixture
def path_file(tmp_path):
    p = tmp_path / "path.json"
    io.write_json(p, PathSpec(2, ((0.5, 1.0),)).to_json())
    return p


# -- io --------------------------------------------------------------------

def test_params_roundtrip(tmp_path):
    f = make_standard(3, [0.1 - 0.2j, 0.4j])
    io.write_params(tmp_path / "p.json", f)
    g = io.read_params(tmp_path / "p.json")
    assert g.params == f.params


def test_bad_files(tmp_path):
    with pytest.raises(ValidationError):
        io.read_params(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ValidationError):
        io.read_params(tmp_path / "bad.json")
    (tmp_path / "short.json").write_text('{"d": 3, "zeros": [[0.1, 0]]}')
    with pytest.raises(ValidationError):
        io.read_params(tmp_path / "short.json")
    (tmp_path / "nopath.json").write_text('{"d": 2}')
    with pytest.raises(ValidationError):
        io.read_path(tmp_path / "nopath.json")


def test_jsonable():
    obj = {"a": np.float64(1.5), "b": 1 + 2j, "c": np.array([1, 2]), "d": complex(np.inf, 0), "e": np.nan}
    assert io.jsonable(obj) == {"a": 1.5, "b": [1.0, 2.0], "c": [1, 2], "d": None, "e": None}


def test_spectrum_csv_roundtrip(tmp_path):
    f = make_standard(3, [0.2j, -0.4])
    spec = spectrum(f, 3)
    io.write_spectrum_csv(tmp_path / "s.csv", spec)
    rows = io.read_spectrum_csv(tmp_path / "s.csv")
    assert len(rows) == len(spec.entries)
    for r, e in zip(rows, spec.entries):
        assert r["multiplier"] == float(e.multiplier)
        assert r["period"] == e.cycle.period and len(r["point_angles"]) == e.cycle.period


# -- cli -------------------------------------------------------------------

def test_spectrum_command(capsys, params, tmp_path):
    out = tmp_path / "spec.csv"
    code, rep, _ = run(capsys, "spectrum", "--params", str(params), "--max-period", "4", "--out", str(out))
    assert code == 0 and rep["schema"] == 1 and rep["status"] == "ok"
    assert rep["options"] == {"max_period": 4, "out": str(out), "params": str(params)}
    rows = io.read_spectrum_csv(out)
    assert len(rows) == rep["result"]["cycles"] == 1 + 1 + 2 + 3
    assert abs(rows[0]["multiplier"] - 4.0) < 1e-12


def test_index_check_command(capsys, params3, tmp_path):
    out = tmp_path / "r.json"
    code, rep, text = run(capsys, "index-check", "--params", str(params3), "--n", "4", "--out", str(out))
    assert code == 0 and abs(rep["result"]["residual"]) < 1e-9
    assert out.read_text() == text


def test_deterministic(capsys, params):
    _, _, a = run(capsys, "index-check", "--params", str(params), "--n", "3")
    _, _, b = run(capsys, "index-check", "--params", str(params), "--n", "3")
    assert a == b
    _, _, a = run(capsys, "markers-roundtrip", "--n", "12", "--seed", "4")
    _, _, b = run(capsys, "markers-roundtrip", "--n", "12", "--seed", "4")
    assert a == b


def test_markers_roundtrip_command(capsys):
    code, rep, _ = run(capsys, "markers-roundtrip", "--n", "50", "--seed", "1")
    assert code == 0 and rep["result"]["max_coefficient_error"] < 1e-9
    assert rep["options"]["seed"] == 1


def test_d3_sa_command(capsys):
    code, rep, _ = run(capsys, "d3-sa-check", "--n", "21")
    res = rep["result"]
    assert code == 0 and res["max_closed_form_error"] < 1e-10
    assert res["points"] == 317
    assert abs(res["printed_formula_deviation_min"] - 1) < 1e-9


def test_derivative_and_classify(capsys, path_file, tmp_path):
    out = tmp_path / "w.csv"
    code, rep, _ = run(capsys, "derivative", "--path", str(path_file), "--max-period", "3", "--out", str(out))
    assert code == 0 and rep["result"]["witness"] >= 8 - 1e-6
    assert out.read_text().splitlines()[0] == "t0,period,label,dlambda_dt,fd_error"
    code, rep, _ = run(capsys, "classify-degeneracy", "--path", str(path_file))
    assert code == 0 and rep["result"]["case"] == "NotDegenerate"


def test_conjugacy_command(capsys, params, tmp_path):
    out = tmp_path / "h.csv"
    code, rep, _ = run(capsys, "conjugacy", "--left", str(params), "--circle-samples", "512", "--out", str(out))
    assert code == 0 and rep["result"]["conjugacy_residual"] < 1e-9
    assert len(out.read_text().splitlines()) == 513


def test_weld_command(capsys, params, tmp_path):
    out = tmp_path / "mu.bin"
    code, rep, _ = run(capsys, "weld", "--left", str(params), "--grid", "32", "--circle-samples", "512",
                       "--out", str(out))
    assert code == 0 and 0 < rep["result"]["k"] < 1
    b = load(out)
    assert isinstance(b, BeltramiField) and b.grid.N == 32


def test_mate_command_monomial(capsys, tmp_path):
    p = tmp_path / "z2.json"
    io.write_params(p, make_standard(2, [0j]))
    out = tmp_path / "F.json"
    code, rep, _ = run(capsys, "mate", "--left", str(p), "--grid", "64", "--circle-samples", "512",
                       "--out", str(out))
    assert code == 0
    res = json.loads(out.read_text())["result"]
    assert np.allclose([complex(*c) for c in res["num"]], [0, 0, 1], atol=1e-8)
    assert res["marking"][1] is None
    assert max(res["index_sum_residuals"]) < 1e-8


def test_validation_exit(capsys, tmp_path):
    code, rep, _ = run(capsys, "spectrum", "--params", str(tmp_path / "nope.json"))
    assert code == 2 and rep["status"] == "invalid" and rep["error"]["type"] == "ValidationError"
    code, rep, _ = run(capsys, "spectrum")
    assert code == 2
    code, rep, _ = run(capsys, "spectrum", "--bogus", "1")
    assert code == 2 and rep["schema"] == 1 and rep["error"]["type"] == "UsageError"
    code, rep, _ = run(capsys, "mate", "--left", "x.json", "--extension", "zz")
    assert code == 2


def test_cutoff_exit(capsys, tmp_path):
    p = tmp_path / "d5.json"
    io.write_params(p, make_standard(5, [0j, 0.1, 0.2j, -0.3]))
    code, rep, _ = run(capsys, "spectrum", "--params", str(p), "--max-period", "12")
    assert code == 2 and rep["error"]["type"] == "CutoffExceeded"


def test_numerical_exit(capsys, params, monkeypatch):
    def boom(*a, **k):
        raise NoConvergence("no")

    monkeypatch.setattr(cli, "spectrum", boom)
    code, rep, _ = run(capsys, "spectrum", "--params", str(params))
    assert code == 3 and rep["status"] == "failed" and rep["error"] == {"type": "NoConvergence", "message": "no"}


def test_console_entry(params):
    out = subprocess.run(
        [sys.executable, "-m", "blaschke_lab", "index-check", "--params", str(params)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert json.loads(out.stdout)["result"]["residual"] == 0.0
