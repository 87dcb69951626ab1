import argparse

import numpy as np
import pytest

from fourend import cli
from fourend.io import load_solution


@pytest.fixture(scope="module")
def saddle_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "saddle.acf"
    assert cli.main(["solve", "--theta", "0.7853981633974483", "--L", "16", "--h", "0.2",
                     "--out", str(path)]) == 0
    return path


def test_solve_and_classify(saddle_file, capsys):
    assert cli.main(["classify", str(saddle_file)]) == 0
    assert capsys.readouterr().out.strip() == "theta-pi/4 0.000 r 0.000"


def test_missing_theta(capsys):
    assert cli.main(["solve", "--out", "x.acf"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err and "error: usage:" in err


def test_theta_guard(tmp_path, capsys):
    assert cli.main(["solve", "--theta", "1.6", "--out", str(tmp_path / "x.acf")]) == 1
    assert capsys.readouterr().err.startswith("error: domain:")


def test_nonconvergence_exit_code(tmp_path, capsys):
    code = cli.main(["solve", "--theta", "1.0", "--L", "16", "--h", "0.2", "--max-newton", "1",
                     "--newton-tol", "1e-14", "--out", str(tmp_path / "x.acf")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error: nonconvergence:")


def test_balance_command(saddle_file, capsys):
    assert cli.main(["balance", str(saddle_file)]) == 0
    out = capsys.readouterr().out
    assert out.strip().endswith("ok")
    assert cli.main(["balance", str(saddle_file), "--contour", "1,1,9,7"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")
    assert cli.main(["balance", str(saddle_file), "--contour", "0,0,40,40"]) == 1


def test_spectrum_command(saddle_file, tmp_path, capsys):
    assert cli.main(["spectrum", str(saddle_file), "--R", "10", "--k", "3"]) == 0
    row = capsys.readouterr().out.strip().split(",")
    assert row[0] == "even-even" and float(row[1]) == 10.0 and len(row) == 5
    assert float(row[2]) < 0
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["spectrum", str(saddle_file), "--R", "8", "--sector", "all", "--out", str(out1)]) == 0
    assert cli.main(["spectrum", str(saddle_file), "--R", "8", "--sector", "all", "--jobs", "2",
                     "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text().splitlines()) == 4
    assert cli.main(["spectrum", str(saddle_file), "--R", "8", "--sector", "odd-odd-odd"]) == 1


def test_format_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.acf"
    bad.write_text("acf 1\npotential quartic\ngrid 1 0.5 3\ntheta 1\nr 0\nresidual 0\nclassify 0 0\n1 2\n")
    assert cli.main(["classify", str(bad)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: format:") and "bad.acf:8:" in err


def test_ansatz_command(tmp_path):
    path = tmp_path / "a.acf"
    assert cli.main(["ansatz", "--theta", "1.0", "--r", "0.3", "--L", "16", "--h", "0.2",
                     "--out", str(path)]) == 0
    sol = load_solution(path)
    assert sol.theta == 1.0 and sol.r == 0.3


@pytest.mark.xfail(strict=True, reason="axis-integral extraction is exact only for solutions; the "
                   "glued ansatz is unbalanced off the diagonal (decisions ledger)")
def test_ansatz_classify_round_trip(tmp_path, capsys):
    path = tmp_path / "a.acf"
    assert cli.main(["ansatz", "--theta", "1.0", "--r", "0.3", "--out", str(path)]) == 0
    capsys.readouterr()
    cli.main(["classify", str(path)])
    a = float(capsys.readouterr().out.split()[1])
    assert abs(a + np.pi / 4 - 1.0) <= 2e-2


def test_continue_command(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    args = ["continue", "--theta-min", str(np.pi / 4 - 0.1), "--theta-max", str(np.pi / 4 + 0.1),
            "--steps", "3", "--L", "16", "--h", "0.2", "--curve", str(curve),
            "--out-dir", str(tmp_path / "sols"), "--margin-R", "10"]
    assert cli.main(args) == 0
    first = curve.read_bytes()
    lines = first.decode().splitlines()
    assert lines[0] == "theta_imposed,theta_extracted,r,residual,margin,index,file"
    assert len(lines) == 4
    assert all(row.split(",")[4] for row in lines[1:])
    assert cli.main(args) == 0
    assert curve.read_bytes() == first
    assert cli.main(["continue", "--theta-min", "0.1", "--steps", "3"]) == 1


def test_config_precedence():
    ns = argparse.Namespace(L=12.0, h=None, newton_tol=None)
    env = {"AC_L": "20", "AC_H": "0.25", "AC_NEWTON_TOL": "1e-8"}
    cfg = cli.RunConfig.resolve(ns, env)
    assert cfg.L == 12.0 and cfg.h == 0.25 and cfg.newton_tol == 1e-8
    assert cli.RunConfig.resolve(argparse.Namespace(), {}).h == 0.1
    with pytest.raises(cli.CliError):
        cli.RunConfig.resolve(argparse.Namespace(), {"AC_L": "wide"})


def test_env_reaches_solver(monkeypatch, tmp_path):
    monkeypatch.setenv("AC_L", "16")
    monkeypatch.setenv("AC_H", "0.25")
    path = tmp_path / "s.acf"
    assert cli.main(["solve", "--theta", "0.8", "--out", str(path)]) == 0
    g = load_solution(path).grid
    assert (g.L, g.h) == (16.0, 0.25)


def test_deterministic_output(tmp_path):
    paths = [tmp_path / "a.acf", tmp_path / "b.acf"]
    for p in paths:
        assert cli.main(["solve", "--theta", "0.9", "--L", "12", "--h", "0.25", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
