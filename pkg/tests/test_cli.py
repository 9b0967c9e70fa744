import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from w1mg.app import io as fio
from w1mg.app.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, bench_threads, cli_main
from w1mg.app.instances import synth_instance


def _gen(tmp_path, kind, cells, ext="pgm", seed=0):
    a, b = tmp_path / f"a.{ext}", tmp_path / f"b.{ext}"
    args = ["gen", "--kind", kind, "--cells", str(cells), "--seed", str(seed), "--out-a", str(a), "--out-b", str(b)]
    assert cli_main(args) == EXIT_OK
    return str(a), str(b)


def _solve_json(capsys, argv):
    code = cli_main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_same_image_gives_zero(tmp_path, capsys):
    a, _ = _gen(tmp_path, "two_blobs", 32)
    code, data = _solve_json(capsys, ["solve", "--a", a, "--b", a, "--p", "1", "--algo", "ml-pdhg"])
    assert code == EXIT_OK
    assert data["distance"] == pytest.approx(0.0, abs=1e-12)
    assert data["algo"] == "ml-pdhg"


def test_dirac_corners(tmp_path, capsys):
    a, b = _gen(tmp_path, "dirac_pair", 32)
    code, data = _solve_json(capsys, ["solve", "--a", a, "--b", b, "--p", "1", "--tol", "1e-8"])
    assert code == EXIT_OK
    assert data["distance"] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("algo", ["cp", "pdhg", "ml-cp", "ml-pdhg"])
def test_algorithms_and_exports(tmp_path, capsys, algo):
    a, b = _gen(tmp_path, "two_blobs", 16, ext="csv")
    out = tmp_path / "r.json"
    flux, pot, quiv = tmp_path / "m.csv", tmp_path / "p.csv", tmp_path / "q.csv"
    argv = ["solve", "--a", a, "--b", b, "--p", "2", "--algo", algo, "--out", str(out),
            "--export-flux", str(flux), "--export-potential", str(pot), "--export-quiver", str(quiv)]
    if algo.startswith("ml-"):
        argv += ["--levels", "2", "--alpha", "0"]
    assert cli_main(argv) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["p"] == "2"
    assert len(data["levels"]) == (2 if algo.startswith("ml-") else 1)
    if algo.startswith("ml-"):
        assert data["levels"][0]["eps"] == data["levels"][1]["eps"]
    assert fio.read_flux_csv(flux).grid.cells_per_side == 16
    assert fio.read_scalar_csv(pot).values.shape == (17, 17)
    assert quiv.read_text().startswith("x,y,u,v")


def test_deterministic_output(tmp_path, capsys):
    a, b = _gen(tmp_path, "annulus_pair", 32)
    runs = []
    for _ in range(2):
        code, data = _solve_json(capsys, ["solve", "--a", a, "--b", b, "--p", "inf"])
        assert code == EXIT_OK
        data.pop("total_seconds")
        for lvl in data["levels"]:
            lvl.pop("seconds")
        runs.append(data)
    assert runs[0] == runs[1]


def test_exit_codes(tmp_path, capsys):
    a, b = _gen(tmp_path, "two_blobs", 16)
    assert cli_main([]) == EXIT_USAGE
    assert cli_main(["solve", "--a", a]) == EXIT_USAGE
    assert cli_main(["solve", "--a", a, "--b", b, "--p", "3"]) == EXIT_USAGE
    assert cli_main(["solve", "--a", a, "--b", b, "--levels", "many"]) == EXIT_USAGE
    assert cli_main(["solve", "--a", a, "--b", b, "--algo", "ml-pdhg", "--levels", "9"]) == EXIT_USAGE
    assert cli_main(["solve", "--a", a, "--b", b, "--algo", "cp", "--levels", "3"]) == EXIT_USAGE
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n4 4\n255\n")
    assert cli_main(["solve", "--a", str(bad), "--b", b]) == EXIT_INPUT
    assert cli_main(["solve", "--a", str(tmp_path / "missing.pgm"), "--b", b]) == EXIT_INPUT
    small = tmp_path / "small.csv"
    small.write_text("1,2\n3,4\n")
    assert cli_main(["solve", "--a", str(small), "--b", b]) == EXIT_INPUT
    assert cli_main(["solve", "--a", a, "--b", b, "--algo", "cp", "--max-iters", "3"]) == EXIT_NUMERIC
    assert cli_main(["--help"]) == EXIT_OK
    capsys.readouterr()


def test_oracle_command(tmp_path, capsys):
    a, b = _gen(tmp_path, "dirac_pair", 8)
    code, data = _solve_json(capsys, ["oracle", "--a", a, "--b", b])
    assert code == EXIT_OK and data["distance"] == pytest.approx(1.0)
    code, data = _solve_json(capsys, ["oracle", "--a", a, "--b", b, "--method", "1d"])
    assert code == EXIT_OK and data["distance"] == pytest.approx(1.0)
    big_a, big_b = _gen(tmp_path, "dirac_pair", 32)
    assert cli_main(["oracle", "--a", big_a, "--b", big_b]) == EXIT_USAGE


def test_validate_command(tmp_path):
    out = tmp_path / "v.csv"
    assert cli_main(["validate", "--pairs", "1", "--cells", "8,16", "--eps", "1e-6", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert [r["level"] for r in rows] == ["1", "2"]
    assert float(rows[1]["z_discrepancy"]) > 0
    assert cli_main(["validate", "--pairs", "1", "--cells", "8,16,32", "--eps", "1e-6", "--out", str(out)]) == EXIT_OK
    assert cli_main(["validate", "--cells", "8,32"]) == EXIT_USAGE


def test_bench_ratio(capsys):
    code = cli_main(["bench", "--kind", "two_blobs", "--cells", "128", "--algos", "ml-pdhg", "--levels", "1,4"])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    iters = {int(r["levels"]): int(r["iters_finest"]) for r in rows}
    assert iters[1] >= 20 * iters[4]


def test_bench_threads(monkeypatch, capsys):
    monkeypatch.delenv("W1MG_THREADS", raising=False)
    assert bench_threads() == 1
    monkeypatch.setenv("W1MG_THREADS", "3")
    assert bench_threads() == 3
    code = cli_main(["bench", "--cells", "16", "--algos", "pdhg,ml-pdhg", "--levels", "1,2", "--alphas", "0,-1"])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    keys = [(r["algo"], r["levels"], r["alpha"]) for r in rows]
    assert keys == sorted(keys) and len(rows) == 5


def test_gen_formats(tmp_path):
    a, b = _gen(tmp_path, "two_blobs", 16, ext="csv", seed=5)
    expected, _ = synth_instance("two_blobs", 16, seed=5)
    assert np.array_equal(fio.read_image(a).pixels, expected.pixels)


def test_module_entry_point(tmp_path):
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    res = subprocess.run([sys.executable, "-m", "w1mg", "gen", "--cells", "8", "--out-a",
                          str(tmp_path / "a.pgm"), "--out-b", str(tmp_path / "b.pgm")],
                         env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5")
