import os
import subprocess
import sys

import numpy as np
import pytest

from modhelm.cli import RunReport, fit_exponent, main
from modhelm.postprocess import FieldGrid

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")
DISK = os.path.join(CONFIGS, "disk.ini")


def test_solve_disk_writes_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", DISK, "--output", str(out), "--field-grid", "11,9"]) == 0
    text = (out / "report.txt").read_text()
    assert text == capsys.readouterr().out
    assert "# configuration" in text and "# Iterations" in text
    row = [line for line in text.splitlines() if line.strip().startswith("128")][0]
    assert float(row.split()[-1]) < 1e-10
    grid = FieldGrid.read(out / "field.txt")
    assert len(grid.points) == 99 and grid.inside.any()


def test_sweep_override(tmp_path, capsys):
    assert main(["solve", DISK, "--sweep", "N=32,64", "--quad-order", "4",
                 "--output", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "p = 4" in text
    assert any(line.split()[0] == "32" for line in text.splitlines() if line.strip())


def test_bad_config_exits_1_without_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[domain]\nnodes = 32\n[problem]\nalpha = -2\n")
    out = tmp_path / "out"
    assert main(["solve", str(bad), "--output", str(out)]) == 1
    assert "alpha" in capsys.readouterr().err
    assert not out.exists()


def test_usage_error_exits_1(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["solve", DISK, "--quad-order", "3"])
    assert info.value.code == 1


def test_nonconvergence_exits_2(tmp_path, capsys):
    cfg = tmp_path / "slow.ini"
    text = open(DISK).read().replace("gmres_tol = 1e-11", "gmres_tol = 1e-14\nmax_iter = 1")
    cfg.write_text(text.replace("constant = 1", "random = yes"))
    out = tmp_path / "out"
    assert main(["solve", str(cfg), "--output", str(out)]) == 2
    err = capsys.readouterr().err
    assert "residual" in err
    assert not out.exists()


def test_convergence_tables(tmp_path, capsys):
    assert main(["convergence", DISK, "--sweep", "64,128", "--output", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    for p in (0, 2, 4, 8, 16):
        assert f"# p = {p} " in text


def test_particles_compare_and_skip(tmp_path, capsys):
    assert main(["particles", "--sweep", "64,128,256", "--compare-direct", "--direct-cap", "128",
                 "--output", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "skipped" in text and "fitted time exponent" in text
    rows = [line.split() for line in text.splitlines() if line.strip()[:3] in ("64 ", "128")]
    assert float(rows[0][-1]) < 1e-10


def test_report_formatting():
    r = RunReport(echo="a = 1")
    r.add("# t", ["N", "Error"], [[64, 1.5e-9], [128, None]])
    text = r.render()
    assert "# a = 1" in text and "1.500e-09" in text and text.rstrip().endswith("-")


def test_fit_exponent():
    n = np.array([1e3, 2e3, 4e3])
    assert fit_exponent(n, 3 * n**1.2) == pytest.approx(1.2)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "modhelm", "solve", DISK, "--sweep", "32",
                          "--output", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "report.txt").exists()
