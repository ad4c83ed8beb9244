import subprocess
import sys

import pytest

from fvdwr.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from fvdwr.mesh import write_mesh
from fvdwr.output import ADAPTIVE_COLUMNS, STUDY_COLUMNS, read_csv


def test_run_uniform_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--problem", "p1_poisson", "--levels", "2", "-o", str(out)]) == EXIT_OK
    rows = read_csv(out / "study.csv")
    assert tuple(rows[0]) == STUDY_COLUMNS
    assert len(rows) == 2 and rows[0]["eoc_V"] == "" and rows[1]["eoc_V"] != ""
    for name in ("report.txt", "level0.vtk", "level1_elements.csv", "convergence.png", "indicators.png"):
        assert (out / name).is_file(), name


def test_single_level_has_empty_eoc(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--levels", "1", "--no-plots", "-o", str(out)]) == EXIT_OK
    rows = read_csv(out / "study.csv")
    assert len(rows) == 1 and rows[0]["eoc_V"] == "" and rows[0]["eoc_sum_eta_l"] == ""


def test_run_from_config_file(tmp_path):
    ini = tmp_path / "a.ini"
    out = tmp_path / "ad"
    ini.write_text(
        "[problem]\nname = p2_convdiff\neps = 0.05\n"
        "[study]\nmode = adaptive\n"
        "[adaptive]\nmax_cycles = 3\n"
        f"[output]\ndir = {out}\nplots = false\n"
    )
    assert main(["run", str(ini)]) == EXIT_OK
    rows = read_csv(out / "adaptive.csv")
    assert tuple(rows[0]) == ADAPTIVE_COLUMNS and len(rows) == 3


def test_flags_override_file(tmp_path):
    ini = tmp_path / "a.ini"
    ini.write_text("[problem]\nname = p1_poisson\n[study]\nlevels = 3\n[output]\nplots = false\nvtk = false\n")
    out = tmp_path / "o"
    assert main(["run", str(ini), "--levels", "1", "--set", "discretization.dual=donald", "-o", str(out)]) == 0
    assert len(read_csv(out / "study.csv")) == 1


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--problem", "nonsense"]) == EXIT_CONFIG
    assert "problem.name" in capsys.readouterr().err
    assert main(["run", "--set", "study.colour=red"]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["run", "--levels", "many"])
    assert info.value.code == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path):
    code = main(["run", "--problem", "p3_quasilinear", "--levels", "1", "--set", "solver.max_iter=1",
                 "--set", "solver.atol=1e-15", "--set", "solver.rtol=0", "--no-plots", "-o", str(tmp_path)])
    assert code == EXIT_NUMERICAL


def test_voronoi_on_obtuse_mesh_exit_4(tmp_path, obtuse_mesh, capsys):
    path = tmp_path / "obtuse.mesh"
    write_mesh(obtuse_mesh, path)
    code = main(["run", "--mesh-file", str(path), "--levels", "1", "--no-plots", "-o", str(tmp_path / "o")])
    assert code == EXIT_VALIDATION
    assert "element" in capsys.readouterr().err
    # Donald needs no Delaunay property
    code = main(["run", "--mesh-file", str(path), "--dual", "donald", "--problem", "p2_convdiff",
                 "--levels", "1", "--no-plots", "-o", str(tmp_path / "d")])
    assert code == EXIT_OK


def test_mesh_subcommand(tmp_path, obtuse_mesh, capsys):
    assert main(["mesh", "--n", "4", "--write", str(tmp_path / "m.txt"), "--vtk", str(tmp_path / "m.vtk")]) == 0
    assert "vertices       25" in capsys.readouterr().out
    assert main(["mesh", str(tmp_path / "m.txt"), "--dump-dual", str(tmp_path / "d.vtk")]) == 0
    assert (tmp_path / "d.vtk").is_file()
    path = tmp_path / "obtuse.mesh"
    write_mesh(obtuse_mesh, path)
    assert main(["mesh", str(path)]) == EXIT_VALIDATION
    assert "offending element" in capsys.readouterr().err
    assert main(["mesh", str(path), "--dual", "donald"]) == EXIT_OK
    assert main(["mesh"]) == EXIT_CONFIG


def test_verify_subcommand(tmp_path, capsys):
    assert main(["verify", "--set", "verify.levels=6", "-o", str(tmp_path)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "FAIL" not in text and "checks passed" in text
    assert (tmp_path / "verify.txt").read_text() == text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fvdwr", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "verify" in proc.stdout
