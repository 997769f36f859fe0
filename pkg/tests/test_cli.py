import json
import math

import pytest

from ptgfv.cli import main
from ptgfv.mesh import read_mesh, write_mesh

from conftest import diagonal_square_mesh


def run(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def rhombus_file(tmp_path):
    path = tmp_path / "rhombus4.msh"
    assert main(["generate", "--domain", "rhombus", "--n", "4", "--out", str(path)]) == 0
    return path


@pytest.fixture
def square_file(tmp_path):
    path = tmp_path / "square.msh"
    path.write_text(write_mesh(diagonal_square_mesh()), encoding="utf-8")
    return path


def test_generate_counts_and_summary(tmp_path, capsys):
    out = tmp_path / "m.msh"
    code, stdout, _ = run(capsys, "generate", "--n", "1", "--out", str(out))
    assert code == 0
    assert "cells 2" in stdout
    mesh = read_mesh(out.read_text())
    assert mesh.num_triangles == 2

    out16 = tmp_path / "m16.msh"
    code, stdout, _ = run(capsys, "generate", "--n", "16", "--out", str(out16))
    assert code == 0
    assert "cells 512" in stdout


def test_generate_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.msh", tmp_path / "b.msh"]
    outs = []
    for path in paths:
        code, stdout, _ = run(capsys, "generate", "--n", "3", "--out", str(path))
        assert code == 0
        outs.append(stdout)
    assert outs[0] == outs[1]
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_generate_usage_and_io_errors(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--domain", "hexagon", "--n", "1", "--out", "x")
    assert code == 1
    assert "domain" in err
    code, _, err = run(capsys, "generate", "--n", "0", "--out", str(tmp_path / "x"))
    assert code == 1
    code, _, err = run(capsys, "generate", "--n", "1", "--out", str(tmp_path / "no/dir/x"))
    assert code == 2


def test_mesh_info_admissible(rhombus_file, capsys):
    code, stdout, _ = run(capsys, "mesh-info", str(rhombus_file))
    assert code == 0
    info = json.loads(stdout)
    assert info["admissible"] is True
    assert info["cells"] == 32
    assert info["theta_min_degrees"] == pytest.approx(60.0, abs=1e-9)
    assert info["coefficient_min"] == pytest.approx(0.5 / math.sqrt(3.0), rel=1e-12)
    assert info["coefficient_max"] == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)


def test_mesh_info_inadmissible_names_edge(square_file, capsys):
    code, stdout, _ = run(capsys, "mesh-info", str(square_file))
    assert code == 0
    info = json.loads(stdout)
    assert info["admissible"] is False
    assert len(info["offending_edges"]) == 1


def test_mesh_info_parse_errors(tmp_path, capsys):
    empty = tmp_path / "empty.msh"
    empty.write_text("")
    code, _, err = run(capsys, "mesh-info", str(empty))
    assert code == 2
    code, _, err = run(capsys, "mesh-info", str(tmp_path / "missing.msh"))
    assert code == 2
    bad = tmp_path / "bad.msh"
    bad.write_text("ptg-mesh 1\n3 1\n0 0\n1 0\n0 1\n0 1 9\n")
    code, _, err = run(capsys, "mesh-info", str(bad))
    assert code == 2
    assert "line 6" in err


def test_solve_constant_rhs(tmp_path, capsys):
    mesh_path = tmp_path / "r1.msh"
    main(["generate", "--n", "1", "--out", str(mesh_path)])
    capsys.readouterr()
    out = tmp_path / "sol.csv"
    code, stdout, _ = run(
        capsys, "solve", "--mesh", str(mesh_path), "--rhs-const", "1", "--out", str(out)
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "cell,u"
    cells = dict(line.split(",") for line in lines[1:3])
    assert float(cells["0"]) == pytest.approx(0.0625, rel=1e-12)
    assert float(cells["1"]) == pytest.approx(0.0625, rel=1e-12)
    assert "edge,flux" in lines
    sidecar = json.loads((tmp_path / "sol.csv.json").read_text())
    assert sidecar["tol"] == 1e-12
    assert sidecar["iterations"] >= 1


def test_solve_zero_rhs(rhombus_file, capsys):
    code, stdout, _ = run(capsys, "solve", "--mesh", str(rhombus_file), "--rhs-const", "0")
    assert code == 0
    assert "iterations 0" in stdout


def test_solve_with_case_prints_errors(rhombus_file, capsys):
    code, stdout, _ = run(
        capsys, "solve", "--mesh", str(rhombus_file), "--case", "rhombus-sine"
    )
    assert code == 0
    values = dict(line.split() for line in stdout.splitlines())
    for key in ("error_u", "error_p", "error_div"):
        assert math.isfinite(float(values[key]))
        assert float(values[key]) > 0.0


def test_solve_inadmissible_exit_3(square_file, capsys):
    code, stdout, _ = run(capsys, "solve", "--mesh", str(square_file), "--rhs-const", "1")
    assert code == 3
    assert json.loads(stdout)["admissible"] is False


def test_solve_usage_errors(rhombus_file, capsys):
    code, _, err = run(capsys, "solve", "--mesh", str(rhombus_file))
    assert code == 1
    code, _, err = run(
        capsys,
        "solve",
        "--mesh",
        str(rhombus_file),
        "--case",
        "rhombus-sine",
        "--rhs-const",
        "1",
    )
    assert code == 1
    code, _, err = run(capsys, "solve", "--mesh", str(rhombus_file), "--case", "nope")
    assert code == 1
    assert "rhombus-sine" in err  # the known cases are listed


def test_convergence_usage_errors(capsys):
    code, _, err = run(capsys, "convergence", "--levels", "8")
    assert code == 1
    code, _, err = run(capsys, "convergence", "--levels", "16,8")
    assert code == 1
    code, _, err = run(capsys, "convergence", "--levels", "4,x")
    assert code == 1
    code, _, err = run(capsys, "convergence", "--case", "nope", "--levels", "4,8")
    assert code == 1


def test_convergence_small_run(tmp_path, capsys):
    out = tmp_path / "rates.csv"
    code, stdout, _ = run(
        capsys, "convergence", "--levels", "4,8", "--out", str(out)
    )
    assert code == 0
    lines = stdout.strip().splitlines()
    assert lines[0] == "n,h,eu,ep,ediv,combined,rate_combined"
    assert len(lines) == 3
    last = lines[-1].split(",")
    assert float(last[-1]) >= 0.9
    assert out.read_text() == stdout


def test_verify_small_run(capsys):
    code, stdout, _ = run(capsys, "verify", "--samples", "1", "--seed", "42")
    assert code == 0
    report = json.loads(stdout)
    assert report["all_passed"] is True


def test_verify_deterministic(capsys):
    runs = []
    for _ in range(2):
        code, stdout, _ = run(capsys, "verify", "--samples", "40", "--seed", "42")
        assert code == 0
        runs.append(stdout)
    assert runs[0] == runs[1]


def test_verify_seed_env_override(capsys, monkeypatch):
    code, with_flag, _ = run(capsys, "verify", "--samples", "25", "--seed", "7")
    monkeypatch.setenv("PTG_SEED", "7")
    code2, with_env, _ = run(capsys, "verify", "--samples", "25")
    assert code == code2 == 0
    assert with_flag == with_env


def test_verify_with_mesh(rhombus_file, capsys):
    code, stdout, _ = run(
        capsys, "verify", "--samples", "30", "--mesh", str(rhombus_file), "--trials", "20"
    )
    assert code == 0
    report = json.loads(stdout)
    assert report["stability"]["passed_h3"] is True
    assert report["stability"]["h1_min_ratio"] >= 0.4


def test_verify_inadmissible_mesh_exit_3(square_file, capsys):
    code, stdout, _ = run(
        capsys, "verify", "--samples", "5", "--mesh", str(square_file)
    )
    assert code == 3
    assert json.loads(stdout)["admissible"] is False


def test_solve_missing_mesh_exit_2(tmp_path, capsys):
    code, _, err = run(
        capsys, "solve", "--mesh", str(tmp_path / "nope.msh"), "--rhs-const", "1"
    )
    assert code == 2


def test_solve_unreachable_tolerance_exit_4(rhombus_file, capsys):
    # double precision cannot reach 1e-30, so the solver gives up cleanly
    code, _, err = run(
        capsys, "solve", "--mesh", str(rhombus_file), "--rhs-const", "1",
        "--tol", "1e-30",
    )
    assert code == 4
    assert "did not reach" in err


def test_solve_determinism_files(tmp_path, capsys):
    mesh_path = tmp_path / "r2.msh"
    main(["generate", "--n", "2", "--out", str(mesh_path)])
    capsys.readouterr()
    outputs = []
    for name in ("one.csv", "two.csv"):
        out = tmp_path / name
        code, stdout, _ = run(
            capsys, "solve", "--mesh", str(mesh_path), "--case", "rhombus-sine",
            "--out", str(out),
        )
        assert code == 0
        outputs.append((stdout, out.read_bytes()))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]
