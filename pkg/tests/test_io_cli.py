import copy
import csv
import json

import numpy as np
import pytest

from ccbm_stokes import casefile
from ccbm_stokes.cli import main
from ccbm_stokes.errors import (CCBMError, GeometryError, IoError, ParseError, SolverError,
                                StallError, ValidationError)
from ccbm_stokes.fem.spaces import build_spaces
from ccbm_stokes.optimizer import HISTORY_COLUMNS
from ccbm_stokes.state import solve_state
from ccbm_stokes.vtk import export_vtk, read_vtk, standard_fields

BASE_CASE = json.loads((casefile.resolve("paper_2d.json")).read_text())


def write_case(tmp_path, **changes):
    doc = copy.deepcopy(BASE_CASE)
    doc["output"]["directory"] = str(tmp_path / "out")
    for dotted, value in changes.items():
        block, _, key = dotted.partition("__")
        if key:
            if value is None:
                doc[block].pop(key)
            else:
                doc[block][key] = value
        elif value is None:
            doc.pop(block)
        else:
            doc[block] = value
    path = tmp_path / "case.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_bundled_ellipse_case():
    assert "paper_2d.json" in casefile.bundled_cases()
    cf = casefile.load("paper_2d.json")
    assert cf.case.alpha == 0.01
    assert cf.config.max_iters == 40 and cf.config.mu == 1.0
    assert cf.geometry.n_inner == 30 and cf.geometry.n_outer == 70
    np.testing.assert_allclose(cf.case.forcing(1.0, 2.0), [-10.0, -20.0])


def test_negative_alpha(tmp_path):
    with pytest.raises(ValidationError, match="physics.alpha"):
        casefile.load(write_case(tmp_path, physics__alpha=-1))


def test_missing_geometry(tmp_path):
    with pytest.raises(ParseError, match="geometry"):
        casefile.load(write_case(tmp_path, geometry=None))


def test_missing_field_path(tmp_path):
    with pytest.raises(ParseError, match="geometry.n_outer"):
        casefile.load(write_case(tmp_path, geometry__n_outer=None))


def test_bad_expression_path(tmp_path):
    with pytest.raises(ParseError, match="physics.forcing"):
        casefile.load(write_case(tmp_path, physics__forcing=["import os", "0"]))


def test_json_syntax_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "geometry": {,\n}')
    with pytest.raises(ParseError, match=r"bad.json:2:"):
        casefile.load(p)


def test_missing_file():
    with pytest.raises(ParseError):
        casefile.load("/nonexistent/case.json")


def test_error_exit_codes():
    assert ParseError("x").exit_code == 2 and ValidationError("x").exit_code == 2
    assert SolverError("x").exit_code == 3
    assert GeometryError("x").exit_code == 4
    assert StallError("x").exit_code == 5
    assert IoError("x").exit_code == 1
    assert all(isinstance(e("x"), CCBMError) for e in (ParseError, SolverError, IoError))


def test_vtk_zero_field(circle_mesh, tmp_path):
    path = tmp_path / "z.vtk"
    export_vtk(circle_mesh, {"zero": np.zeros(circle_mesh.n_nodes),
                             "vec": np.zeros((circle_mesh.n_nodes, 2))}, path)
    text, pts, data = read_vtk(path)
    np.testing.assert_array_equal(pts[:, :2], circle_mesh.nodes)
    assert not np.any(data["zero"]) and data["vec"].shape == (circle_mesh.n_nodes, 3)
    body = path.read_text()
    assert body.startswith("# vtk DataFile Version 3.0")
    assert "CELL_TYPES" in body and "boundary_label" in body


def test_vtk_roundtrip_exact(ellipse_solution, tmp_path):
    mesh, s, st, ad, _ = ellipse_solution
    path = tmp_path / "s.vtk"
    export_vtk(mesh, standard_fields(st, ad), path)
    text, pts, data = read_vtk(path)
    assert text[5] == "%.17g %.17g 0" % tuple(mesh.nodes[5])
    np.testing.assert_array_equal(pts[:, :2], mesh.nodes)
    np.testing.assert_array_equal(data["p_i"], st.p_i)
    assert set(data) == {"u_r", "u_i", "p_r", "p_i", "v_r", "v_i", "q_r", "q_i"}


def test_vtk_bad_shape(circle_mesh, tmp_path):
    with pytest.raises(IoError):
        export_vtk(circle_mesh, {"bad": np.zeros(3)}, tmp_path / "x.vtk")


def test_cli_optimize(tmp_path, capsys):
    case = write_case(tmp_path)
    assert main(["optimize", "--config", case, "--max-iters", "2", "--snapshots", "1"]) == 0
    out = tmp_path / "out"
    rows = list(csv.reader((out / "history.csv").open()))
    assert rows[0] == HISTORY_COLUMNS and len(rows) == 4
    J = [float(r[1]) for r in rows[1:]]
    assert J[0] > J[1] > J[2]
    assert (out / "final.vtk").exists() and (out / "snapshot_0002.vtk").exists()
    assert "J_final=" in capsys.readouterr().out


def test_cli_check_gradient(tmp_path, capsys):
    case = write_case(tmp_path)
    assert main(["check-gradient", "--config", case, "--out", str(tmp_path / "g")]) == 0
    rows = list(csv.DictReader((tmp_path / "g" / "gradient_check.csv").open()))
    err = [float(r["err_boundary"]) for r in rows]
    assert len(err) == 3 and err[-1] < 0.05


def test_cli_solve_and_diagnostics(tmp_path, capsys):
    case = write_case(tmp_path, geometry__outer={"type": "circle", "radius": 1.0})
    assert main(["solve", "--config", case]) == 0
    out = capsys.readouterr().out
    values = dict(line.split("=") for line in out.split())
    assert float(values["J"]) < 1e-3
    assert (tmp_path / "out" / "solution.vtk").exists()
    assert main(["diagnostics", "--config", case]) == 0
    assert "J_KV=" in capsys.readouterr().out


def test_cli_parse_error_exit(tmp_path, capsys):
    assert main(["solve", "--config", write_case(tmp_path, physics__alpha=-1)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[") and "physics.alpha" in err


def test_cli_mesh_error_exit(tmp_path, capsys):
    case = write_case(tmp_path, geometry__inner_radius=2.0)
    assert main(["solve", "--config", case]) == 4
    assert "error[" in capsys.readouterr().err


def test_cli_mms(tmp_path, capsys):
    assert main(["mms", "--levels", "1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "mms.csv").read_text().splitlines()
    assert lines[0].startswith("level,h") and len(lines) == 3


def test_state_from_case(tmp_path):
    cf = casefile.load(write_case(tmp_path))
    mesh = cf.geometry.build()
    st = solve_state(mesh, build_spaces(mesh), cf.case)
    assert np.all(np.isfinite(st.u))
