import csv
import json
import math

import numpy as np
import pytest

from expandernet.cli import main
from expandernet.complex import read_mesh
from expandernet.verify import read_report


@pytest.fixture(scope="module")
def tetra_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cont")
    code = main(["continue", "--cone", "tetra", "--template", "tetra-cone", "--radii", "2,4,8",
                 "--edge", "0.25", "--outdir", str(out)])
    return code, out


def test_validate_cone(capsys):
    assert main(["validate-cone", "y"]) == 0
    out = capsys.readouterr().out
    assert "120.000 120.000 120.000" in out and out.strip().endswith("ok")
    assert main(["validate-cone", "cross"]) == 1
    assert "violation" in capsys.readouterr().out
    assert main(["validate-cone", "cross", "--allow-nonregular"]) == 0


def test_bad_inputs(tmp_path, capsys):
    assert main(["init", "--cone", "y", "--template", "nope", "--radius", "2", "--edge", "0.25",
                 "--out", str(tmp_path / "m")]) == 2
    err = capsys.readouterr().err
    assert "y-sheet" in err and "tetra-cone" in err
    assert main(["validate-cone", str(tmp_path / "missing.cone")]) == 2
    bad = tmp_path / "bad.cone"
    bad.write_text("garbage\n")
    assert main(["validate-cone", str(bad)]) == 2
    assert main(["init", "--cone", "y", "--template", "y-sheet", "--radius", "-2", "--edge",
                 "0.25", "--out", str(tmp_path / "m")]) == 2
    assert main(["nosuchcommand"]) == 2


def test_pipeline(tmp_path):
    mesh, sol, rep = (str(tmp_path / n) for n in ("y.meshnet", "ysol.meshnet", "r.txt"))
    assert main(["init", "--cone", "y", "--template", "y-sheet", "--radius", "2", "--edge",
                 "0.25", "--out", mesh]) == 0
    assert main(["minimize", "--mesh", mesh, "--cone", "y", "--out", sol, "--perturb", "0.05",
                 "--seed", "1"]) == 0
    manifest = json.loads(open(sol + ".manifest.json").read())
    assert manifest["exit_code"] == 0 and manifest["seed"] == 1
    assert set(manifest["outputs"]) == {sol}
    assert main(["verify", "--mesh", sol, "--cone", "y", "--report", rep]) == 0
    assert read_report(rep).ok

    csv_path = str(tmp_path / "res.csv")
    assert main(["export", "--mesh", sol, "--what", "residual", "--out", csv_path]) == 0
    rows = list(csv.DictReader(open(csv_path)))
    assert len(rows) == read_mesh(sol).n_vertices
    masked = [r for r in rows if r["masked"] == "1"]
    assert masked and all(math.isnan(float(r["residual"])) for r in masked)
    assert main(["export", "--mesh", sol, "--what", "angles", "--out", csv_path]) == 0
    assert main(["export", "--mesh", sol, "--what", "ends", "--out", csv_path]) == 2

    # replaying the manifest reproduces the same bytes
    first = open(sol).read()
    assert main(["rerun", sol + ".manifest.json"]) == 0
    assert open(sol).read() == first


def test_map(tmp_path, capsys):
    pts = tmp_path / "p.txt"
    pts.write_text("0 0 0\n0 0 0.5\n")
    assert main(["map", "--from", "ball", "--to", "hyperboloid", str(pts)]) == 0
    out = np.array([[float(v) for v in line.split()]
                    for line in capsys.readouterr().out.splitlines()])
    assert np.allclose(out, [[0, 0, 0, 1], [0, 0, 4 / 3, 5 / 3]])
    pts.write_text("0 0 1\n")
    assert main(["map", "--from", "ball", "--to", "euclid", str(pts)]) == 2


def test_continue_outputs(tetra_run):
    code, out = tetra_run
    assert code == 0
    for R in ("2", "4", "8"):
        assert (out / f"mesh_R{R}.meshnet").exists()
        assert read_report(out / f"report_R{R}.txt").ok
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 6
    assert manifest["command"] == "continue"
