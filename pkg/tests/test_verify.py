import math

import numpy as np
import pytest

from expandernet import ToleranceProfile, VerificationReport, full_report, tetra_cone, y_cone
from expandernet.errors import ParseError
from expandernet.verify import (OMEGA_MIN, check_solid_angles, check_triple_angles,
                                point_set_hausdorff, read_report, tetrahedral_frame_stats,
                                write_report)


def test_exact_y_angles(ysheet):
    stats = check_triple_angles(ysheet)
    assert stats and max(s.max_deviation for s in stats) < 1e-6
    assert max(s.max_balance for s in stats) < 1e-9


def test_tetra_report(tetra):
    rep = full_report(tetra, tetra_cone(), h=0.25)
    assert rep.checks["connected"] and rep.checks["triple-angle"]
    assert rep.checks["quad-angle"] and rep.checks["solid-angle"]
    assert rep.metrics["junctions.quadruple_points"] == 1
    sol = check_solid_angles(tetra)
    assert len(sol) == 1 and sol[0].minimum >= OMEGA_MIN


def test_omega_min():
    assert OMEGA_MIN == pytest.approx(2 * math.pi * (1 - 1 / math.sqrt(3)))


def test_tetrahedral_frame():
    t = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    ang, bal = tetrahedral_frame_stats(t)
    assert np.allclose(ang, math.degrees(math.acos(-1 / 3)), atol=1e-9) and bal < 1e-12


def test_hausdorff():
    a = np.array([[0.0, 0, 0], [1, 0, 0]])
    b = np.array([[0.0, 0, 0], [1, 0.5, 0]])
    assert point_set_hausdorff(a, b) == pytest.approx(0.5)
    assert point_set_hausdorff(a, a) == 0.0


def test_report_round_trip(ysheet, tmp_path):
    rep = full_report(ysheet, y_cone(), h=0.25)
    assert rep.ok, rep.to_text()
    back = VerificationReport.from_text(rep.to_text())
    assert back == rep and back.checks == rep.checks
    p = tmp_path / "r.txt"
    write_report(rep, p)
    assert read_report(p).to_text() == rep.to_text()


def test_report_parse_errors():
    with pytest.raises(ParseError):
        VerificationReport.from_text("bogus\n")
    with pytest.raises(ParseError) as err:
        VerificationReport.from_text("report 1\nmetric a notanumber\n")
    assert err.value.lineno == 2


def test_tolerances():
    p = ToleranceProfile()
    assert p.residual_tol(0.1) == pytest.approx(0.5)
    assert p.hausdorff_tol(0.1, 4.0) == pytest.approx(0.05)
    assert p.persistence_tol(2.0) == pytest.approx(0.1)
