import math

import numpy as np
import pytest

from expandernet import cross_cone, plane_cone, tetra_cone, validate_cone, y_cone
from expandernet.cone import (ConeSpec, boundary_trace, distance_to_arcs, format_cone, node_angles,
                              parse_cone, read_cone, sample_trace, write_cone)
from expandernet.errors import ParseError


@pytest.mark.parametrize("make", [plane_cone, y_cone, tetra_cone])
def test_stock_cones_valid(make):
    out = validate_cone(make())
    assert out.ok, out.messages()


def test_y_node_angles():
    spec = y_cone(axis=(1.0, 2.0, 3.0), phase0=0.4)
    for n in spec.junction_nodes():
        assert np.allclose(node_angles(spec)[n], 120.0, atol=1e-9)


def test_tetra_regions_are_triangles():
    out = validate_cone(tetra_cone())
    assert sorted(c for _, c in out.details["regions"]) == [3, 3, 3, 3]


def test_cross_needs_nonregular():
    spec = cross_cone()
    out = validate_cone(spec)
    assert not out.ok and "node_degree" in out.kinds()
    relaxed = validate_cone(spec, allow_nonregular=True)
    assert relaxed.ok
    assert any("non-regular" in n for n in relaxed.notes)


def test_bad_angle_detected():
    spec = y_cone()
    nodes = spec.nodes.copy()
    phi = math.radians(100.0)
    nodes[3] = [math.cos(phi), math.sin(phi), 0.0]
    bad = ConeSpec(nodes, spec.arcs, spec.region_count, spec.helper)
    assert "node_angle" in validate_cone(bad).kinds()


def test_unit_norm_required():
    spec = y_cone()
    bad = ConeSpec(spec.nodes * 1.001, spec.arcs, 3, spec.helper)
    assert "node_norm" in validate_cone(bad).kinds()


def test_inconsistent_labels():
    spec = y_cone()
    arcs = spec.arcs.copy()
    arcs[0, 2], arcs[0, 3] = arcs[0, 3], arcs[0, 2]
    assert "region_labels" in validate_cone(ConeSpec(spec.nodes, arcs, 3, spec.helper)).kinds()


def test_trace_on_sphere_and_arcs():
    spec = tetra_cone()
    for poly in boundary_trace(spec, 3.0, 0.1):
        assert np.allclose(np.linalg.norm(poly, axis=1), 3.0)
        assert distance_to_arcs(poly, spec, 3.0).max() < 1e-9
    pts = sample_trace(spec, 0.05)
    assert distance_to_arcs(pts, spec).max() < 1e-12
    assert distance_to_arcs(np.array([[0.0, 0.0, 0.0]]), spec)[0] == pytest.approx(1.0)


def test_cone_round_trip(tmp_path):
    for make in (plane_cone, y_cone, tetra_cone, cross_cone):
        spec = make()
        text = format_cone(spec)
        assert parse_cone(text) == spec
        assert format_cone(parse_cone(text)) == text
    p = tmp_path / "t.cone"
    write_cone(tetra_cone(), p)
    assert read_cone(p) == tetra_cone()


def test_cone_parse_errors():
    with pytest.raises(ParseError):
        parse_cone("nope\n")
    with pytest.raises(ParseError) as err:
        parse_cone("conespec 1\nk 3\nn 0 0 1\nx 1 2\n")
    assert err.value.lineno == 4
