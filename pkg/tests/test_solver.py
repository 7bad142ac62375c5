import numpy as np
import pytest

from expandernet import SolveConfig, weighted_area, minimize, quality_pass, tetra_cone, y_cone
from expandernet.solver import aspect_ratios, continue_in_radius, solve_template


@pytest.mark.parametrize("kwargs", [dict(grad_tol=0.0), dict(edge_length=-1.0),
                                    dict(c1=1.5), dict(motion="sideways"), dict(max_iters=-1),
                                    dict(radius_schedule=(4.0, 2.0)),
                                    dict(radius_schedule=(0.0, 2.0))])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolveConfig(**kwargs)


def test_flat_sheet_is_fixed_point(disk):
    st = minimize(disk, config=SolveConfig())
    assert st.converged and st.iterations == 0
    assert np.array_equal(st.complex.vertices, disk.vertices)


def ysheet_energy(c):
    return weighted_area(c).value()


def test_perturbed_y_descends(ysheet):
    cfg = SolveConfig(perturb=0.1, seed=3, grad_tol=1e-7)
    st = minimize(ysheet, y_cone(), cfg)
    assert st.stationary
    assert np.all(np.diff(st.energies) <= 0)
    # boundary vertices never move
    b = ysheet.boundary
    assert np.array_equal(st.complex.vertices[b], ysheet.vertices[b])
    assert st.boundary_error < 1e-12
    # the flat Y sheets are recovered up to in-plane sliding
    def normals(c):
        p = c.vertices[c.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]
    assert np.einsum("ij,ij->i", normals(st.complex), normals(ysheet)).min() > 1 - 1e-8
    assert st.true_energy() == pytest.approx(ysheet_energy(ysheet), rel=1e-6)


def test_deterministic(ysheet, monkeypatch):
    cfg = SolveConfig(perturb=0.1, seed=7, max_iters=30)
    a = minimize(ysheet, y_cone(), cfg)
    monkeypatch.setenv("EXPANDERNET_THREADS", "4")
    b = minimize(ysheet, y_cone(), cfg)
    assert np.array_equal(a.complex.vertices, b.complex.vertices)
    assert a.energies == b.energies


def test_max_iters_status(ysheet):
    st = minimize(ysheet, y_cone(), SolveConfig(perturb=0.1, seed=1, max_iters=2))
    assert st.status == "max_iters" and st.iterations == 2 and not st.stationary


def test_quality_pass_keeps_good_mesh(tetra):
    st = minimize(tetra, tetra_cone(), SolveConfig(max_iters=5))
    out = quality_pass(st)
    assert out.complex.n_faces == tetra.n_faces
    assert aspect_ratios(out.complex).max() <= aspect_ratios(st.complex).max() + 1e-12
    assert out.energies[-1] <= st.energies[-1] * (1 + 1e-9)


def test_continuation_warm_start():
    cfg = SolveConfig(radius_schedule=(1.0, 2.0), edge_length=0.25, perturb=0.05, seed=2)
    states = continue_in_radius(y_cone(), "y-sheet", cfg)
    assert [s.complex.truncation_radius for s in states] == [1.0, 2.0]
    assert all(s.stationary for s in states)
    st, keys = solve_template(y_cone(), "y-sheet", 2.0, SolveConfig(edge_length=0.25))
    assert len(keys) == st.complex.n_vertices
