import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from expandernet import SurfaceComplex, expander_residual, jacobi_apply, weighted_area
from expandernet.errors import DegenerateFace, GridTooSmall, NotManifoldVertex
from expandernet.geometry import (PlanarEndSample, mean_curvature, mean_curvature_field,
                                  weighted_area_gradient)


def _sphere(rho=1.5, n=2000, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 3))
    p *= rho / np.linalg.norm(p, axis=1)[:, None]
    hull = ConvexHull(p)
    faces = hull.simplices.copy()
    n_out = np.cross(p[faces[:, 1]] - p[faces[:, 0]], p[faces[:, 2]] - p[faces[:, 0]])
    flip = np.einsum("ij,ij->i", n_out, p[faces].mean(axis=1)) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return SurfaceComplex(p, faces, np.tile([1, 2], (len(faces), 1)), 2,
                          np.zeros(n, bool), rho)


def test_disk_energy_matches_integral(disk):
    # integral of exp(r^2/4) over the disk of radius 2 is 4 pi (e - 1)
    exact = 4.0 * math.pi * (math.e - 1.0)
    E = weighted_area(disk).value()
    assert E == pytest.approx(exact, rel=0.05)
    area = weighted_area(disk, weighted=False).total
    assert area <= 4.0 * math.pi and area == pytest.approx(4.0 * math.pi, rel=0.05)


def test_log_scale_invariance(ysheet):
    a = weighted_area(ysheet)
    b = weighted_area(ysheet, log_scale=0.0)
    assert a.value() == pytest.approx(b.value(), rel=1e-13)
    ga = weighted_area_gradient(ysheet, a.log_scale) * math.exp(a.log_scale)
    gb = weighted_area_gradient(ysheet, 0.0)
    assert np.allclose(ga, gb, rtol=1e-12, atol=1e-14)


def test_gradient_matches_differences(tetra):
    rng = np.random.default_rng(1)
    x = tetra.vertices + 0.02 * rng.standard_normal(tetra.vertices.shape)
    c = SurfaceComplex(x, tetra.faces, tetra.phases, tetra.phase_count, tetra.boundary,
                       tetra.truncation_radius)
    g = weighted_area_gradient(c, 0.0)
    for v in rng.choice(c.n_vertices, 8, replace=False):
        for ax in range(3):
            fd = []
            for sgn in (1, -1):
                y = x.copy()
                y[v, ax] += sgn * 1e-6
                fd.append(weighted_area(SurfaceComplex(y, c.faces, c.phases, c.phase_count,
                                                       c.boundary, 2.0), 0.0).total)
            assert (fd[0] - fd[1]) / 2e-6 == pytest.approx(g[v, ax], rel=1e-5, abs=1e-8)


def test_degenerate_face_rejected():
    x = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    c = SurfaceComplex(x, [[0, 1, 2]], [(1, 2)], 2, np.ones(3, bool), 2.0)
    with pytest.raises(DegenerateFace):
        weighted_area(c)


def test_sphere_mean_curvature():
    rho = 1.5
    c = _sphere(rho)
    H, n = mean_curvature_field(c)
    outward = np.einsum("ij,ij->i", n, c.vertices) > 0
    assert outward.all()
    assert np.median(np.abs(H)) == pytest.approx(2.0 / rho, rel=0.02)


def test_plane_residual_zero(disk):
    res = expander_residual(disk)
    assert res.max_abs < 1e-12
    assert np.isnan(res.per_vertex[res.mask]).all()


def test_mean_curvature_rejects_junction(ysheet):
    v = int(np.flatnonzero(ysheet.topology.edge_face_count == 3)[0])
    edge = ysheet.topology.edges[v]
    with pytest.raises(NotManifoldVertex):
        mean_curvature(ysheet, int(edge[0]))


def test_jacobi_linear_fields():
    end = PlanarEndSample.on_grid(3.0, 0.1, lambda X, Y: 2.0 * X - Y)
    Lu = jacobi_apply(end)
    # linear functions are annihilated exactly
    assert np.nanmax(np.abs(Lu)) < 1e-10
    end = PlanarEndSample.on_grid(3.0, 0.1, lambda X, Y: np.ones_like(X))
    assert np.allclose(jacobi_apply(end)[1:-1, 1:-1], -0.5)
    with pytest.raises(GridTooSmall):
        jacobi_apply(end, np.zeros((2, 5)))
