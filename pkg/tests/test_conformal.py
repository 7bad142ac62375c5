import math

import numpy as np
import pytest

from expandernet.conformal import (D_STAR, angle_of_parallelism, ball_distance_radius,
                                   ball_to_euclid, convert, euclid_to_ball, hyperbolic_distance,
                                   hyperboloid_jacobian, minkowski, pullback_check, to_ball,
                                   to_hyperboloid)
from expandernet.errors import NotOnHyperboloid, OnIdealBoundary


def test_stereographic_examples():
    assert np.allclose(to_ball([0, 0, 0, 1]), 0.0)
    assert np.allclose(to_ball([0, 0, 4 / 3, 5 / 3]), [0, 0, 0.5])
    assert np.allclose(to_hyperboloid([0, 0, 0]), [0, 0, 0, 1])
    assert np.allclose(to_hyperboloid([0, 0, 0.5]), [0, 0, 4 / 3, 5 / 3])


def test_round_trip_and_invariant():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(200, 3))
    u *= (rng.uniform(0, 0.95, 200) / np.linalg.norm(u, axis=1))[:, None]
    x = to_hyperboloid(u)
    assert np.allclose(minkowski(x), -1.0)
    assert np.abs(to_ball(x) - u).max() < 1e-12


def test_domain_errors():
    with pytest.raises(NotOnHyperboloid):
        to_ball([0, 0, 1, 1])
    with pytest.raises(OnIdealBoundary):
        to_hyperboloid([1.0, 0, 0])
    with pytest.raises(OnIdealBoundary):
        to_hyperboloid([0, 0, 1 - 1e-13])


def test_pullback_exact_and_fd():
    u = np.array([0.2, -0.3, 0.4])
    du = np.array([0.5, 0.1, -0.2])
    gm, gp = pullback_check(u, du)
    assert gm == pytest.approx(gp, rel=1e-12)
    gm, gp = pullback_check(u, du, method="fd")
    assert gm == pytest.approx(gp, rel=1e-8)
    # Jacobian columns against central differences
    J = hyperboloid_jacobian(u)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-6
        fd = (to_hyperboloid(u + e) - to_hyperboloid(u - e)) / 2e-6
        assert np.allclose(J[:, k], fd, atol=1e-7)


def test_distance_and_parallelism():
    assert hyperbolic_distance([0, 0, 0], [0.5, 0, 0]) == pytest.approx(math.log(3), abs=1e-12)
    assert hyperbolic_distance([0.1, 0.2, 0.3], [0.1, 0.2, 0.3]) == 0.0
    assert angle_of_parallelism(0.0) == pytest.approx(math.pi / 2)
    assert angle_of_parallelism(D_STAR) == pytest.approx(math.pi / 3)
    r = ball_distance_radius(D_STAR)
    assert hyperbolic_distance([0, 0, 0], [r, 0, 0]) == pytest.approx(D_STAR)
    with pytest.raises(ValueError):
        angle_of_parallelism(-1.0)


def test_euclid_chart_and_convert():
    p = np.array([[3.0, -4.0, 12.0], [0.0, 0.0, 0.0]])
    b = euclid_to_ball(p)
    assert np.allclose(np.linalg.norm(b[0]), 13 / 14)
    assert np.allclose(ball_to_euclid(b), p)
    x = convert(p, "euclid", "hyperboloid")
    assert np.allclose(convert(x, "hyperboloid", "euclid"), p)
    with pytest.raises(ValueError):
        convert(p, "euclid", "klein")
