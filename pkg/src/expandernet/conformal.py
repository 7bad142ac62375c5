"""Hyperboloid, Poincare ball and compactified Euclidean charts.

All functions accept a single point (shape ``(n,)``) or a stack of points
(shape ``(m, n)``) and return arrays of the matching shape.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NotOnHyperboloid, OnIdealBoundary

HYPERBOLOID_TOL = 1e-10
IDEAL_MARGIN = 1e-12
#: the radial compactification used as the Euclidean <-> ball chart
CHART = "radial"


def minkowski(x, y=None):
    """``x1 y1 + x2 y2 + x3 y3 - x4 y4`` along the last axis."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    return np.sum(x[..., :3] * y[..., :3], axis=-1) - x[..., 3] * y[..., 3]


def _check_hyperboloid(x):
    if x.shape[-1] != 4:
        raise NotOnHyperboloid("hyperboloid points have four coordinates")
    q = minkowski(x)
    bad = (np.abs(q + 1.0) > HYPERBOLOID_TOL * np.maximum(1.0, x[..., 3] ** 2)) | (x[..., 3] < 1.0)
    if np.any(bad):
        raise NotOnHyperboloid("point violates <x,x> = -1, x4 >= 1")


def _check_ball(u):
    if u.shape[-1] != 3:
        raise ValueError("ball points have three coordinates")
    if np.any(np.linalg.norm(u, axis=-1) >= 1.0 - IDEAL_MARGIN):
        raise OnIdealBoundary("point lies on or outside the ideal boundary")


def to_ball(x) -> np.ndarray:
    """Stereographic projection from ``(0, 0, 0, -1)``: ``u = x[:3] / (1 + x4)``."""
    x = np.asarray(x, dtype=float)
    _check_hyperboloid(x)
    return x[..., :3] / (1.0 + x[..., 3:4])


def to_hyperboloid(u) -> np.ndarray:
    """Inverse of :func:`to_ball`: ``(2u, 1 + |u|^2) / (1 - |u|^2)``."""
    u = np.asarray(u, dtype=float)
    _check_ball(u)
    s = np.sum(u * u, axis=-1, keepdims=True)
    return np.concatenate([2.0 * u, 1.0 + s], axis=-1) / (1.0 - s)


def hyperboloid_jacobian(u) -> np.ndarray:
    """Exact ``4 x 3`` Jacobian of :func:`to_hyperboloid` at a single point."""
    u = np.asarray(u, dtype=float)
    _check_ball(u)
    s = float(u @ u)
    d = 1.0 - s
    J = np.empty((4, 3))
    J[:3] = 2.0 * np.eye(3) / d + 4.0 * np.outer(u, u) / d ** 2
    J[3] = 4.0 * u / d ** 2
    return J


def pullback_check(u, du, method: str = "exact", step: float = 1e-6):
    """Return ``(<dx, dx>_M, 4 |du|^2 / (1 - |u|^2)^2)`` for ``dx = d(to_hyperboloid)(du)``.

    ``method`` is ``"exact"`` (analytic Jacobian) or ``"fd"`` (central
    differences along ``du`` with relative step ``step``).
    """
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    _check_ball(u)
    nd = float(np.linalg.norm(du))
    gp = 4.0 * nd * nd / (1.0 - float(u @ u)) ** 2
    if nd == 0.0:
        return 0.0, gp
    if method == "exact":
        dx = hyperboloid_jacobian(u) @ du
    elif method == "fd":
        t = step / nd
        dx = (to_hyperboloid(u + t * du) - to_hyperboloid(u - t * du)) / (2.0 * t)
    else:
        raise ValueError("method must be 'exact' or 'fd'")
    return float(minkowski(dx)), gp


def euclid_to_ball(p) -> np.ndarray:
    """Radial compactification ``u = p / (1 + |p|)``."""
    p = np.asarray(p, dtype=float)
    return p / (1.0 + np.linalg.norm(p, axis=-1, keepdims=True))


def ball_to_euclid(u) -> np.ndarray:
    """Inverse of :func:`euclid_to_ball`: ``p = u / (1 - |u|)``."""
    u = np.asarray(u, dtype=float)
    r = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(r >= 1.0 - IDEAL_MARGIN):
        raise OnIdealBoundary("point lies on or outside the ideal boundary")
    return u / (1.0 - r)


def euclid_radius_to_ball(r):
    return np.asarray(r, dtype=float) / (1.0 + np.asarray(r, dtype=float))


def angle_of_parallelism(d):
    """Lobachevsky's formula ``2 arctan(exp(-d))``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = 2.0 * np.arctan(np.exp(-d))
    return float(out) if out.ndim == 0 else out


#: distance beyond which the angle of parallelism drops below 60 degrees
D_STAR = 0.5 * math.log(3.0)


def hyperbolic_distance(u, v):
    """Poincare-ball distance ``arccosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2)))``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_ball(u)
    _check_ball(v)
    num = 2.0 * np.sum((u - v) ** 2, axis=-1)
    den = (1.0 - np.sum(u * u, axis=-1)) * (1.0 - np.sum(v * v, axis=-1))
    # arccosh(1 + z) = log1p(z + sqrt(z (z + 2))) is accurate for small z
    z = num / den
    out = np.log1p(z + np.sqrt(z * (z + 2.0)))
    return float(out) if out.ndim == 0 else out


def ball_distance_radius(d):
    """Euclidean radius in the ball of a point at hyperbolic distance ``d`` from 0."""
    return math.tanh(0.5 * float(d))


def convert(points, source: str, target: str) -> np.ndarray:
    """Map points between ``euclid``, ``ball`` and ``hyperboloid`` coordinates."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    models = ("euclid", "ball", "hyperboloid")
    if source not in models or target not in models:
        raise ValueError(f"model must be one of {', '.join(models)}")
    if source == target:
        if source == "hyperboloid":
            _check_hyperboloid(pts)
        elif source == "ball":
            _check_ball(pts)
        return pts.copy()
    if source == "euclid":
        ball = euclid_to_ball(pts)
    elif source == "hyperboloid":
        ball = to_ball(pts)
    else:
        _check_ball(pts)
        ball = pts
    if target == "ball":
        return ball
    if target == "euclid":
        return ball_to_euclid(ball)
    return to_hyperboloid(ball)
