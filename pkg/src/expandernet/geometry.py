"""Weighted-area kernels, discrete mean curvature and the planar-end Jacobi operator.

Weight convention: every face contributes ``area * exp(|c|^2 / 4)`` with
``c`` the face centroid.  Energies are carried in shifted form
``exp(|c|^2/4 - s0)`` so that large truncation radii do not overflow.

Mean curvature convention: ``H = kappa_1 + kappa_2`` measured along the
face normal (phase a -> phase b), with the mean-curvature vector
``H n = Laplace-Beltrami(x)``.  A unit sphere whose a->b normal points to the
centre has ``H = +2``; with the normal pointing outwards ``H = -2``.  With
this sign the critical points of the weighted area are exactly the surfaces
with ``H = <x, n> / 2``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .complex import EPS_AREA_REL, SurfaceComplex, vertex_classes, vertex_rings
from .errors import DegenerateFace, GridTooSmall, NotGraphical, NotManifoldVertex

CHUNK = 16384


def worker_count() -> int:
    """Worker cap from ``EXPANDERNET_THREADS`` (results never depend on it)."""
    try:
        return max(1, int(os.environ.get("EXPANDERNET_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(fn, n, *arrays):
    """Apply ``fn`` to fixed-size slices and concatenate in order."""
    bounds = [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)] or [(0, 0)]
    work = [tuple(arr[a:b] for arr in arrays) for a, b in bounds]
    threads = worker_count()
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda w: fn(*w), work))
    else:
        parts = [fn(*w) for w in work]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


@dataclass
class WeightedEnergy:
    total: float
    per_face: np.ndarray
    log_scale: float

    def value(self) -> float:
        """Unshifted energy (may overflow to inf for huge radii)."""
        return self.total * math.exp(self.log_scale)


def _face_terms(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    nn = np.linalg.norm(n, axis=1)
    c = (p0 + p1 + p2) / 3.0
    q = np.einsum("ij,ij->i", c, c) / 4.0
    return 0.5 * nn, q


def _eps_area(complex: SurfaceComplex) -> float:
    span = complex.vertices.max(axis=0) - complex.vertices.min(axis=0)
    return EPS_AREA_REL * float(span @ span)


def weighted_area(complex: SurfaceComplex, log_scale: float | None = None,
                  weighted: bool = True, check: bool = True) -> WeightedEnergy:
    """Centroid-rule weighted area ``sum_f A_f exp(|c_f|^2/4 - s0)``.

    ``log_scale`` fixes ``s0``; by default ``s0 = max_f |c_f|^2/4``.
    ``weighted=False`` sets the weight to one (plain Euclidean area).
    """
    v, f = complex.vertices, complex.faces
    area, q = _chunked(lambda a, b, c: _face_terms(a, b, c), len(f), v[f[:, 0]], v[f[:, 1]],
                       v[f[:, 2]])
    if check and len(area) and area.min() < _eps_area(complex):
        bad = int(np.argmin(area))
        raise DegenerateFace(f"face {bad} has area {area[bad]:.3e}")
    if not weighted:
        return WeightedEnergy(float(np.sum(area)), area, 0.0)
    s0 = float(q.max()) if log_scale is None else float(log_scale)
    per_face = area * np.exp(q - s0)
    return WeightedEnergy(float(np.sum(per_face)), per_face, s0)


def _grad_terms(p0, p1, p2, s0):
    n = np.cross(p1 - p0, p2 - p0)
    nn = np.linalg.norm(n, axis=1)
    nhat = n / nn[:, None]
    c = (p0 + p1 + p2) / 3.0
    w = np.exp(np.einsum("ij,ij->i", c, c) / 4.0 - s0)
    area = 0.5 * nn
    # d(area)/d(p_i) = 0.5 * nhat x (p_{i+2} - p_{i+1}); d(w)/d(p_i) = w c / 6
    wc = (area * w / 6.0)[:, None] * c
    g0 = 0.5 * w[:, None] * np.cross(nhat, p2 - p1) + wc
    g1 = 0.5 * w[:, None] * np.cross(nhat, p0 - p2) + wc
    g2 = 0.5 * w[:, None] * np.cross(nhat, p1 - p0) + wc
    return g0, g1, g2, area


def weighted_area_gradient(complex: SurfaceComplex, log_scale: float | None = None,
                           check: bool = True) -> np.ndarray:
    """Exact gradient of :func:`weighted_area` with respect to vertex positions.

    Returned in the same shifted scale: multiply by ``exp(log_scale)`` for the
    true gradient.
    """
    v, f = complex.vertices, complex.faces
    if log_scale is None:
        log_scale = weighted_area(complex, check=False).log_scale
    g0, g1, g2, area = _chunked(lambda a, b, c: _grad_terms(a, b, c, log_scale), len(f),
                                v[f[:, 0]], v[f[:, 1]], v[f[:, 2]])
    if check and len(area) and area.min() < _eps_area(complex):
        bad = int(np.argmin(area))
        raise DegenerateFace(f"face {bad} has area {area[bad]:.3e}")
    idx = f.T.ravel()
    g = np.concatenate([g0, g1, g2])
    V = complex.n_vertices
    return np.stack([np.bincount(idx, weights=g[:, k], minlength=V) for k in range(3)], axis=1)


# ---------------------------------------------------------------------------
# curvature


def _cotan_terms(complex: SurfaceComplex):
    """Cotangent Laplacian of positions and mixed areas for every vertex."""
    v, f = complex.vertices, complex.faces
    V = complex.n_vertices
    P = v[f]
    lap = np.zeros((V, 3))
    amix = np.zeros(V)
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    area = 0.5 * np.linalg.norm(cr, axis=1)
    cots = np.empty((len(f), 3))
    for k in range(3):
        a, b, c = P[:, k], P[:, (k + 1) % 3], P[:, (k + 2) % 3]
        u, w = b - a, c - a
        cots[:, k] = np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)
    for k in range(3):
        i, j = f[:, (k + 1) % 3], f[:, (k + 2) % 3]  # edge opposite corner k
        d = 0.5 * cots[:, k][:, None] * (P[:, (k + 2) % 3] - P[:, (k + 1) % 3])
        for ax in range(3):
            lap[:, ax] += np.bincount(i, weights=d[:, ax], minlength=V)
            lap[:, ax] -= np.bincount(j, weights=d[:, ax], minlength=V)
    # mixed (Voronoi / obtuse-safe) areas
    obtuse = cots < 0
    any_obtuse = obtuse.any(axis=1)
    for k in range(3):
        a, b, c = P[:, k], P[:, (k + 1) % 3], P[:, (k + 2) % 3]
        lb = np.einsum("ij,ij->i", c - a, c - a)  # |ac|^2, opposite corner (k+1)
        lc = np.einsum("ij,ij->i", b - a, b - a)  # |ab|^2, opposite corner (k+2)
        vor = (lb * cots[:, (k + 1) % 3] + lc * cots[:, (k + 2) % 3]) / 8.0
        val = np.where(any_obtuse, np.where(obtuse[:, k], area / 2.0, area / 4.0), vor)
        amix += np.bincount(f[:, k], weights=val, minlength=V)
    normals = np.zeros((V, 3))
    for k in range(3):
        for ax in range(3):
            normals[:, ax] += np.bincount(f[:, k], weights=0.5 * cr[:, ax], minlength=V)
    return lap, amix, normals


def manifold_vertices(complex: SurfaceComplex) -> np.ndarray:
    """Vertices whose star contains only 2-face edges."""
    topo = complex.topology
    bad_edges = topo.edges[topo.edge_face_count != 2]
    ok = np.ones(complex.n_vertices, dtype=bool)
    ok[bad_edges.ravel()] = False
    ok[complex.boundary] = False
    return ok


def mean_curvature_field(complex: SurfaceComplex):
    """``(H, n)`` at every vertex; entries at non-manifold vertices are NaN."""
    lap, amix, normals = _cotan_terms(complex)
    ok = manifold_vertices(complex)
    nn = np.linalg.norm(normals, axis=1)
    n = np.full_like(normals, np.nan)
    n[ok] = normals[ok] / nn[ok, None]
    H = np.full(complex.n_vertices, np.nan)
    H[ok] = np.einsum("ij,ij->i", lap[ok], n[ok]) / amix[ok]
    return H, n


def mean_curvature(complex: SurfaceComplex, vertex: int) -> float:
    if not manifold_vertices(complex)[vertex]:
        raise NotManifoldVertex(f"vertex {vertex} is on a junction or the boundary")
    return float(mean_curvature_field(complex)[0][vertex])


@dataclass
class ExpanderResidualField:
    per_vertex: np.ndarray   # NaN where masked
    mask: np.ndarray         # True = excluded
    k_ring: int

    @property
    def max_abs(self) -> float:
        vals = self.per_vertex[~self.mask]
        return float(np.abs(vals).max()) if len(vals) else 0.0

    @property
    def rms(self) -> float:
        vals = self.per_vertex[~self.mask]
        return float(np.sqrt(np.mean(vals ** 2))) if len(vals) else 0.0


def residual_mask(complex: SurfaceComplex, k_ring: int = 2) -> np.ndarray:
    seeds = np.flatnonzero(~manifold_vertices(complex))
    return vertex_rings(complex, seeds, k_ring)


def expander_residual(complex: SurfaceComplex, k_ring: int = 2) -> ExpanderResidualField:
    """``r = H - <x, n>/2`` on manifold vertices farther than ``k_ring`` rings from junctions and the rim."""
    H, n = mean_curvature_field(complex)
    mask = residual_mask(complex, k_ring)
    r = np.full(complex.n_vertices, np.nan)
    keep = ~mask
    r[keep] = H[keep] - 0.5 * np.einsum("ij,ij->i", complex.vertices[keep], n[keep])
    return ExpanderResidualField(r, mask, k_ring)


# ---------------------------------------------------------------------------
# planar ends


@dataclass
class PlanarEndSample:
    normal: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    u: np.ndarray            # heights on the (len(ys), len(xs)) grid, NaN where unsampled
    mask: np.ndarray         # True where the sample lies in the annulus/sector
    r_inner: float
    r_outer: float

    @property
    def spacing(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def coords(self):
        return np.meshgrid(self.xs, self.ys)

    @property
    def sup_abs_u(self) -> float:
        vals = self.u[self.mask]
        return float(np.nanmax(np.abs(vals))) if vals.size else 0.0

    @property
    def sup_grad_u(self) -> float:
        if min(self.u.shape) < 3:
            return 0.0
        gy, gx = np.gradient(self.u, self.spacing)
        g = np.hypot(gx, gy)[self.mask]
        g = g[np.isfinite(g)]
        return float(g.max()) if g.size else 0.0

    @classmethod
    def on_grid(cls, half_width: float, spacing: float, func=None, r_inner=0.0, r_outer=None):
        """Synthetic square grid in the plane z = 0 (useful for operator checks)."""
        n = int(round(half_width / spacing))
        xs = spacing * np.arange(-n, n + 1)
        X, Y = np.meshgrid(xs, xs)
        u = np.zeros_like(X) if func is None else func(X, Y)
        r = np.hypot(X, Y)
        r_outer = half_width if r_outer is None else r_outer
        return cls(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]),
                   np.array([0.0, 1.0, 0.0]), xs, xs.copy(), u,
                   (r >= r_inner) & (r <= r_outer), r_inner, r_outer)


def jacobi_apply(end: PlanarEndSample, u=None) -> np.ndarray:
    """``L u = Lap u + x . grad u / 2 - u / 2`` by centred differences.

    The outermost grid ring acts as ghost nodes and is returned as NaN.
    """
    u = end.u if u is None else np.asarray(u, dtype=float)
    if min(u.shape) < 3:
        raise GridTooSmall(f"grid {u.shape} needs at least 3 nodes per direction")
    h = end.spacing
    X, Y = end.coords()
    out = np.full(u.shape, np.nan)
    c = u[1:-1, 1:-1]
    lap = (u[1:-1, 2:] + u[1:-1, :-2] + u[2:, 1:-1] + u[:-2, 1:-1] - 4.0 * c) / (h * h)
    ux = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * h)
    uy = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * h)
    out[1:-1, 1:-1] = lap + 0.5 * (X[1:-1, 1:-1] * ux + Y[1:-1, 1:-1] * uy) - 0.5 * c
    return out


def end_frame(spec, path):
    """Plane frame ``(normal, e1, e2, sector angle)`` for a cone path."""
    from .templates import _path_frame

    u, v, theta = _path_frame(spec, path)
    if path.closed:
        theta = 2 * math.pi
    return np.cross(u, v), u, v, theta


def fit_planar_end(complex: SurfaceComplex, spec, path_index: int, r_inner: float,
                   r_outer: float, spacing: float | None = None,
                   margin_deg: float = 30.0) -> PlanarEndSample:
    """Heights of the sheet over the asymptotic plane of one cone path.

    Samples lie in the annulus ``[r_inner, r_outer]`` and inside the path's
    sector shrunk by ``margin_deg`` on both sides (junction rays excluded).
    Raises :class:`NotGraphical` if a normal line through a sample does not
    cross the sheet exactly once.
    """
    path = spec.paths()[path_index]
    normal, e1, e2, theta = end_frame(spec, path)
    pair = (min(path.left, path.right), max(path.left, path.right))
    sel = (complex.phases[:, 0] == pair[0]) & (complex.phases[:, 1] == pair[1])
    faces = complex.faces[sel]
    if spacing is None:
        spacing = 0.5 * float(np.median(complex.edge_lengths()))
    n = int(math.ceil(r_outer / spacing)) + 1
    xs = spacing * np.arange(-n, n + 1)
    X, Y = np.meshgrid(xs, xs)
    r = np.hypot(X, Y)
    phi = np.mod(np.arctan2(Y, X), 2 * math.pi)
    margin = 0.0 if path.closed else math.radians(margin_deg)
    mask = (r >= r_inner) & (r <= r_outer) & (phi >= margin) & (phi <= theta - margin)
    P = complex.vertices[faces]
    p2 = np.stack([P @ e1, P @ e2], axis=-1)   # (F, 3, 2)
    hgt = P @ normal                            # (F, 3)
    u = np.full(X.shape, np.nan)
    hits = np.zeros(X.shape, dtype=np.int64)
    lo = np.floor((p2.min(axis=1) - xs[0]) / spacing).astype(np.int64)
    hi = np.ceil((p2.max(axis=1) - xs[0]) / spacing).astype(np.int64)
    lo = np.clip(lo, 0, len(xs) - 1)
    hi = np.clip(hi, 0, len(xs) - 1)
    cand_f, cand_i, cand_j = [], [], []
    for fi in range(len(faces)):
        ii = np.arange(lo[fi, 1], hi[fi, 1] + 1)
        jj = np.arange(lo[fi, 0], hi[fi, 0] + 1)
        if not len(ii) or not len(jj):
            continue
        I, J = np.meshgrid(ii, jj, indexing="ij")
        keep = mask[I, J]
        if keep.any():
            cand_i.append(I[keep])
            cand_j.append(J[keep])
            cand_f.append(np.full(int(keep.sum()), fi))
    if cand_f:
        cf, ci, cj = (np.concatenate(a) for a in (cand_f, cand_i, cand_j))
        a, b, c = p2[cf, 0], p2[cf, 1], p2[cf, 2]
        q = np.stack([xs[cj], xs[ci]], axis=1)
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        l1 = ((q[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (q[:, 1] - a[:, 1])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (q[:, 1] - a[:, 1]) - (q[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
        l0 = 1.0 - l1 - l2
        tol = -1e-12
        inside = (l0 >= tol) & (l1 >= tol) & (l2 >= tol) & (np.abs(det) > 0)
        z = l0 * hgt[cf, 0] + l1 * hgt[cf, 1] + l2 * hgt[cf, 2]
        cf, ci, cj, z = cf[inside], ci[inside], cj[inside], z[inside]
        # collapse duplicate hits on shared edges/vertices
        order = np.lexsort((z, cj, ci))
        ci, cj, z = ci[order], cj[order], z[order]
        new = np.ones(len(z), dtype=bool)
        new[1:] = ~((ci[1:] == ci[:-1]) & (cj[1:] == cj[:-1]) & (np.abs(z[1:] - z[:-1]) < 1e-9))
        np.add.at(hits, (ci[new], cj[new]), 1)
        u[ci[new], cj[new]] = z[new]
    # samples just inside the sphere can fall outside the inscribed polygonal rim
    R = complex.truncation_radius
    rim = (r > R - 2.0 * spacing) & (hits == 0)
    mask = mask & ~rim
    wrong = mask & (hits != 1)
    if wrong.any():
        i, j = np.argwhere(wrong)[0]
        raise NotGraphical(f"normal line at in-plane point ({xs[j]:.4g}, {xs[i]:.4g}) meets the "
                           f"sheet {hits[i, j]} times")
    u[~mask] = np.nan
    return PlanarEndSample(normal, e1, e2, xs, xs.copy(), u, mask, float(r_inner), float(r_outer))
