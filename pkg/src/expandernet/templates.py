"""Initial-topology templates spanning a cone's boundary trace.

Sheets are meshed with a ring mesher in polar coordinates (rings every
``R/n`` with ``n = ceil(R/h)``), so vertices on shared rays sit at the same
radii in every sheet and can be identified by key.  Vertex keys survive a
change of truncation radius, which is what warm starts rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complex import SurfaceComplex, extract_junctions
from .cone import ConeSpec, Path, _unit, validate_cone
from .errors import TemplateMismatch


def zipper(p_ids, p_par, q_ids, q_par):
    """Triangulate the strip between two polylines sharing a parameter range.

    Triangles are oriented so that (P -> Q) x (increasing parameter) is the
    normal.  Either polyline may be a single point.
    """
    tris = []
    i = j = 0
    lp, lq = len(p_ids) - 1, len(q_ids) - 1
    while i < lp or j < lq:
        if j < lq and (i == lp or q_par[j + 1] <= p_par[i + 1]):
            tris.append((p_ids[i], q_ids[j], q_ids[j + 1]))
            j += 1
        else:
            tris.append((p_ids[i], q_ids[j], p_ids[i + 1]))
            i += 1
    return tris


@dataclass
class SectorMesh:
    xy: np.ndarray          # local planar coordinates
    keys: list              # local key per point: ("apex",), ("ray0", k), ("ray1", k), ("pt", k, i)
    tris: list
    rim: np.ndarray         # boolean, on the outer circle


def ring_sector(theta: float, R: float, h: float, closed: bool = False) -> SectorMesh:
    """Ring mesh of the sector ``0 <= phi <= theta``, ``r <= R`` (full disk if closed)."""
    n = max(1, math.ceil(R / h - 1e-9))
    xy = [(0.0, 0.0)]
    keys = [("apex",)]
    rim = [False]
    tris = []
    prev_ids, prev_par = [0], [0.0]
    ct, st = math.cos(theta), math.sin(theta)
    if abs(theta - math.pi) < 1e-15:
        ct, st = -1.0, 0.0
    for k in range(1, n + 1):
        r = R * k / n
        if closed:
            m = max(6, math.ceil(2 * math.pi * r / h - 1e-9))
        else:
            m = max(1, math.ceil(theta * r / h - 1e-9))
        ids, par = [], []
        count = m if closed else m + 1
        for i in range(count):
            phi = (2 * math.pi if closed else theta) * i / m
            if not closed and i == 0:
                pos, key = (r, 0.0), ("ray0", k)
            elif not closed and i == m:
                pos, key = (r * ct, r * st), ("ray1", k)
            else:
                pos, key = (r * math.cos(phi), r * math.sin(phi)), ("pt", k, i)
            ids.append(len(xy))
            par.append(phi)
            xy.append(pos)
            keys.append(key)
            rim.append(k == n)
        if closed:
            p_ids = prev_ids + [prev_ids[0]] if k > 1 else prev_ids
            p_par = prev_par + [2 * math.pi] if k > 1 else [0.0]
            q_ids, q_par = ids + [ids[0]], par + [2 * math.pi]
            if k == 1:
                tris += [(0, q_ids[a], q_ids[a + 1]) for a in range(len(q_ids) - 1)]
            else:
                tris += zipper(p_ids, p_par, q_ids, q_par)
        else:
            tris += zipper(prev_ids, prev_par if k > 1 else [0.0], ids, par)
        prev_ids, prev_par = ids, par
    return SectorMesh(np.array(xy), keys, tris, np.array(rim))


class _Builder:
    def __init__(self):
        self.index = {}
        self.pos = []
        self.bnd = []
        self.keys = []
        self.faces = []
        self.phases = []

    def point(self, key, pos, boundary):
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.pos)
            self.index[key] = idx
            self.pos.append(np.asarray(pos, dtype=float))
            self.bnd.append(bool(boundary))
            self.keys.append(key)
        return idx

    def sheet(self, ids, tris, left, right, flip=False):
        """Add triangles whose CCW normal points into ``left``."""
        lo, hi = min(left, right), max(left, right)
        reverse = (left < right) != flip
        for a, b, c in tris:
            tri = (ids[a], ids[c], ids[b]) if reverse else (ids[a], ids[b], ids[c])
            self.faces.append(tri)
            self.phases.append((lo, hi))

    def build(self, K, R):
        c = SurfaceComplex(np.array(self.pos), np.array(self.faces), np.array(self.phases), K,
                           np.array(self.bnd), R)
        return c, list(self.keys)


def _path_frame(spec: ConeSpec, path: Path):
    u = spec.nodes[path.nodes[0]]
    w = spec.nodes[path.nodes[1]]
    v = _unit(w - (w @ u) * u)
    theta = sum(spec.arc_angle(a) for a in path.arcs)
    return u, v, theta


def _mesh_path(b: _Builder, spec: ConeSpec, path: Path, pid: int, R: float, h: float,
               deform=None, key_map=None):
    u, v, theta = _path_frame(spec, path)
    if path.closed:
        theta = 2 * math.pi
    sm = ring_sector(theta, R, h, closed=path.closed)
    n = max(1, math.ceil(R / h - 1e-9))
    end = spec.nodes[path.nodes[-1]]
    ids = []
    for (x, y), key, on_rim in zip(sm.xy, sm.keys, sm.rim):
        if key[0] == "apex":
            gkey, pos = ("origin",), np.zeros(3)
        elif key[0] == "ray0":
            gkey, pos = ("ray", path.nodes[0], key[1]), (R * key[1] / n) * u
        elif key[0] == "ray1":
            gkey, pos = ("ray", path.nodes[-1], key[1]), (R * key[1] / n) * end
        else:
            gkey, pos = ("sheet", pid) + key[1:], x * u + y * v
        if key_map is not None:
            gkey = key_map(gkey, key)
        if deform is not None:
            pos = deform(pos, x, y, key)
        ids.append(b.point(gkey, pos, on_rim))
    b.sheet(ids, sm.tris, path.left, path.right)
    return ids


def _check_spec(spec, allow_nonregular):
    outcome = validate_cone(spec, allow_nonregular=allow_nonregular)
    if not outcome.ok:
        raise TemplateMismatch("cone spec is not admissible: " + "; ".join(outcome.messages()))


def cone_verbatim(spec: ConeSpec, R: float, h: float, allow_nonregular: bool = True):
    """Mesh the cone itself (every path becomes a planar sector)."""
    _check_spec(spec, allow_nonregular)
    b = _Builder()
    for pid, path in enumerate(spec.paths()):
        _mesh_path(b, spec, path, pid, R, h)
    return b.build(spec.region_count, R)


def flat_sheet(spec: ConeSpec, R: float, h: float, allow_nonregular: bool = False):
    _check_spec(spec, allow_nonregular)
    paths = spec.paths()
    if len(spec.junction_nodes()) or len(paths) != 1 or not paths[0].closed:
        raise TemplateMismatch("flat-sheet needs a single great circle without junction nodes")
    return cone_verbatim(spec, R, h)


def _antipodal_pair(spec: ConeSpec, degree: int, name: str):
    junc = spec.junction_nodes()
    deg = spec.degree()
    if len(junc) != 2 or any(deg[j] != degree for j in junc):
        raise TemplateMismatch(f"{name} needs exactly two junction nodes of degree {degree}")
    a, c = spec.nodes[junc[0]], spec.nodes[junc[1]]
    if a @ c > -1 + 1e-9:
        raise TemplateMismatch(f"{name} needs antipodal junction nodes")
    paths = spec.paths()
    if len(paths) != degree or any({p.nodes[0], p.nodes[-1]} != set(junc.tolist()) for p in paths):
        raise TemplateMismatch(f"{name} needs {degree} paths joining the two junction nodes")
    # orient every path from the first junction node
    oriented = []
    for p in paths:
        if p.nodes[0] != junc[0]:
            p = Path(p.nodes[::-1], p.arcs[::-1], p.right, p.left)
        oriented.append(p)
    return int(junc[0]), int(junc[1]), oriented


def y_sheet(spec: ConeSpec, R: float, h: float, allow_nonregular: bool = False):
    _check_spec(spec, allow_nonregular)
    _antipodal_pair(spec, 3, "y-sheet")
    return cone_verbatim(spec, R, h)


def tetra_sheet(spec: ConeSpec, R: float, h: float, allow_nonregular: bool = False):
    _check_spec(spec, allow_nonregular)
    junc = spec.junction_nodes()
    paths = spec.paths()
    if len(junc) != 4 or len(paths) != 6:
        raise TemplateMismatch("tetra-cone needs 4 junction nodes and 6 arcs")
    dots = spec.nodes[junc] @ spec.nodes[junc].T
    off = dots[~np.eye(4, dtype=bool)]
    if np.abs(off + 1.0 / 3.0).max() > 1e-6:
        raise TemplateMismatch("tetra-cone junction nodes must form a regular tetrahedron")
    return cone_verbatim(spec, R, h)


CONNECTOR_WIDTH = 1.0


def cross_resolved(spec: ConeSpec, R: float, h: float, variant: str = "a",
                   width: float = CONNECTOR_WIDTH, allow_nonregular: bool = True,
                   profile=None):
    """Resolve a four-fold line into two triple curves joined by a connector strip.

    Variant ``a`` joins half-planes (0, 1) and (2, 3) (counterclockwise order
    about the axis); variant ``b`` joins (1, 2) and (3, 0).  ``width`` is the
    initial full connector width at the origin.  Away from the origin the
    offset of the triple curves from the axis tapers like ``exp(-s^2/4)``
    (the decay of Jacobi fields over a plane) down to a quarter of its
    central value, and vanishes on the sphere.
    ``profile(s)``, when given, replaces that offset (see
    :func:`connector_profile`).
    """
    _check_spec(spec, allow_nonregular)
    north, south, paths = _antipodal_pair(spec, 4, "cross-resolved")
    ell = spec.nodes[north]
    e = []
    for p in paths:
        u, v, _ = _path_frame(spec, p)
        e.append(v)
    ref1 = e[0]
    ref2 = np.cross(ell, ref1)
    order = np.argsort([math.atan2(x @ ref2, x @ ref1) % (2 * math.pi) for x in e])
    paths = [paths[i] for i in order]
    e = [e[i] for i in order]
    shift = {"a": 0, "b": 1}[variant]
    groups = [((shift) % 4, (shift + 1) % 4), ((shift + 2) % 4, (shift + 3) % 4)]
    mids = [_unit(e[g[0]] + e[g[1]]) for g in groups]
    c = 0.5 * width
    n = max(1, math.ceil(R / h - 1e-9))
    b = _Builder()

    def offset(s):
        if abs(s) >= R:
            return 0.0
        if profile is not None:
            return float(profile(s))
        taper = 0.25 + 0.75 * math.exp(-s * s / 4.0)
        return c * taper * math.sqrt(max(1.0 - (s / R) ** 2, 0.0))

    def curve_point(ci, k):
        s = R * k / n
        return ell * s + offset(s) * mids[ci]

    def curve_key(ci, k):
        if k == n:
            return ("ray", north, n)
        if k == -n:
            return ("ray", south, n)
        return ("tc", ci, k)

    for pid, p in enumerate(paths):
        ci = 0 if pid in groups[0] else 1

        def key_map(gkey, local, ci=ci):
            if local[0] == "ray0":
                return curve_key(ci, local[1])
            if local[0] == "ray1":
                return curve_key(ci, -local[1])
            if local[0] == "apex":
                return curve_key(ci, 0)
            return gkey

        # leave the triple curve at 60 degrees from the connector's continuation
        # (a 120 degree junction) and relax to the cone plane over a distance
        # comparable to the connector width
        side = e[pid] - (e[pid] @ mids[ci]) * mids[ci]
        side /= np.linalg.norm(side)
        turn = 0.5 * mids[ci] + 0.5 * math.sqrt(3.0) * side - e[pid]

        def deform(pos, x, y, local, ci=ci, turn=turn):
            if local[0] in ("ray0", "ray1", "apex"):
                k = 0 if local[0] == "apex" else (local[1] if local[0] == "ray0" else -local[1])
                return curve_point(ci, k)
            rho_max = math.sqrt(max(R * R - x * x, 0.0))
            off = offset(x)
            fade = max(1.0 - y / rho_max, 0.0) if rho_max > 0 else 0.0
            bend = y * math.exp(-y / (2.0 * off)) * turn if off > 0 else 0.0
            return pos + fade * (off * mids[ci] + bend)

        _mesh_path(b, spec, p, pid, R, h, deform=deform, key_map=key_map)

    # connector strip between the two triple curves
    sep = [(groups[0][1] + 1) % 4, (groups[1][1] + 1) % 4]  # regions after the group ends
    lab = [paths[groups[0][1]].left, paths[groups[1][1]].left]
    rows_ids, rows_par = [], []
    for k in range(-n, n + 1):
        if abs(k) == n:
            key = curve_key(0, k)
            rows_ids.append([b.point(key, curve_point(0, k), True)])
            rows_par.append([0.0])
            continue
        p0, p1 = curve_point(0, k), curve_point(1, k)
        m = max(1, math.ceil(np.linalg.norm(p1 - p0) / h - 1e-9))
        ids = [b.point(curve_key(0, k), p0, False)]
        for i in range(1, m):
            t = i / m
            ids.append(b.point(("conn", k, i), (1 - t) * p0 + t * p1, False))
        ids.append(b.point(curve_key(1, k), p1, False))
        rows_ids.append(ids)
        rows_par.append([i / m for i in range(m + 1)])
    tris = []
    for r in range(1, len(rows_ids)):
        tris += zipper(rows_ids[r - 1], rows_par[r - 1], rows_ids[r], rows_par[r])
    # the connector separates the region after group 0 from the one after group 1;
    # orient by the bisector direction of the first of those regions
    bis = _unit(e[sep[0] % 4] + e[(sep[0] - 1) % 4])
    pos = np.array(b.pos)
    t0 = np.array(tris[len(tris) // 2])
    normal = np.cross(pos[t0[1]] - pos[t0[0]], pos[t0[2]] - pos[t0[0]])
    into_first = normal @ bis > 0
    b.sheet(list(range(len(b.pos))), tris, lab[0] if into_first else lab[1],
            lab[1] if into_first else lab[0])
    return b.build(spec.region_count, R)


def cross_resolved_a(spec, R, h, allow_nonregular=True, profile=None):
    return cross_resolved(spec, R, h, "a", allow_nonregular=allow_nonregular, profile=profile)


def cross_resolved_b(spec, R, h, allow_nonregular=True, profile=None):
    return cross_resolved(spec, R, h, "b", allow_nonregular=allow_nonregular, profile=profile)


def connector_profile(complex: SurfaceComplex, spec: ConeSpec):
    """Offset of the triple curves from the four-fold axis as a function of height.

    Fitted to a computed cross resolution; feeding it back into
    :func:`cross_resolved` rebuilds a well-shaped mesh around the current
    junction geometry.
    """
    north, _, _ = _antipodal_pair(spec, 4, "cross-resolved")
    ell = spec.nodes[north]
    R = complex.truncation_radius
    s_all, d_all = [], []
    for c in extract_junctions(complex).triple_curves:
        p = complex.vertices[c.vertices]
        s = p @ ell
        d = np.linalg.norm(p - np.outer(s, ell), axis=1)
        s_all.append(s)
        d_all.append(d)
    s = np.concatenate(s_all)
    d = np.concatenate(d_all)
    # symmetrise the two curves and both halves of the axis
    s = np.concatenate([s, -s])
    d = np.concatenate([d, d])
    order = np.argsort(s, kind="stable")
    s, d = s[order], d[order]
    grid = np.linspace(-R, R, 4 * max(8, len(s_all[0])) + 1)
    vals = np.interp(grid, s, d)
    vals[0] = vals[-1] = 0.0

    def profile(t):
        return float(np.interp(t, grid, vals))

    return profile


@dataclass(frozen=True)
class TopologyTemplate:
    name: str
    generator: object
    #: warm starts copy keyed vertices between radii
    warm_start: bool = True

    #: callable(complex, spec) -> generator keyword arguments for a rebuilt mesh
    refit: object = None
    #: the matching cone has non-regular nodes, so they are accepted by default
    nonregular: bool = False

    def __call__(self, spec, R, h, allow_nonregular=None, **kwargs):
        if allow_nonregular is None:
            allow_nonregular = self.nonregular
        return self.generator(spec, R, h, allow_nonregular=allow_nonregular, **kwargs)


def _refit_cross(complex, spec):
    return {"profile": connector_profile(complex, spec)}


TEMPLATES = {
    "flat-sheet": TopologyTemplate("flat-sheet", flat_sheet),
    "y-sheet": TopologyTemplate("y-sheet", y_sheet),
    "tetra-cone": TopologyTemplate("tetra-cone", tetra_sheet),
    "cross-resolved-a": TopologyTemplate("cross-resolved-a", cross_resolved_a, warm_start=False,
                                         refit=_refit_cross, nonregular=True),
    "cross-resolved-b": TopologyTemplate("cross-resolved-b", cross_resolved_b, warm_start=False,
                                         refit=_refit_cross, nonregular=True),
    "cone-verbatim": TopologyTemplate("cone-verbatim", cone_verbatim, nonregular=True),
}
TEMPLATES["cross-resolved"] = TEMPLATES["cross-resolved-a"]


def get_template(name: str) -> TopologyTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise TemplateMismatch(
            f"unknown template {name!r}; available: {', '.join(sorted(TEMPLATES))}") from None


def instantiate_keyed(template, spec: ConeSpec, R: float, h: float,
                      allow_nonregular: bool | None = None, **kwargs):
    """Like :func:`instantiate` but also returns the per-vertex keys."""
    if isinstance(template, str):
        template = get_template(template)
    if R <= 0 or h <= 0:
        raise ValueError("R and h must be positive")
    return template(spec, R, h, allow_nonregular=allow_nonregular, **kwargs)


def instantiate(template, spec: ConeSpec, R: float, h: float,
                allow_nonregular: bool | None = None, **kwargs) -> SurfaceComplex:
    return instantiate_keyed(template, spec, R, h, allow_nonregular, **kwargs)[0]
