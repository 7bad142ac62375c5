"""Numerical certification of a computed network.

Every check is a pure function of an immutable complex.  :func:`full_report`
collects them into a :class:`VerificationReport` whose text form is
line-based and bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .complex import (JunctionGraph, SurfaceComplex, connected_components, extract_junctions,
                      require_valid, vertex_rings)
from .conformal import CHART, D_STAR, ball_distance_radius, euclid_to_ball
from .cone import ConeSpec, distance_to_arcs, sample_trace
from .errors import EmptyShell, NotGraphical, OpenLink, ParseError
from .geometry import expander_residual, fit_planar_end

TETRA_ANGLE = math.degrees(math.acos(-1.0 / 3.0))
OMEGA_MIN = 2.0 * math.pi * (1.0 - 1.0 / math.sqrt(3.0))
#: reference densities of sheets, triple curves and quadruple points (not measured)
DENSITY_SHEET = 1.0
DENSITY_TRIPLE = 1.5
DENSITY_QUADRUPLE = 3.0 * math.acos(-1.0 / 3.0) / math.pi


@dataclass(frozen=True)
class ToleranceProfile:
    triple_deg: float = 0.5
    quad_deg: float = 1.0
    balance: float = 0.02
    quad_balance: float = 0.03
    solid_angle: float = 0.0
    residual_factor: float = 5.0        # tol_residual = factor * h
    hausdorff_factor: float = 2.0       # tol_hausdorff(r) = factor * h / r
    persistence_factor: float = 0.05    # tol_persist = factor * R1
    #: junction samples within this many rings of the sphere boundary are skipped
    boundary_rings: int = 2
    #: junction samples farther than this fraction of R from the origin are skipped
    core_fraction: float = 1.0
    j_fit: int = 4

    def residual_tol(self, h: float) -> float:
        return self.residual_factor * h

    def hausdorff_tol(self, h: float, r: float) -> float:
        return self.hausdorff_factor * h / r

    def persistence_tol(self, r1: float) -> float:
        return self.persistence_factor * r1


# ---------------------------------------------------------------------------
# triple curves


@dataclass
class TripleAngleStats:
    curve: int
    vertices: np.ndarray
    arclength: np.ndarray
    angles: np.ndarray         # (n, 3) degrees, consecutive sheets about the tangent
    balance: np.ndarray        # |sum of unit conormals|

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.angles - 120.0).max()) if len(self.angles) else 0.0

    @property
    def max_balance(self) -> float:
        return float(self.balance.max()) if len(self.balance) else 0.0


def _conormal(x, a, b, opp):
    """Unit vector in triangle (a, b, opp) orthogonal to edge ab, pointing to opp."""
    e = x[b] - x[a]
    d = x[opp] - x[a]
    c = d - (d @ e) / (e @ e) * e
    return c / np.linalg.norm(c)


def _curve_samples(complex, curve, skip):
    ch = curve.vertices
    idx = range(len(ch)) if curve.closed else range(1, len(ch) - 1)
    out = []
    for i in idx:
        v = ch[i]
        if skip[v]:
            continue
        out.append((i, v, ch[i - 1], ch[(i + 1) % len(ch)]))
    return out


def _vertex_faces(complex):
    f = complex.faces.ravel()
    order = np.argsort(f, kind="stable")
    start = np.searchsorted(f[order], np.arange(complex.n_vertices + 1))
    return order // 3, start


def _sheet_direction(x, v, t, chord, pts):
    """Sheet direction at ``v`` orthogonal to ``t`` from a quadratic profile fit.

    ``chord`` is the first-order estimate; ``pts`` are nearby sheet vertices.
    The profile ``b = alpha a + beta a^2`` in the frame (chord, t x chord)
    removes the O(h) bias of chord directions on curved sheets.
    """
    d = pts - x[v]
    d -= np.outer(d @ t, t)
    eb = np.cross(t, chord)
    a, b = d @ chord, d @ eb
    keep = a > 1e-3 * np.abs(a).max()
    if keep.sum() < 2:
        return chord
    A = np.stack([a[keep], a[keep] ** 2], axis=1)
    coef = np.linalg.lstsq(A, b[keep], rcond=None)[0]
    out = chord + coef[0] * eb
    return out / np.linalg.norm(out)


def check_triple_angles(complex: SurfaceComplex, junctions: JunctionGraph | None = None,
                        boundary_rings: int = 2, method: str = "fit",
                        core_radius: float | None = None) -> list:
    """Dihedral angles between consecutive sheets at every triple-curve vertex.

    Each sheet's conormal at a vertex starts from the average of the in-face
    conormals of its two faces on the adjacent junction edges, projected
    orthogonally to the local curve tangent.  With ``method="fit"`` it is
    refined by a quadratic profile fit over the sheet's two-ring, which
    removes the first-order bias of chords on curved sheets; ``"chord"``
    keeps the plain average.  Vertices within ``boundary_rings`` of the
    sphere boundary are skipped, as are vertices with ``|x| > core_radius``.
    """
    if method not in ("fit", "chord"):
        raise ValueError("method must be 'fit' or 'chord'")
    jg = junctions if junctions is not None else extract_junctions(complex)
    topo = complex.topology
    x = complex.vertices
    F = complex.faces
    edge_id = {tuple(e): i for i, e in enumerate(topo.edges.tolist())}
    bnd = np.flatnonzero(complex.boundary)
    skip = vertex_rings(complex, bnd, boundary_rings) if len(bnd) else np.zeros(len(x), bool)
    if core_radius is not None:
        skip = skip | (np.linalg.norm(x, axis=1) > core_radius)
    vf, vf_start = _vertex_faces(complex) if method == "fit" else (None, None)
    out = []
    for ci, curve in enumerate(jg.triple_curves):
        verts, angs, bal, arc = [], [], [], []
        ch = curve.vertices
        cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(x[ch], axis=0), axis=1))])
        for i, v, vp, vn in _curve_samples(complex, curve, skip):
            t = x[vn] - x[vp]
            t /= np.linalg.norm(t)
            conormals = {}
            for w in (vp, vn):
                e = edge_id[(min(v, w), max(v, w))]
                for f in topo.edge_faces(e):
                    face = F[f]
                    opp = int(face[(face != v) & (face != w)][0])
                    key = tuple(complex.phases[f])
                    conormals.setdefault(key, []).append(_conormal(x, v, w, opp))
            if method == "fit":
                ring1 = vf[vf_start[v]:vf_start[v + 1]]
            vecs = []
            for key in sorted(conormals):
                c = np.sum(conormals[key], axis=0)
                c -= (c @ t) * t
                c /= np.linalg.norm(c)
                if method == "fit":
                    ph = complex.phases
                    f1 = ring1[(ph[ring1, 0] == key[0]) & (ph[ring1, 1] == key[1])]
                    v1 = np.unique(F[f1])
                    f2 = np.concatenate([vf[vf_start[u]:vf_start[u + 1]] for u in v1])
                    f2 = f2[(ph[f2, 0] == key[0]) & (ph[f2, 1] == key[1])]
                    c = _sheet_direction(x, v, t, c, x[np.unique(F[f2])])
                vecs.append(c)
            vecs = np.array(vecs)
            ref = vecs[0]
            ref2 = np.cross(t, ref)
            phi = np.sort(np.mod(np.arctan2(vecs @ ref2, vecs @ ref), 2 * math.pi))
            gaps = np.diff(np.append(phi, phi[0] + 2 * math.pi))
            verts.append(v)
            angs.append(np.degrees(gaps))
            bal.append(float(np.linalg.norm(vecs.sum(axis=0))))
            arc.append(cum[i])
        out.append(TripleAngleStats(ci, np.array(verts, dtype=np.int64), np.array(arc),
                                    np.array(angs).reshape(-1, 3), np.array(bal)))
    return out


# ---------------------------------------------------------------------------
# quadruple points


@dataclass
class QuadrupleStats:
    vertex: int
    position: np.ndarray
    tangents: np.ndarray       # (4, 3) unit vectors leaving the point
    pair_angles: np.ndarray    # (6,) degrees
    balance: float

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.pair_angles - TETRA_ANGLE).max())


def fit_tangent(points: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Least-squares direction of a line through ``origin`` fitted to ``points``."""
    d = points - origin
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    t = vt[0]
    return t if float(d.sum(axis=0) @ t) >= 0 else -t


def tetrahedral_frame_stats(tangents: np.ndarray):
    t = np.asarray(tangents, dtype=float)
    t = t / np.linalg.norm(t, axis=1)[:, None]
    ang = [math.degrees(math.atan2(np.linalg.norm(np.cross(t[i], t[j])), float(t[i] @ t[j])))
           for i in range(4) for j in range(i + 1, 4)]
    return np.array(ang), float(np.linalg.norm(t.sum(axis=0)))


def check_quadruple(complex: SurfaceComplex, junctions: JunctionGraph | None = None,
                    j_fit: int = 4) -> list:
    jg = junctions if junctions is not None else extract_junctions(complex)
    x = complex.vertices
    out = []
    for q in jg.quadruple_points:
        tangents = []
        for ci in q.curves:
            ch = jg.triple_curves[ci].vertices
            if ch[0] != q.vertex:
                ch = ch[::-1]
            seg = ch[1:j_fit + 1]
            tangents.append(fit_tangent(x[seg], x[q.vertex]))
        tangents = np.array(tangents)
        ang, bal = tetrahedral_frame_stats(tangents)
        out.append(QuadrupleStats(int(q.vertex), x[q.vertex].copy(), tangents, ang, bal))
    return out


def _triangle_solid_angle(p, u1, u2):
    num = np.einsum("ij,ij->i", np.broadcast_to(p, u1.shape), np.cross(u1, u2))
    den = 1.0 + u1 @ p + np.einsum("ij,ij->i", u1, u2) + u2 @ p
    return 2.0 * np.arctan2(num, den)


def solid_angle(complex: SurfaceComplex, vertex: int, phase: int) -> float:
    """Solid angle of ``phase`` at ``vertex`` from the oriented link of its faces.

    Sums signed spherical triangles fanned from a fixed reference direction
    over the link edges bounding the phase and folds the total into
    ``(0, 4 pi]``.  Raises :class:`OpenLink` when those link edges do not
    close up.
    """
    f_all = np.flatnonzero((complex.faces == vertex).any(axis=1))
    ph = complex.phases[f_all]
    sel = (ph[:, 0] == phase) | (ph[:, 1] == phase)
    if not sel.any():
        return 0.0
    faces = complex.faces[f_all[sel]]
    sign = np.where(ph[sel, 1] == phase, 1.0, -1.0)
    # rotate each face so the vertex comes first; keep the cyclic order
    k = np.argmax(faces == vertex, axis=1)
    a = faces[np.arange(len(faces)), (k + 1) % 3]
    b = faces[np.arange(len(faces)), (k + 2) % 3]
    deg = np.zeros(complex.n_vertices, dtype=np.int64)
    np.add.at(deg, a, np.where(sign > 0, 1, -1))
    np.add.at(deg, b, np.where(sign > 0, -1, 1))
    if np.any(deg != 0):
        raise OpenLink(f"link of phase {phase} at vertex {vertex} is not closed")
    x0 = complex.vertices[vertex]
    u1 = complex.vertices[a] - x0
    u2 = complex.vertices[b] - x0
    u1 /= np.linalg.norm(u1, axis=1)[:, None]
    u2 /= np.linalg.norm(u2, axis=1)[:, None]
    # a reference direction away from every link point keeps the fan well conditioned
    cand = np.vstack([np.eye(3), -np.eye(3), np.array([[1.0, 2.0, 3.0]]) / math.sqrt(14.0)])
    pts = np.vstack([u1, u2])
    p = cand[int(np.argmax((pts @ cand.T).max(axis=0) * -1.0))]
    total = float(np.sum(sign * _triangle_solid_angle(p, u1, u2)))
    w = math.fmod(total, 4 * math.pi)
    if w <= 1e-12:
        w += 4 * math.pi
    return w


@dataclass
class SolidAngleStats:
    vertex: int
    phases: tuple
    omegas: np.ndarray

    @property
    def minimum(self) -> float:
        return float(self.omegas.min())


def check_solid_angles(complex: SurfaceComplex, junctions: JunctionGraph | None = None) -> list:
    jg = junctions if junctions is not None else extract_junctions(complex)
    out = []
    for q in jg.quadruple_points:
        om = np.array([solid_angle(complex, q.vertex, p) for p in q.phases])
        out.append(SolidAngleStats(int(q.vertex), tuple(q.phases), om))
    return out


# ---------------------------------------------------------------------------
# asymptotics


def point_set_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if not len(a) or not len(b):
        raise EmptyShell("Hausdorff distance of an empty point set")
    d1 = cKDTree(b).query(a)[0].max()
    d2 = cKDTree(a).query(b)[0].max()
    return float(max(d1, d2))


def surface_samples(complex: SurfaceComplex, per_edge: int = 4) -> np.ndarray:
    """Barycentric lattice points on every face (``per_edge`` intervals)."""
    n = per_edge
    bary = np.array([(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)],
                    dtype=float) / n
    P = complex.vertices[complex.faces]
    return np.einsum("bk,fkd->fbd", bary, P).reshape(-1, 3)


def default_shells(R: float) -> list:
    """Shells ``[r, r + R/16]`` for ``r = 3R/8, ..., 7R/8``."""
    return [(R * k / 8.0, R * k / 8.0 + R / 16.0) for k in range(3, 8)]


def check_hausdorff_asymptotics(complex: SurfaceComplex, spec: ConeSpec, shells,
                                per_edge: int = 8, trace_step: float | None = None) -> list:
    """Per shell, Hausdorff distance between the radially projected surface and the cone trace.

    Returns ``[(r_inner, r_outer, distance), ...]``.
    """
    pts = surface_samples(complex, per_edge)
    rad = np.linalg.norm(pts, axis=1)
    out = []
    for r0, r1 in shells:
        if not 0 < r0 < r1 or r1 > complex.truncation_radius * (1 + 1e-12):
            raise EmptyShell(f"shell [{r0}, {r1}] is not inside the truncation sphere")
        sel = (rad >= r0) & (rad <= r1)
        if not sel.any():
            raise EmptyShell(f"no surface points in shell [{r0}, {r1}]")
        s = pts[sel] / rad[sel][:, None]
        step = trace_step if trace_step is not None else 1e-3
        trace = sample_trace(spec, step)
        d_out = float(distance_to_arcs(s, spec, 1.0).max())
        d_in = float(cKDTree(s).query(trace)[0].max())
        out.append((float(r0), float(r1), max(d_out, d_in)))
    return out


def check_end_decay(complex: SurfaceComplex, spec: ConeSpec, annuli=None, spacing=None,
                    margin_deg: float = 30.0) -> list:
    """``sup |u|`` of every planar end over sliding annuli.

    Returns ``[(path_index, r_inner, r_outer, sup_u), ...]``; ends whose sheet
    is not graphical over an annulus report NaN.
    """
    R = complex.truncation_radius
    if annuli is None:
        annuli = [(R * k / 8.0, R * k / 8.0 + R / 4.0) for k in range(2, 7)]
    out = []
    for pi, _ in enumerate(spec.paths()):
        for r0, r1 in annuli:
            try:
                end = fit_planar_end(complex, spec, pi, r0, r1, spacing, margin_deg)
                sup = end.sup_abs_u
            except NotGraphical:
                sup = float("nan")
            out.append((pi, float(r0), float(r1), sup))
    return out


# ---------------------------------------------------------------------------
# persistence


def junction_core(complex: SurfaceComplex, core_radius: float,
                  junctions: JunctionGraph | None = None, per_edge: int = 8) -> np.ndarray:
    """Quadruple points and triple-curve samples inside the ball of ``core_radius``.

    Each triple-curve edge is sampled at ``per_edge`` points so that cores of
    differently sampled meshes end at the same radius.  Parts of triple curves
    outside the ball are treated as boundary-escaping tails.
    """
    jg = junctions if junctions is not None else extract_junctions(complex)
    x = complex.vertices
    parts = [x[[q.vertex for q in jg.quadruple_points]].reshape(-1, 3)]
    t = np.arange(per_edge)[:, None] / per_edge
    for c in jg.triple_curves:
        p = x[c.vertices]
        seg = p[:-1, None, :] + t[None] * (p[1:] - p[:-1])[:, None, :]
        parts += [seg.reshape(-1, 3), p[-1:]]
    pts = np.concatenate(parts)
    return pts[np.linalg.norm(pts, axis=1) <= core_radius * (1 + 1e-12)]


@dataclass
class PersistenceRecord:
    radii: list
    core_radius: float
    ball_radii: list            # chart radius of the smallest origin-centred ball holding the core
    displacements: list         # Hausdorff distance between consecutive cores
    counts: list                # (n_triple, n_quadruple) per radius
    quad_offsets: list          # max |quadruple point| per radius (NaN if none)
    delta1: float               # ball radius of the hyperbolic d* ball
    tolerance: float

    @property
    def empty(self) -> bool:
        return all(c == (0, 0) for c in self.counts)

    @property
    def passed(self) -> bool:
        if self.empty:
            return True
        if len(set(self.counts)) != 1:
            return False
        br = [b for b in self.ball_radii if not math.isnan(b)]
        stable = (max(br) - min(br) <= self.tolerance) if br else True
        moved = all(d <= self.tolerance for d in self.displacements if not math.isnan(d))
        quads = all(q <= self.tolerance for q in self.quad_offsets if not math.isnan(q))
        return stable and moved and quads


def check_persistence(complexes, tolerance: float | None = None,
                      profile: ToleranceProfile | None = None) -> PersistenceRecord:
    """Junction persistence across a radius schedule (ascending radii)."""
    complexes = list(complexes)
    if len(complexes) < 2:
        raise ValueError("persistence needs at least two radii")
    profile = profile or ToleranceProfile()
    radii = [c.truncation_radius for c in complexes]
    r1 = min(radii)
    tol = profile.persistence_tol(r1) if tolerance is None else tolerance
    # compare inside a ball that stays clear of the smallest sphere's rim
    h1 = float(np.median(complexes[int(np.argmin(radii))].edge_lengths()))
    rc = max(r1 - profile.boundary_rings * h1, 0.5 * r1)
    cores, ball, counts, quads = [], [], [], []
    for c in complexes:
        jg = extract_junctions(c)
        core = junction_core(c, rc, jg)
        cores.append(core)
        counts.append((jg.n_triple, jg.n_quadruple))
        ball.append(float(np.linalg.norm(euclid_to_ball(core), axis=1).max()) if len(core)
                    else float("nan"))
        if jg.n_quadruple:
            quads.append(float(max(np.linalg.norm(c.vertices[q.vertex])
                                   for q in jg.quadruple_points)))
        else:
            quads.append(float("nan"))
    disp = []
    for a, b in zip(cores, cores[1:]):
        disp.append(point_set_hausdorff(a, b) if len(a) and len(b) else float("nan"))
    return PersistenceRecord(radii, rc, ball, disp, counts, quads,
                             ball_distance_radius(D_STAR), tol)


# ---------------------------------------------------------------------------
# report


CHECK_ORDER = ("connected", "triple-angle", "balance", "quad-angle", "quad-balance",
               "solid-angle", "residual", "hausdorff", "end-decay", "persistence")


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    triple_angle_stats: list = field(default_factory=list)
    quad_angle_stats: list = field(default_factory=list)
    solid_angles: list = field(default_factory=list)
    residual: object = None
    end_decay: list = field(default_factory=list)
    hausdorff: list = field(default_factory=list)
    persistence: object = None
    connected: int = 0

    @property
    def passes(self) -> dict:
        return dict(self.checks)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_text(self) -> str:
        lines = ["report 1"]
        for name in sorted(self.checks, key=_check_key):
            lines.append(f"check {name} {'pass' if self.checks[name] else 'fail'}")
        for name, value in self.metrics.items():
            lines.append(f"metric {name} {_fmt(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VerificationReport":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "report 1":
            raise ParseError("expected header 'report 1'", 1)
        rep = cls()
        for lineno, raw in enumerate(lines[1:], start=2):
            tok = raw.split()
            if not tok:
                continue
            if tok[0] == "check" and len(tok) == 3 and tok[2] in ("pass", "fail"):
                rep.checks[tok[1]] = tok[2] == "pass"
            elif tok[0] == "metric" and len(tok) == 3:
                try:
                    rep.metrics[tok[1]] = float(tok[2])
                except ValueError:
                    raise ParseError(f"bad metric value {tok[2]!r}", lineno) from None
            else:
                raise ParseError(f"unrecognised report line {raw!r}", lineno)
        return rep

    def __eq__(self, other):
        if not isinstance(other, VerificationReport):
            return NotImplemented
        return self.to_text() == other.to_text()


def _check_key(name):
    return (CHECK_ORDER.index(name) if name in CHECK_ORDER else len(CHECK_ORDER), name)


def _fmt(v) -> str:
    return repr(float(v))


def read_report(path) -> VerificationReport:
    with open(path, encoding="utf-8") as fh:
        return VerificationReport.from_text(fh.read())


def write_report(report: VerificationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())


def full_report(complex: SurfaceComplex, spec: ConeSpec | None = None,
                profile: ToleranceProfile | None = None, h: float | None = None,
                shells=None, annuli=None, k_ring: int = 2, states=None) -> VerificationReport:
    """Run every applicable check and record pass/fail against ``profile``.

    ``h`` defaults to the median edge length.  ``states`` (complexes at
    increasing radii) enables the persistence check.  Checks that need the
    cone (Hausdorff, end decay) are skipped without ``spec``.
    """
    require_valid(complex)
    profile = profile or ToleranceProfile()
    h = float(np.median(complex.edge_lengths())) if h is None else float(h)
    R = complex.truncation_radius
    rep = VerificationReport()
    m = rep.metrics
    m["mesh.h"] = h
    m["mesh.radius"] = R
    m["mesh.vertices"] = complex.n_vertices
    m["mesh.faces"] = complex.n_faces

    comps = len(connected_components(complex))
    rep.connected = comps
    rep.checks["connected"] = comps == 1
    m["connected.components"] = comps

    jg = extract_junctions(complex)
    m["junctions.triple_curves"] = jg.n_triple
    m["junctions.quadruple_points"] = jg.n_quadruple

    core = profile.core_fraction * R if profile.core_fraction < 1.0 else None
    tri = check_triple_angles(complex, jg, profile.boundary_rings, core_radius=core)
    rep.triple_angle_stats = tri
    dev = max((s.max_deviation for s in tri), default=0.0)
    bal = max((s.max_balance for s in tri), default=0.0)
    m["triple.samples"] = sum(len(s.vertices) for s in tri)
    m["triple.max_deviation_deg"] = dev
    m["triple.max_balance"] = bal
    rep.checks["triple-angle"] = dev <= profile.triple_deg
    rep.checks["balance"] = bal <= profile.balance

    quad = check_quadruple(complex, jg, profile.j_fit)
    rep.quad_angle_stats = quad
    qdev = max((s.max_deviation for s in quad), default=0.0)
    qbal = max((s.balance for s in quad), default=0.0)
    m["quad.max_deviation_deg"] = qdev
    m["quad.max_balance"] = qbal
    rep.checks["quad-angle"] = qdev <= profile.quad_deg
    rep.checks["quad-balance"] = qbal <= profile.quad_balance

    try:
        sol = check_solid_angles(complex, jg)
        rep.solid_angles = sol
        smin = min((s.minimum for s in sol), default=float("nan"))
        rep.checks["solid-angle"] = all(s.minimum >= OMEGA_MIN - profile.solid_angle for s in sol)
    except OpenLink:
        smin = float("nan")
        rep.checks["solid-angle"] = False
    m["solid.min_sr"] = smin
    m["solid.omega_min_sr"] = OMEGA_MIN

    res = expander_residual(complex, k_ring)
    rep.residual = res
    m["residual.max"] = res.max_abs
    m["residual.rms"] = res.rms
    m["residual.tolerance"] = profile.residual_tol(h)
    rep.checks["residual"] = res.max_abs <= profile.residual_tol(h)

    if spec is not None:
        shells = default_shells(R) if shells is None else shells
        hd = check_hausdorff_asymptotics(complex, spec, shells)
        rep.hausdorff = hd
        for r0, r1, d in hd:
            m[f"hausdorff.r{r0!r}"] = d
        last = hd[-1]
        dec = all(b[2] < a[2] for a, b in zip(hd, hd[1:]))
        rep.checks["hausdorff"] = dec and last[2] <= profile.hausdorff_tol(h, last[0])

        decay = check_end_decay(complex, spec, annuli)
        rep.end_decay = decay
        ok = True
        for pi in sorted({d[0] for d in decay}):
            seq = [d[3] for d in decay if d[0] == pi]
            for (pj, r0, r1, s) in (d for d in decay if d[0] == pi):
                m[f"end{pi}.sup_u.r{r0!r}"] = s
            if any(math.isnan(s) for s in seq):
                ok = False
            elif any(b > a for a, b in zip(seq, seq[1:])) and max(seq) > 1e-12:
                ok = False
        rep.checks["end-decay"] = ok

    if states is not None:
        pr = check_persistence(states, profile=profile)
        rep.persistence = pr
        for R_j, b in zip(pr.radii, pr.ball_radii):
            m[f"persistence.ball_radius[chart={CHART}].R{R_j!r}"] = b
        m[f"persistence.delta1[chart={CHART}]"] = pr.delta1
        m["persistence.tolerance"] = pr.tolerance
        rep.checks["persistence"] = pr.passed

    m["density.sheet"] = DENSITY_SHEET
    m["density.triple"] = DENSITY_TRIPLE
    m["density.quadruple"] = DENSITY_QUADRUPLE
    return rep
