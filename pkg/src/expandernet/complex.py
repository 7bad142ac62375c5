"""Phase-labelled non-manifold triangle complexes.

A :class:`SurfaceComplex` stores vertex positions, triangles and, per
triangle, the ordered pair of phases ``(a, b)`` (``a < b``) it separates.
The triangle normal ``(v1 - v0) x (v2 - v0)`` points from phase ``a`` into
phase ``b``.  Junctions are never stored: they are derived from edge
incidence by :func:`extract_junctions`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import InvalidComplex, JunctionDegreeError, ParseError, RefinementOverflow

EPS_AREA_REL = 1e-12
EPS_BDRY_REL = 1e-9


@dataclass(frozen=True)
class FaceRecord:
    vertex_ids: tuple
    phase_pair: tuple


class Topology:
    """Edge structure of a face list; shared by complexes with equal faces."""

    def __init__(self, faces: np.ndarray, n_vertices: int):
        self.n_vertices = n_vertices
        F = len(faces)
        corners = np.stack(
            [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=1
        ).reshape(-1, 2)
        key = np.sort(corners, axis=1)
        if F:
            edges, inverse = np.unique(key, axis=0, return_inverse=True)
        else:
            edges, inverse = np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
        inverse = inverse.reshape(-1)
        #: (E, 2) sorted vertex pairs
        self.edges = edges
        #: (F, 3) edge id of face side (v0v1, v1v2, v2v0)
        self.face_edges = inverse.reshape(F, 3)
        #: +1 if the face traverses the edge from lower to higher vertex id
        self.face_edge_sign = np.where(corners[:, 0] < corners[:, 1], 1, -1).reshape(F, 3)
        self.edge_face_count = np.bincount(inverse, minlength=len(edges))
        order = np.argsort(inverse, kind="stable")
        self._edge_faces_flat = order // 3
        self._edge_faces_ptr = np.concatenate([[0], np.cumsum(self.edge_face_count)])

    def edge_faces(self, e: int) -> np.ndarray:
        return self._edge_faces_flat[self._edge_faces_ptr[e]:self._edge_faces_ptr[e + 1]]

    @cached_property
    def triple_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_face_count == 3)


class SurfaceComplex:
    """Immutable labelled triangle complex truncated to the ball of radius ``R``."""

    def __init__(self, vertices, faces, phases, phase_count, boundary, truncation_radius,
                 _topology=None):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        self.phases = np.array(phases, dtype=np.int64).reshape(-1, 2)
        self.phase_count = int(phase_count)
        self.boundary = np.array(boundary, dtype=bool).reshape(-1)
        self.truncation_radius = float(truncation_radius)
        for arr in (self.vertices, self.faces, self.phases, self.boundary):
            arr.flags.writeable = False
        if len(self.boundary) != len(self.vertices):
            raise ValueError("boundary flag array must have one entry per vertex")
        if len(self.phases) != len(self.faces):
            raise ValueError("phases array must have one row per face")
        self._topology = _topology

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def topology(self) -> Topology:
        if self._topology is None:
            self._topology = Topology(self.faces, self.n_vertices)
        return self._topology

    def face_record(self, i: int) -> FaceRecord:
        return FaceRecord(tuple(int(v) for v in self.faces[i]),
                          tuple(int(p) for p in self.phases[i]))

    def with_vertices(self, vertices) -> "SurfaceComplex":
        """Same combinatorics, new positions."""
        return SurfaceComplex(vertices, self.faces, self.phases, self.phase_count,
                              self.boundary, self.truncation_radius, _topology=self._topology)

    def scaled(self, factor: float) -> "SurfaceComplex":
        return SurfaceComplex(self.vertices * factor, self.faces, self.phases,
                              self.phase_count, self.boundary,
                              self.truncation_radius * factor, _topology=self._topology)

    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def edge_lengths(self) -> np.ndarray:
        e = self.topology.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def __eq__(self, other):
        if not isinstance(other, SurfaceComplex):
            return NotImplemented
        return (self.phase_count == other.phase_count
                and self.truncation_radius == other.truncation_radius
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces)
                and np.array_equal(self.phases, other.phases)
                and np.array_equal(self.boundary, other.boundary))

    __hash__ = None

    def __repr__(self):
        return (f"SurfaceComplex(n_vertices={self.n_vertices}, n_faces={self.n_faces}, "
                f"K={self.phase_count}, R={self.truncation_radius!r})")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    ids: tuple = ()


@dataclass
class ValidationOutcome:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def messages(self) -> list:
        return [v.message for v in self.violations]


def validate(complex: SurfaceComplex) -> ValidationOutcome:
    """Check every structural invariant and return all violations found."""
    out = ValidationOutcome()
    bad = out.violations.append
    V, F = complex.n_vertices, complex.n_faces
    K, R = complex.phase_count, complex.truncation_radius
    faces, phases = complex.faces, complex.phases

    if R <= 0:
        bad(Violation("radius", f"truncation radius must be positive, got {R!r}"))
    if K < 1:
        bad(Violation("phase_count", f"phase count must be >= 1, got {K}"))
    if F == 0:
        bad(Violation("empty", "complex has no faces"))
        return out

    oob = np.flatnonzero(((faces < 0) | (faces >= V)).any(axis=1))
    for f in oob:
        bad(Violation("vertex_range", f"face {f} references a vertex out of range", (int(f),)))
    if len(oob):
        return out
    dup = np.flatnonzero((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                         | (faces[:, 0] == faces[:, 2]))
    for f in dup:
        bad(Violation("repeated_vertex", f"face {f} repeats a vertex", (int(f),)))
    for f in np.flatnonzero(phases[:, 0] >= phases[:, 1]):
        bad(Violation("phase_order",
                      f"face {f} phase pair {tuple(phases[f].tolist())} is not strictly increasing",
                      (int(f),)))
    for f in np.flatnonzero((phases < 0).any(axis=1) | (phases > K).any(axis=1)):
        bad(Violation("phase_range", f"face {f} phase label exceeds K={K}", (int(f),)))
    if len(dup):
        return out

    # degenerate faces
    span = complex.vertices.max(axis=0) - complex.vertices.min(axis=0)
    eps_area = EPS_AREA_REL * float(span @ span)
    areas = complex.face_areas()
    for f in np.flatnonzero(areas < eps_area):
        bad(Violation("degenerate_face", f"face {f} has area {areas[f]:.3e} < {eps_area:.3e}",
                      (int(f),)))

    # boundary vertices on the sphere
    radii = np.linalg.norm(complex.vertices, axis=1)
    off = np.flatnonzero(complex.boundary & (np.abs(radii - R) > EPS_BDRY_REL * R))
    for v in off:
        bad(Violation("boundary_radius",
                      f"boundary vertex {v} has |v|={float(radii[v])!r}, expected {R!r}", (int(v),)))

    topo = complex.topology
    count = topo.edge_face_count
    for e in np.flatnonzero(count >= 4):
        a, b = topo.edges[e]
        bad(Violation("edge_incidence",
                      f"edge ({a},{b}) has {count[e]} incident faces (at most 3 allowed)",
                      (int(a), int(b))))
    for e in np.flatnonzero(count == 1):
        a, b = topo.edges[e]
        if not (complex.boundary[a] and complex.boundary[b]):
            bad(Violation("open_edge",
                          f"edge ({a},{b}) has one incident face but is not on the sphere",
                          (int(a), int(b))))
    for e in np.flatnonzero(count == 2):
        fa, fb = topo.edge_faces(e)
        a, b = topo.edges[e]
        if tuple(phases[fa]) != tuple(phases[fb]):
            bad(Violation("phase_mismatch",
                          f"interior 2-face edge ({a},{b}) with mismatched phase_pair "
                          f"{tuple(phases[fa].tolist())} vs {tuple(phases[fb].tolist())}", (int(fa), int(fb))))
            continue
        sa = _edge_sign(topo, fa, e)
        sb = _edge_sign(topo, fb, e)
        if sa == sb:
            bad(Violation("orientation",
                          f"faces {fa} and {fb} traverse edge ({a},{b}) in the same direction",
                          (int(fa), int(fb))))
    for e in topo.triple_edges:
        fs = topo.edge_faces(e)
        pairs = {tuple(phases[f].tolist()) for f in fs}
        labels = set(np.ravel([phases[f] for f in fs]).tolist())
        expected = {(i, j) for i in labels for j in labels if i < j}
        if len(labels) != 3 or pairs != expected:
            a, b = topo.edges[e]
            bad(Violation("triple_phases",
                          f"triple edge ({a},{b}) phase pairs {sorted(pairs)} are not the three "
                          f"pairs of three distinct phases", tuple(int(f) for f in fs)))
    return out


def _edge_sign(topo: Topology, f: int, e: int) -> int:
    k = int(np.flatnonzero(topo.face_edges[f] == e)[0])
    return int(topo.face_edge_sign[f, k])


def require_valid(complex: SurfaceComplex) -> None:
    outcome = validate(complex)
    if not outcome.ok:
        raise InvalidComplex(outcome)


# ---------------------------------------------------------------------------
# junctions


@dataclass
class TripleCurve:
    vertices: np.ndarray
    phases: tuple
    closed: bool = False


@dataclass
class QuadruplePoint:
    vertex: int
    phases: tuple
    curves: tuple


@dataclass
class JunctionGraph:
    triple_curves: list
    quadruple_points: list
    #: per curve, whether (start, end) lie on the truncation sphere
    endpoint_map: list

    @property
    def n_triple(self) -> int:
        return len(self.triple_curves)

    @property
    def n_quadruple(self) -> int:
        return len(self.quadruple_points)

    def junction_vertices(self) -> np.ndarray:
        vs = [c.vertices for c in self.triple_curves]
        vs.append(np.array([q.vertex for q in self.quadruple_points], dtype=np.int64))
        return np.unique(np.concatenate(vs)) if vs else np.zeros(0, dtype=np.int64)


def extract_junctions(complex: SurfaceComplex) -> JunctionGraph:
    """Trace triple curves through 3-face edges and locate quadruple points."""
    topo = complex.topology
    tedges = topo.edges[topo.triple_edges]
    V = complex.n_vertices
    germs = np.bincount(tedges.ravel(), minlength=V)
    interior = ~complex.boundary
    wrong = np.flatnonzero(interior & ~np.isin(germs, (0, 2, 4)))
    if len(wrong):
        v = int(wrong[0])
        raise JunctionDegreeError(
            f"vertex {v} joins {germs[v]} triple-curve germs (allowed: 0, 2 or 4)")

    adj = {}
    for k, (a, b) in enumerate(tedges):
        adj.setdefault(int(a), []).append((int(b), k))
        adj.setdefault(int(b), []).append((int(a), k))
    quad_vertices = np.flatnonzero(interior & (germs == 4))
    terminal = set(quad_vertices.tolist()) | set(np.flatnonzero(complex.boundary & (germs > 0)).tolist())
    used = np.zeros(len(tedges), dtype=bool)
    curves = []

    def walk(start, nbr, k):
        chain = [start, nbr]
        used[k] = True
        prev, cur = start, nbr
        while cur not in terminal and cur != start:
            step = [(w, j) for w, j in adj[cur] if not used[j]]
            if not step:
                break
            w, j = step[0]
            used[j] = True
            prev, cur = cur, w
            chain.append(cur)
        return chain

    for t in sorted(terminal):
        for nbr, k in sorted(adj.get(t, [])):
            if not used[k]:
                curves.append((walk(t, nbr, k), False))
    # closed loops without terminals
    for k in range(len(tedges)):
        if not used[k]:
            a, b = (int(x) for x in tedges[k])
            chain = walk(a, b, k)
            curves.append((chain[:-1] if chain[-1] == chain[0] else chain, True))

    triple_edge_ids = topo.triple_edges
    edge_lookup = {(int(a), int(b)): int(e) for e, (a, b) in zip(triple_edge_ids, tedges)}
    out_curves, endpoint_map = [], []
    for chain, closed in curves:
        a, b = sorted(chain[:2])
        e = edge_lookup[(a, b)]
        labels = sorted(set(complex.phases[topo.edge_faces(e)].ravel().tolist()))
        out_curves.append(TripleCurve(np.array(chain, dtype=np.int64), tuple(labels), closed))
        endpoint_map.append((bool(complex.boundary[chain[0]]) and not closed,
                             bool(complex.boundary[chain[-1]]) and not closed))

    quads = []
    for q in quad_vertices:
        q = int(q)
        incident = tuple(i for i, c in enumerate(out_curves)
                         if not c.closed and (c.vertices[0] == q or c.vertices[-1] == q))
        fmask = (complex.faces == q).any(axis=1)
        sheets = {tuple(p) for p in complex.phases[fmask]}
        labels = tuple(sorted(set(complex.phases[fmask].ravel().tolist())))
        if len(incident) != 4 or len(sheets) != 6:
            raise JunctionDegreeError(
                f"quadruple point {q} has {len(incident)} incident triple curves and "
                f"{len(sheets)} incident sheets (expected 4 and 6)")
        quads.append(QuadruplePoint(q, labels, incident))
    return JunctionGraph(out_curves, quads, endpoint_map)


def connected_components(complex: SurfaceComplex) -> list:
    """Partition faces into edge-connected components (junction edges join all faces)."""
    topo = complex.topology
    F, E = complex.n_faces, len(topo.edges)
    if F == 0:
        return []
    rows = np.repeat(np.arange(F), 3)
    cols = F + topo.face_edges.ravel()
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(F + E, F + E))
    _, labels = _cc(g, directed=False)
    face_labels = labels[:F]
    comps = {}
    for f, lab in enumerate(face_labels):
        comps.setdefault(int(lab), []).append(f)
    return sorted((np.array(v, dtype=np.int64) for v in comps.values()), key=lambda a: a[0])


def vertex_classes(complex: SurfaceComplex) -> np.ndarray:
    """Per-vertex class: 0 interior manifold, 1 triple curve, 2 quadruple point, 3 boundary."""
    topo = complex.topology
    germs = np.bincount(topo.edges[topo.triple_edges].ravel(), minlength=complex.n_vertices)
    cls = np.zeros(complex.n_vertices, dtype=np.int8)
    cls[germs == 2] = 1
    cls[germs >= 4] = 2
    cls[complex.boundary] = 3
    return cls


def vertex_rings(complex: SurfaceComplex, seeds: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of vertices within ``k`` edge hops of ``seeds``."""
    mask = np.zeros(complex.n_vertices, dtype=bool)
    mask[np.asarray(seeds, dtype=np.int64)] = True
    edges = complex.topology.edges
    for _ in range(k):
        hit = mask[edges[:, 0]] | mask[edges[:, 1]]
        mask[edges[hit].ravel()] = True
    return mask


# ---------------------------------------------------------------------------
# refinement


def refine(complex: SurfaceComplex, target_edge_length: float, max_faces: int = 4_000_000):
    """Midpoint-subdivide until every edge is at most ``1.5 * target_edge_length``."""
    require_valid(complex)
    h = float(target_edge_length)
    if h <= 0:
        raise ValueError("target edge length must be positive")
    cur = complex
    while cur.edge_lengths().max() > 1.5 * h:
        if 4 * cur.n_faces > max_faces:
            raise RefinementOverflow(
                f"refinement would create {4 * cur.n_faces} faces (cap {max_faces})")
        cur = _subdivide(cur)
    return cur


def _subdivide(c: SurfaceComplex) -> SurfaceComplex:
    topo = c.topology
    V = c.n_vertices
    e = topo.edges
    mid = 0.5 * (c.vertices[e[:, 0]] + c.vertices[e[:, 1]])
    on_sphere = (topo.edge_face_count == 1) & c.boundary[e[:, 0]] & c.boundary[e[:, 1]]
    R = c.truncation_radius
    mid[on_sphere] *= (R / np.linalg.norm(mid[on_sphere], axis=1))[:, None]
    verts = np.vstack([c.vertices, mid])
    bnd = np.concatenate([c.boundary, on_sphere])
    f = c.faces
    m = V + topo.face_edges  # m[:,0] on v0v1, m[:,1] on v1v2, m[:,2] on v2v0
    new = np.stack([
        np.stack([f[:, 0], m[:, 0], m[:, 2]], axis=1),
        np.stack([f[:, 1], m[:, 1], m[:, 0]], axis=1),
        np.stack([f[:, 2], m[:, 2], m[:, 1]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ], axis=1).reshape(-1, 3)
    phases = np.repeat(c.phases, 4, axis=0)
    return SurfaceComplex(verts, new, phases, c.phase_count, bnd, R)


# ---------------------------------------------------------------------------
# meshnet text format


def _fmt(x: float) -> str:
    return repr(float(x))


def format_mesh(complex: SurfaceComplex) -> str:
    lines = ["meshnet 1", f"k {complex.phase_count}", f"r {_fmt(complex.truncation_radius)}"]
    for p, b in zip(complex.vertices, complex.boundary):
        lines.append(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} {'b' if b else 'i'}")
    for f, ph in zip(complex.faces, complex.phases):
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1} {ph[0]} {ph[1]}")
    return "\n".join(lines) + "\n"


def parse_mesh(text: str) -> SurfaceComplex:
    verts, flags, faces, phases = [], [], [], []
    K = R = None
    lines = text.splitlines()
    if not lines or lines[0].strip() != "meshnet 1":
        raise ParseError("expected header 'meshnet 1'", 1)
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "k" and len(tok) == 2:
                K = int(tok[1])
            elif tok[0] == "r" and len(tok) == 2:
                R = float(tok[1])
            elif tok[0] == "v" and len(tok) == 5 and tok[4] in ("i", "b"):
                verts.append([float(t) for t in tok[1:4]])
                flags.append(tok[4] == "b")
            elif tok[0] == "f" and len(tok) == 6:
                ids = [int(t) - 1 for t in tok[1:4]]
                if min(ids) < 0:
                    raise ParseError("vertex indices are 1-based", lineno)
                faces.append(ids)
                phases.append([int(tok[4]), int(tok[5])])
            else:
                raise ParseError(f"unrecognised line {raw!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad number in {raw!r}", lineno) from None
    if K is None:
        raise ParseError("missing 'k' line")
    if R is None:
        raise ParseError("missing 'r' line")
    return SurfaceComplex(np.array(verts, dtype=float).reshape(-1, 3),
                          np.array(faces, dtype=np.int64).reshape(-1, 3),
                          np.array(phases, dtype=np.int64).reshape(-1, 2), K, flags, R)


def read_mesh(path) -> SurfaceComplex:
    with open(path, encoding="utf-8") as fh:
        return parse_mesh(fh.read())


def write_mesh(complex: SurfaceComplex, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_mesh(complex))


def merge(parts: Iterable[SurfaceComplex]) -> SurfaceComplex:
    """Disjoint union of complexes sharing K and R."""
    parts = list(parts)
    verts, faces, phases, bnd = [], [], [], []
    off = 0
    for p in parts:
        verts.append(p.vertices)
        faces.append(p.faces + off)
        phases.append(p.phases)
        bnd.append(p.boundary)
        off += p.n_vertices
    return SurfaceComplex(np.vstack(verts), np.vstack(faces), np.vstack(phases),
                          max(p.phase_count for p in parts), np.concatenate(bnd),
                          parts[0].truncation_radius)
