"""Asymptotic cones as geodesic networks on the unit sphere.

A cone ``C0`` is the union of planar sectors spanned by great-circle arcs.
Arcs are minor arcs between two non-antipodal nodes; nodes tagged as
helpers (``h``) only bend a long arc into pieces and must have degree 2
with straight continuation.  Every other node is a junction node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complex import ValidationOutcome, Violation
from .errors import ParseError

TOL_CONE_DEG = 0.1


@dataclass(frozen=True)
class Path:
    """Chain of arcs between junction nodes (or a closed helper-only cycle)."""

    nodes: tuple
    arcs: tuple
    left: int
    right: int
    closed: bool = False


class ConeSpec:
    def __init__(self, nodes, arcs, region_count, helper=None):
        self.nodes = np.array(nodes, dtype=float).reshape(-1, 3)
        self.arcs = np.array(arcs, dtype=np.int64).reshape(-1, 4)
        self.region_count = int(region_count)
        self.helper = (np.zeros(len(self.nodes), dtype=bool) if helper is None
                       else np.array(helper, dtype=bool).reshape(-1))
        for arr in (self.nodes, self.arcs, self.helper):
            arr.flags.writeable = False

    def __repr__(self):
        return (f"ConeSpec(n_nodes={len(self.nodes)}, n_arcs={len(self.arcs)}, "
                f"K={self.region_count})")

    def __eq__(self, other):
        if not isinstance(other, ConeSpec):
            return NotImplemented
        return (self.region_count == other.region_count
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.arcs, other.arcs)
                and np.array_equal(self.helper, other.helper))

    __hash__ = None

    def degree(self) -> np.ndarray:
        return np.bincount(self.arcs[:, :2].ravel(), minlength=len(self.nodes))

    def junction_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.helper)

    def arc_angle(self, i: int) -> float:
        a, b = self.nodes[self.arcs[i, 0]], self.nodes[self.arcs[i, 1]]
        return math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))

    def paths(self) -> list:
        """Merge arcs through helper nodes into maximal paths."""
        inc = {}
        for i, (a, b, _, _) in enumerate(self.arcs):
            inc.setdefault(int(a), []).append(i)
            inc.setdefault(int(b), []).append(i)
        used = np.zeros(len(self.arcs), dtype=bool)
        out = []

        def follow(start, arc):
            nodes, arcs = [start], []
            left = right = None
            cur = start
            while True:
                a, b, lab_l, lab_r = (int(x) for x in self.arcs[arc])
                used[arc] = True
                if a == cur:
                    nxt, l_, r_ = b, lab_l, lab_r
                else:
                    nxt, l_, r_ = a, lab_r, lab_l
                if left is None:
                    left, right = l_, r_
                arcs.append(arc)
                nodes.append(nxt)
                cur = nxt
                if not self.helper[cur] or cur == start:
                    break
                nxt_arcs = [j for j in inc[cur] if not used[j]]
                if not nxt_arcs:
                    break
                arc = nxt_arcs[0]
            return Path(tuple(nodes), tuple(arcs), left, right, closed=(nodes[-1] == start and self.helper[start]))

        for n in self.junction_nodes():
            for arc in inc.get(int(n), []):
                if not used[arc]:
                    out.append(follow(int(n), arc))
        for arc in range(len(self.arcs)):
            if not used[arc]:
                out.append(follow(int(self.arcs[arc, 0]), arc))
        return out


# ---------------------------------------------------------------------------
# geometry helpers


def _tangent(at: np.ndarray, toward: np.ndarray) -> np.ndarray:
    t = toward - (toward @ at) * at
    return t / np.linalg.norm(t)


def slerp(a: np.ndarray, b: np.ndarray, ts) -> np.ndarray:
    """Points on the minor great-circle arc from ``a`` to ``b`` at fractions ``ts``."""
    ts = np.asarray(ts, dtype=float)
    theta = math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))
    v = _tangent(a, b)
    ang = ts * theta
    pts = np.cos(ang)[:, None] * a + np.sin(ang)[:, None] * v
    pts[ts == 0.0] = a
    pts[ts == 1.0] = b
    return pts


def _node_frame(u: np.ndarray):
    e1 = np.cross(u, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(u, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def _outgoing(spec: ConeSpec):
    """Per node: list of (angle, arc id, other node) sorted counterclockwise seen from outside."""
    out = {}
    for i, (a, b, _, _) in enumerate(spec.arcs):
        for x, y in ((int(a), int(b)), (int(b), int(a))):
            u, w = spec.nodes[x], spec.nodes[y]
            e1, e2 = _node_frame(u)
            t = _tangent(u, w)
            out.setdefault(x, []).append((math.atan2(t @ e2, t @ e1), i, y))
    for x in out:
        out[x].sort()
    return out


def node_angles(spec: ConeSpec) -> dict:
    """Consecutive angles (degrees) between arcs at every node."""
    res = {}
    for n, lst in _outgoing(spec).items():
        angs = [a for a, _, _ in lst]
        diffs = [math.degrees((angs[(k + 1) % len(angs)] - angs[k]) % (2 * math.pi))
                 for k in range(len(angs))]
        if len(angs) == 1:
            diffs = [360.0]
        res[n] = diffs
    return res


def regions(spec: ConeSpec) -> list:
    """Faces of the spherical network as lists of darts ``(arc, from, to)``.

    Each face is traced with the region on the left of every dart.
    """
    out_arcs = _outgoing(spec)
    seen = set()
    faces = []
    for i, (a, b, _, _) in enumerate(spec.arcs):
        for dart in ((i, int(a), int(b)), (i, int(b), int(a))):
            if dart in seen:
                continue
            cyc = []
            d = dart
            while d not in seen:
                seen.add(d)
                cyc.append(d)
                arc, u, v = d
                lst = out_arcs[v]
                back = next(k for k, (_, j, w) in enumerate(lst) if j == arc and w == u)
                _, j, w = lst[(back - 1) % len(lst)]
                d = (j, v, w)
            faces.append(cyc)
    return faces


def dart_left_label(spec: ConeSpec, dart) -> int:
    arc, u, _ = dart
    a, _, left, right = spec.arcs[arc]
    return int(left) if int(a) == u else int(right)


# ---------------------------------------------------------------------------
# validation


def validate_cone(spec: ConeSpec, tol_deg: float = TOL_CONE_DEG,
                  allow_nonregular: bool = False) -> ValidationOutcome:
    out = ValidationOutcome()
    bad = out.violations.append
    N = len(spec.nodes)
    norms = np.linalg.norm(spec.nodes, axis=1)
    for n in np.flatnonzero(np.abs(norms - 1.0) > 1e-12):
        bad(Violation("node_norm", f"node {n + 1} has norm {norms[n]!r}", (int(n),)))
    if len(spec.arcs) == 0:
        bad(Violation("empty", "cone has no arcs"))
        return out
    if spec.arcs[:, :2].min() < 0 or spec.arcs[:, :2].max() >= N:
        bad(Violation("arc_node", "arc references a node out of range"))
        return out
    for i, (a, b, l, r) in enumerate(spec.arcs):
        if a == b:
            bad(Violation("arc_degenerate", f"arc {i + 1} starts and ends at node {a + 1}", (i,)))
            continue
        ang = spec.arc_angle(i)
        if ang > math.pi - 1e-9 or ang < 1e-12:
            bad(Violation("arc_ambiguous",
                          f"arc {i + 1} spans {math.degrees(ang):.6f} deg; arcs must be minor "
                          "arcs between non-antipodal nodes (add a helper node)", (i,)))
        if l == r:
            bad(Violation("arc_labels", f"arc {i + 1} has equal left/right labels", (i,)))
        if min(l, r) < 0 or max(l, r) > spec.region_count:
            bad(Violation("arc_labels", f"arc {i + 1} label exceeds K={spec.region_count}", (i,)))
    if out.violations:
        return out

    # connectivity
    parent = list(range(N))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _, _ in spec.arcs:
        parent[find(int(a))] = find(int(b))
    used_nodes = np.unique(spec.arcs[:, :2])
    if len({find(int(n)) for n in used_nodes}) > 1:
        bad(Violation("disconnected", "the arc network is not connected"))

    deg = spec.degree()
    angles = node_angles(spec)
    out.details["node_angles"] = {}
    for n in range(N):
        if deg[n] == 0:
            bad(Violation("isolated_node", f"node {n + 1} has no arcs", (n,)))
            continue
        angs = angles[n]
        if spec.helper[n]:
            if deg[n] != 2 or any(abs(a - 180.0) > tol_deg for a in angs):
                bad(Violation("helper_node",
                              f"helper node {n + 1} must continue one great circle "
                              f"(degree {deg[n]}, angles {[round(a, 4) for a in angs]})", (n,)))
            continue
        out.details["node_angles"][n] = angs
        if deg[n] != 3:
            msg = f"node {n + 1} with {deg[n]} incident arcs"
            if allow_nonregular:
                out.notes.append("non-regular " + msg)
            else:
                bad(Violation("node_degree", msg, (n,)))
            continue
        dev = max(abs(a - 120.0) for a in angs)
        if dev > tol_deg:
            bad(Violation("node_angle",
                          f"node {n + 1} angles {[round(a, 4) for a in angs]} deviate "
                          f"{dev:.4f} deg from 120", (n,)))
    if not out.details["node_angles"]:
        out.notes.append("no triple points")

    faces = regions(spec)
    out.details["regions"] = []
    labels_seen = set()
    for cyc in faces:
        labs = {dart_left_label(spec, d) for d in cyc}
        corners = sum(1 for _, u, _ in cyc if not spec.helper[u])
        out.details["regions"].append((sorted(labs), corners))
        if len(labs) != 1:
            bad(Violation("region_labels",
                          f"region bounded by arcs {sorted({d[0] + 1 for d in cyc})} carries "
                          f"labels {sorted(labs)}"))
            continue
        lab = labs.pop()
        if lab in labels_seen:
            bad(Violation("region_labels", f"label {lab} is used by more than one region"))
        labels_seen.add(lab)
        if corners == 0:
            continue
        if not 2 <= corners <= 5:
            bad(Violation("region_arcs", f"region {lab} is bounded by {corners} arcs (2..5)"))
    return out


# ---------------------------------------------------------------------------
# traces


def boundary_trace(spec: ConeSpec, R: float, h: float) -> list:
    """Sample every arc at angular step <= ``h`` and scale by ``R``."""
    if R <= 0 or h <= 0:
        raise ValueError("R and h must be positive")
    out = []
    for i, (a, b, _, _) in enumerate(spec.arcs):
        n = max(1, math.ceil(spec.arc_angle(i) / h - 1e-12))
        out.append(R * slerp(spec.nodes[a], spec.nodes[b], np.arange(n + 1) / n))
    return out


def distance_to_arcs(points: np.ndarray, spec: ConeSpec, R: float = 1.0) -> np.ndarray:
    """Euclidean distance from each point to the trace ``R * (C0 cap S^2)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    best = np.full(len(pts), np.inf)
    for a_id, b_id, _, _ in spec.arcs:
        a, b = spec.nodes[a_id], spec.nodes[b_id]
        n = np.cross(a, b)
        n /= np.linalg.norm(n)
        v = np.cross(n, a)
        theta = math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))
        q = pts - np.outer(pts @ n, n)
        phi = np.arctan2(q @ v, q @ a)
        inside = (phi >= 0) & (phi <= theta)
        on_arc = R * (np.cos(phi)[:, None] * a + np.sin(phi)[:, None] * v)
        d_arc = np.linalg.norm(pts - on_arc, axis=1)
        d_end = np.minimum(np.linalg.norm(pts - R * a, axis=1), np.linalg.norm(pts - R * b, axis=1))
        best = np.minimum(best, np.where(inside, np.minimum(d_arc, d_end), d_end))
    return best


def sample_trace(spec: ConeSpec, step: float) -> np.ndarray:
    """Dense point sample of the unit-sphere trace, angular spacing <= ``step``."""
    return np.unique(np.vstack(boundary_trace(spec, 1.0, step)), axis=0)


# ---------------------------------------------------------------------------
# conespec text format


def format_cone(spec: ConeSpec) -> str:
    lines = ["conespec 1", f"k {spec.region_count}"]
    for u, hflag in zip(spec.nodes, spec.helper):
        lines.append(f"n {float(u[0])!r} {float(u[1])!r} {float(u[2])!r}" + (" h" if hflag else ""))
    for a, b, l, r in spec.arcs:
        lines.append(f"a {a + 1} {b + 1} {l} {r}")
    return "\n".join(lines) + "\n"


def parse_cone(text: str) -> ConeSpec:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "conespec 1":
        raise ParseError("expected header 'conespec 1'", 1)
    K = None
    nodes, helper, arcs = [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "k" and len(tok) == 2:
                K = int(tok[1])
            elif tok[0] == "n" and len(tok) in (4, 5):
                if len(tok) == 5 and tok[4] != "h":
                    raise ParseError(f"unknown node tag {tok[4]!r}", lineno)
                nodes.append([float(t) for t in tok[1:4]])
                helper.append(len(tok) == 5)
            elif tok[0] == "a" and len(tok) == 5:
                a, b = int(tok[1]), int(tok[2])
                if a < 1 or b < 1:
                    raise ParseError("arc node indices are 1-based; free endpoints are not "
                                     "allowed", lineno)
                arcs.append([a - 1, b - 1, int(tok[3]), int(tok[4])])
            else:
                raise ParseError(f"unrecognised line {raw!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad number in {raw!r}", lineno) from None
    if K is None:
        raise ParseError("missing 'k' line")
    return ConeSpec(np.array(nodes).reshape(-1, 3), np.array(arcs, dtype=np.int64).reshape(-1, 4),
                    K, helper)


def read_cone(path) -> ConeSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_cone(fh.read())


def write_cone(spec: ConeSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_cone(spec))


# ---------------------------------------------------------------------------
# stock cones


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def plane_cone(normal=(0.0, 0.0, 1.0)) -> ConeSpec:
    """Single great circle split by four helper nodes; phase 1 below, 2 above."""
    n = _unit(normal)
    e1, e2 = _node_frame(n)
    nodes = [e1, e2, -e1, -e2]
    # walking e1 -> e2 counterclockwise about n: left side is +n
    arcs = [[0, 1, 2, 1], [1, 2, 2, 1], [2, 3, 2, 1], [3, 0, 2, 1]]
    return ConeSpec(nodes, arcs, 2, [True] * 4)


def y_cone(axis=(0.0, 0.0, 1.0), phase0: float = 0.0) -> ConeSpec:
    """Three half-great-circles between antipodal nodes, 120 degrees apart."""
    z = _unit(axis)
    e1, e2 = _node_frame(z)
    nodes = [z, -z]
    helper = [False, False]
    arcs = []
    for k in range(3):
        phi = phase0 + 2 * math.pi * k / 3
        nodes.append(math.cos(phi) * e1 + math.sin(phi) * e2)
        helper.append(True)
    for k in range(3):
        h = 2 + k
        # sheet k sits between region k+1 (clockwise side) and region (k+1)%3+1
        left, right = (k % 3) + 1, ((k - 1) % 3) + 1
        arcs.append([0, h, left, right])
        arcs.append([h, 1, left, right])
    return ConeSpec(np.array(nodes), arcs, 3, helper)


def tetra_cone() -> ConeSpec:
    """Cone over the edges of a regular spherical tetrahedron (4 regions)."""
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3)
    # region i is the spherical triangle opposite vertex i (label i+1)
    arcs = []
    for i in range(4):
        for j in range(i + 1, 4):
            others = [k for k in range(4) if k not in (i, j)]
            # region opposite vertex k contains the arc iff k != i, j: both others
            k1, k2 = others
            a, b = verts[i], verts[j]
            # left of a->b is the side of a x b
            side = np.cross(a, b)
            # the region opposite k1 lies on the side of the remaining vertex k2
            left = k1 + 1 if verts[k2] @ side > 0 else k2 + 1
            right = k2 + 1 if left == k1 + 1 else k1 + 1
            arcs.append([i, j, left, right])
    return ConeSpec(verts, arcs, 4)


def cross_cone(axis=(0.0, 1.0, 0.0)) -> ConeSpec:
    """Two orthogonal planes meeting along ``axis`` (non-regular: 4 arcs per node)."""
    ell = _unit(axis)
    e1, e2 = _node_frame(ell)
    dirs = [e1, e2, -e1, -e2]
    nodes = [ell, -ell] + dirs
    helper = [False, False] + [True] * 4
    arcs = []
    for k in range(4):
        # half-plane k separates the region before it from the one after it,
        # counted counterclockwise about ell; the region after is on the left
        before, after = ((k - 1) % 4) + 1, (k % 4) + 1
        arcs.append([0, 2 + k, after, before])
        arcs.append([2 + k, 1, after, before])
    return ConeSpec(np.array(nodes), arcs, 4, helper)


STOCK_CONES = {"plane": plane_cone, "y": y_cone, "tetra": tetra_cone, "cross": cross_cone}
