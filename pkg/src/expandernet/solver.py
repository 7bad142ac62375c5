"""Constrained descent on the weighted area and continuation in the truncation radius.

Each vertex moves only in the directions that change the surface as a set:

* interior manifold vertices along their area-weighted normal,
* triple-curve vertices in the plane orthogonal to the curve tangent,
* quadruple points freely,
* sphere-boundary vertices not at all (their arc is fixed data).

Tangential motions only redistribute the quadrature points of the discrete
functional, so they are excluded from both the descent direction and the
stationarity measure.  The direction is preconditioned by the lumped
weighted vertex mass ``w(x_v) * A_v`` and optionally accelerated with a
two-loop L-BFGS update in that metric.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .complex import (SurfaceComplex, connected_components, extract_junctions, require_valid,
                      validate, vertex_classes, vertex_rings)
from .cone import ConeSpec, distance_to_arcs
from .errors import LineSearchFailure, TopologyBroken
from .geometry import _eps_area, weighted_area, weighted_area_gradient
from .templates import get_template, instantiate_keyed

logger = logging.getLogger("expandernet.solver")

#: vertices whose relative weight is below exp(this) are "passengers" in the
#: L-BFGS metric and get the per-vertex descent safeguard
PASSENGER_LOG_WEIGHT = math.log(1e-4)


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 2000
    grad_tol: float = 1e-8
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    quasi_newton: bool = True
    memory: int = 10
    remesh_every: int = 0
    radius_schedule: tuple = ()
    edge_length: float = 0.1
    seed: int = 0
    perturb: float = 0.0
    k_ring: int = 2
    #: coarser solves (edge length h * 2**k) used to shape templates that support it
    coarse_levels: int = 2
    #: mesh rebuilds around the current junctions after a stall (refit templates only)
    max_rebuilds: int = 3
    corner_rings: int = 3
    #: collar radius around boundary corners as a fraction of the truncation radius
    corner_fraction: float = 0.1
    motion: str = "normal"
    #: trial steps may not push a face's aspect ratio above max(cap, current)
    aspect_cap: float = 30.0

    def __post_init__(self):
        sched = tuple(float(r) for r in self.radius_schedule)
        object.__setattr__(self, "radius_schedule", sched)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("radius_schedule must be strictly increasing")
        if any(r <= 0 for r in sched):
            raise ValueError("radii must be positive")
        if self.grad_tol <= 0 or self.edge_length <= 0:
            raise ValueError("tolerances and edge length must be positive")
        if not 0 < self.c1 < 1 or not 0 < self.shrink < 1:
            raise ValueError("c1 and shrink must lie in (0, 1)")
        if self.motion not in ("free", "normal"):
            raise ValueError("motion must be 'free' or 'normal'")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class OptimizerState:
    complex: SurfaceComplex
    log_scale: float
    energies: list = field(default_factory=list)
    grad_rms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    iterations: int = 0
    status: str = "running"
    boundary_ids: np.ndarray = None
    junction_ids: np.ndarray = None
    interior_ids: np.ndarray = None
    boundary_error: float = 0.0

    @property
    def energy(self) -> float:
        """Last accepted energy in shifted scale ``exp(-log_scale)``."""
        return self.energies[-1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def stationary(self) -> bool:
        """Converged, or stopped because no decrease is resolvable in double precision."""
        return self.status in ("converged", "stalled")

    def true_energy(self) -> float:
        return self.energies[-1] * math.exp(self.log_scale)


# ---------------------------------------------------------------------------
# projection operators


class _Projector:
    """Per-vertex orthogonal projectors onto the admissible motion directions."""

    def __init__(self, complex: SurfaceComplex, full: bool = False, corner_rings: int = 0,
                 corner_radius: float = 0.0):
        self.full = full
        self.cls = vertex_classes(complex)
        jg = extract_junctions(complex)
        self.held = corner_collar(complex, jg, corner_rings, corner_radius)
        self.cls = np.where(self.held & (self.cls != 3), 4, self.cls)
        prev, nxt = [], []
        on_curve = []
        for c in jg.triple_curves:
            ch = c.vertices
            if c.closed:
                for i in range(len(ch)):
                    on_curve.append(ch[i])
                    prev.append(ch[i - 1])
                    nxt.append(ch[(i + 1) % len(ch)])
            else:
                for i in range(1, len(ch) - 1):
                    on_curve.append(ch[i])
                    prev.append(ch[i - 1])
                    nxt.append(ch[i + 1])
        self.curve_v = np.array(on_curve, dtype=np.int64)
        self.curve_prev = np.array(prev, dtype=np.int64)
        self.curve_next = np.array(nxt, dtype=np.int64)
        self.normal_v = np.flatnonzero(self.cls == 0)
        self.free_v = np.flatnonzero(self.cls == 2)
        self.faces = complex.faces

    def normals(self, x):
        f = self.faces
        cr = np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]])
        n = np.zeros_like(x)
        for k in range(3):
            for ax in range(3):
                n[:, ax] += np.bincount(f[:, k], weights=cr[:, ax], minlength=len(x))
        nn = np.linalg.norm(n, axis=1)
        nn[nn == 0] = 1.0
        return n / nn[:, None]

    def __call__(self, x, g, full=None):
        if self.full if full is None else full:
            out = g.copy()
            out[self.cls >= 3] = 0.0
            return out
        out = np.zeros_like(g)
        if len(self.normal_v):
            n = self.normals(x)[self.normal_v]
            gv = g[self.normal_v]
            out[self.normal_v] = np.einsum("ij,ij->i", gv, n)[:, None] * n
        if len(self.curve_v):
            t = x[self.curve_next] - x[self.curve_prev]
            t /= np.linalg.norm(t, axis=1)[:, None]
            gv = g[self.curve_v]
            out[self.curve_v] = gv - np.einsum("ij,ij->i", gv, t)[:, None] * t
        out[self.free_v] = g[self.free_v]
        out[self.held] = 0.0
        return out


def corner_collar(complex: SurfaceComplex, junctions=None, rings: int = 3,
                  radius: float = 0.0) -> np.ndarray:
    """Vertices within ``rings`` hops or distance ``radius`` of a boundary corner.

    A corner is a sphere-boundary vertex where two or more triple curves end,
    i.e. the trace of a non-regular cone node.  The truncated problem has a
    corner singularity there that a fixed-connectivity mesh cannot resolve,
    so this collar is held at its initial position.
    """
    mask = np.zeros(complex.n_vertices, dtype=bool)
    if rings <= 0 and radius <= 0:
        return mask
    jg = junctions if junctions is not None else extract_junctions(complex)
    ends = np.zeros(complex.n_vertices, dtype=np.int64)
    for c in jg.triple_curves:
        if not c.closed:
            for v in (c.vertices[0], c.vertices[-1]):
                if complex.boundary[v]:
                    ends[v] += 1
    corners = np.flatnonzero(ends >= 2)
    if not len(corners):
        return mask
    mask = vertex_rings(complex, corners, rings)
    if radius > 0:
        x = complex.vertices
        for c in corners:
            mask |= np.linalg.norm(x - x[c], axis=1) <= radius
    return mask


def _lumped_mass(x, faces, log_scale):
    p = x[faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    m = np.zeros(len(x))
    for k in range(3):
        m += np.bincount(faces[:, k], weights=area / 3.0, minlength=len(x))
    w = np.exp(np.einsum("ij,ij->i", x, x) / 4.0 - log_scale)
    m = m * w
    m[m == 0] = 1.0
    return m


def projected_gradient_rms(complex: SurfaceComplex) -> float:
    """RMS over vertices of the admissible (normal) part of the true gradient."""
    E = weighted_area(complex)
    g = weighted_area_gradient(complex, E.log_scale)
    pg = _Projector(complex)(complex.vertices, g)
    return float(np.sqrt(np.mean(np.sum(pg * pg, axis=1))) * math.exp(E.log_scale))


# ---------------------------------------------------------------------------
# minimisation


def minimize(complex: SurfaceComplex, spec: ConeSpec | None = None,
             config: SolveConfig | None = None, callback=None) -> OptimizerState:
    """Projected, preconditioned descent until ``grad_tol`` or ``max_iters``."""
    config = config or SolveConfig()
    require_valid(complex)
    n_comp = len(connected_components(complex))
    E0 = weighted_area(complex)
    s0 = E0.log_scale
    scale = math.exp(s0)
    proj = _Projector(complex, config.motion == "free", config.corner_rings,
                          config.corner_fraction * complex.truncation_radius)
    faces = complex.faces
    x = complex.vertices.copy()
    eps_area = _eps_area(complex)

    bnd = np.flatnonzero(complex.boundary)
    state = OptimizerState(complex, s0, boundary_ids=bnd,
                           junction_ids=np.concatenate([proj.curve_v, proj.free_v]),
                           interior_ids=proj.normal_v)
    if spec is not None and len(bnd):
        state.boundary_error = float(distance_to_arcs(x[bnd], spec,
                                                      complex.truncation_radius).max())

    if config.perturb > 0:
        rng = np.random.default_rng(config.seed)
        h = float(np.median(complex.edge_lengths()))
        noise = proj(x, rng.standard_normal(x.shape), full=False) * (config.perturb * h)
        x = x + noise
        trial = complex.with_vertices(x)
        if not validate(trial).ok:
            raise TopologyBroken("random perturbation produced an invalid complex")

    per_face = weighted_area(complex.with_vertices(x), s0).per_face
    energy = float(np.sum(per_face))
    state.energies.append(energy)
    g = weighted_area_gradient(complex.with_vertices(x), s0)
    pg = proj(x, g)
    S, Y = [], []
    step_hint = None
    med_edge = float(np.median(complex.edge_lengths()))

    it = 0
    while True:
        sg = pg if not proj.full else proj(x, g, full=False)
        rms = float(np.sqrt(np.mean(np.sum(sg * sg, axis=1)))) * scale
        state.grad_rms.append(rms)
        if rms <= config.grad_tol:
            state.status = "converged"
            break
        if it >= config.max_iters:
            state.status = "max_iters"
            break
        mass = _lumped_mass(x, faces, s0)
        passenger = np.einsum("ij,ij->i", x, x) / 4.0 - s0 < PASSENGER_LOG_WEIGHT
        d = _direction(pg, mass, S, Y, config, passenger)
        d = -proj(x, d)
        slope = float(np.sum(g * d))
        if slope >= 0:
            S.clear()
            Y.clear()
            d = -proj(x, pg / mass[:, None])
            slope = float(np.sum(g * d))
        dmax = float(np.linalg.norm(d, axis=1).max())
        if S:
            alpha = 1.0
        else:
            alpha = step_hint if step_hint is not None else 0.05 * med_edge / dmax
        alpha = min(alpha, 0.25 * med_edge / dmax)
        old_n = np.cross(x[faces[:, 1]] - x[faces[:, 0]], x[faces[:, 2]] - x[faces[:, 0]])
        ar_limit = np.maximum(_aspect(x[faces]), config.aspect_cap)
        noise = 64 * np.finfo(float).eps * float(np.sum(np.abs(per_face)))
        first_pred = -alpha * slope
        accepted = False
        for _ in range(config.max_backtracks):
            xn = x + alpha * d
            p = xn[faces]
            nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
            if (np.einsum("ij,ij->i", nrm, old_n) > 0).all() and \
                    (0.5 * np.linalg.norm(nrm, axis=1)).min() >= eps_area and \
                    (_aspect(p) <= ar_limit).all():
                pf = weighted_area(complex.with_vertices(xn), s0, check=False).per_face
                dE = float(np.sum(pf - per_face))
                if dE <= config.c1 * alpha * slope and dE < 0:
                    accepted = True
                    break
            alpha *= config.shrink
        if not accepted:
            if first_pred <= noise:
                state.status = "stalled"
                break
            state.complex = complex.with_vertices(x)
            state.iterations = it
            raise LineSearchFailure(
                f"no decrease along the descent direction at iteration {it} "
                f"(gradient rms {rms:.3e})", state)
        new_energy = energy + dE
        assert new_energy <= energy, "energy increased on an accepted step"
        g_new = weighted_area_gradient(complex.with_vertices(xn), s0, check=False)
        pg_new = proj(xn, g_new)
        s = (xn - x).ravel()
        yv = (pg_new - pg).ravel()
        if config.quasi_newton:
            sy = float(s @ yv)
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
                S.append(s)
                Y.append(yv)
                if len(S) > config.memory:
                    S.pop(0)
                    Y.pop(0)
        step_hint = 2.0 * alpha
        x, g, pg, per_face, energy = xn, g_new, pg_new, pf, float(np.sum(pf))
        it += 1
        state.energies.append(energy)
        state.steps.append(alpha)
        logger.info("iter %d energy %r logscale %r gradrms %r step %r", it, energy, s0, rms, alpha)
        if callback is not None:
            callback(it, energy, rms, alpha)
        if config.remesh_every and it % config.remesh_every == 0:
            state.complex = complex.with_vertices(x)
            state = quality_pass(state)
            if state.complex.faces is not complex.faces:
                complex = state.complex
                faces = complex.faces
                proj = _Projector(complex, config.motion == "free", config.corner_rings,
                          config.corner_fraction * complex.truncation_radius)
                per_face = weighted_area(complex, s0, check=False).per_face
                energy = float(np.sum(per_face))
                g = weighted_area_gradient(complex, s0, check=False)
                pg = proj(x, g)
                S.clear()
                Y.clear()

    state.iterations = it
    state.complex = complex.with_vertices(x)
    outcome = validate(state.complex)
    if not outcome.ok:
        raise TopologyBroken("optimised complex fails validation: " + "; ".join(outcome.messages()[:3]))
    if len(connected_components(state.complex)) != n_comp:
        raise TopologyBroken("connected component count changed during minimisation")
    if spec is not None and len(bnd):
        state.boundary_error = float(distance_to_arcs(x[bnd], spec,
                                                      complex.truncation_radius).max())
    return state


def _direction(pg, mass, S, Y, config, passenger):
    """Two-loop L-BFGS in the lumped-mass metric (plain preconditioned gradient when empty)."""
    if not config.quasi_newton or not S:
        return pg / mass[:, None]
    q = pg.ravel().copy()
    minv = np.repeat(1.0 / mass, 3)
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / float(s @ y)
        a = rho * float(s @ q)
        alphas.append((rho, a))
        q -= a * y
    s, y = S[-1], Y[-1]
    gamma = float(s @ y) / float(y @ (minv * y))
    r = gamma * minv * q
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * float(y @ r)
        r += s * (a - b)
    r = r.reshape(pg.shape)
    # vertex-wise safeguard: low-weight vertices ride along with curvature
    # pairs fitted elsewhere; where that moves one uphill, use its own
    # scaled gradient step instead
    sd = gamma * pg / mass[:, None]
    up = passenger & (np.einsum("ij,ij->i", r, pg) < 0.0)
    if np.any(up):
        r[up] = sd[up]
    return r


# ---------------------------------------------------------------------------
# mesh quality


def aspect_ratios(complex: SurfaceComplex) -> np.ndarray:
    """``l_max * perimeter / (4 sqrt(3) area)``: 1 for equilateral triangles."""
    return _aspect(complex.vertices[complex.faces])


def _aspect(p):
    l = np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)], axis=1)
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    return l.max(axis=1) * l.sum(axis=1) / (4.0 * math.sqrt(3.0) * np.maximum(area, 1e-300))


def quality_pass(state: OptimizerState, threshold: float = 20.0, budget: float = 1e-9,
                 max_sweeps: int = 10) -> OptimizerState:
    """Delaunay-style edge flips on manifold edges.

    Junction edges, boundary edges and their vertices' triple/boundary status
    are never touched.  A flip is accepted only while the cumulative energy
    increase stays within ``budget`` (relative).
    """
    c = state.complex
    s0 = state.log_scale
    base = weighted_area(c, s0).total
    allowance = budget * base
    faces = c.faces.copy()
    x = c.vertices
    spent = 0.0
    changed = False
    for _ in range(max_sweeps):
        cur = SurfaceComplex(x, faces, c.phases, c.phase_count, c.boundary, c.truncation_radius)
        topo = cur.topology
        existing = {tuple(e) for e in topo.edges.tolist()}
        ar = aspect_ratios(cur)
        touched = np.zeros(len(faces), dtype=bool)
        flips = 0
        for e in np.flatnonzero(topo.edge_face_count == 2):
            f1, f2 = topo.edge_faces(e)
            if touched[f1] or touched[f2]:
                continue
            a, b = topo.edges[e]
            if c.boundary[a] and c.boundary[b]:
                continue
            t1, t2 = faces[f1], faces[f2]
            c1 = int(t1[(t1 != a) & (t1 != b)][0])
            c2 = int(t2[(t2 != a) & (t2 != b)][0])
            if c1 == c2 or tuple(sorted((c1, c2))) in existing:
                continue
            # opposite-angle sum > pi means the edge is not locally Delaunay
            ang = _angle(x[c1], x[a], x[b]) + _angle(x[c2], x[a], x[b])
            if ang <= math.pi + 1e-12 and max(ar[f1], ar[f2]) <= threshold:
                continue
            # orientation: t1 traverses a->b or b->a
            i = int(np.flatnonzero(t1 == a)[0])
            if t1[(i + 1) % 3] == b:
                n1, n2 = (c1, a, c2), (c1, c2, b)
            else:
                n1, n2 = (c1, b, c2), (c1, c2, a)
            new = np.array([n1, n2])
            old_n = np.cross(x[t1[1]] - x[t1[0]], x[t1[2]] - x[t1[0]]) + \
                np.cross(x[t2[1]] - x[t2[0]], x[t2[2]] - x[t2[0]])
            nn = [np.cross(x[t[1]] - x[t[0]], x[t[2]] - x[t[0]]) for t in new]
            if min(float(v @ old_n) for v in nn) <= 0:
                continue
            before = _face_energy(x, np.array([t1, t2]), s0)
            after = _face_energy(x, new, s0)
            new_ar = _ar(x, new)
            if new_ar >= max(ar[f1], ar[f2]):
                continue
            if after - before > allowance - spent:
                continue
            spent += max(after - before, 0.0)
            faces[f1], faces[f2] = new
            touched[f1] = touched[f2] = True
            existing.discard((int(min(a, b)), int(max(a, b))))
            existing.add(tuple(sorted((c1, c2))))
            flips += 1
        if not flips:
            break
        changed = True
    if not changed:
        return state
    out = SurfaceComplex(x, faces, c.phases, c.phase_count, c.boundary, c.truncation_radius)
    ok = validate(out).ok
    if ok:
        try:
            ok = _same_junctions(c, out)
        except Exception:
            ok = False
    if not ok:
        raise TopologyBroken("quality pass would violate complex invariants; rolled back")
    new_energy = weighted_area(out, s0).total
    if new_energy - base > budget * base:
        return state
    state = replace(state, complex=out)
    state.energies = state.energies + [new_energy]
    return state


def _same_junctions(a, b):
    ja, jb = extract_junctions(a), extract_junctions(b)
    return (ja.n_triple == jb.n_triple and ja.n_quadruple == jb.n_quadruple
            and all(np.array_equal(x.vertices, y.vertices)
                    for x, y in zip(ja.triple_curves, jb.triple_curves)))


def _angle(apex, p, q):
    u, v = p - apex, q - apex
    return math.atan2(np.linalg.norm(np.cross(u, v)), float(u @ v))


def _face_energy(x, faces, s0):
    p = x[faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    c = p.mean(axis=1)
    return float(np.sum(area * np.exp(np.einsum("ij,ij->i", c, c) / 4.0 - s0)))


def _ar(x, faces):
    return float(aspect_ratios(SurfaceComplex(x, faces, np.tile([1, 2], (len(faces), 1)), 2,
                                              np.zeros(len(x), bool), 1.0)).max())


# ---------------------------------------------------------------------------
# continuation


def solve_template(spec: ConeSpec, template, R: float, config: SolveConfig,
                   allow_nonregular: bool | None = None, callback=None, initial=None):
    """Instantiate ``template`` at radius ``R`` and minimise.

    For templates that can be rebuilt around a computed junction geometry
    (``template.refit``), ``config.coarse_levels`` coarser solves at edge
    lengths ``h * 2**k`` come first and each finer mesh is rebuilt around the
    previous solution.  ``initial`` optionally maps vertex keys to starting
    positions for the finest mesh.  Returns ``(state, keys)``.
    """
    if isinstance(template, str):
        template = get_template(template)
    h = config.edge_length
    levels = config.coarse_levels if template.refit is not None else 0
    kwargs = {}
    for k in range(levels, 0, -1):
        coarse, _ = instantiate_keyed(template, spec, R, h * 2 ** k, allow_nonregular, **kwargs)
        st = minimize(coarse, spec, config, callback=callback)
        kwargs = template.refit(st.complex, spec)
    complex, keys = instantiate_keyed(template, spec, R, h, allow_nonregular, **kwargs)
    if initial:
        x = complex.vertices.copy()
        for i, key in enumerate(keys):
            p = initial.get(key)
            if p is not None and not complex.boundary[i]:
                x[i] = p
        complex = complex.with_vertices(x)
    rebuilds = config.max_rebuilds if template.refit is not None else 0
    for attempt in range(rebuilds + 1):
        try:
            state = minimize(complex, spec, config, callback=callback)
        except LineSearchFailure as exc:
            if attempt == rebuilds:
                raise
            state = exc.state
        if state.status == "converged" or attempt == rebuilds:
            break
        # the mesh can no longer follow the junctions: rebuild it around them
        logger.info("rebuild %d after %s at iteration %d", attempt + 1, state.status,
                    state.iterations)
        kwargs = template.refit(state.complex, spec)
        complex, keys = instantiate_keyed(template, spec, R, h, allow_nonregular, **kwargs)
    return state, keys


def continue_in_radius(spec: ConeSpec, template, config: SolveConfig,
                       allow_nonregular: bool | None = None, callback=None) -> list:
    """Solve on every radius of ``config.radius_schedule``, warm-starting when possible.

    Warm starts copy every keyed vertex of the previous solution into the
    next, larger mesh; the new annulus starts on the cone.  This needs the
    ring spacing ``R / ceil(R / h)`` to agree between radii and a template
    whose vertex keys are radius-independent; otherwise each radius starts
    from the template.
    """
    if isinstance(template, str):
        template = get_template(template)
    if len(config.radius_schedule) < 1:
        raise ValueError("radius_schedule is empty")
    h = config.edge_length
    states = []
    prev = None
    for R in config.radius_schedule:
        initial = None
        if prev is not None and template.warm_start:
            p_state, p_keys, p_R = prev
            if abs(p_R / math.ceil(p_R / h - 1e-9) - R / math.ceil(R / h - 1e-9)) < 1e-12:
                old = p_state.complex.vertices
                initial = {k: old[j] for j, k in enumerate(p_keys)}
        state, keys = solve_template(spec, template, R, config, allow_nonregular, callback,
                                     initial)
        states.append(state)
        prev = (state, keys, R)
    return states
