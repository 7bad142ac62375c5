"""Command-line entry point.

Every command that writes files also writes a JSON run manifest next to its
output.  ``expandernet rerun <manifest>`` replays the recorded arguments.
Exit codes: 0 success with all checks passing, 1 checks failed or the
solver stopped short of stationarity, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from ._validation import check_cone, check_positive, check_schedule, check_template, template_names
from .complex import read_mesh, write_mesh
from .conformal import convert
from .cone import STOCK_CONES, node_angles, read_cone, validate_cone
from .errors import ExpanderNetError, ParseError, TemplateMismatch
from .geometry import expander_residual
from .solver import SolveConfig, continue_in_radius, minimize
from .templates import instantiate
from .verify import ToleranceProfile, check_end_decay, check_triple_angles, full_report, write_report

logger = logging.getLogger("expandernet")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad user input: reported on standard error with exit code 2."""


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: dict = field(default_factory=dict)      # path -> sha256
    outputs: dict = field(default_factory=dict)     # path -> sha256
    config: dict = field(default_factory=dict)
    seed: int = 0
    version: str = __version__
    python: str = platform.python_version()
    numpy: str = np.__version__
    threads: str = field(default_factory=lambda: os.environ.get("EXPANDERNET_THREADS", "1"))
    seconds: float = 0.0
    exit_code: int = 0

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"malformed manifest {path}: {exc}") from None


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _num(v) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# input helpers


def _cone(path, allow_nonregular=False):
    try:
        return check_cone(path, allow_nonregular)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from None


def _mesh(path):
    if not os.path.exists(path):
        raise InputError(f"mesh file {path!r} not found")
    return read_mesh(path)


def _radii(text):
    try:
        return check_schedule(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise InputError(f"--radii: {exc}") from None


def _positive(value, name):
    try:
        return check_positive(value, name)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _config(args, **extra) -> SolveConfig:
    kw = dict(max_iters=args.max_iters, grad_tol=args.tol, seed=args.seed,
              perturb=args.perturb, quasi_newton=not args.no_quasi_newton, motion=args.motion)
    kw.update(extra)
    try:
        return SolveConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _manifest_path(out):
    return out + ".manifest.json"


def _finish(manifest, inputs, outputs, path, t0, code):
    manifest.inputs = {p: sha256(p) for p in inputs}
    manifest.outputs = {p: sha256(p) for p in outputs}
    manifest.seconds = time.perf_counter() - t0
    manifest.exit_code = code
    manifest.write(path)
    return code


# ---------------------------------------------------------------------------
# commands


def cmd_validate_cone(args, manifest):
    if args.spec in STOCK_CONES and not os.path.exists(args.spec):
        spec = STOCK_CONES[args.spec]()
    else:
        try:
            spec = read_cone(args.spec)
        except FileNotFoundError:
            raise InputError(f"cone file {args.spec!r} not found") from None
    outcome = validate_cone(spec, allow_nonregular=args.allow_nonregular)
    for node, angs in sorted(node_angles(spec).items()):
        print(f"node {node + 1} angles " + " ".join(f"{a:.3f}" for a in angs))
    if outcome.ok:
        print("ok")
        return EXIT_OK
    for msg in outcome.messages():
        print(f"violation: {msg}")
    return EXIT_FAIL


def cmd_init(args, manifest):
    t0 = time.perf_counter()
    try:
        template = check_template(args.template)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    allow = args.allow_nonregular or template.nonregular
    spec = _cone(args.cone, allow)
    R = _positive(args.radius, "--radius")
    h = _positive(args.edge, "--edge")
    try:
        complex = instantiate(template, spec, R, h, allow)
    except TemplateMismatch as exc:
        raise InputError(f"{exc}; available templates: {', '.join(template_names())}") from None
    write_mesh(complex, args.out)
    manifest.config = {"template": template.name, "radius": R, "edge": h,
                       "allow_nonregular": allow}
    print(f"wrote {args.out}: {complex.n_vertices} vertices, {complex.n_faces} faces")
    return _finish(manifest, [args.cone] if os.path.exists(args.cone) else [], [args.out],
                   _manifest_path(args.out), t0, EXIT_OK)


def _log_iterations(it, energy, rms, alpha):
    logger.debug("iter %d energy %r gradrms %r step %r", it, energy, rms, alpha)


def cmd_minimize(args, manifest):
    t0 = time.perf_counter()
    complex = _mesh(args.mesh)
    spec = _cone(args.cone, allow_nonregular=True)
    config = _config(args, edge_length=float(np.median(complex.edge_lengths())))
    state = minimize(complex, spec, config, callback=_log_iterations)
    write_mesh(state.complex, args.out)
    manifest.config = asdict(config)
    manifest.seed = config.seed
    print(f"status {state.status} iterations {state.iterations} energy {_num(state.true_energy())} "
          f"gradrms {_num(state.grad_rms[-1]) if state.grad_rms else 'nan'}")
    code = EXIT_OK if state.stationary else EXIT_FAIL
    inputs = [args.mesh] + ([args.cone] if os.path.exists(args.cone) else [])
    return _finish(manifest, inputs, [args.out], _manifest_path(args.out), t0, code)


def _profile(args) -> ToleranceProfile:
    if not 0 < args.core_fraction <= 1:
        raise InputError("--core-fraction must lie in (0, 1]")
    return replace(ToleranceProfile(), core_fraction=args.core_fraction)


def cmd_continue(args, manifest):
    t0 = time.perf_counter()
    try:
        template = check_template(args.template)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    allow = args.allow_nonregular or template.nonregular
    spec = _cone(args.cone, allow)
    radii = _radii(args.radii)
    h = _positive(args.edge, "--edge")
    config = _config(args, edge_length=h, radius_schedule=radii)
    profile = _profile(args)
    os.makedirs(args.outdir, exist_ok=True)
    states = continue_in_radius(spec, template, config, allow, callback=_log_iterations)
    outputs, ok = [], True
    for k, (R, st) in enumerate(zip(radii, states)):
        mesh_path = os.path.join(args.outdir, f"mesh_R{R:g}.meshnet")
        report_path = os.path.join(args.outdir, f"report_R{R:g}.txt")
        write_mesh(st.complex, mesh_path)
        hist = [s.complex for s in states[:k + 1]] if k > 0 else None
        rep = full_report(st.complex, spec, profile, h=h, k_ring=config.k_ring, states=hist)
        write_report(rep, report_path)
        outputs += [mesh_path, report_path]
        ok &= rep.ok and st.stationary
        print(f"R {R:g} status {st.status} iterations {st.iterations} "
              f"energy {_num(st.true_energy())} checks {'pass' if rep.ok else 'fail'}")
    manifest.config = {**asdict(config), "template": template.name,
                       "allow_nonregular": allow, "core_fraction": profile.core_fraction}
    manifest.seed = config.seed
    inputs = [args.cone] if os.path.exists(args.cone) else []
    return _finish(manifest, inputs, outputs, os.path.join(args.outdir, "manifest.json"), t0,
                   EXIT_OK if ok else EXIT_FAIL)


def cmd_verify(args, manifest):
    t0 = time.perf_counter()
    complex = _mesh(args.mesh)
    spec = _cone(args.cone, allow_nonregular=True) if args.cone else None
    profile = _profile(args)
    h = None if args.edge is None else _positive(args.edge, "--edge")
    rep = full_report(complex, spec, profile, h=h)
    write_report(rep, args.report)
    for name, passed in rep.checks.items():
        print(f"{name} {'pass' if passed else 'fail'}")
    manifest.config = {"core_fraction": profile.core_fraction, "edge": h}
    inputs = [args.mesh] + ([args.cone] if args.cone and os.path.exists(args.cone) else [])
    return _finish(manifest, inputs, [args.report], _manifest_path(args.report), t0,
                   EXIT_OK if rep.ok else EXIT_FAIL)


def cmd_map(args, manifest):
    try:
        pts = np.loadtxt(args.points, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read points: {exc}") from None
    try:
        out = convert(pts, args.source, args.target)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    lines = [" ".join(_num(v) for v in row) for row in out]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def export_plotdata(complex, what, spec=None, k_ring=2):
    """Header and rows of a plot-data table (``residual``, ``angles`` or ``ends``)."""
    if what == "residual":
        res = expander_residual(complex, k_ring)
        rows = [[i, *complex.vertices[i], int(res.mask[i]),
                 math.nan if res.mask[i] else res.per_vertex[i]] for i in range(complex.n_vertices)]
        return ["vertex", "x", "y", "z", "masked", "residual"], rows
    if what == "angles":
        rows = []
        for s in check_triple_angles(complex):
            for v, a, ang in zip(s.vertices, s.arclength, s.angles):
                rows += [[s.curve, int(v), a, k, ang[k]] for k in range(3)]
        return ["curve", "vertex", "arclength", "sheet", "angle_deg"], rows
    if what == "ends":
        if spec is None:
            raise InputError("--what ends needs --cone")
        rows = [[p, r0, r1, s] for p, r0, r1, s in check_end_decay(complex, spec)]
        return ["path", "r_inner", "r_outer", "sup_abs_u"], rows
    raise InputError(f"unknown export {what!r}")


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _num(v)


def cmd_export(args, manifest):
    t0 = time.perf_counter()
    complex = _mesh(args.mesh)
    spec = _cone(args.cone, allow_nonregular=True) if args.cone else None
    header, rows = export_plotdata(complex, args.what, spec)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    manifest.config = {"what": args.what}
    return _finish(manifest, [args.mesh], [args.out], _manifest_path(args.out), t0, EXIT_OK)


def cmd_rerun(args, manifest):
    m = RunManifest.read(args.manifest)
    if not m.argv or m.argv[0] == "rerun":
        raise InputError("manifest does not record a replayable command")
    return main(m.argv)


# ---------------------------------------------------------------------------
# parser


def _solver_args(p):
    p.add_argument("--tol", type=float, default=1e-8, help="projected-gradient RMS tolerance")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="random initial normal perturbation in units of h")
    p.add_argument("--no-quasi-newton", action="store_true")
    p.add_argument("--motion", choices=("normal", "free"), default="normal")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="expandernet",
                                 description="Discrete self-expanding multiphase networks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-cone", help="check a cone file")
    p.add_argument("spec")
    p.add_argument("--allow-nonregular", action="store_true")
    p.set_defaults(func=cmd_validate_cone)

    p = sub.add_parser("init", help="instantiate a template mesh")
    p.add_argument("--cone", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--edge", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-nonregular", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("minimize", help="minimise the weighted area of a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--cone", required=True)
    p.add_argument("--out", required=True)
    _solver_args(p)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("continue", help="solve over a radius schedule")
    p.add_argument("--cone", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--radii", required=True, help="comma-separated, increasing")
    p.add_argument("--edge", type=float, required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--allow-nonregular", action="store_true")
    p.add_argument("--core-fraction", type=float, default=1.0)
    _solver_args(p)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("verify", help="run every check on a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--cone")
    p.add_argument("--report", required=True)
    p.add_argument("--edge", type=float, help="h for the tolerances (default median edge)")
    p.add_argument("--core-fraction", type=float, default=1.0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("map", help="convert points between models")
    p.add_argument("--from", dest="source", required=True, choices=("euclid", "ball", "hyperboloid"))
    p.add_argument("--to", dest="target", required=True, choices=("euclid", "ball", "hyperboloid"))
    p.add_argument("points")
    p.add_argument("--out")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("export", help="write plot data as CSV")
    p.add_argument("--mesh", required=True)
    p.add_argument("--what", required=True, choices=("residual", "angles", "ends"))
    p.add_argument("--out", required=True)
    p.add_argument("--cone")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    manifest = RunManifest(command=args.command, argv=argv)
    try:
        return args.func(args, manifest)
    except (InputError, ParseError, TemplateMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ExpanderNetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
