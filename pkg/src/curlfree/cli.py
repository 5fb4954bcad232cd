"""Command-line entry point.

    curlfree <validate|potential|bogovskii|verify|homotopy|sobolev>
             --config PATH [--seed N] [--out DIR] [--csv]

Exit codes: 0 every check passed, 1 a check failed, 2 the config (or an
expression in it) is invalid, 3 a mathematical precondition does not hold
and the computation was refused. Reports are JSON, written atomically to
the output directory; apart from ``wall_time`` a report depends only on the
config and the seed.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .config import load_config
from .errors import ConfigError, CurlfreeError, GeometryError, PreconditionError
from .fieldspec import CallableField, FiniteDiffScheme, GridField, divergence, encode_grid
from .geometry import Annulus, StarDomain
from .homotopy import Path, homotopy_invariance_check
from .operators import BogovskiiOp, bogovskii_apply, union_rule
from .potential import glue_potentials, local_potential, rough_local_potential
from .sobolev_checks import GridSpace, adjointness_check, weak_poincare_pipeline
from .suites import SUITES, Check, default_paths, interior_probes, run_suite, shape_scale

SCHEMA_VERSION = 1
COMMANDS = ("validate", "potential", "bogovskii", "verify", "homotopy", "sobolev")


class Refusal(PreconditionError):
    """Precondition failure that carries report details."""

    def __init__(self, message, residual=None, details=None):
        super().__init__(message, residual)
        self.details = details or {}


class Outcome:
    def __init__(self, checks, details=None, tables=None, grids=None):
        self.checks = checks
        self.details = details or {}
        self.tables = tables or {}
        self.grids = grids or {}


# --------------------------------------------------------------------------
# output

def _plain(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def atomic_write(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data if isinstance(data, bytes) else data.encode("utf-8"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_bytes(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def build_report(command, cfg, args, checks, status, details, wall):
    passed = status == "pass"
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "curlfree",
        "version": __version__,
        "command": command,
        "suite": getattr(args, "suite", None),
        "seed": cfg.seed,
        "config_path": cfg.path,
        "config": cfg.raw,
        "checks": [c.as_dict() for c in checks],
        "pass": passed,
        "status": status,
        "details": details,
        "wall_time": wall,
    }


def dump_report(report):
    return json.dumps(_plain(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# commands

def _sample_grid(region, m):
    box = region.bounding_box()
    h = float(np.max(box.hi - box.lo)) / (m - 1)
    shape = tuple(int(np.floor((box.hi[d] - box.lo[d]) / h + 1e-9)) + 1 for d in range(box.dim))
    axes = [box.lo[d] + h * np.arange(shape[d]) for d in range(box.dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1), box.lo, h


def _vector_field(cfg, command):
    if cfg.field is None or cfg.field_kind != "vector":
        raise ConfigError(f"{command}: the config must declare a vector field")
    return cfg.field


def cmd_potential(cfg):
    v = _vector_field(cfg, "potential")
    tol = cfg.tol
    checks, details = [], {}
    if isinstance(v, GridField):
        if not cfg.is_star or np.any(cfg.domain.star_ball.center != 0):
            raise ConfigError("potential: grid data needs a star domain centred at the origin")
        rp = rough_local_potential(cfg.domain, cfg.rho, v, cfg.rough["lam"], cfg.rough["l"],
                                   mollify_order=cfg.rough["mollify_order"], seed=cfg.seed)
        res = rp.residuals
        rise = max(max((b - a for a, b in zip(res, res[1:])), default=0.0), 0.0)
        checks.append(Check("potential.rough_trend", rise, 0.0, rise <= 0.0,
                            "largest increase of the stage residuals"))
        checks.append(Check.at_most("potential.rough_final", res[-1], tol["rough"],
                                    "RMS |grad F - g| at the last stage"))
        details["stages"] = [{"lam": s.lam, "l": s.l, "grad_residual": s.grad_residual} for s in rp.stages]
        F, region = rp, cfg.domain
    elif cfg.cover is not None or isinstance(cfg.domain, Annulus):
        if cfg.cover is None:
            raise ConfigError("potential: an annulus domain needs a cover")
        glued = glue_potentials(cfg.cover, v, cfg.quad, seed=cfg.seed, tol=tol["overlap"],
                                curl_tol=tol["curl"], probes=cfg.probes)
        details.update(constants=glued.constants, overlap_consistency=glued.overlap_consistency,
                       cross_discrepancy=glued.cross_discrepancy, grad_residual=glued.grad_residual,
                       charts=len(cfg.cover), consistent=glued.consistent,
                       pairs=[{"i": i, "j": j, "mean": m, "std": s} for i, j, m, s in glued.pair_report])
        if not glued.consistent and not cfg.cover.simply_connected:
            details["obstruction"] = glued.cross_discrepancy
            raise Refusal(f"gluing obstructed on a cover that is not simply connected: "
                          f"cross-pair discrepancy {glued.cross_discrepancy:.12g}",
                          glued.cross_discrepancy, details)
        checks.append(Check.at_most("potential.overlap_consistency", glued.overlap_consistency, tol["overlap"]))
        checks.append(Check.at_most("potential.cross_discrepancy", glued.cross_discrepancy, tol["overlap"]))
        checks.append(Check.at_most("potential.grad_residual", glued.grad_residual, tol["grad"]))
        F, region = glued, cfg.cover
    else:
        if not cfg.is_star:
            raise ConfigError("potential: the domain is not star-shaped; declare a cover")
        F = local_potential(cfg.domain, cfg.rho, v, cfg.quad, tol["curl"], cfg.probes, cfg.seed)
        checks.append(Check.at_most("potential.curl", F.curl, tol["curl"]))
        checks.append(Check.at_most("potential.grad_residual", F.residual, tol["grad"]))
        details.update(curl=F.curl, grad_residual=F.residual)
        region = cfg.domain

    nodes, origin, h = _sample_grid(region, cfg.output["grid"])
    flat = nodes.reshape(-1, cfg.n)
    inside = region.contains(flat)
    if isinstance(region, StarDomain):
        inside &= region.boundary_distance(flat) > 0
    vals = np.full(len(flat), np.nan)
    if np.any(inside):
        vals[inside] = F(flat[inside])
    details["samples"] = {"file": "potential.cfgr", "shape": list(nodes.shape[:-1]),
                          "origin": origin, "h": h, "defined": int(inside.sum())}
    table = _csv_bytes([f"x{d + 1}" for d in range(cfg.n)] + ["F"],
                       np.column_stack([flat[inside], vals[inside]]))
    return Outcome(checks, details, {"potential.csv": table},
                   {"potential.cfgr": encode_grid(vals.reshape(nodes.shape[:-1]), origin, h)})


def cmd_bogovskii(cfg):
    if cfg.field is None or cfg.field_kind != "scalar":
        raise ConfigError("bogovskii: the config must declare a scalar field")
    if not cfg.is_star:
        raise ConfigError("bogovskii: the domain is not star-shaped")
    op = BogovskiiOp(cfg.domain, cfg.rho, cfg.quad)
    phi = cfg.field
    supports = op.supports_of(phi, cfg.support)
    y, w = union_rule(supports, cfg.quad.outer + 8)
    mass = float(np.sum(w * phi(y)))
    _, R = shape_scale(cfg.domain.shape)
    scheme = FiniteDiffScheme(1e-3 * R, 4)
    rng = np.random.default_rng(cfg.seed)
    pts = interior_probes(cfg.domain, cfg.probes, rng, 4 * scheme.reach)
    B = CallableField(lambda p: bogovskii_apply(op, phi, p, supports), cfg.n, cfg.n)
    target = phi(pts) - mass * op.rho(pts)
    div = divergence(B, pts, scheme)
    sup = max(float(np.max(np.abs(phi(y)))), float(np.max(np.abs(target))))
    checks = [Check.at_most("bogovskii.div_B", np.max(np.abs(div - target)) / sup,
                            cfg.tol["divergence"], "div B phi = phi - rho int phi, relative to sup|phi|")]
    details = {"mass": mass, "sup_phi": sup}
    tables = {}
    vals = B(pts)
    tables["bogovskii.csv"] = _csv_bytes(
        [f"x{d + 1}" for d in range(cfg.n)] + [f"B{d + 1}" for d in range(cfg.n)] + ["div_residual"],
        np.column_stack([pts, vals, div - target]))
    return Outcome(checks, details, tables)


def cmd_homotopy(cfg):
    v = _vector_field(cfg, "homotopy")
    if cfg.homotopy["paths"] is not None:
        p0, p1 = (Path.through(p) for p in cfg.homotopy["paths"])
    else:
        p0, p1 = default_paths(cfg.domain)
    rep = homotopy_invariance_check(v, p0, p1, k=cfg.homotopy["k"], domain=cfg.domain,
                                    curl_tol=cfg.tol["curl"], quad_order=cfg.homotopy["quad_order"],
                                    panels=cfg.homotopy["panels"])
    checks = [Check.at_most("homotopy.invariance", rep.residual, cfg.tol["homotopy"]),
              Check.at_most("homotopy.smoothed", rep.smoothed_residual, cfg.tol["homotopy"])]
    details = {"integral": rep.integral, "integral_tilde": rep.integral_tilde, "curl": rep.curl,
               "k": rep.k, "k0": rep.k0, "smoothed": list(rep.smoothed),
               "boundary_residuals": list(rep.boundary_residuals)}
    s = np.linspace(0.0, 1.0, 101)
    table = _csv_bytes(["s"] + [f"path_x{d + 1}" for d in range(cfg.n)]
                       + [f"tilde_x{d + 1}" for d in range(cfg.n)],
                       np.column_stack([s, p0(s), p1(s)]))
    return Outcome(checks, details, {"homotopy.csv": table})


def cmd_sobolev(cfg):
    if cfg.field is None:
        raise ConfigError("sobolev: the config must declare a field")
    f = cfg.field
    space = GridSpace.from_grid(f) if isinstance(f, GridField) else GridSpace.unit(cfg.sobolev["grid"], cfg.n)
    x = space.nodes()
    if cfg.field_kind == "scalar":
        f0 = np.asarray(f(x), dtype=float)
        g = space.grad(f0)
    else:
        f0 = None
        g = np.asarray(f(x), dtype=float)
    checks = [Check.at_most("sobolev.adjointness", adjointness_check(space, 100, cfg.seed),
                            cfg.tol["adjointness"])]
    try:
        res = weak_poincare_pipeline(space, g, tol=cfg.tol["sobolev"], curl_tol=cfg.tol["sobolev"],
                                     seed=cfg.seed)
    except PreconditionError as exc:
        raise Refusal(str(exc), exc.residual, {"stage": getattr(exc, "stage", None)}) from exc
    details = {"stages": [{"stage": s, "residual": r, "tolerance": t} for s, r, t in res.stages]}
    for s, r, t in res.stages:
        checks.append(Check.at_most(f"sobolev.{s}", r, t))
    if f0 is not None:
        ref = f0 - f0.mean()
        scale = np.linalg.norm(ref)
        err = np.linalg.norm(res.f - ref) / scale if scale > 0 else np.linalg.norm(res.f)
        checks.append(Check.at_most("sobolev.recovery", err, cfg.tol["sobolev"], "relative L2 error"))
    flat = x.reshape(-1, space.n)
    table = _csv_bytes([f"x{d + 1}" for d in range(space.n)] + ["f"],
                       np.column_stack([flat, res.f.reshape(-1)]))
    details["samples"] = {"file": "sobolev.cfgr", "shape": list(space.shape)}
    return Outcome(checks, details, {"sobolev.csv": table},
                   {"sobolev.cfgr": encode_grid(res.f, space.origin, space.h)})


def cmd_verify(cfg, suite):
    checks, details = run_suite(suite, cfg)
    table = "name,residual,tolerance,pass\n" + "".join(
        f"{c.name},{c.residual!r},{c.tolerance!r},{int(c.passed)}\n" for c in checks)
    return Outcome(checks, details, {f"verify-{suite}.csv": table})


def cmd_validate(cfg):
    lines = [f"dimension {cfg.n}", f"domain {cfg.domain!r}"]
    if cfg.rho is not None:
        lines.append(f"rho {cfg.rho.ball!r}")
    if cfg.field is not None:
        lines.append(f"field {cfg.field_kind} {cfg.field!r}")
    if cfg.cover is not None:
        lines.append(f"cover {len(cfg.cover)} balls, simply_connected={cfg.cover.simply_connected}")
    return lines


# --------------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="curlfree", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"curlfree {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "verify":
            sp.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--csv", action="store_true")
    return p


def _threads_ok():
    value = os.environ.get("CURLFREE_THREADS")
    if value is None or value.strip() == "":
        return True
    return value.strip().isdigit() and int(value) > 0


def main(argv=None):
    args = _parser().parse_args(argv)
    if not _threads_ok():
        print("config error: CURLFREE_THREADS must be a positive integer", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed: must be nonnegative")
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        for line in cmd_validate(cfg):
            print(line)
        print("config ok")
        return 0

    out_dir = args.out or cfg.output["dir"]
    want_csv = args.csv or cfg.output["csv"]
    try:
        if args.command == "verify":
            outcome = cmd_verify(cfg, args.suite)
        else:
            outcome = {"potential": cmd_potential, "bogovskii": cmd_bogovskii,
                       "homotopy": cmd_homotopy, "sobolev": cmd_sobolev}[args.command](cfg)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        details = dict(getattr(exc, "details", {}) or {})
        details["refusal"] = str(exc)
        checks = [Check("precondition", float("nan") if exc.residual is None else exc.residual,
                        float("nan"), False, str(exc))]
        status, code, outcome = "refused", 3, Outcome(checks, details)
        print(f"refused: {exc}", file=sys.stderr)
    except CurlfreeError as exc:
        checks = [Check("run", float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}")]
        status, code, outcome = "fail", 1, Outcome(checks, {"error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
    else:
        ok = all(c.passed for c in outcome.checks)
        status, code = ("pass", 0) if ok else ("fail", 1)

    name = f"verify-{args.suite}" if args.command == "verify" else args.command
    for fname, data in outcome.grids.items():
        atomic_write(os.path.join(out_dir, fname), data)
    if want_csv:
        for fname, data in outcome.tables.items():
            atomic_write(os.path.join(out_dir, fname), data)
    report = build_report(args.command, cfg, args, outcome.checks, status, outcome.details,
                          time.perf_counter() - start)
    path = os.path.join(out_dir, f"{name}.json")
    atomic_write(path, dump_report(report))
    for c in outcome.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} residual={c.residual:.3e} tol={c.tolerance:.1e}")
    print(f"{status}: report written to {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
