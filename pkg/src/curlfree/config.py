"""Run configuration: one TOML document describing the domain, the bump,
the field and the numerical parameters of a run.

Every problem found while loading is raised as :class:`ConfigError` with
the dotted key it concerns; expression errors additionally carry the byte
offset inside the expression and, when the expression appears verbatim in
the file, inside the file. See ``docs/config.md`` for the format.
"""

from dataclasses import dataclass, field as dfield
import copy
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError, ExprError, GeometryError
from .fieldspec import AnalyticField, Expression, GridField, read_grid
from .geometry import Annulus, Ball, Box, Cover, StarDomain, build_cover
from .mollify import Mollifier
from .quadrature import QuadratureRule

DEFAULT_TOLERANCES = {
    "curl": 1e-6,
    "grad": 1e-6,
    "overlap": 1e-6,
    "divergence": 1e-4,
    "duality": 1e-6,
    "support": 1e-10,
    "homotopy": 1e-6,
    "winding": 1e-6,
    "adjointness": 1e-12,
    "sobolev": 1e-8,
    "rough": 5e-2,
}


class ConfigExprError(ConfigError):
    """Malformed expression inside a config file."""

    def __init__(self, key, err, file_offset=None):
        where = f" (file byte {file_offset})" if file_offset is not None else ""
        super().__init__(f"{key}: {err.reason} at offset {err.offset}{where}")
        self.key = key
        self.offset = err.offset
        self.file_offset = file_offset


@dataclass
class RunConfig:
    n: int
    seed: int
    domain: object
    rho: Mollifier = None
    field: object = None
    field_kind: str = None
    support: list = None
    cover: Cover = None
    quad: QuadratureRule = dfield(default_factory=QuadratureRule)
    tol: dict = dfield(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    probes: int = 50
    rough: dict = dfield(default_factory=dict)
    homotopy: dict = dfield(default_factory=dict)
    sobolev: dict = dfield(default_factory=dict)
    verify: dict = dfield(default_factory=dict)
    output: dict = dfield(default_factory=dict)
    raw: dict = dfield(default_factory=dict)
    path: str = None

    @property
    def is_star(self):
        return isinstance(self.domain, StarDomain)

    def with_seed(self, seed):
        out = copy.copy(self)
        out.seed = int(seed)
        return out


# --------------------------------------------------------------------------
# helpers

def _get(table, key, prefix, kind=None, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{prefix}{key}: missing")
        return default
    value = table[key]
    numeric = kind in (int, float, (int, float))
    if kind is not None and (not isinstance(value, kind) or numeric and isinstance(value, bool)):
        raise ConfigError(f"{prefix}{key}: expected {_kind_name(kind)}, got {type(value).__name__}")
    return value


def _kind_name(kind):
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _vector(table, key, prefix, n):
    value = _get(table, key, prefix, list, required=True)
    if len(value) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{prefix}{key}: expected {n} numbers")
    return np.array(value, dtype=float)


def _positive(table, key, prefix, default=None, required=False):
    value = _get(table, key, prefix, (int, float), default, required)
    if value is not None and not value > 0:
        raise ConfigError(f"{prefix}{key}: must be positive")
    return value


def _count(table, key, prefix, default, minimum=1):
    value = _get(table, key, prefix, int, default)
    if value < minimum:
        raise ConfigError(f"{prefix}{key}: must be at least {minimum}")
    return value


def _region(table, prefix, n, kinds=("ball", "box")):
    if not isinstance(table, dict):
        raise ConfigError(f"{prefix.rstrip('.')}: expected a table")
    kind = _get(table, "kind", prefix, str, "ball")
    if kind not in kinds:
        raise ConfigError(f"{prefix}kind: expected one of {', '.join(kinds)}, got {kind!r}")
    try:
        if kind == "ball":
            return Ball(_vector(table, "center", prefix, n), _positive(table, "radius", prefix, required=True))
        if kind == "box":
            return Box(_vector(table, "lo", prefix, n), _vector(table, "hi", prefix, n))
        return Annulus(_vector(table, "center", prefix, n),
                       float(_get(table, "inner", prefix, (int, float), required=True)),
                       _positive(table, "outer", prefix, required=True))
    except GeometryError as exc:
        raise ConfigError(f"{prefix.rstrip('.')}: {exc}") from exc


def _expression_offset(text, source, offset):
    if text is None:
        return None
    encoded = source.encode("utf-8")
    # quoted occurrence first, so "x1" does not match inside another string
    for quote in (b'"', b"'"):
        pos = text.find(quote + encoded + quote)
        if pos >= 0:
            return pos + 1 + offset
    return None


# --------------------------------------------------------------------------
# sections

def _domain(raw, n):
    table = _get(raw, "domain", "", dict, required=True)
    shape = _region(table, "domain.", n, ("ball", "box", "annulus"))
    if isinstance(shape, Annulus):
        if "star_ball" in table:
            raise ConfigError("domain.star_ball: an annulus is not star-shaped")
        return shape
    if "star_ball" in table:
        star = _region(table["star_ball"], "domain.star_ball.", n, ("ball",))
    elif isinstance(shape, Ball):
        star = Ball(shape.center, 0.5 * shape.radius)
    else:
        star = Ball(shape.center, 0.25 * float(np.min(shape.hi - shape.lo)))
    try:
        return StarDomain(shape, star)
    except GeometryError as exc:
        raise ConfigError(f"domain.star_ball: {exc}") from exc


def _rho(raw, n, domain):
    if not isinstance(domain, StarDomain):
        if "rho" in raw:
            raise ConfigError("rho: a bump needs a star-shaped domain")
        return None
    star = domain.star_ball
    if "rho" in raw:
        ball = _region(raw["rho"], "rho.", n, ("ball",))
    else:
        ball = Ball(star.center, 0.6 * star.radius)
    if not star.contains_ball(ball):
        raise ConfigError("rho: support of rho is not inside the star ball")
    return Mollifier(ball)


def _field(raw, n, base, text):
    if "field" not in raw:
        return None, None, None
    table = _get(raw, "field", "", dict)
    support = None
    if "support" in table:
        items = table["support"]
        items = items if isinstance(items, list) else [items]
        support = [_region(item, f"field.support[{i}].", n) for i, item in enumerate(items)]
    given = [k for k in ("expr", "components", "grid") if k in table]
    if len(given) != 1:
        raise ConfigError("field: give exactly one of expr, components, grid")
    key = given[0]
    if key == "grid":
        paths = table["grid"]
        paths = [paths] if isinstance(paths, str) else paths
        if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
            raise ConfigError("field.grid: expected a path or a list of paths")
        if len(paths) not in (1, n):
            raise ConfigError(f"field.grid: expected 1 or {n} grid files")
        grids = []
        for p in paths:
            full = p if os.path.isabs(p) else os.path.join(base, p)
            try:
                grids.append(read_grid(full))
            except OSError as exc:
                raise ConfigError(f"field.grid: cannot read {p}: {exc.strerror}") from exc
            except ConfigError as exc:
                raise ConfigError(f"field.grid: {p}: {exc}") from exc
        if any(g.n != n for g in grids):
            raise ConfigError("field.grid: grid dimension differs from dimension")
        try:
            f = grids[0] if len(grids) == 1 else GridField.from_components(grids)
        except ValueError as exc:
            raise ConfigError(f"field.grid: {exc}") from exc
        return f, "vector" if f.components > 1 else "scalar", support
    sources = table[key]
    if key == "expr":
        if not isinstance(sources, str):
            raise ConfigError("field.expr: expected a string")
        sources = [sources]
    elif not isinstance(sources, list) or len(sources) != n or not all(isinstance(s, str) for s in sources):
        raise ConfigError(f"field.components: expected {n} expression strings")
    exprs = []
    for i, src in enumerate(sources):
        name = "field.expr" if key == "expr" else f"field.components[{i}]"
        try:
            exprs.append(Expression(src, n))
        except ExprError as exc:
            raise ConfigExprError(name, exc, _expression_offset(text, src, exc.offset)) from exc
    f = AnalyticField(exprs, n, support=support)
    return f, "scalar" if key == "expr" else "vector", support


def _cover(raw, n, domain):
    if "cover" not in raw:
        return None
    table = _get(raw, "cover", "", dict)
    simply = _get(table, "simply_connected", "cover.", bool, True)
    given = [k for k in ("balls", "ring", "radius") if k in table]
    if len(given) != 1:
        raise ConfigError("cover: give exactly one of radius, balls, ring")
    try:
        if "balls" in table:
            items = _get(table, "balls", "cover.", list)
            balls = [_region(b, f"cover.balls[{i}].", n, ("ball",)) for i, b in enumerate(items)]
            cover = Cover(tuple(balls), simply)
        elif "ring" in table:
            ring = _get(table, "ring", "cover.", dict)
            if n != 2:
                raise ConfigError("cover.ring: ring covers are planar")
            c = _vector(ring, "center", "cover.ring.", 2)
            R = _positive(ring, "radius", "cover.ring.", required=True)
            count = _count(ring, "count", "cover.ring.", 8, 3)
            r = _positive(ring, "ball_radius", "cover.ring.", required=True)
            th = 2 * np.pi * np.arange(count) / count
            balls = [Ball(c + R * np.array([np.cos(a), np.sin(a)]), r) for a in th]
            cover = Cover(tuple(balls), simply)
        else:
            r = _positive(table, "radius", "cover.", required=True)
            if isinstance(domain, Annulus):
                raise ConfigError("cover.radius: automatic covers need a ball or box domain")
            cover = build_cover(domain, r, simply_connected=simply)
    except GeometryError as exc:
        raise ConfigError(f"cover: {exc}") from exc
    if not cover.ordering_ok():
        raise ConfigError("cover: cover ordering violated")
    if not cover.is_connected():
        raise ConfigError("cover: cover adjacency graph is disconnected")
    return cover


def _tolerances(raw):
    table = _get(raw, "tolerances", "", dict, {})
    tol = dict(DEFAULT_TOLERANCES)
    for key, value in table.items():
        if key not in tol:
            raise ConfigError(f"tolerances.{key}: unknown tolerance")
        tol[key] = float(_positive(table, key, "tolerances.", required=True))
    return tol


def _quad(raw):
    table = _get(raw, "quadrature", "", dict, {})
    base = QuadratureRule()
    try:
        return QuadratureRule(_count(table, "outer", "quadrature.", base.outer),
                              _count(table, "inner", "quadrature.", base.inner),
                              _count(table, "angular", "quadrature.", base.angular))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"quadrature: {exc}") from exc


def _rough(raw):
    table = _get(raw, "rough", "", dict, {})
    lam = _get(table, "lam", "rough.", list, [1.5, 1.25, 1.1, 1.04, 1.01])
    ls = _get(table, "l", "rough.", list, [4, 8, 16, 32, 128])
    if not lam or len(lam) != len(ls):
        raise ConfigError("rough: lam and l must be nonempty and of equal length")
    if any(not isinstance(x, (int, float)) or isinstance(x, bool) for x in lam):
        raise ConfigError("rough.lam: expected numbers")
    if any(not isinstance(x, int) or isinstance(x, bool) for x in ls):
        raise ConfigError("rough.l: expected integers")
    if min(lam) <= 1 or any(a <= b for a, b in zip(lam, lam[1:])):
        raise ConfigError("rough.lam: must decrease and stay above 1")
    if min(ls) < 1 or any(a >= b for a, b in zip(ls, ls[1:])):
        raise ConfigError("rough.l: must be positive and increasing")
    return {"lam": [float(x) for x in lam], "l": list(ls),
            "mollify_order": _count(table, "mollify_order", "rough.", 6, 2)}


def _homotopy(raw, n):
    table = _get(raw, "homotopy", "", dict, {})
    out = {"k": _get(table, "k", "homotopy.", int, None),
           "quad_order": _count(table, "quad_order", "homotopy.", 16, 2),
           "panels": _count(table, "panels", "homotopy.", 16, 1),
           "paths": None}
    if "paths" in table:
        paths = table["paths"]
        if not isinstance(paths, list) or len(paths) != 2:
            raise ConfigError("homotopy.paths: expected two waypoint lists")
        parsed = []
        for i, p in enumerate(paths):
            pts = np.asarray(p, dtype=float) if isinstance(p, list) else None
            if pts is None or pts.ndim != 2 or pts.shape[1] != n or len(pts) < 2:
                raise ConfigError(f"homotopy.paths[{i}]: expected at least two points of dimension {n}")
            parsed.append(pts)
        if not (np.array_equal(parsed[0][0], parsed[1][0]) and np.array_equal(parsed[0][-1], parsed[1][-1])):
            raise ConfigError("homotopy.paths: the two paths must share both end points")
        out["paths"] = parsed
    return out


def _output(raw):
    table = _get(raw, "output", "", dict, {})
    return {"dir": _get(table, "dir", "output.", str, "curlfree-out"),
            "grid": _count(table, "grid", "output.", 33, 2),
            "csv": _get(table, "csv", "output.", bool, False)}


# --------------------------------------------------------------------------

def parse_config(text, base=".", path=None):
    """Build a :class:`RunConfig` from TOML source."""
    data = text.encode("utf-8") if isinstance(text, str) else text
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    known = {"dimension", "seed", "probes", "domain", "rho", "field", "cover", "quadrature",
             "tolerances", "rough", "homotopy", "sobolev", "verify", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown key")
    n = _get(raw, "dimension", "", int, required=True)
    if n < 1:
        raise ConfigError("dimension: must be at least 1")
    seed = _get(raw, "seed", "", int, 0)
    if seed < 0:
        raise ConfigError("seed: must be nonnegative")
    domain = _domain(raw, n)
    rho = _rho(raw, n, domain)
    f, kind, support = _field(raw, n, base, data)
    sob = _get(raw, "sobolev", "", dict, {})
    ver = _get(raw, "verify", "", dict, {})
    return RunConfig(
        n=n, seed=seed, domain=domain, rho=rho, field=f, field_kind=kind, support=support,
        cover=_cover(raw, n, domain), quad=_quad(raw), tol=_tolerances(raw),
        probes=_count(raw, "probes", "", 50),
        rough=_rough(raw), homotopy=_homotopy(raw, n),
        sobolev={"grid": _count(sob, "grid", "sobolev.", 32, 3),
                 "tests": _count(sob, "tests", "sobolev.", 50)},
        verify={"cases": _count(ver, "cases", "verify.", 1),
                "probes": _count(ver, "probes", "verify.", 16),
                "support_points": _count(ver, "support_points", "verify.", 1000)},
        output=_output(raw), raw=raw, path=path,
    )


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(data, os.path.dirname(os.path.abspath(path)), path)
