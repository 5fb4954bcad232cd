"""Property suites behind ``curlfree verify``.

Each suite takes a :class:`RunConfig` and returns a list of :class:`Check`
records plus a dict of details. Everything random is drawn from generators
seeded with the config seed, so a suite run is reproducible bit for bit.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from .errors import PreconditionError
from .fieldspec import AnalyticField, CallableField, FiniteDiffScheme, divergence, gradient
from .geometry import Annulus, Ball, Box, StarDomain, support_hull_test
from .homotopy import Path, homotopy_invariance_check, line_integral, smoothing_convergence
from .mollify import Mollifier
from .operators import (
    BogovskiiOp, bogovskii_apply, derham_local_functional, duality_residual,
    potential_apply,
)
from .quadrature import tensor_rule
from .sobolev_checks import (
    DivFreeTestSet, GridSpace, PipelineRefusal, adjointness_check, weak_poincare_pipeline,
)

SUITES = ("bogovskii", "duality", "homotopy", "sobolev", "support")


@dataclass
class Check:
    name: str
    residual: float
    tolerance: float
    passed: bool
    note: str = ""

    @classmethod
    def at_most(cls, name, residual, tolerance, note=""):
        residual = float(residual)
        return cls(name, residual, float(tolerance), bool(residual <= tolerance), note)

    def as_dict(self):
        out = {"name": self.name, "residual": self.residual, "tolerance": self.tolerance,
               "pass": self.passed}
        if self.note:
            out["note"] = self.note
        return out


# --------------------------------------------------------------------------
# generators

class Polynomial:
    """f(x) = sum c_a x^a over multi-indices |a| <= degree."""

    def __init__(self, coeffs, exponents):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.exponents = np.asarray(exponents, dtype=int)
        self.n = self.exponents.shape[1]

    @classmethod
    def random(cls, rng, n, degree=3):
        exps = [a for a in itertools.product(range(degree + 1), repeat=n) if sum(a) <= degree]
        return cls(rng.uniform(-1, 1, len(exps)), exps)

    def _powers(self, x):
        top = int(self.exponents.max(initial=0))
        pw = [[np.ones(x.shape[:-1])] for _ in range(self.n)]
        for j in range(self.n):
            for _ in range(top):
                pw[j].append(pw[j][-1] * x[..., j])
        return pw

    def _combine(self, pw, coeffs, exponents):
        out = np.zeros(pw[0][0].shape)
        for c, a in zip(coeffs, exponents):
            if c != 0:
                term = c
                for j in range(self.n):
                    term = term * pw[j][a[j]]
                out = out + term
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._combine(self._powers(x), self.coeffs, self.exponents)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        pw = self._powers(x)
        out = []
        for j in range(self.n):
            e = self.exponents.copy()
            c = self.coeffs * e[:, j]
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            out.append(self._combine(pw, c, e))
        return np.stack(out, axis=-1)


def shape_scale(shape):
    """(centre, half-size) of a ball or box."""
    if isinstance(shape, Ball):
        return shape.center, shape.radius
    return shape.center, 0.5 * float(np.min(shape.hi - shape.lo))


def bump_difference(b1, b2):
    """phi = rho_1 - rho_2 for unit-mass bumps on two balls; zero mean."""
    m1, m2 = Mollifier(b1), Mollifier(b2)
    return CallableField(lambda p: m1(p) - m2(p), b1.dim, support=[b1, b2])


def random_bump_pair(domain, rng, lo=0.2, hi=0.35):
    """Two bump balls compactly inside the domain shape."""
    shape = domain.shape if isinstance(domain, StarDomain) else domain
    c, R = shape_scale(shape)
    balls = []
    while len(balls) < 2:
        r = R * rng.uniform(lo, hi)
        p = shape.sample(rng, 1)[0]
        if float(shape.boundary_distance(p)) > r + 0.05 * R:
            balls.append(Ball(p, r))
    return balls


def interior_probes(region, count, rng, margin):
    out = []
    while sum(len(o) for o in out) < count:
        pts = region.sample(rng, 4 * count)
        out.append(pts[region.boundary_distance(pts) > margin])
    return np.concatenate(out)[:count]


def default_paths(domain):
    """Two paths through the domain with common end points, on either side
    of its centre."""
    if isinstance(domain, Annulus):
        c, R = domain.center, 0.5 * (domain.inner + domain.outer)
    else:
        shape = domain.shape if isinstance(domain, StarDomain) else domain
        c, R = shape_scale(shape)
        R = 0.5 * R
    n = c.size
    e1 = np.eye(n)[0]
    e2 = np.eye(n)[1] if n > 1 else np.zeros(n)
    a, b = c - R * e1, c + R * e1
    bend = 0.8 if isinstance(domain, Annulus) else 0.6
    return (Path.through([a, c + bend * R * e2, b]), Path.through([a, c - bend * R * e2, b]))


def winding_field(x):
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x[..., :2] ** 2, axis=-1)
    return np.stack([-x[..., 1], x[..., 0]], axis=-1) / r2[..., None]


def circle_path(center, radius):
    c = np.asarray(center, dtype=float)
    f = lambda u: c + radius * np.stack([np.cos(2 * np.pi * u), np.sin(2 * np.pi * u)], -1)
    df = lambda u: 2 * np.pi * radius * np.stack([-np.sin(2 * np.pi * u), np.cos(2 * np.pi * u)], -1)
    start = c + np.array([radius, 0.0])
    return Path.from_function(f, df, start, start)


def _operator(cfg):
    if not cfg.is_star:
        raise PreconditionError("this suite needs a star-shaped domain")
    return BogovskiiOp(cfg.domain, cfg.rho, cfg.quad)


# --------------------------------------------------------------------------
# suites

def suite_bogovskii(cfg):
    """div B phi = phi for generated zero-mean phi, grad A v = v for
    polynomial gradients."""
    op = _operator(cfg)
    rng = np.random.default_rng(cfg.seed)
    _, R = shape_scale(cfg.domain.shape)
    scheme = FiniteDiffScheme(1e-3 * R, 4)
    checks, sups = [], []
    count = cfg.verify["probes"]
    for i in range(cfg.verify["cases"]):
        b1, b2 = random_bump_pair(cfg.domain, rng)
        phi = bump_difference(b1, b2)
        pts = interior_probes(cfg.domain, count, rng, 4 * scheme.reach)
        Bf = CallableField(lambda p, phi=phi: bogovskii_apply(op, phi, p), op.dim, op.dim)
        err = np.abs(divergence(Bf, pts, scheme) - phi(pts))
        sup = float(np.max(np.abs(np.concatenate([phi(pts), phi(np.stack([b1.center, b2.center]))]))))
        sups.append(sup)
        checks.append(Check.at_most(f"bogovskii.div_B[{i}]", np.max(err) / sup,
                                    cfg.tol["divergence"], "relative to sup|phi|"))
    for i in range(cfg.verify["cases"]):
        poly = Polynomial.random(rng, op.dim)
        pts = interior_probes(cfg.domain, count, rng, 4 * scheme.reach)
        F = CallableField(lambda p: potential_apply(op, poly.gradient, p), op.dim)
        err = np.abs(gradient(F, pts, scheme) - poly.gradient(pts))
        checks.append(Check.at_most(f"bogovskii.grad_A[{i}]", np.max(err), cfg.tol["grad"]))
    return checks, {"sup_phi": sups}


def suite_duality(cfg):
    """int (A v) phi + int v . B phi = 0 with independent quadratures, and
    the local de Rham functional of a gradient."""
    op = _operator(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    checks = []
    for i in range(cfg.verify["cases"]):
        b1, b2 = random_bump_pair(cfg.domain, rng)
        phi = bump_difference(b1, b2)
        coeffs = [Polynomial.random(rng, op.dim, 2) for _ in range(op.dim)]
        v = lambda x, cs=coeffs: np.stack([c(x) for c in cs], axis=-1)
        checks.append(Check.at_most(f"duality.identity[{i}]", duality_residual(op, v, phi),
                                    cfg.tol["duality"]))
    b1, b2 = random_bump_pair(cfg.domain, rng)
    phi = bump_difference(b1, b2)
    f = Polynomial.random(rng, op.dim)
    # each bump is smooth on its own box, so a tensor rule there converges fast
    direct = 0.0
    for ball, sign in ((b1, 1.0), (b2, -1.0)):
        box = ball.bounding_box()
        y, w = tensor_rule(box.lo, box.hi, 128)
        direct += sign * float(np.sum(w * f(y) * Mollifier(ball)(y)))
    value = derham_local_functional(op, f.gradient, phi, offset=7)
    checks.append(Check.at_most("duality.derham", abs(value - direct), cfg.tol["duality"],
                                "<F, phi> against the pairing with a known potential"))
    return checks, {}


def suite_support(cfg):
    """B phi vanishes outside the union of the hulls of spt phi and spt rho."""
    op = _operator(cfg)
    rng = np.random.default_rng(cfg.seed + 2)
    checks, kept = [], []
    box = cfg.domain.bounding_box()
    big = Box(box.lo - 0.25 * (box.hi - box.lo), box.hi + 0.25 * (box.hi - box.lo))
    for i in range(cfg.verify["cases"]):
        b1, b2 = random_bump_pair(cfg.domain, rng)
        phi = bump_difference(b1, b2)
        want = cfg.verify["support_points"]
        pts = []
        while sum(len(p) for p in pts) < want:
            cand = big.sample(rng, 2 * want)
            inside = support_hull_test(cand, b1, op.rho.ball) | support_hull_test(cand, b2, op.rho.ball)
            pts.append(cand[~inside])
        pts = np.concatenate(pts)[:want]
        kept.append(len(pts))
        vals = bogovskii_apply(op, phi, pts, strict=False)
        checks.append(Check.at_most(f"support.outside_hull[{i}]", np.max(np.abs(vals)),
                                    cfg.tol["support"]))
    return checks, {"points": kept}


def suite_homotopy(cfg):
    """Line integrals of the config field along two paths, the winding
    control loop and the smoothing trend."""
    n = cfg.n
    checks, details = [], {}
    if cfg.field is not None and cfg.field_kind == "vector":
        v = cfg.field
    else:
        v = AnalyticField(["x2", "x1"] + ["0"] * (n - 2), n) if n >= 2 else None
    if cfg.homotopy["paths"] is not None:
        p0, p1 = (Path.through(p) for p in cfg.homotopy["paths"])
    else:
        p0, p1 = default_paths(cfg.domain)
    if v is not None:
        try:
            rep = homotopy_invariance_check(
                v, p0, p1, k=cfg.homotopy["k"], domain=cfg.domain, curl_tol=cfg.tol["curl"],
                quad_order=cfg.homotopy["quad_order"], panels=cfg.homotopy["panels"])
        except PreconditionError as exc:
            res = float("nan") if exc.residual is None else exc.residual
            checks.append(Check("homotopy.invariance", res, cfg.tol["homotopy"], False,
                                f"refused: {exc}"))
        else:
            checks.append(Check.at_most("homotopy.invariance", rep.residual, cfg.tol["homotopy"]))
            checks.append(Check.at_most("homotopy.smoothed", rep.smoothed_residual, cfg.tol["homotopy"]))
            details.update(integral=rep.integral, integral_tilde=rep.integral_tilde, k=rep.k,
                           k0=rep.k0, smoothed=list(rep.smoothed))
    if n == 2:
        loop = circle_path([0.0, 0.0], 1.0)
        value = line_integral(winding_field, loop, 16, 32)
        checks.append(Check.at_most("homotopy.winding_period", abs(value - 2 * np.pi),
                                    cfg.tol["winding"]))
        details["winding_integral"] = value
        rot = lambda x: np.stack([-x[..., 1], x[..., 0]], axis=-1)
        errs = smoothing_convergence(rot, p0, ks=(8, 16, 32, 64))
        rise = max(max(b - a for a, b in zip(errs, errs[1:])), 0.0)
        checks.append(Check("homotopy.smoothing_trend", rise, 0.0, rise <= 0.0,
                            "largest increase over k = 8, 16, 32, 64"))
        details["smoothing_errors"] = errs
    return checks, details


def suite_sobolev(cfg):
    """Discrete adjointness, the test set, recovery of a known potential and
    refusal of a rotational field."""
    m = cfg.sobolev["grid"]
    n = max(cfg.n, 2)
    space = GridSpace.unit(m, n)
    tests = DivFreeTestSet.random(space, cfg.sobolev["tests"], seed=cfg.seed)
    checks = [
        Check.at_most("sobolev.adjointness", adjointness_check(space, 100, cfg.seed), cfg.tol["adjointness"]),
        Check.at_most("sobolev.test_divergence", tests.max_divergence(), cfg.tol["adjointness"]),
    ]
    x = space.nodes()
    f0 = np.sin(2 * x[..., 0]) * np.cos(3 * x[..., 1]) + x[..., 0] ** 2
    f0 = f0 - f0.mean()
    try:
        res = weak_poincare_pipeline(space, space.grad(f0), tests, tol=cfg.tol["sobolev"],
                                     curl_tol=cfg.tol["sobolev"])
        err = np.linalg.norm(res.f - f0) / np.linalg.norm(f0)
        checks.append(Check.at_most("sobolev.recovery", err, cfg.tol["sobolev"], "relative L2 error"))
        checks.append(Check.at_most("sobolev.mean", abs(res.f.mean()), cfg.tol["adjointness"]))
    except PipelineRefusal as exc:
        checks.append(Check("sobolev.recovery", exc.residual, cfg.tol["sobolev"], False,
                            f"refused at the {exc.stage} stage"))
    rot = np.zeros(space.shape + (n,))
    rot[..., 0], rot[..., 1] = -x[..., 1], x[..., 0]
    try:
        weak_poincare_pipeline(space, rot, tests, tol=cfg.tol["sobolev"], curl_tol=cfg.tol["sobolev"])
    except PipelineRefusal as exc:
        checks.append(Check("sobolev.rotational_refused", exc.residual, cfg.tol["sobolev"],
                            exc.stage == "curl", f"refused at the {exc.stage} stage"))
    else:
        checks.append(Check("sobolev.rotational_refused", 0.0, cfg.tol["sobolev"], False,
                            "rotational field was accepted"))
    return checks, {"grid": m}


RUNNERS = {
    "bogovskii": suite_bogovskii,
    "duality": suite_duality,
    "homotopy": suite_homotopy,
    "sobolev": suite_sobolev,
    "support": suite_support,
}


def run_suite(name, cfg):
    """Run one suite or ``all``; returns (checks, details keyed by suite)."""
    names = SUITES if name == "all" else (name,)
    checks, details = [], {}
    for s in names:
        c, d = RUNNERS[s](cfg)
        checks.extend(c)
        details[s] = d
    return checks, details
