"""Potentials of curl-free fields: one star chart at a time, glued across a
ball cover, reconstructed from rough grid data, and with compact support.
Also the chain construction that moves mass from one ball's bump to
another's with a compactly supported field of prescribed divergence.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError, PreconditionError
from .fieldspec import FiniteDiffScheme, curl_residual, gradient
from .geometry import Ball, StarDomain, build_cover, lens_ball, sample_domain
from .mollify import MollifiedField, Mollifier, scale_field
from .operators import BogovskiiOp
from .quadrature import QuadratureRule


def default_scheme(region, order=4):
    box = region.bounding_box()
    return FiniteDiffScheme(1e-3 * float(np.linalg.norm(box.hi - box.lo)), order)


def _probes(region, count, rng, margin):
    pts = sample_domain(region, 8 * count, rng)
    pts = pts[region.boundary_distance(pts) > margin]
    if len(pts) < count:
        raise GeometryError("region too thin to place probes")
    return pts[:count]


class _ScalarField:
    n = None
    components = 1
    domain = None
    support = None


class LocalPotential(_ScalarField):
    """x -> A v(x) on one star chart.

    ``residual`` is sup |grad F - v| over the probes used at construction.
    """

    def __init__(self, op, v):
        self.op = op
        self.v = v
        self.n = op.dim
        self.domain = op.domain
        self.residual = float("nan")
        self.curl = float("nan")

    def __call__(self, points, strict=True):
        return self.op.potential(self.v, points, strict)


def local_potential(domain, rho, v, quad=None, curl_tol=1e-6, probes=64, seed=0, scheme=None):
    """Potential of a curl-free field on a star domain.

    Refuses fields whose finite-difference curl exceeds ``curl_tol`` at the
    probes: A v is a potential only for closed v.
    """
    op = BogovskiiOp(domain, rho, quad)
    scheme = scheme or default_scheme(domain)
    rng = np.random.default_rng(seed)
    pts = _probes(domain, probes, rng, 4 * scheme.reach)
    curl = curl_residual(v, pts, scheme)
    if not curl <= curl_tol:
        raise PreconditionError(f"curl residual {curl:.3g} exceeds tolerance {curl_tol:.3g}", curl)
    F = LocalPotential(op, v)
    F.curl = curl
    F.residual = float(np.max(np.abs(gradient(F, pts, scheme) - v(pts))))
    return F


# --------------------------------------------------------------------------
# rough data

@dataclass
class Stage:
    lam: float
    l: int
    grad_residual: float


@dataclass
class RoughPotential:
    """Final-stage potential plus the per-stage convergence table."""

    field: object
    stages: list

    def __call__(self, points):
        return self.field(points)

    @property
    def residuals(self):
        return [s.grad_residual for s in self.stages]


def rough_local_potential(domain, rho, g, lam_schedule, l_schedule, quad=None,
                          mollify_order=6, probes=32, seed=0, curl_tol=1e-3, scheme=None):
    """Potential of a field known only through samples.

    Each stage pairs one dilation factor with one mollification index (the
    schedules are walked together): g is dilated about the origin by lam,
    mollified at scale 1/l and fed to A. The residual reported per stage is
    the RMS of |grad F - g| over probes in the domain. The star centre of
    ``domain`` must be the origin.
    """
    lam_schedule = [float(x) for x in lam_schedule]
    l_schedule = [int(x) for x in l_schedule]
    if not lam_schedule or not l_schedule:
        raise ValueError("schedules empty")
    if len(lam_schedule) != len(l_schedule):
        raise ValueError("dilation and mollification schedules differ in length")
    if any(a <= b for a, b in zip(lam_schedule, lam_schedule[1:])) or min(lam_schedule) <= 1:
        raise ValueError("dilation schedule must decrease and stay above 1")
    if any(a >= b for a, b in zip(l_schedule, l_schedule[1:])):
        raise ValueError("mollification schedule must increase")
    n = domain.dim
    quad = quad or QuadratureRule(10, 8, 64)
    op = BogovskiiOp(domain, rho, quad)
    scheme = scheme or FiniteDiffScheme(1e-4, 2)
    rng = np.random.default_rng(seed)
    pts = _probes(domain, probes, rng, 2 * scheme.reach)
    target = g(pts)

    def staged(lam, l):
        smooth = MollifiedField(scale_field(g, lam), l, n=n, order=mollify_order)
        if smooth.domain is not None:
            _check_margin(domain, smooth.domain)
        return smooth

    last = staged(lam_schedule[-1], l_schedule[-1])
    curl = curl_residual(last, pts, FiniteDiffScheme(0.25 / l_schedule[-1], 2))
    if not curl <= curl_tol:
        raise PreconditionError(f"curl of the mollified field {curl:.3g} exceeds tolerance", curl)

    stages, F = [], None
    for lam, l in zip(lam_schedule, l_schedule):
        smooth = staged(lam, l)
        F = LocalPotential(op, smooth)
        grad = gradient(F, pts, scheme)
        res = float(np.sqrt(np.mean(np.sum((grad - target) ** 2, axis=-1))))
        F.residual = res
        stages.append(Stage(lam, l, res))
    return RoughPotential(F, stages)


def _check_margin(domain, shrunk):
    # The domain is convex, so its distance to the shrunk region's boundary
    # is attained on the domain's own boundary (or bounding box corners).
    shape = domain.shape
    if isinstance(shape, Ball):
        pts = shape.surface(256, None if shape.dim == 2 else np.random.default_rng(0))
    else:
        lo, hi = shape.lo, shape.hi
        pts = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(shape.dim, -1).T
    if np.any(shrunk.boundary_distance(pts) <= 0):
        raise DomainError("mollification radius exceeds margin")


# --------------------------------------------------------------------------
# gluing

def chart_operator(ball, rho_fraction=0.5, quad=None):
    """Bogovskii/potential operator of one cover ball, with the bump on the
    concentric ball of ``rho_fraction`` times the radius."""
    domain = StarDomain(ball, ball)
    rho = Mollifier(Ball(ball.center, rho_fraction * ball.radius))
    return BogovskiiOp(domain, rho, quad)


def _overlap_samples(a, b, count, rng, max_rounds=50):
    small, other = (a, b) if a.radius <= b.radius else (b, a)
    got = []
    total = 0
    for _ in range(max_rounds):
        pts = small.sample(rng, 4 * count)
        pts = pts[other.contains(pts) & small.contains(pts)]
        got.append(pts)
        total += len(pts)
        if total >= count:
            return np.concatenate(got)[:count]
    raise GeometryError("overlap sample count below minimum")


@dataclass
class PotentialResult:
    """Glued potential: F(x) = F_m(x) + c_m for the lowest chart m holding x."""

    cover: object
    charts: list
    constants: np.ndarray
    overlap_consistency: float
    cross_discrepancy: float
    consistent: bool
    grad_residual: float = float("nan")
    pair_report: list = field(default_factory=list)

    @property
    def n(self):
        return self.cover.dim

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, points.shape[-1])
        idx = self.cover.chart_index(flat)
        if np.any(idx < 0):
            raise DomainError("point outside the cover")
        out = np.empty(len(flat))
        for m in np.unique(idx):
            sel = idx == m
            out[sel] = self.charts[m](flat[sel]) + self.constants[m]
        return out.reshape(points.shape[:-1])

    def shifted(self, c):
        """Same potential with every constant moved by ``c``."""
        return PotentialResult(self.cover, self.charts, self.constants + c, self.overlap_consistency,
                               self.cross_discrepancy, self.consistent, self.grad_residual,
                               self.pair_report)


class _CoverRegion:
    def __init__(self, cover):
        self.cover = cover

    def contains(self, points):
        return self.cover.contains(points)

    def boundary_distance(self, points):
        return np.max([b.boundary_distance(points) for b in self.cover.balls], axis=0)

    def bounding_box(self):
        return self.cover.bounding_box()


def glue_potentials(cover, v, quad=None, rho_fraction=0.5, overlap_samples=64, seed=0,
                    tol=1e-6, curl_tol=1e-6, c1=0.0, probes=64, scheme=None):
    """Glue chart potentials into one potential on the cover.

    The first chart gets constant ``c1``. Every later chart m is matched to
    the lowest-index earlier chart it overlaps, by the mean difference over
    ``overlap_samples`` points of the overlap. Afterwards every overlapping
    pair is re-examined: on a simply connected union the remaining mean
    differences vanish, and the worst one is reported as
    ``cross_discrepancy``. ``overlap_consistency`` is the largest standard
    deviation of a chart difference over an overlap.
    """
    if overlap_samples < 64:
        raise ValueError("overlap sample count below minimum")
    if not cover.ordering_ok():
        raise GeometryError("cover ordering violated")
    rng = np.random.default_rng(seed)
    ops = [chart_operator(b, rho_fraction, quad) for b in cover.balls]
    charts = [LocalPotential(op, v) for op in ops]
    scheme = scheme or FiniteDiffScheme(1e-4 * min(b.radius for b in cover.balls), 4)
    for b, F in zip(cover.balls, charts):
        pts = _probes(b, 16, rng, 4 * scheme.reach)
        F.curl = curl_residual(v, pts, scheme)
        if not F.curl <= curl_tol:
            raise PreconditionError(f"curl residual {F.curl:.3g} exceeds tolerance on a chart", F.curl)

    samples = {}

    def diff(i, j):
        if (i, j) not in samples:
            pts = _overlap_samples(cover.balls[i], cover.balls[j], overlap_samples, rng)
            samples[(i, j)] = charts[i](pts) - charts[j](pts)
        return samples[(i, j)]

    c = np.zeros(len(cover))
    c[0] = c1
    for m in range(1, len(cover)):
        prev = min(j for j in cover.adjacency[m] if j < m)
        c[m] = c[prev] + float(np.mean(diff(prev, m)))

    worst_std, worst_mean, report = 0.0, 0.0, []
    for i, j in cover.edges():
        d = diff(i, j) + c[i] - c[j]
        std, mean = float(np.std(d)), float(np.mean(d))
        report.append((i, j, mean, std))
        worst_std = max(worst_std, std)
        worst_mean = max(worst_mean, abs(mean))
    result = PotentialResult(cover, charts, c, worst_std, worst_mean,
                             consistent=worst_mean <= tol and worst_std <= tol, pair_report=report)
    region = _CoverRegion(cover)
    pts = _probes(region, probes, rng, 4 * scheme.reach)
    result.grad_residual = float(np.max(np.abs(gradient(result, pts, scheme) - v(pts))))
    return result


# --------------------------------------------------------------------------
# chains

class ChainField:
    """Sum of Bogovskii fields; each term is (op, phi, supports)."""

    def __init__(self, n, terms):
        self.n = n
        self.components = n
        self.terms = terms
        self.domain = None
        self.support = None

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape)
        for op, phi, supports in self.terms:
            out = out + op.bogovskii(phi, points, supports, strict=False)
        return out


class _Scaled:
    def __init__(self, f, c):
        self.f, self.c = f, c

    def __call__(self, points):
        return self.c * self.f(points)


def chain_divergence_transport(cover, chain, rhos=None, quad=None, lens_fraction=0.9,
                               min_radius=None):
    """Field Phi with div Phi = rho_first - rho_last, supported in the chain.

    For each consecutive pair (i, j) a bump sigma is placed in the lens
    B_i and B_j and the transport is split into B_i(rho_i - sigma) +
    B_j(sigma - rho_j); each difference has zero mean and lives in one
    ball, whose own bump defines that ball's operator. Since B is linear
    every bump is transported as a separate term. ``rhos`` defaults to
    bumps on the concentric half-radius balls.
    """
    indices = list(chain)
    balls = cover.balls
    if rhos is None:
        rhos = [Mollifier(Ball(b.center, 0.5 * b.radius)) for b in balls]
    for m in indices:
        if not balls[m].contains_ball(rhos[m].ball):
            raise GeometryError("a chain bump is not supported in its ball")
    min_radius = min_radius if min_radius is not None else 0.05 * min(balls[m].radius for m in indices)
    ops = {m: BogovskiiOp(StarDomain(balls[m], balls[m]), rhos[m], quad) for m in indices}
    terms = []
    for i, j in zip(indices[:-1], indices[1:]):
        if not balls[i].overlaps(balls[j], cover.margin):
            raise GeometryError("consecutive chain balls do not intersect")
        lens = lens_ball(balls[i], balls[j], lens_fraction)
        if lens.radius < min_radius:
            raise GeometryError("intersection too small to host a bump")
        sigma = Mollifier(lens)
        # B is linear, so each bump gets its own term with a single support
        terms.append((ops[i], rhos[i], [rhos[i].ball]))
        terms.append((ops[i], _Scaled(sigma, -1.0), [lens]))
        terms.append((ops[j], sigma, [lens]))
        terms.append((ops[j], _Scaled(rhos[j], -1.0), [rhos[j].ball]))
    return ChainField(cover.dim, terms)


# --------------------------------------------------------------------------
# compact support

@dataclass
class CompactPotential:
    """F = F_hat - c with c the far-field constant of the glued potential."""

    glued: PotentialResult
    constant: float
    far_max: float
    far_points: np.ndarray

    def __call__(self, points):
        return self.glued(points) - self.constant


def compact_support_potential(G, workbox, radius=None, support=None, quad=None, tol=1e-6,
                              far_probes=256, seed=0, **glue_kw):
    """Compactly supported potential of a compactly supported gradient field.

    The potential is glued over a ball cover of ``workbox``; its constant
    value far from the support is estimated on the shell of the workbox
    within one ball radius of its boundary, outside the hull of the
    support, and subtracted.
    """
    n = workbox.dim
    if n < 2:
        raise ValueError("requires n ≥ 2")
    support = support if support is not None else getattr(G, "support", None)
    if support is None:
        raise ValueError("a declared support is required")
    radius = radius or 0.25 * float(np.min(workbox.hi - workbox.lo))
    sb = support.bounding_box()
    if np.any(sb.lo - workbox.lo < 2 * radius) or np.any(workbox.hi - sb.hi < 2 * radius):
        raise GeometryError("workbox margin around spt G below 2× ball radius")
    cover = build_cover(workbox, radius)
    # long segments cross the support: the s-rule needs more nodes than
    # the chart-level default
    quad = quad or QuadratureRule(12, 64, 64)
    glued = glue_potentials(cover, G, quad, seed=seed, tol=tol, **glue_kw)
    rng = np.random.default_rng(seed + 1)
    pts = workbox.sample(rng, 64 * far_probes)
    shell = workbox.boundary_distance(pts) < radius
    shell &= sb.distance(pts) > radius
    pts = pts[shell][:far_probes]
    if len(pts) < far_probes // 4:
        raise GeometryError("too few far probes in the workbox shell")
    vals = glued(pts)
    c = float(np.mean(vals))
    return CompactPotential(glued, c, float(np.max(np.abs(vals - c))), pts)
