"""Paths with clamped ends, line integrals, fixed-endpoint homotopies and
the homotopy-invariance check for curl-free fields."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, EvaluationError, PreconditionError
from .fieldspec import FiniteDiffScheme, curl_residual
from .mollify import mollify_homotopy
from .quadrature import composite_rule


def smoothstep(s):
    return s * s * (3 - 2 * s)


def smoothstep_deriv(s):
    return 6 * s * (1 - s)


class Path:
    """C^1 path on [0, 1] given by a point map and its derivative.

    ``start`` and ``end`` are returned exactly at s = 0 and s = 1.
    """

    def __init__(self, func, deriv, start=None, end=None):
        self._func = func
        self._deriv = deriv
        self.start = np.asarray(func(np.array(0.0)) if start is None else start, dtype=float)
        self.end = np.asarray(func(np.array(1.0)) if end is None else end, dtype=float)

    @property
    def dim(self):
        return self.start.size

    @classmethod
    def through(cls, waypoints):
        """Cubic spline through the waypoints at equally spaced knots,
        reparameterized by the smoothstep so both end derivatives vanish."""
        pts = np.asarray(waypoints, dtype=float)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        knots = np.linspace(0.0, 1.0, len(pts))
        if len(pts) == 2:
            a, b = pts
            core, dcore = (lambda u: a + u[..., None] * (b - a)), (lambda u: np.broadcast_to(b - a, u.shape + a.shape))
        else:
            spline = CubicSpline(knots, pts, axis=0)
            dspline = spline.derivative()
            core, dcore = spline, dspline
        return cls.from_function(core, dcore, start=pts[0], end=pts[-1])

    @classmethod
    def from_function(cls, f, df, start=None, end=None):
        """Clamp an arbitrary C^1 map of [0, 1] with the smoothstep."""
        return cls(lambda s: f(smoothstep(s)),
                   lambda s: df(smoothstep(s)) * smoothstep_deriv(s)[..., None],
                   start=start, end=end)

    @classmethod
    def segment(cls, a, b):
        return cls.through([a, b])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.asarray(self._func(s), dtype=float)
        out = np.where((s <= 0)[..., None], self.start, out)
        return np.where((s >= 1)[..., None], self.end, out)

    def deriv(self, s):
        return np.asarray(self._deriv(np.asarray(s, dtype=float)), dtype=float)

    def reverse(self):
        return Path(lambda s: self(1 - s), lambda s: -self.deriv(1 - s), self.end, self.start)

    def concat(self, other):
        """This path followed by ``other`` (must start where this one ends)."""
        if not np.allclose(self.end, other.start, rtol=0, atol=1e-12):
            raise ValueError("paths do not join")

        def f(s):
            s = np.asarray(s, dtype=float)
            first = (s < 0.5)[..., None]
            return np.where(first, self(np.clip(2 * s, 0, 1)), other(np.clip(2 * s - 1, 0, 1)))

        def df(s):
            s = np.asarray(s, dtype=float)
            first = (s < 0.5)[..., None]
            return 2 * np.where(first, self.deriv(np.clip(2 * s, 0, 1)),
                                other.deriv(np.clip(2 * s - 1, 0, 1)))

        return Path(f, df, self.start, other.end)

    def sample(self, count=1000):
        return self(np.linspace(0.0, 1.0, count))

    def inside(self, domain, count=1000):
        return bool(np.all(domain.contains(self.sample(count))))


def _locate_failure(fn, s, exc):
    for si in np.atleast_1d(s):
        try:
            fn(np.array([si]))
        except (EvaluationError, DomainError):
            return float(si)
    return None


def line_integral(v, path, quad_order=16, panels=16):
    """Integral of v(path(s)) . path'(s) over [0, 1], composite Gauss-Legendre."""
    s, w = composite_rule(0.0, 1.0, quad_order, panels)

    def integrand(ss):
        return np.sum(v(path(ss)) * path.deriv(ss), axis=-1)

    try:
        vals = integrand(s)
    except (EvaluationError, DomainError) as exc:
        where = _locate_failure(integrand, s, exc)
        raise type(exc)(f"{exc} (path parameter s={where})") from exc
    return float(w @ vals)


# --------------------------------------------------------------------------
# homotopies

class StraightLineHomotopy:
    """(s, t) -> gamma(s) + t (gamma~(s) - gamma(s)); exact at s = 0, 1."""

    def __init__(self, path0, path1):
        if not (np.array_equal(path0.start, path1.start) and np.array_equal(path0.end, path1.end)):
            raise ValueError("paths must share both end points")
        self.path0, self.path1 = path0, path1
        self.start, self.end = path0.start, path0.end

    def __call__(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        a = self.path0(s)
        return a + t[..., None] * (self.path1(s) - a)

    def ds(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        a = self.path0.deriv(s)
        return a + t[..., None] * (self.path1.deriv(s) - a)

    def dt(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return self.path1(s) - self.path0(s)


class ConstantHomotopy(StraightLineHomotopy):
    """gamma(s) for every t."""

    def __init__(self, path):
        super().__init__(path, path)


class GridHomotopy:
    """Homotopy sampled on a regular (s, t) grid, bilinear in between.

    ``samples[i, j]`` is the map at (i / (ns - 1), j / (nt - 1)).
    """

    def __init__(self, samples, atol=1e-12):
        samples = np.asarray(samples, dtype=float)
        self.samples = samples
        self.start, self.end = samples[0, 0], samples[-1, 0]
        if not (np.allclose(samples[0], self.start, rtol=0, atol=atol)
                and np.allclose(samples[-1], self.end, rtol=0, atol=atol)):
            raise ValueError("grid homotopy does not fix its end points")

    def __call__(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        ns, nt = self.samples.shape[:2]
        u = np.clip(s, 0, 1) * (ns - 1)
        v = np.clip(t, 0, 1) * (nt - 1)
        i = np.minimum(np.floor(u).astype(int), ns - 2)
        j = np.minimum(np.floor(v).astype(int), nt - 2)
        fu, fv = (u - i)[..., None], (v - j)[..., None]
        g = self.samples
        return ((1 - fu) * (1 - fv) * g[i, j] + fu * (1 - fv) * g[i + 1, j]
                + (1 - fu) * fv * g[i, j + 1] + fu * fv * g[i + 1, j + 1])


def w_field(v, homotopy, s, t, h=1.0 / 512):
    """(v(G) . dG/dt, -v(G) . dG/ds) with central differences of step h."""
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    if np.any(s - h < 0) or np.any(s + h > 1) or np.any(t - h < 0) or np.any(t + h > 1):
        raise DomainError("w-field stencil leaves the parameter square")
    vals = v(homotopy(s, t))
    g_s = (homotopy(s + h, t) - homotopy(s - h, t)) / (2 * h)
    g_t = (homotopy(s, t + h) - homotopy(s, t - h)) / (2 * h)
    return np.stack([np.sum(vals * g_t, axis=-1), -np.sum(vals * g_s, axis=-1)], axis=-1)


def homotopy_image(homotopy, grid=64):
    g = np.linspace(0.0, 1.0, grid)
    S, T = np.meshgrid(g, g, indexing="ij")
    return homotopy(S, T)


@dataclass
class HomotopyReport:
    integral: float
    integral_tilde: float
    residual: float
    curl: float
    k: int
    k0: int
    smoothed: tuple = field(default=())
    smoothed_residual: float = float("nan")
    boundary_residuals: tuple = field(default=())


def admissible_k(homotopy, domain, sweep=(4, 8, 16, 32, 64, 128), grid=32, order=12):
    """Smallest sweep value from which every smoothed image stays in ``domain``.

    Returns None if even the largest sweep value fails.
    """
    ok = []
    for k in sweep:
        img = homotopy_image(mollify_homotopy(homotopy, k, order), grid)
        ok.append(bool(np.all(domain.contains(img))))
    for i, k in enumerate(sweep):
        if all(ok[i:]):
            return k
    return None


def homotopy_invariance_check(v, path, path_tilde, homotopy=None, k=None, domain=None,
                              curl_tol=1e-6, scheme=None, quad_order=16, panels=16,
                              sweep=(4, 8, 16, 32, 64, 128), grid=32, smoothing_order=12):
    """Compare the line integrals of a curl-free field along two paths.

    Refuses (PreconditionError) when the field has a sizeable curl near the
    paths, when the homotopy leaves ``domain``, or when the smoothing index
    is below the admissible k0. Besides the direct residual the report
    carries the integrals along both smoothed boundary rows of the mollified
    homotopy.
    """
    if not (np.allclose(path.start, path_tilde.start) and np.allclose(path.end, path_tilde.end)):
        raise ValueError("paths must share both end points")
    s = np.linspace(0.0, 1.0, 33)
    probes = np.concatenate([path(s), path_tilde(s)])
    if scheme is None:
        span = float(np.linalg.norm(probes.max(0) - probes.min(0))) or 1.0
        scheme = FiniteDiffScheme(1e-5 * span, 2)
    curl = curl_residual(v, probes, scheme)
    if not curl <= curl_tol:
        raise PreconditionError(f"curl residual {curl:.3g} exceeds tolerance {curl_tol:.3g}", curl)

    if homotopy is None:
        homotopy = StraightLineHomotopy(path, path_tilde)
    k0 = 4
    if domain is not None:
        if not np.all(domain.contains(homotopy_image(homotopy, 64))):
            raise PreconditionError("homotopy image leaves the domain")
        k0 = admissible_k(homotopy, domain, sweep, grid, smoothing_order)
        if k0 is None:
            raise PreconditionError("no smoothing index in the sweep keeps the image inside the domain")
    if k is None:
        k = k0
    elif k < k0:
        raise PreconditionError(f"smoothing index {k} is below the admissible k0 = {k0}")

    i0 = line_integral(v, path, quad_order, panels)
    i1 = line_integral(v, path_tilde, quad_order, panels)
    smooth = mollify_homotopy(homotopy, k, smoothing_order)
    j0 = line_integral(v, smooth.boundary_path(0), quad_order, panels)
    j1 = line_integral(v, smooth.boundary_path(1), quad_order, panels)
    return HomotopyReport(
        integral=i0, integral_tilde=i1, residual=abs(i0 - i1), curl=curl, k=int(k), k0=int(k0),
        smoothed=(j0, j1), smoothed_residual=abs(j0 - j1),
        boundary_residuals=(abs(j0 - i0), abs(j1 - i1)),
    )


def smoothing_convergence(v, path, ks=(8, 16, 32, 64), homotopy=None, row=0,
                          quad_order=16, panels=32, smoothing_order=12):
    """|integral over the smoothed boundary row - integral over the row| per k."""
    if homotopy is None:
        homotopy = ConstantHomotopy(path)
    target = line_integral(v, path, quad_order, panels)
    out = []
    for k in ks:
        smooth = mollify_homotopy(homotopy, k, smoothing_order)
        out.append(abs(line_integral(v, smooth.boundary_path(row), quad_order, panels) - target))
    return out
