"""Scalar and vector fields plus the finite-difference derivatives used by
every curl and divergence check.

A field is anything callable on points of shape (..., n) that returns (...)
for scalars or (..., n) for vectors. The classes here add the optional
``domain`` (region where evaluation is valid) and ``support`` (declared
compact support) attributes that the operators consult.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from ..errors import DomainError
from ..geometry import Box
from .expr import Expression, max_variable


class Field:
    n = None
    components = 1
    domain = None
    support = None

    @property
    def is_vector(self):
        return self.components > 1


class AnalyticField(Field):
    """Field whose components are expressions in x1..xn."""

    def __init__(self, expressions, n=None, domain=None, support=None):
        if isinstance(expressions, str):
            expressions = [expressions]
        exprs = [e if isinstance(e, Expression) else Expression(e, n) for e in expressions]
        if n is None:
            n = max([max_variable(e.ast) for e in exprs] + [len(exprs) if len(exprs) > 1 else 1])
        self.exprs = exprs
        self.n = n
        self.components = len(exprs)
        self.domain = domain
        self.support = support

    def __repr__(self):
        return f"AnalyticField({[e.source for e in self.exprs]!r}, n={self.n})"

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if self.components == 1:
            return self.exprs[0](points)
        return np.stack([e(points) for e in self.exprs], axis=-1)


class CallableField(Field):
    """Wrap a plain vectorized callable with metadata."""

    def __init__(self, func, n, components=1, domain=None, support=None):
        self.func = func
        self.n = n
        self.components = components
        self.domain = domain
        self.support = support

    def __call__(self, points):
        return self.func(np.asarray(points, dtype=float))


class GridField(Field):
    """Node values on a uniform lattice with multilinear interpolation.

    ``values`` has the lattice shape, plus a trailing component axis for
    vector fields. Node k sits at ``origin + h * k``.
    """

    def __init__(self, values, origin, h, vector=False):
        values = np.asarray(values, dtype=float)
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        n = origin.size
        if not h > 0:
            raise ValueError("grid spacing must be positive")
        shape = values.shape[:n]
        if len(shape) != n or any(s < 2 for s in shape):
            raise ValueError("grid values must have at least 2 nodes per axis")
        if vector and values.shape[n:] != (n,):
            raise ValueError("vector grid values need a trailing axis of length n")
        if not vector and values.ndim != n:
            raise ValueError("scalar grid values must have exactly n axes")
        self.values = values
        self.origin = origin
        self.h = float(h)
        self.shape = shape
        self.n = n
        self.components = n if vector else 1
        self.domain = Box(origin, origin + self.h * (np.array(shape) - 1))

    @classmethod
    def sample(cls, func, origin, h, shape):
        """Sample a callable on the lattice."""
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        axes = [origin[d] + h * np.arange(shape[d]) for d in range(origin.size)]
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        values = np.asarray(func(nodes), dtype=float)
        return cls(values, origin, h, vector=values.ndim == origin.size + 1)

    @classmethod
    def from_components(cls, grids):
        """Stack scalar grids sharing a lattice into a vector grid."""
        g0 = grids[0]
        for g in grids[1:]:
            if g.shape != g0.shape or g.h != g0.h or not np.array_equal(g.origin, g0.origin):
                raise ValueError("component grids must share the lattice")
        return cls(np.stack([g.values for g in grids], axis=-1), g0.origin, g0.h, vector=True)

    def nodes(self):
        axes = [self.origin[d] + self.h * np.arange(self.shape[d]) for d in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        u = (points - self.origin) / self.h
        upper = np.array(self.shape) - 1
        tol = 1e-9
        if u.size and (u.min() < -tol or np.any(u.max(axis=tuple(range(u.ndim - 1))) > upper + tol)):
            bad = points[np.any((u < -tol) | (u > upper + tol), axis=-1)][0]
            raise DomainError(f"point {bad.tolist()} lies outside the grid")
        u = np.clip(u, 0, upper)
        base = np.minimum(u.astype(int), upper - 1)
        frac = u - base
        # row-major linear index of the lower corner
        mult = np.cumprod((1,) + self.shape[:0:-1])[::-1]
        lin = base @ mult
        flat = self.values.reshape(int(np.prod(self.shape)), -1)
        out = 0.0
        for corner in itertools.product((0, 1), repeat=self.n):
            weight = 1.0
            for d, c in enumerate(corner):
                weight = weight * (frac[..., d] if c else 1 - frac[..., d])
            val = flat[lin + int(np.dot(corner, mult))]
            out = out + weight[..., None] * val
        return out if self.components > 1 else out[..., 0]


@dataclass(frozen=True)
class FiniteDiffScheme:
    """Central differences of order 2 or 4 with step ``h``."""

    h: float = 1e-5
    order: int = 2

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("finite-difference step must be positive")
        if self.order not in (2, 4):
            raise ValueError("finite-difference order must be 2 or 4")

    @property
    def reach(self):
        return self.h * (1 if self.order == 2 else 2)

    @classmethod
    def for_domain(cls, domain, order=2):
        """Default step: 1e-5 times the domain diameter."""
        box = domain.bounding_box()
        return cls(1e-5 * float(np.linalg.norm(box.hi - box.lo)), order)


def _check_stencil(f, x, scheme):
    domain = getattr(f, "domain", None)
    if domain is None:
        return
    if np.any(domain.boundary_distance(x) <= scheme.reach):
        raise DomainError("finite-difference stencil leaves the field's domain")


def partial(f, j, x, scheme=FiniteDiffScheme()):
    """Central-difference derivative of ``f`` along axis ``j`` (0-based).

    ``x`` may hold many points; the result keeps ``f``'s component axis.
    """
    x = np.asarray(x, dtype=float)
    _check_stencil(f, x, scheme)
    e = np.zeros(x.shape[-1])
    e[j] = scheme.h
    if scheme.order == 2:
        return (f(x + e) - f(x - e)) / (2 * scheme.h)
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * scheme.h)


def gradient(f, x, scheme=FiniteDiffScheme()):
    """Gradient of a scalar field, shape (..., n)."""
    x = np.asarray(x, dtype=float)
    return np.stack([partial(f, j, x, scheme) for j in range(x.shape[-1])], axis=-1)


def jacobian(v, x, scheme=FiniteDiffScheme()):
    """J[..., k, j] = d v_k / d x_j."""
    x = np.asarray(x, dtype=float)
    return np.stack([partial(v, j, x, scheme) for j in range(x.shape[-1])], axis=-1)


def divergence(v, x, scheme=FiniteDiffScheme()):
    x = np.asarray(x, dtype=float)
    return sum(partial(v, j, x, scheme)[..., j] for j in range(x.shape[-1]))


def curl_residual(v, probes, scheme=FiniteDiffScheme()):
    """max over probes and j < k of |d_j v_k - d_k v_j|."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    n = probes.shape[-1]
    if n < 2:
        return 0.0
    J = jacobian(v, probes, scheme)
    iu = np.triu_indices(n, 1)
    asym = J - np.swapaxes(J, -1, -2)
    return float(np.max(np.abs(asym[..., iu[0], iu[1]])))
