"""Finite-grid stand-ins for the Sobolev-space statements: discrete
gradient and divergence that are exact negative adjoints, divergence-free
test fields, polar membership, and a zero-mean least-squares potential.

Vector fields on the grid are arrays of shape ``shape + (n,)``. The
gradient uses forward differences and is zero on the last node along each
axis; the divergence uses backward differences and ignores the last node
of each component. With that pairing

    <div u, f> + <u, grad f> = 0

holds for every u and f, up to rounding only.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags, identity, kron, vstack
from scipy.sparse.linalg import cg

from .errors import ConvergenceError, PreconditionError


@dataclass(frozen=True)
class GridSpace:
    """Uniform lattice over a box: ``shape`` nodes, spacing ``h``."""

    shape: tuple
    h: float
    origin: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if any(s < 3 for s in self.shape):
            raise ValueError("grid needs at least 3 nodes per axis")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        origin = (0.0,) * self.n if self.origin is None else tuple(float(o) for o in self.origin)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def unit(cls, m, n=2):
        """m nodes per axis on [0, 1]^n."""
        return cls((m,) * n, 1.0 / (m - 1))

    @classmethod
    def from_grid(cls, grid):
        """Lattice of a :class:`GridField`."""
        return cls(grid.shape, grid.h, tuple(grid.origin))

    @property
    def n(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def nodes(self):
        axes = [self.origin[d] + self.h * np.arange(self.shape[d]) for d in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def sample(self, func):
        return np.asarray(func(self.nodes()), dtype=float)

    def inner(self, a, b):
        return float(np.sum(a * b) * self.h ** self.n)

    def norm(self, a):
        return float(np.sqrt(self.inner(a, a)))

    def grad(self, f):
        out = np.zeros(self.shape + (self.n,))
        for j in range(self.n):
            lead = [slice(None)] * self.n
            lead[j] = slice(0, -1)
            out[tuple(lead) + (j,)] = np.diff(f, axis=j) / self.h
        return out

    def div(self, u):
        out = np.zeros(self.shape)
        for j in range(self.n):
            uj = u[..., j].copy()
            last = [slice(None)] * self.n
            last[j] = -1
            uj[tuple(last)] = 0.0
            pad = [(0, 0)] * self.n
            pad[j] = (1, 0)
            out += np.diff(np.pad(uj, pad), axis=j) / self.h
        return out

    def curl(self, g):
        """Discrete curl components D_a g_b - D_b g_a (forward differences),
        on the nodes where both differences exist. Shape (pairs, ...)."""
        parts = []
        for a in range(self.n):
            for b in range(a + 1, self.n):
                da = np.diff(g[..., b], axis=a) / self.h
                db = np.diff(g[..., a], axis=b) / self.h
                cut = [slice(None)] * self.n
                cut[b] = slice(0, -1)
                da = da[tuple(cut)]
                cut = [slice(None)] * self.n
                cut[a] = slice(0, -1)
                db = db[tuple(cut)]
                parts.append(da - db)
        return np.stack(parts) if parts else np.zeros((0,) + self.shape)

    def interior_mask(self, margin=2):
        mask = np.zeros(self.shape, dtype=bool)
        mask[tuple(slice(margin, s - margin) for s in self.shape)] = True
        return mask

    def grad_matrix(self):
        """Sparse matrix of :meth:`grad` acting on flattened scalars; rows
        are ordered component-major."""
        blocks = []
        for j in range(self.n):
            m = self.shape[j]
            d = diags([-np.ones(m), np.ones(m - 1)], [0, 1], shape=(m, m), format="lil")
            d[m - 1, m - 1] = 0.0
            d = d.tocsr() / self.h
            op = None
            for k in range(self.n):
                factor = d if k == j else identity(self.shape[k], format="csr")
                op = factor if op is None else kron(op, factor, format="csr")
            blocks.append(op)
        return vstack(blocks, format="csr")


def _vec_rows(space, u):
    # (..., n) field -> component-major flat vector
    return np.moveaxis(u, -1, 0).reshape(-1)


def adjointness_check(space, trials=100, seed=0, margin=2):
    """max |<div u, f> + <u, grad f>| / (|u| |f|) over random u, f."""
    rng = np.random.default_rng(seed)
    mask = space.interior_mask(margin)[..., None]
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(space.shape + (space.n,)) * mask
        f = rng.standard_normal(space.shape)
        nu, nf = space.norm(u), space.norm(f)
        if nu == 0 or nf == 0:
            continue
        r = abs(space.inner(space.div(u), f) + space.inner(u, space.grad(f))) / (nu * nf)
        worst = max(worst, r)
    return worst


@dataclass
class DivFreeTestSet:
    """Discrete divergence-free fields with support away from the boundary.

    Each member is a discrete curl of an integer-valued stream function,
    scaled by a power of two: the two terms of its backward-difference
    divergence are then exact negatives of each other, so the divergence
    is exactly zero in floating point.
    """

    space: GridSpace
    fields: list = field(default_factory=list)
    streams: list = field(default_factory=list)

    @classmethod
    def random(cls, space, count=50, seed=0, margin=2, amplitude=64):
        rng = np.random.default_rng(seed)
        n = space.n
        scale = 2.0 ** np.round(np.log2(1.0 / space.h))
        x = space.nodes()
        lo = np.array(space.origin) + (margin + 1) * space.h
        hi = np.array(space.origin) + (np.array(space.shape) - margin - 2) * space.h
        inside = np.all((x >= lo - 1e-12) & (x <= hi + 1e-12), axis=-1)
        t = (x - lo) / (hi - lo)
        window = np.prod(np.sin(np.pi * np.clip(t, 0, 1)) ** 2, axis=-1) * inside
        out = cls(space)
        for _ in range(count):
            k = rng.integers(0, 3, size=(2, n))
            phase = rng.uniform(0, 2 * np.pi, 2)
            wave = 1.0 + np.cos(2 * np.pi * (t @ k[0]) + phase[0]) + rng.uniform(-1, 1) * np.cos(
                2 * np.pi * (t @ k[1]) + phase[1])
            psi = np.rint(amplitude * rng.uniform(0.2, 1.0) * window * wave)
            if n == 2:
                pair = (0, 1)
            else:
                pair = tuple(sorted(rng.choice(n, 2, replace=False)))
            out.fields.append(cls.curl_of(space, psi, pair, scale))
            out.streams.append((psi, pair, scale))
        return out

    @staticmethod
    def curl_of(space, psi, pair=(0, 1), scale=1.0):
        a, b = pair
        u = np.zeros(space.shape + (space.n,))
        pad = [(0, 0)] * space.n
        pad[b] = (1, 0)
        u[..., a] = scale * np.diff(np.pad(psi, pad), axis=b)
        pad = [(0, 0)] * space.n
        pad[a] = (1, 0)
        u[..., b] = -scale * np.diff(np.pad(psi, pad), axis=a)
        return u

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def max_divergence(self):
        return max((float(np.max(np.abs(self.space.div(u)))) for u in self.fields), default=0.0)


def polar_pairings(space, g, tests):
    return [abs(space.inner(g, u)) / space.norm(u) for u in tests]


def polar_membership(space, g, tests, tol=1e-10):
    """(member, max |<g, u>| / |u|) over the test set."""
    if len(tests) == 0:
        raise ValueError("test set is empty")
    worst = max(polar_pairings(space, g, tests))
    return worst <= tol, worst


@dataclass
class L2Potential:
    f: np.ndarray
    residual: float
    iterations: int


def solve_potential_l2(space, g, rtol=1e-12, maxiter=None):
    """Least-squares solution of grad f = g with mean zero.

    Conjugate gradients on the normal equations G^T G f = G^T g (a discrete
    Neumann problem), started from zero, then the mean is removed. Returns
    the relative residual |grad f - g| / |g| (0 when g vanishes).
    """
    G = space.grad_matrix()
    rhs = G.T @ _vec_rows(space, g)
    maxiter = maxiter or 10 * space.size
    count = [0]

    def tick(_):
        count[0] += 1

    if not np.any(rhs):
        f = np.zeros(space.size)
        info = 0
    else:
        f, info = cg(G.T @ G, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, callback=tick)
    # twice: the second pass removes the rounding left by the first
    f = f - f.mean()
    f = f - f.mean()
    f = f.reshape(space.shape)
    gnorm = space.norm(g)
    res = space.norm(space.grad(f) - g) / gnorm if gnorm > 0 else 0.0
    if info > 0:
        normal = np.linalg.norm(G.T @ (G @ f.reshape(-1)) - rhs) / np.linalg.norm(rhs)
        raise ConvergenceError(f"conjugate gradients did not converge in {maxiter} iterations", normal)
    return L2Potential(f, res, count[0])


class PipelineRefusal(PreconditionError):
    """A stage of the weak Poincare pipeline failed."""

    def __init__(self, stage, residual, tol):
        super().__init__(f"{stage} stage failed: residual {residual:.3g} > {tol:.3g}", residual)
        self.stage = stage
        self.tol = tol


@dataclass
class PipelineResult:
    f: np.ndarray
    stages: list


def weak_poincare_pipeline(space, g, tests=None, tol=1e-8, curl_tol=1e-8, seed=0):
    """Discrete curl check, then polar membership, then the potential solve.

    The polar stage uses tolerance 1e-10 times max(1, |g|). Raises
    :class:`PipelineRefusal` naming the first failing stage.
    """
    stages = []
    scale = max(1.0, space.norm(g))
    curl = space.curl(g)
    c = float(np.max(np.abs(curl))) if curl.size else 0.0
    stages.append(("curl", c, curl_tol))
    if not c <= curl_tol:
        raise PipelineRefusal("curl", c, curl_tol)
    tests = tests if tests is not None else DivFreeTestSet.random(space, seed=seed)
    ok, worst = polar_membership(space, g, tests, 1e-10 * scale)
    stages.append(("polar", worst, 1e-10 * scale))
    if not ok:
        raise PipelineRefusal("polar", worst, 1e-10 * scale)
    sol = solve_potential_l2(space, g)
    stages.append(("potential", sol.residual, tol))
    if not sol.residual <= tol:
        raise PipelineRefusal("potential", sol.residual, tol)
    return PipelineResult(sol.f, stages)
