"""Balls, boxes, star-shaped domains, ball covers and chains.

Points are numpy arrays whose last axis is the coordinate axis; every
predicate below is vectorized over the leading axes.
"""

from collections import deque
from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import GeometryError


def _vec(a):
    a = np.array(a, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius!r})"

    @property
    def dim(self):
        return self.center.size

    def contains(self, points):
        """Open-ball membership."""
        points = np.asarray(points, dtype=float)
        return np.sum((points - self.center) ** 2, axis=-1) < self.radius ** 2

    def boundary_distance(self, points):
        """Signed distance to the sphere, positive inside."""
        points = np.asarray(points, dtype=float)
        return self.radius - np.linalg.norm(points - self.center, axis=-1)

    def distance(self, points):
        """Distance to the closed ball (zero inside)."""
        return np.maximum(-self.boundary_distance(points), 0.0)

    def bounding_box(self):
        return Box(self.center - self.radius, self.center + self.radius)

    def contains_ball(self, ball):
        return np.linalg.norm(ball.center - self.center) + ball.radius <= self.radius * (1 + 1e-12)

    def overlaps(self, other, margin=0.0):
        return np.linalg.norm(other.center - self.center) < self.radius + other.radius - margin

    def sample(self, rng, count):
        n = self.dim
        g = rng.standard_normal((count, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0, 1, count) ** (1.0 / n)
        return self.center + g * r[:, None]

    def surface(self, count, rng=None):
        """Points on the boundary sphere (evenly spaced in 2-D)."""
        if self.dim == 2 and rng is None:
            th = 2 * np.pi * np.arange(count) / count
            return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], -1)
        rng = rng or np.random.default_rng(0)
        g = rng.standard_normal((count, self.dim))
        return self.center + self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise GeometryError("box needs lo < hi in every coordinate")

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    @property
    def dim(self):
        return self.lo.size

    @property
    def center(self):
        return (self.lo + self.hi) / 2

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.all((points > self.lo) & (points < self.hi), axis=-1)

    def boundary_distance(self, points):
        points = np.asarray(points, dtype=float)
        inside = np.minimum(points - self.lo, self.hi - points).min(axis=-1)
        return np.where(inside > 0, inside, -self.distance(points))

    def distance(self, points):
        points = np.asarray(points, dtype=float)
        gap = np.maximum(np.maximum(self.lo - points, points - self.hi), 0.0)
        return np.linalg.norm(gap, axis=-1)

    def bounding_box(self):
        return self

    def contains_ball(self, ball):
        return bool(np.all(ball.center - ball.radius >= self.lo - 1e-12)
                    and np.all(ball.center + ball.radius <= self.hi + 1e-12))

    def sample(self, rng, count):
        return rng.uniform(self.lo, self.hi, (count, self.dim))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))


@dataclass(frozen=True, eq=False)
class Annulus:
    """Open spherical shell. Only used as a containment region; it is not
    star-shaped and no operator is built on it."""

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not 0 <= self.inner < self.outer:
            raise GeometryError("annulus needs 0 <= inner < outer")

    @property
    def dim(self):
        return self.center.size

    def contains(self, points):
        r = np.linalg.norm(np.asarray(points, dtype=float) - self.center, axis=-1)
        return (r > self.inner) & (r < self.outer)

    def boundary_distance(self, points):
        r = np.linalg.norm(np.asarray(points, dtype=float) - self.center, axis=-1)
        return np.minimum(r - self.inner, self.outer - r)

    def bounding_box(self):
        return Box(self.center - self.outer, self.center + self.outer)

    def sample(self, rng, count):
        return _rejection_sample(self, rng, count)


@dataclass(frozen=True, eq=False)
class Union:
    """Finite union of balls and boxes."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise GeometryError("union needs at least one part")
        if len({p.dim for p in parts}) != 1:
            raise GeometryError("union parts must share a dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def contains(self, points):
        return np.any([p.contains(points) for p in self.parts], axis=0)

    def boundary_distance(self, points):
        # lower bound for points inside the union
        return np.max([p.boundary_distance(points) for p in self.parts], axis=0)

    def distance(self, points):
        return np.min([p.distance(points) for p in self.parts], axis=0)

    def bounding_box(self):
        boxes = [p.bounding_box() for p in self.parts]
        return Box(np.min([b.lo for b in boxes], 0), np.max([b.hi for b in boxes], 0))

    def sample(self, rng, count):
        return _rejection_sample(self, rng, count)


@dataclass(frozen=True, eq=False)
class StarDomain:
    """A ball or box that is star-shaped with respect to ``star_ball``.

    Both admissible shapes are convex, so the star property holds for any
    ball inside the shape; construction only checks that containment.
    """

    shape: object
    star_ball: Ball

    def __post_init__(self):
        if not isinstance(self.shape, (Ball, Box)):
            raise GeometryError("star domain shape must be a Ball or a Box")
        if self.shape.dim != self.star_ball.dim:
            raise GeometryError("star ball and shape differ in dimension")
        if not self.shape.contains_ball(self.star_ball):
            raise GeometryError("star ball is not contained in the domain shape")

    @property
    def dim(self):
        return self.shape.dim

    def contains(self, points):
        return self.shape.contains(points)

    def boundary_distance(self, points):
        return self.shape.boundary_distance(points)

    def bounding_box(self):
        return self.shape.bounding_box()

    def sample(self, rng, count):
        return self.shape.sample(rng, count)

    def star_violations(self, rng, count=1000, steps=16):
        """Monte-Carlo check of the star property: number of sampled
        segments [y, z], y in the domain and z in the star ball, that leave
        the domain."""
        y = self.sample(rng, count)
        z = self.star_ball.sample(rng, count)
        lam = np.linspace(0, 1, steps)[:, None, None]
        seg = lam * y + (1 - lam) * z
        return int(np.sum(~np.all(self.shape.contains(seg), axis=0)))


def _rejection_sample(region, rng, count):
    box = region.bounding_box()
    out = []
    have = 0
    while have < count:
        cand = box.sample(rng, max(2 * (count - have), 64))
        keep = cand[region.contains(cand)]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:count]


def sample_domain(domain, count, rng):
    """Uniform samples of ``domain``."""
    if isinstance(domain, (Ball, Box, StarDomain)):
        return domain.sample(rng, count)
    return _rejection_sample(domain, rng, count)


# --------------------------------------------------------------------------
# rays

def ray_ball_intervals(origins, directions, ball, rmin=1.0):
    """Vectorized ray-ball intersection.

    For p(r) = origin + r * direction returns (lo, hi, hit) where
    {r >= rmin : p(r) in ball} = (lo, hi) whenever ``hit`` is true.
    """
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    rel = origins - ball.center
    a = np.sum(directions * directions, axis=-1)
    b = np.sum(directions * rel, axis=-1)
    c = np.sum(rel * rel, axis=-1) - ball.radius ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = b * b - a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-b - sq) / a
        r2 = (-b + sq) / a
    lo = np.maximum(r1, rmin)
    hit = (disc > 0) & (a > 0) & (r2 > lo)
    lo = np.where(hit, lo, rmin)
    hi = np.where(hit, r2, rmin)
    return lo, hi, hit


def ray_box_intervals(origins, directions, box, rmin=0.0):
    """Slab-method analogue of :func:`ray_ball_intervals` for boxes."""
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        t1 = (box.lo - origins) * inv
        t2 = (box.hi - origins) * inv
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # zero direction components: the slab is all-or-nothing
    flat = directions == 0
    inside = (origins > box.lo) & (origins < box.hi)
    tmin = np.where(flat, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(flat, np.where(inside, np.inf, -np.inf), tmax)
    lo = np.maximum(tmin.max(axis=-1), rmin)
    hi = tmax.min(axis=-1)
    hit = hi > lo
    return np.where(hit, lo, rmin), np.where(hit, hi, rmin), hit


def ray_intervals(origins, directions, region, rmin=0.0):
    if isinstance(region, Ball):
        return ray_ball_intervals(origins, directions, region, rmin)
    if isinstance(region, Box):
        return ray_box_intervals(origins, directions, region, rmin)
    raise GeometryError(f"no ray intersection for {type(region).__name__}")


def ray_ball_interval(x, y, ball):
    """Parameters r >= 1 with y + r (x - y) inside ``ball``.

    Returns ``(lo, hi)`` or ``None`` when the ray misses the ball beyond r = 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    if not np.any(d):
        raise GeometryError("zero ray direction")
    lo, hi, hit = ray_ball_intervals(y, d, ball, 1.0)
    if not hit:
        return None
    return float(lo), float(hi)


# --------------------------------------------------------------------------
# support hull

def _set_distance(region, points, scale):
    """Distance from points to scale * region (scale in [0, 1])."""
    if isinstance(region, Ball):
        centers = scale[..., None] * region.center
        return np.linalg.norm(points - centers, axis=-1) - scale * region.radius
    lo = scale[..., None] * region.lo
    hi = scale[..., None] * region.hi
    gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.linalg.norm(gap, axis=-1)


def hull_distance(x, spt_phi, spt_rho, iterations=120):
    """Distance-like convex function minimized over the mixing parameter.

    For lambda in [0, 1] the set lambda*A + (1-lambda)*B is convex and the
    distance from x to it is convex in lambda, so golden-section search
    finds the minimum. Returns that minimum (<= 0 means x is in the hull).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))

    def g(lam):
        shifted = x - (1 - lam)[:, None] * spt_rho.center
        return _set_distance(spt_phi, shifted, lam) - (1 - lam) * spt_rho.radius

    a = np.zeros(len(x))
    b = np.ones(len(x))
    invphi = (np.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iterations):
        left = gc < gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + invphi * (b - a))
        c_new = np.where(left, b - invphi * (b - a), d)
        g_new = g(np.where(left, c_new, d_new))
        gc, gd = np.where(left, g_new, gd), np.where(left, gc, g_new)
        c, d = c_new, d_new
    best = np.minimum.reduce([g(a), g(b), g((a + b) / 2), g(np.zeros(len(x))), g(np.ones(len(x)))])
    return best


def support_hull_test(x, spt_phi, spt_rho, atol=1e-12):
    """Whether x lies in {l z1 + (1-l) z2 : z1 in spt_phi, z2 in spt_rho}.

    ``spt_phi`` is a Ball or Box, ``spt_rho`` a Ball; both are treated as
    closed sets. Vectorized over leading axes of ``x``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    res = hull_distance(flat, spt_phi, spt_rho) <= atol
    if x.ndim == 1:
        return bool(res[0])
    return res.reshape(x.shape[:-1])


# --------------------------------------------------------------------------
# covers and chains

@dataclass(frozen=True, eq=False)
class Chain:
    indices: tuple

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def pairs(self):
        return list(zip(self.indices[:-1], self.indices[1:]))


@dataclass(frozen=True, eq=False)
class Cover:
    """Ordered finite list of balls with their intersection graph.

    Two balls are adjacent when they overlap by more than ``margin``.
    ``simply_connected`` is whatever the caller declares; it is never
    computed.
    """

    balls: tuple
    simply_connected: bool = True
    margin: float = None
    adjacency: tuple = field(init=False)

    def __post_init__(self):
        balls = tuple(self.balls)
        if not balls:
            raise GeometryError("cover needs at least one ball")
        object.__setattr__(self, "balls", balls)
        if self.margin is None:
            object.__setattr__(self, "margin", 1e-9 * min(b.radius for b in balls))
        adj = [[] for _ in balls]
        for i, j in itertools.combinations(range(len(balls)), 2):
            if balls[i].overlaps(balls[j], self.margin):
                adj[i].append(j)
                adj[j].append(i)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))

    def __len__(self):
        return len(self.balls)

    @property
    def dim(self):
        return self.balls[0].dim

    def edges(self):
        return [(i, j) for i, nb in enumerate(self.adjacency) for j in nb if i < j]

    def contains(self, points):
        return np.any([b.contains(points) for b in self.balls], axis=0)

    def chart_index(self, points):
        """Lowest index of a ball containing each point, -1 if none."""
        points = np.asarray(points, dtype=float)
        idx = np.full(points.shape[:-1], -1)
        for m in reversed(range(len(self.balls))):
            idx = np.where(self.balls[m].contains(points), m, idx)
        return idx

    def is_connected(self):
        seen = {0}
        todo = deque([0])
        while todo:
            for j in self.adjacency[todo.popleft()]:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return len(seen) == len(self.balls)

    def ordering_ok(self):
        """Every ball after the first meets the union of its predecessors."""
        return all(any(j < m for j in self.adjacency[m]) for m in range(1, len(self.balls)))

    def bounding_box(self):
        return Union(self.balls).bounding_box()


def find_chain(cover, i, j):
    """Shortest chain of consecutively intersecting balls from i to j.

    Breadth-first search visiting neighbours in increasing index order.
    """
    n = len(cover)
    if not (0 <= i < n and 0 <= j < n):
        raise GeometryError("chain endpoints out of range")
    parent = {i: None}
    todo = deque([i])
    while todo and j not in parent:
        k = todo.popleft()
        for nb in cover.adjacency[k]:
            if nb not in parent:
                parent[nb] = k
                todo.append(nb)
    if j not in parent:
        raise GeometryError("no chain exists")
    path = [j]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return Chain(tuple(reversed(path)))


def _fits_inside(region, radius):
    if isinstance(region, StarDomain):
        region = region.shape
    if isinstance(region, Ball):
        return radius <= region.radius
    if isinstance(region, Box):
        return bool(np.all(region.hi - region.lo >= 2 * radius))
    if isinstance(region, Union):
        return any(_fits_inside(p, radius) for p in region.parts)
    return False


def _region_distance(region, points):
    if isinstance(region, StarDomain):
        region = region.shape
    return region.distance(points)


def build_cover(domain, radius, margin=None, simply_connected=True):
    """Finite cover of ``domain`` by balls of a common radius.

    Centres sit on a cubic lattice whose covering radius is 0.95 * radius;
    every lattice ball that meets the domain is kept, which guarantees the
    union contains the whole domain. Balls may reach outside the domain.
    The result is ordered breadth-first from the ball nearest the domain
    centre so that each ball meets the union of the previous ones.
    """
    radius = float(radius)
    if not _fits_inside(domain, radius):
        raise GeometryError("no admissible ball placement")
    shape = domain.shape if isinstance(domain, StarDomain) else domain
    if isinstance(shape, Ball) and radius >= shape.radius:
        return Cover((Ball(shape.center, radius),), simply_connected, margin)

    box = shape.bounding_box()
    n = box.dim
    step = 0.95 * 2 * radius / np.sqrt(n)
    mid = box.center
    axes = []
    for d in range(n):
        half = (box.hi[d] - box.lo[d]) / 2 + radius
        k = int(np.ceil(half / step))
        axes.append(mid[d] + step * np.arange(-k, k + 1))
    centers = np.array(list(itertools.product(*axes)))
    centers = centers[_region_distance(shape, centers) < radius * (1 - 1e-9)]

    # breadth-first order from the most central ball
    start = int(np.argmin(np.linalg.norm(centers - mid, axis=1)))
    balls = [Ball(c, radius) for c in centers]
    provisional = Cover(tuple(balls), simply_connected, margin)
    order = [start]
    seen = {start}
    todo = deque([start])
    while todo:
        for j in provisional.adjacency[todo.popleft()]:
            if j not in seen:
                seen.add(j)
                order.append(j)
                todo.append(j)
    if len(order) != len(balls):
        raise GeometryError("cover adjacency graph is disconnected")
    return Cover(tuple(balls[k] for k in order), simply_connected, margin)


def lens_ball(b1, b2, fraction=0.9):
    """A ball inside the intersection of two overlapping balls.

    Centred at the midpoint of the intersection of the centre line with the
    lens, radius ``fraction`` times the largest admissible radius there.
    """
    d_vec = b2.center - b1.center
    d = np.linalg.norm(d_vec)
    u = d_vec / d if d > 0 else np.eye(b1.dim)[0]
    s_lo = max(-b1.radius, d - b2.radius)
    s_hi = min(b1.radius, d + b2.radius)
    if s_hi <= s_lo:
        raise GeometryError("balls do not intersect")
    s = (s_lo + s_hi) / 2
    center = b1.center + s * u
    r = min(b1.radius - abs(s), b2.radius - abs(d - s))
    return Ball(center, fraction * r)
