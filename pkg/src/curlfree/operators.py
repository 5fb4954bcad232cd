"""The Bogovskii operator B (a right inverse of the divergence) and the
potential operator A built from the same bump.

For a bump rho supported in the star ball,

    B phi(x) = int phi(y) (x - y) int_1^inf rho(y + r (x - y)) r^(n-1) dr dy,
    A v(x)   = int rho(y) int_0^1 v(s y + (1 - s) x) . (x - y) ds dy,

with div B phi = phi - rho * int phi and grad A v = v for curl-free v.

B is evaluated by default in polar coordinates around x. Putting
y = x - t w and s = (r - 1) t gives

    B phi(x) = int_{|w|=1} w int_0^inf phi(x - t w) J(t, w) dt dw,
    J(t, w)  = int_0^inf rho(x + s w) (s + t)^(n-1) ds,

which has no singularity at y = x. J is a polynomial in t whose
coefficients are the moments of rho along the ray, so each direction costs
one short s-rule and one t-rule per support primitive. When x lies outside
the bump's ball only the cone of directions that hit the ball contributes.
The defining formula is available as ``form="direct"``; it is accurate
only away from the support of phi, where its integrand is smooth.
"""

from math import comb

import numpy as np

from .errors import DomainError, GeometryError
from .geometry import Ball, Box, ray_ball_intervals, ray_intervals, support_hull_test
from .quadrature import QuadratureRule, gl_intervals, sphere_rule, tensor_rule


def _as_supports(support):
    if support is None:
        return None
    if isinstance(support, (Ball, Box)):
        return [support]
    return list(support)


def _disjoint(a, b):
    if isinstance(a, Ball) and isinstance(b, Ball):
        return np.linalg.norm(a.center - b.center) >= a.radius + b.radius
    if isinstance(a, Box) and isinstance(b, Box):
        return bool(np.any((a.hi <= b.lo) | (b.hi <= a.lo)))
    ball, box = (a, b) if isinstance(a, Ball) else (b, a)
    return float(box.distance(ball.center)) >= ball.radius


def _compactly_inside(region, shape):
    if isinstance(region, Ball):
        return float(shape.boundary_distance(region.center)) > region.radius
    corners = np.array(np.meshgrid(*zip(region.lo, region.hi), indexing="ij")).reshape(region.dim, -1).T
    return bool(np.all(shape.boundary_distance(corners) > 0))


def _enclosing_ball(group):
    # a ball holding every primitive of the group (not the smallest one)
    if len(group) == 1 and isinstance(group[0], Ball):
        return group[0]
    balls = [p if isinstance(p, Ball) else Ball(p.center, p.diameter / 2) for p in group]
    lo = np.min([b.center - b.radius for b in balls], axis=0)
    hi = np.max([b.center + b.radius for b in balls], axis=0)
    c = (lo + hi) / 2
    return Ball(c, max(float(np.linalg.norm(b.center - c)) + b.radius for b in balls))


def hull_box(supports, ball):
    """Bounding box of the hull of the supports and ``ball``."""
    lo = ball.center - ball.radius
    hi = ball.center + ball.radius
    for s in supports:
        box = s.bounding_box()
        lo, hi = np.minimum(lo, box.lo), np.maximum(hi, box.hi)
    return Box(lo, hi)


class BogovskiiOp:
    """B and A for one star domain and one bump.

    ``rho.ball`` must lie inside ``domain.star_ball``; the domain must be a
    :class:`StarDomain`.
    """

    def __init__(self, domain, rho, quad=None, chunk=64):
        if not domain.star_ball.contains_ball(rho.ball):
            raise GeometryError("support of rho is not inside the star ball")
        if rho.n != domain.dim:
            raise GeometryError("rho and domain differ in dimension")
        self.domain = domain
        self.rho = rho
        self.quad = quad or QuadratureRule()
        self.chunk = chunk

    @property
    def dim(self):
        return self.domain.dim

    def __repr__(self):
        return f"BogovskiiOp({self.domain!r}, {self.rho!r}, {self.quad!r})"

    def with_quad(self, quad):
        return BogovskiiOp(self.domain, self.rho, quad, self.chunk)

    def supports_of(self, phi, support=None):
        supports = _as_supports(support if support is not None else getattr(phi, "support", None))
        if supports is None:
            return [self.domain.shape]
        for s in supports:
            if not _compactly_inside(s, self.domain.shape):
                raise DomainError("support of phi is not compactly inside the domain")
        return supports

    def _check_points(self, x, strict):
        if strict and not np.all(self.domain.contains(x)):
            raise DomainError("evaluation point outside the domain")

    # ---------------------------------------------------------------- B
    def bogovskii(self, phi, x, support=None, form="polar", strict=True):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        self._check_points(flat, strict)
        supports = self.supports_of(phi, support)
        if form == "polar":
            kernel = self._polar
        elif form == "direct":
            kernel = self._direct
        else:
            raise ValueError(f"unknown form {form!r}")
        out = np.zeros_like(flat)
        for a in range(0, len(flat), self.chunk):
            out[a:a + self.chunk] = kernel(phi, flat[a:a + self.chunk], supports)
        return out.reshape(x.shape)

    @staticmethod
    def _cone(x, ball, sign=1.0):
        # directions w with x + t w (t > 0, sign=1) or x - t w (sign=-1)
        # hitting ``ball``: axis and half-angle, nan when x is inside
        rel = sign * (ball.center - x)
        dist = np.linalg.norm(rel, axis=-1)
        axis = rel / np.where(dist > 0, dist, 1.0)[:, None]
        axis[dist == 0, -1] = 1.0
        with np.errstate(invalid="ignore", divide="ignore"):
            half = np.where(dist > ball.radius, np.arcsin(np.minimum(ball.radius / dist, 1.0)), np.nan)
        return axis, half

    def _polar(self, phi, x, supports):
        # Disjoint support primitives are integrated one at a time over the
        # narrower of two cones: directions towards the bump's ball, and
        # directions whose opposite ray meets the primitive. Both contain
        # every contributing direction; the narrow one resolves small,
        # distant supports. Overlapping primitives are integrated together
        # (phi need not vanish on the boundary of each one), with the cone
        # of a ball enclosing all of them.
        n = self.dim
        X = x[:, None, :]
        rho_axis, rho_half = self._cone(x, self.rho.ball)
        disjoint = all(_disjoint(a, b) for i, a in enumerate(supports) for b in supports[i + 1:])
        groups = [[prim] for prim in supports] if disjoint else [supports]
        out = np.zeros_like(x)
        for group in groups:
            p_axis, p_half = self._cone(x, _enclosing_ball(group), -1.0)
            use_p = np.nan_to_num(p_half, nan=np.pi) < np.nan_to_num(rho_half, nan=np.pi)
            axis = np.where(use_p[:, None], p_axis, rho_axis)
            half = np.where(use_p, p_half, rho_half)
            dirs, wdir = sphere_rule(n, self.quad.angular, axis, half)  # (P, K, n), (P, K)

            lo, hi, _ = ray_ball_intervals(X, dirs, self.rho.ball, 0.0)
            s, ws = gl_intervals(lo, hi, self.quad.inner)  # (P, K, I)
            wr = np.zeros(s.shape)
            p, k, i = np.nonzero(ws)
            wr[p, k, i] = ws[p, k, i] * self.rho(x[p] + s[p, k, i, None] * dirs[p, k])
            moments = [np.sum(wr * s ** m, axis=-1) for m in range(n)]  # (P, K)

            lo, hi, owner = self._union_pieces(X, -dirs, group)  # (P, K, J)
            live = (moments[0] > 0)[..., None] & (owner >= 0)
            if not np.any(live):
                continue
            total = np.zeros(wdir.shape)
            p, k, j = np.nonzero(live)
            t, wt = gl_intervals(lo[p, k, j], hi[p, k, j], self.quad.outer)  # (L, O)
            q = x[p, None, :] - t[..., None] * dirs[p, k][:, None, :]
            J = sum(comb(n - 1, m) * t ** (n - 1 - m) * moments[m][p, k, None] for m in range(n))
            np.add.at(total, (p, k), np.sum(wt * phi(q) * J, axis=-1))
            out += np.einsum("pk,pkc->pc", wdir * total, dirs)
        return out

    @staticmethod
    def _union_pieces(origins, dirs, supports):
        # Split each ray at every chord end point. A piece belongs to the
        # first primitive containing its midpoint (owner -1: none).
        chords = [ray_intervals(origins, dirs, prim, 0.0) for prim in supports]
        if len(chords) == 1:
            lo, hi, hit = chords[0]
            return lo[..., None], hi[..., None], np.where(hit, 0, -1)[..., None]
        ends = np.sort(np.stack([c[0] for c in chords] + [c[1] for c in chords], axis=-1), axis=-1)
        lo, hi = ends[..., :-1], ends[..., 1:]
        mid = (lo + hi) / 2
        owner = np.full(mid.shape, -1)
        for idx in reversed(range(len(chords))):
            clo, chi, hit = chords[idx]
            inside = hit[..., None] & (mid > clo[..., None]) & (mid < chi[..., None])
            owner = np.where(inside, idx, owner)
        return lo, hi, np.where(hi > lo, owner, -1)

    def _direct(self, phi, x, supports):
        n = self.dim
        out = np.zeros_like(x)
        Y, wy = union_rule(supports, self.quad.outer)
        wphi = wy * phi(Y)
        nz = wphi != 0
        Y, wphi = Y[nz], wphi[nz]
        if len(Y):
            d = x[:, None, :] - Y[None]  # (P, N, n)
            lo, hi, _ = ray_ball_intervals(Y[None], d, self.rho.ball, 1.0)
            r, wr = gl_intervals(lo, hi, self.quad.inner)  # (P, N, I)
            live = wr > 0
            vals = np.zeros(r.shape)
            if np.any(live):
                pts = Y[None, :, None, :] + r[..., None] * d[:, :, None, :]
                vals[live] = self.rho(pts[live])
            K = np.sum(wr * vals * r ** (n - 1), axis=-1)
            out += np.einsum("pn,pnc->pc", wphi[None] * K, d)
        return out

    # ---------------------------------------------------------------- A
    def potential(self, v, x, strict=True):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        self._check_points(flat, strict)
        Y, wy = self.rho.rule(self.quad.outer)
        s, ws = gl_intervals(0.0, 1.0, self.quad.inner)
        out = np.empty(len(flat))
        step = max(1, 200_000 // (len(Y) * len(s)))
        for a in range(0, len(flat), step):
            xc = flat[a:a + step]
            pts = s[None, None, :, None] * Y[None, :, None, :] + (1 - s)[None, None, :, None] * xc[:, None, None, :]
            vals = v(pts)  # (P, N, S, n)
            diff = xc[:, None, :] - Y[None]  # (P, N, n)
            inner = np.einsum("pnsc,s,pnc->pn", vals, ws, diff)
            out[a:a + step] = inner @ wy
        return out.reshape(x.shape[:-1])


def bogovskii_apply(op, phi, x, support=None, form="polar", strict=True):
    """B phi at the points ``x`` (shape (..., n)) -> (..., n).

    ``support`` (a Ball, a Box or a list of disjoint ones) defaults to
    ``phi.support``. With ``strict`` points outside the domain are refused;
    otherwise B phi is evaluated as the zero extension.
    """
    return op.bogovskii(phi, x, support, form, strict)


def potential_apply(op, v, x, strict=True):
    """A v at the points ``x`` (shape (..., n)) -> (...)."""
    return op.potential(v, x, strict)


def _pairing_rule(op, group, order):
    """Composite tensor rule on the hull box of ``group`` and the bump.

    Cell edges include the bounding-box edges of every primitive and of
    the bump's ball, so each bump sits in cells of its own and is resolved
    by ``order`` nodes per axis whatever its size; the remaining cells,
    where B phi is smooth, get half the order.
    """
    ball = op.rho.ball
    box = hull_box(group, ball)
    feats = [p.bounding_box() for p in group] + [ball.bounding_box()]
    edges = []
    for d in range(op.dim):
        cuts = {box.lo[d], box.hi[d]}
        for f in feats:
            cuts.update((f.lo[d], f.hi[d]))
        edges.append(np.array(sorted(cuts)))
    coarse = max(8, order // 2)
    nodes, weights = [], []
    for cell in np.ndindex(*(len(e) - 1 for e in edges)):
        lo = np.array([edges[d][cell[d]] for d in range(op.dim)])
        hi = np.array([edges[d][cell[d] + 1] for d in range(op.dim)])
        fine = any(np.all(lo < f.hi) and np.all(hi > f.lo) for f in feats)
        y, w = tensor_rule(lo, hi, order if fine else coarse)
        nodes.append(y)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _clusters(supports):
    # connected components of the "not disjoint" relation
    groups = []
    for prim in supports:
        touching = [g for g in groups if any(not _disjoint(prim, q) for q in g)]
        merged = [prim]
        for g in touching:
            merged.extend(g)
            groups.remove(g)
        groups.append(merged)
    return groups


def union_rule(supports, order):
    """Tensor rule for integrals over the union of the supports.

    Overlapping primitives are grouped. Each group's bounding box is cut at
    the bounding-box edges of its primitives, every cell meeting a
    primitive gets a tensor rule of ``order`` nodes per axis, and only the
    nodes inside the group are kept. A function supported in the union is
    then integrated across the internal boundaries of a group without a
    cut, while each primitive still sits in cells of its own size.
    """
    nodes, weights = [], []
    for group in _clusters(supports):
        boxes = [p.bounding_box() for p in group]
        edges = [np.array(sorted({v for b in boxes for v in (b.lo[d], b.hi[d])}))
                 for d in range(boxes[0].dim)]
        for cell in np.ndindex(*(len(e) - 1 for e in edges)):
            lo = np.array([e[c] for e, c in zip(edges, cell)])
            hi = np.array([e[c + 1] for e, c in zip(edges, cell)])
            if not any(np.all(lo < b.hi) and np.all(hi > b.lo) for b in boxes):
                continue
            y, w = tensor_rule(lo, hi, order)
            keep = np.any([p.contains(y) for p in group], axis=0)
            nodes.append(y[keep])
            weights.append(w[keep])
    return np.concatenate(nodes), np.concatenate(weights)


def pair_with_b(op, field, phi, support=None, offset=0, angular=64):
    """int field . B phi over the hull of the supports.

    B is linear and each group of overlapping primitives carries its own
    piece of phi, so the pairing is summed group by group, each over the
    nodes of :func:`_pairing_rule` that lie in the group's hull. The
    angular order of the inner B evaluations is reduced to
    ``angular + offset``: angular errors average out under the outer
    integral.
    """
    quad = op.quad.offset(offset)
    bop = op.with_quad(QuadratureRule(quad.outer, quad.inner, angular + offset))
    supports = bop.supports_of(phi, support)
    total = 0.0
    for group in _clusters(supports):
        y, w = _pairing_rule(bop, group, quad.outer)
        inside = np.zeros(len(y), dtype=bool)
        for prim in group:
            inside |= support_hull_test(y, prim, op.rho.ball)
        y, w = y[inside], w[inside]
        if len(y):
            b = bop.bogovskii(phi, y, group, strict=False)
            total += float(np.sum(w * np.sum(field(y) * b, axis=-1)))
    return total


def duality_residual(op, v, phi, support=None, offset=7, phi_order=48):
    """|int (A v) phi + int v . B phi|, using quadrature orders shifted by
    ``offset`` relative to ``op.quad``.

    The outer integral against phi uses ``phi_order`` nodes per axis on
    each group of support primitives: phi is usually much narrower than
    the bump, so it needs more nodes than the bump rule inside A.
    """
    quad = op.quad.offset(offset)
    bop = op.with_quad(quad)
    supports = bop.supports_of(phi, support)
    y, w = union_rule(supports, phi_order)
    phi_vals = phi(y)
    live = phi_vals != 0
    lhs = float(np.sum(w[live] * phi_vals[live] * bop.potential(v, y[live], strict=False))) if np.any(live) else 0.0
    rhs = pair_with_b(op, v, phi, supports, offset)
    return abs(lhs + rhs)


def derham_local_functional(op, G, phi, support=None, offset=0):
    """<F, phi> = -<G, B phi>: the local distribution whose gradient is G."""
    return -pair_with_b(op, G, phi, support, offset)
