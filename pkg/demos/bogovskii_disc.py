"""Solve div u = phi on the unit disc and look at what comes out.

phi is the difference of two unit-mass bumps, so it has zero mean and
B phi is a field with div B phi = phi that vanishes away from the hull of
the two bumps and the bump rho.
"""

import numpy as np

from curlfree.fieldspec import CallableField, FiniteDiffScheme, divergence
from curlfree.geometry import Ball, StarDomain, support_hull_test
from curlfree.mollify import Mollifier
from curlfree.operators import BogovskiiOp, bogovskii_apply, duality_residual, potential_apply

disc = StarDomain(Ball([0.0, 0.0], 1.0), Ball([0.0, 0.0], 0.5))
rho = Mollifier(Ball([0.0, 0.0], 0.3))
op = BogovskiiOp(disc, rho)

b1, b2 = Ball([0.3, 0.2], 0.35), Ball([-0.3, -0.25], 0.3)
m1, m2 = Mollifier(b1), Mollifier(b2)
phi = CallableField(lambda p: m1(p) - m2(p), 2, support=[b1, b2])

rng = np.random.default_rng(0)
pts = rng.uniform(-0.6, 0.6, (40, 2))
B = CallableField(lambda p: bogovskii_apply(op, phi, p), 2, 2)
err = np.abs(divergence(B, pts, FiniteDiffScheme(1e-3, 4)) - phi(pts))
print(f"div B phi - phi: max {err.max():.2e}  (sup |phi| = {abs(phi(np.stack([b1.center]))[0]):.2f})")

# outside the hull of each bump with rho the field is exactly zero
far = rng.uniform(-1.0, 1.0, (4000, 2))
far = far[disc.contains(far)]
far = far[~(support_hull_test(far, b1, rho.ball) | support_hull_test(far, b2, rho.ball))]
print(f"|B phi| at {len(far)} points outside the hulls: max {np.abs(bogovskii_apply(op, phi, far)).max():.1e}")

# A is the other half of the pair: a potential for curl-free fields
v = lambda x: np.stack([3 * x[..., 0] ** 2 * x[..., 1] + 1, x[..., 0] ** 3 - 2 * x[..., 1]], -1)
x = np.array([[0.1, -0.2], [0.5, 0.4]])
F = potential_apply(op, v, x)
print("A v at two points:", F, " difference", F[1] - F[0])
f = lambda x: x[..., 0] ** 3 * x[..., 1] + x[..., 0] - x[..., 1] ** 2
print("closed-form difference:        ", f(x[1]) - f(x[0]))

# and the two are adjoint: int (A v) phi + int v . B phi = 0
w = lambda x: np.stack([x[..., 1] ** 2, x[..., 0]], -1)
print(f"duality residual: {duality_residual(op, w, phi):.1e}")
