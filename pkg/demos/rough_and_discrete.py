"""Potentials of sampled data.

A gradient known only on a 64 x 64 grid is not smooth enough for A
directly. Dilating the domain and mollifying the data gives a sequence of
smooth problems whose potentials converge. The discrete counterpart of the
weak statement is a least-squares problem on the grid; it accepts a
discrete gradient and rejects a rotation at the curl check.
"""

import numpy as np

from curlfree.fieldspec import GridField
from curlfree.geometry import Ball, StarDomain
from curlfree.mollify import Mollifier
from curlfree.potential import rough_local_potential
from curlfree.sobolev_checks import (
    DivFreeTestSet, GridSpace, PipelineRefusal, adjointness_check, weak_poincare_pipeline,
)

disc = StarDomain(Ball([0.0, 0.0], 1.0), Ball([0.0, 0.0], 0.5))
g = GridField.sample(lambda x: np.stack([2 * x[..., 0], 0 * x[..., 0]], -1), [-1, -1], 2 / 63, (64, 64))
rp = rough_local_potential(disc, Mollifier(Ball([0.0, 0.0], 0.3)), g,
                           (1.5, 1.25, 1.1, 1.04, 1.01), (4, 8, 16, 32, 128))
print("stage    lam     l   RMS |grad F - g|")
for k, s in enumerate(rp.stages):
    print(f"{k:5d} {s.lam:6.2f} {s.l:5d}   {s.grad_residual:.4f}")
P = Ball([0.0, 0.0], 1.0).sample(np.random.default_rng(4), 400)
e = rp(P) - P[:, 0] ** 2
print(f"L2 distance to x1^2 (up to a constant): {np.sqrt(np.pi * np.mean((e - e.mean()) ** 2)):.2e}")

space = GridSpace.unit(32)
print(f"\n<div u, f> + <u, grad f>, worst of 100 pairs: {adjointness_check(space):.1e}")
tests = DivFreeTestSet.random(space)
x = space.nodes()
f0 = np.sin(2 * x[..., 0]) * np.cos(3 * x[..., 1]) + x[..., 0] ** 2
f0 -= f0.mean()
res = weak_poincare_pipeline(space, space.grad(f0), tests)
for name, value, tol in res.stages:
    print(f"  {name:9s} {value:.1e}  (tol {tol:.0e})")
print(f"recovered f0 to {np.linalg.norm(res.f - f0) / np.linalg.norm(f0):.1e} relative")
rot = np.zeros(space.shape + (2,))
rot[..., 0], rot[..., 1] = -x[..., 1], x[..., 0]
try:
    weak_poincare_pipeline(space, rot, tests)
except PipelineRefusal as exc:
    print(f"rotation: {exc}")
