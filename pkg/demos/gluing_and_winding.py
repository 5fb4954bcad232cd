"""Potentials on a union of balls, and what goes wrong around a hole.

On a simply connected union the chart potentials differ by constants on
every overlap, and fixing one constant per chart gives a global potential.
Around a hole the constants cannot all be fixed: walking once around the
ring picks up the period of the field.
"""

import math

import numpy as np

from curlfree.geometry import Ball, Cover
from curlfree.potential import glue_potentials

ring = [Ball([0.6 * math.cos(a), 0.6 * math.sin(a)], 0.65) for a in 2 * math.pi * np.arange(5) / 5]
disc = Cover([Ball([0.0, 0.0], 0.5)] + ring)

v = lambda x: np.stack([np.cos(x[..., 0]) * np.cos(x[..., 1]), -np.sin(x[..., 0]) * np.sin(x[..., 1])], -1)
F = glue_potentials(disc, v)
print("six-ball cover")
print(f"  constants          {np.round(F.constants, 6)}")
print(f"  overlap std        {F.overlap_consistency:.1e}")
print(f"  grad F - v         {F.grad_residual:.1e}")
pts = np.random.default_rng(1).uniform(-1, 1, (500, 2))
pts = pts[disc.contains(pts)]
d = F(pts) - np.sin(pts[:, 0]) * np.cos(pts[:, 1])
print(f"  F - sin x1 cos x2  {d.mean():+.6f} +- {d.std():.1e}")

balls = [Ball([math.cos(a), math.sin(a)], 0.55) for a in 2 * math.pi * np.arange(8) / 8]
annulus = Cover(balls, simply_connected=False)
winding = lambda x: np.stack([-x[..., 1], x[..., 0]], -1) / np.sum(x ** 2, -1)[..., None]
G = glue_potentials(annulus, winding)
print("eight balls around the origin, winding field")
for i, j, mean, std in G.pair_report:
    if mean > 1e-6:
        print(f"  charts {i} and {j}: mismatch {mean:.12f} (2 pi = {2 * math.pi:.12f})")
print(f"  consistent: {G.consistent}")
