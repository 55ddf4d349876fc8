"""Draws of the limiting argmax set: free, balanced, and a planar disc family."""
import functools
import math

import numpy as np

from levelsets.cylinder import DriftSpec
from levelsets.limit import PlanarGrid, WienerGrid, draw_Z_ball2d, draw_Z_interval, draw_Z_interval_constrained, z_distribution
from levelsets.models import builtin_model

model = builtin_model("triangular1d", 0.5)
drift = DriftSpec.from_model(model)
for name, op in (("free", draw_Z_interval), ("balanced", draw_Z_interval_constrained)):
    dist = z_distribution(functools.partial(op, drift, model.lam, WienerGrid()), 2000, seed=3)
    m = dist.values("M_total")
    print(f"{name:9s} M(Z) quartiles {np.round(np.quantile(m, [0.25, 0.5, 0.75]), 3)}")

disc = builtin_model("cone2d", 3 / (2 * math.pi))
d = draw_Z_ball2d(DriftSpec.from_model(disc), disc.lam, disc.oracle.body, PlanarGrid(resolution=128), seed=4)
print(f"planar draw: M+={d.functionals['M_plus']:.3f} M-={d.functionals['M_minus']:.3f} objective {d.objective:.3f}")
