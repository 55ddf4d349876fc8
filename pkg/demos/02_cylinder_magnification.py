"""Magnify the symmetric difference of a nearby disc onto the boundary cylinder and back."""
import math

from levelsets.cylinder import DriftSpec, demagnify, drift_D, is_in_Bstar, m_measure, magnify
from levelsets.geometry import Ball, sym_diff_volume
from levelsets.models import builtin_model

model = builtin_model("cone2d", 3 / (2 * math.pi))
L = model.oracle.body
spec = DriftSpec.from_model(model)
for eps in (0.1, 0.03, 0.01):
    A = Ball((0.6 * eps, -0.3 * eps), L.radius + 0.4 * eps)
    B = magnify(L, A, eps)
    back = demagnify(L, B, eps)
    print(f"eps={eps:5.2f}  M={m_measure(B):.4f}  mu/eps={sym_diff_volume(A, L) / eps:.4f}  "
          f"drift={drift_D(B, spec):.4f}  offsets in [{B.h.min():+.3f}, {B.h.max():+.3f}]  "
          f"round trip {sym_diff_volume(A, back):.1e}")

# a translation moves nearly as much mass out as in; the gap is a curvature term of order eps
for eps in (0.1, 0.01, 0.001):
    B = magnify(L, Ball((eps, 0.0), L.radius), eps)
    print(f"translation eps={eps}: outside {B.positive_mass():.4f}, inside {B.negative_mass():.4f}, "
          f"balanced within 2 eps: {is_in_Bstar(B, tol=2 * eps)}")
