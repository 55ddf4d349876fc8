"""Four estimators of one density level set, in one and two dimensions."""
import math

from levelsets import builtin_model
from levelsets.estimators import ExcessMass, MaxProb, MaxProbEqualVol, MinVolume, SearchConfig, estimate
from levelsets.geometry import hausdorff_distance, sym_diff_volume

model = builtin_model("triangular1d", 0.5)
o = model.oracle
x = model.sample(5000, seed=1)
print(f"true level set {o.body}, mass {o.p_lambda}, length {o.v_lambda}")
for kind in (ExcessMass(o.lam), MinVolume(o.p_lambda), MaxProb(o.v_lambda), MaxProbEqualVol(o.v_lambda)):
    r = estimate(x, kind)
    print(f"{type(kind).__name__:16s} {r.set}  empirical mass {r.empirical_mass}  "
          f"symdiff {sym_diff_volume(r.set, o.body):.4f}")

disc = builtin_model("gaussian2d", 0.05)
X = disc.sample(800, seed=2)
print(f"\ntrue disc {disc.oracle.body}")
for cls in ("balls", "ellipsoids"):
    r = estimate(X, MinVolume(disc.oracle.p_lambda), cls, SearchConfig(restarts=8))
    print(f"min-volume {cls:10s} volume {r.set.volume:.3f} (true {disc.oracle.v_lambda:.3f}), "
          f"Hausdorff {hausdorff_distance(r.set, disc.oracle.body):.3f}, restarts converged "
          f"{r.diagnostics['converged_restarts']}")
