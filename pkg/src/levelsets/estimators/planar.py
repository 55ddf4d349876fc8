"""Estimators over discs and ellipses in the plane.

The search runs over position and shape only. The scale is profiled out
exactly: with normalised distances d_i = |S^{-1/2}(x_i - c)| sorted ascending,
the best body of a fixed position and shape is
  ExcessMass      scale d_(k) maximising k/n - lam*pi*d_(k)^2
  MinVolume       scale d_(k), k = ceil(n p)
  MaxProb         scale sqrt(v/pi)
so the hard count and volume constraints never enter the simplex search.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from ..errors import DimensionMismatch, InfeasibleConstraint, SearchBudgetExceeded, ValidationError
from ..geometry import Ball, Ellipsoid
from .kinds import EstimateResult, ExcessMass, MaxProb, MaxProbEqualVol, MinVolume, Relaxed, required_count

CLASSES = ("balls", "ellipsoids")
# exhaustive disc candidates (point pairs and triples) below this size
CANDIDATE_LIMIT = 60
_INFLATE = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 16
    xatol: float = 1e-8
    maxiter: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.maxiter < 1 or not self.xatol > 0:
            raise ValidationError("search config needs restarts >= 1, maxiter >= 1, xatol > 0")


def _inverse_shape(log_ratio: float, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([math.exp(-log_ratio), math.exp(log_ratio)]) @ rot.T


class _Profile:
    """Profiled objective (smaller is better) for one estimator on one sample."""

    def __init__(self, X: np.ndarray, kind, cls: str):
        self.X = X
        self.n = X.shape[0]
        self.kind = kind
        self.cls = cls
        if isinstance(kind, MinVolume):
            self.k = required_count(self.n, kind.p_lambda)
        if isinstance(kind, (MaxProb, MaxProbEqualVol)):
            self.s_max = math.sqrt(kind.v_lambda / math.pi)

    def distances(self, params) -> np.ndarray:
        z = self.X - np.asarray(params[:2])
        if self.cls == "balls":
            return np.sqrt(np.einsum("ij,ij->i", z, z))
        sinv = _inverse_shape(params[2], params[3])
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", z, sinv, z), 0.0))

    def __call__(self, params):
        """Return (surrogate, scale, objective) for a position/shape vector."""
        d = np.sort(self.distances(params))
        kind = self.kind
        if isinstance(kind, ExcessMass):
            k = np.arange(1, self.n + 1)
            vals = k / self.n - kind.lam * math.pi * d * d
            best = int(np.argmax(vals))
            return -vals[best], d[best], vals[best]
        if isinstance(kind, MinVolume):
            s = d[self.k - 1]
            return math.pi * s * s, s, math.pi * s * s
        count = int(np.searchsorted(d, self.s_max, side="right"))
        # fractional reward for closing in on the next point keeps the surface informative
        frac = 0.0 if count == self.n else math.exp(-(d[count] - self.s_max) / self.s_max)
        return -(count + frac), self.s_max, count / self.n


def _candidate_centres(X: np.ndarray, kind) -> np.ndarray:
    """Centres of discs determined by one, two or three sample points."""
    n = X.shape[0]
    cands = [X]
    pairs = np.array(list(itertools.combinations(range(n), 2)), dtype=int).reshape(-1, 2)
    if pairs.size:
        a, b = X[pairs[:, 0]], X[pairs[:, 1]]
        cands.append(0.5 * (a + b))
        if isinstance(kind, (MaxProb, MaxProbEqualVol)):
            # discs of the allowed radius with both points on the boundary
            r = math.sqrt(kind.v_lambda / math.pi)
            half = 0.5 * np.linalg.norm(b - a, axis=1)
            ok = (half > 0) & (half <= r)
            mid, u = 0.5 * (a + b)[ok], (b - a)[ok] / (2 * half[ok, None])
            h = np.sqrt(r * r - half[ok] ** 2)[:, None]
            perp = np.stack([-u[:, 1], u[:, 0]], axis=1)
            cands.extend([mid + h * perp, mid - h * perp])
    triples = np.array(list(itertools.combinations(range(n), 3)), dtype=int).reshape(-1, 3)
    if triples.size:
        a, b, c = X[triples[:, 0]], X[triples[:, 1]], X[triples[:, 2]]
        den = 2 * ((a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1])
                    + c[:, 0] * (a[:, 1] - b[:, 1])))
        ok = np.abs(den) > 1e-14
        sa, sb, sc = (np.einsum("ij,ij->i", p, p) for p in (a, b, c))
        ux = (sa * (b[:, 1] - c[:, 1]) + sb * (c[:, 1] - a[:, 1]) + sc * (a[:, 1] - b[:, 1]))
        uy = (sa * (c[:, 0] - b[:, 0]) + sb * (a[:, 0] - c[:, 0]) + sc * (b[:, 0] - a[:, 0]))
        cands.append(np.stack([ux[ok] / den[ok], uy[ok] / den[ok]], axis=1))
    return np.concatenate(cands, axis=0)


def _starts(X: np.ndarray, cls: str, config: SearchConfig):
    centre = np.median(X, axis=0)
    for r in range(config.restarts):
        if r == 0:
            c, rho, ang = centre, 0.0, 0.0
        else:
            rng = np.random.default_rng([config.seed, r])
            c = X[rng.integers(X.shape[0])]
            rho, ang = float(rng.normal(0.0, 0.5)), float(rng.uniform(0.0, math.pi))
        yield np.array([*c, rho, ang]) if cls == "ellipsoids" else np.array(c, dtype=float)


def _simplex(x0: np.ndarray, spread: float) -> np.ndarray:
    steps = np.full(x0.size, spread)
    steps[2:] = 0.5
    return np.vstack([x0] + [x0 + np.eye(x0.size)[i] * steps[i] for i in range(x0.size)])


def _body(params, scale: float, cls: str):
    scale = max(float(scale), 1e-300)
    if cls == "balls":
        return Ball(tuple(params[:2]), scale)
    rho, ang = float(params[2]), float(params[3])
    axes = (scale * math.exp(rho / 2), scale * math.exp(-rho / 2))
    return Ellipsoid.from_axes(tuple(params[:2]), axes, ang)


def _finalise(X, profile: _Profile, params, scale, kind, cls):
    """Rebuild the body and re-check the constraint with exact point counting."""
    n = X.shape[0]
    if isinstance(kind, MinVolume):
        body = _body(params, scale, cls)
        for _ in range(8):
            if int(body.contains(X).sum()) >= profile.k:
                break
            scale *= 1 + _INFLATE * 10
            body = _body(params, scale, cls)
        else:
            raise InfeasibleConstraint(f"no body found containing {profile.k} sample points")
    elif isinstance(kind, (MaxProb, MaxProbEqualVol)):
        body = _body(params, profile.s_max, cls)
        if body.volume > kind.v_lambda:
            body = _body(params, profile.s_max * (1 - _INFLATE), cls)
    else:
        body = _body(params, scale * (1 + _INFLATE) if scale > 0 else scale, cls)
    count = int(body.contains(X).sum())
    if isinstance(kind, ExcessMass):
        objective = count / n - kind.lam * body.volume
    elif isinstance(kind, MinVolume):
        objective = body.volume
    else:
        objective = count / n
    return body, objective, count


def estimate_2d(sample, kind, cls: str = "balls", search: SearchConfig | None = None) -> EstimateResult:
    """Multi-start Nelder-Mead search over discs or ellipses.

    Restart 0 starts at the coordinatewise median; restart r > 0 draws its
    start from ``default_rng([seed, r])``. For discs with at most
    ``CANDIDATE_LIMIT`` points every centre fixed by one, two or three sample
    points is also scored. The winner is the lexicographically smallest
    (surrogate, parameters). The relaxed kind returns the first evaluated
    candidate within the slack, in evaluation order.
    """
    search = search or SearchConfig()
    if cls not in CLASSES:
        raise ValidationError(f"class must be one of {CLASSES}, got {cls!r}")
    X = np.asarray(sample, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise DimensionMismatch(f"planar estimators need an (n, 2) sample, got shape {X.shape}")
    if X.shape[0] < 3:
        raise ValidationError("planar estimators need at least 3 points")
    if not np.all(np.isfinite(X)):
        raise ValidationError("sample contains non-finite values")

    relaxed = isinstance(kind, Relaxed)
    inner = kind.inner if relaxed else kind
    profile = _Profile(X, inner, cls)
    spread = float(np.mean(np.std(X, axis=0))) or 1.0
    trace = []

    def fun(p):
        value, scale, objective = profile(p)
        trace.append((value, np.array(p, dtype=float), scale))
        return value

    if cls == "balls" and X.shape[0] <= CANDIDATE_LIMIT:
        for c in _candidate_centres(X, inner):
            fun(c)

    converged = 0
    for x0 in _starts(X, cls, search):
        res = minimize(fun, x0, method="Nelder-Mead",
                       options={"xatol": search.xatol, "fatol": 1e-12, "maxiter": search.maxiter,
                                "initial_simplex": _simplex(x0, 0.25 * spread)})
        converged += bool(res.success)
    if converged == 0:
        raise SearchBudgetExceeded(f"no restart converged within {search.maxiter} iterations")

    values = np.array([t[0] for t in trace])
    best_value = values.min()
    if relaxed:
        slack = kind.delta_n * X.shape[0] ** (-2.0 / 3.0)
        tol = slack * X.shape[0] if isinstance(inner, MaxProb) else slack
        if isinstance(inner, MaxProb):
            # compare integer counts, not the smoothed surrogate
            counts = np.floor(-values)
            pick = int(np.flatnonzero(counts >= np.floor(-best_value) - tol)[0])
        else:
            pick = int(np.flatnonzero(values <= best_value + tol)[0])
        chosen = trace[pick]
        ties = 0
    else:
        hits = np.flatnonzero(values == best_value)
        chosen = min((trace[h] for h in hits), key=lambda t: tuple(t[1]))
        ties = len({tuple(trace[h][1]) for h in hits}) - 1
    _, params, scale = chosen
    body, objective, count = _finalise(X, profile, params, scale, inner, cls)
    diagnostics = {
        "tie_count": ties,
        "search_restarts": search.restarts,
        "empirical_mass": Fraction(count, X.shape[0]),
        "converged_restarts": converged,
        "evaluations": len(trace),
    }
    if relaxed:
        diagnostics["slack"] = slack
    return EstimateResult(set=body, objective=float(objective), kind=kind, n=X.shape[0],
                          diagnostics=diagnostics)
