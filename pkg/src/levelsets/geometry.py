"""Parametric convex bodies and the geometric primitives built on them.

Bodies are immutable. Every function here is pure, so values can be shared
freely between worker processes.

Supported bodies
----------------
Interval   closed segment [a, b] on the real line, a == b allowed (degenerate)
Ball       Euclidean ball in R^d
Ellipsoid  {x : (x - c)^T Q^{-1} (x - c) <= 1} with Q symmetric positive definite,
           so the eigenvalues of Q are the squared semi-axes
Square     axis-aligned square in the plane; a closed-form fixture for Steiner
           and isoperimetric checks only (no projection, no Hausdorff distance)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy.stats import qmc

from .errors import (
    DegenerateBody,
    DimensionMismatch,
    EpsTooLarge,
    SkeletonPoint,
    UnsupportedBody,
    ValidationError,
)

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 100
HAUSDORFF_GRID = 2048


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("interval endpoints must be finite")
        if self.a > self.b:
            raise ValidationError(f"interval needs a <= b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    dimension = 1

    @property
    def volume(self) -> float:
        return self.b - self.a

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.a + self.b)])

    @property
    def inradius(self) -> float:
        return 0.5 * (self.b - self.a)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        return (x >= self.a) & (x <= self.b)

    def bounds(self):
        return np.array([self.a]), np.array([self.b])


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValidationError(f"ball radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def volume(self) -> float:
        return _unit_ball_volume(self.dimension) * self.radius ** self.dimension

    @property
    def inradius(self) -> float:
        return self.radius

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.c, axis=-1) <= self.radius

    def bounds(self):
        return self.c - self.radius, self.c + self.radius

    def as_ellipsoid(self) -> "Ellipsoid":
        return Ellipsoid(self.center, self.radius ** 2 * np.eye(self.dimension))

    def boundary_points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple
    shape: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        q = np.atleast_2d(np.asarray(self.shape, dtype=float))
        if q.shape != (len(c), len(c)):
            raise DimensionMismatch(f"shape matrix {q.shape} does not match center of length {len(c)}")
        if not np.allclose(q, q.T, rtol=0, atol=1e-12 * np.abs(q).max()):
            raise ValidationError("shape matrix must be symmetric")
        q = 0.5 * (q + q.T)
        if np.linalg.eigvalsh(q).min() <= 0:
            raise ValidationError("shape matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", tuple(tuple(float(v) for v in row) for row in q))

    @classmethod
    def from_axes(cls, center, axes, angle=0.0) -> "Ellipsoid":
        """Planar ellipse with semi-axes ``axes`` rotated by ``angle`` radians."""
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        q = rot @ np.diag(np.square(axes)) @ rot.T
        return cls(center, q)

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def Q(self) -> np.ndarray:
        return np.array(self.shape)

    @cached_property
    def _eig(self):
        evals, evecs = np.linalg.eigh(self.Q)
        return evals, evecs

    @property
    def axes(self) -> np.ndarray:
        """Semi-axes in ascending order, matching the columns of ``rotation``."""
        return np.sqrt(self._eig[0])

    @property
    def rotation(self) -> np.ndarray:
        return self._eig[1]

    @cached_property
    def Qinv(self) -> np.ndarray:
        return np.linalg.inv(self.Q)

    @property
    def volume(self) -> float:
        return _unit_ball_volume(self.dimension) * float(np.prod(self.axes))

    @property
    def inradius(self) -> float:
        return float(self.axes[0])

    def contains(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.c
        return np.einsum("...i,ij,...j->...", y, self.Qinv, y) <= 1.0

    def bounds(self):
        half = np.sqrt(np.diag(self.Q))
        return self.c - half, self.c + half

    def boundary_points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        circ = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return self.c + (circ * self.axes) @ self.rotation.T


@dataclass(frozen=True)
class Square:
    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if len(self.center) != 2:
            raise DimensionMismatch("Square is planar")
        if not self.side > 0:
            raise ValidationError("square side must be positive")

    dimension = 2

    @property
    def volume(self) -> float:
        return self.side ** 2

    @property
    def inradius(self) -> float:
        return 0.5 * self.side

    def contains(self, x) -> np.ndarray:
        y = np.abs(np.asarray(x, dtype=float) - np.array(self.center))
        return np.all(y <= 0.5 * self.side, axis=-1)

    def bounds(self):
        c = np.array(self.center)
        return c - 0.5 * self.side, c + 0.5 * self.side


ConvexBody = Union[Interval, Ball, Ellipsoid, Square]


@dataclass(frozen=True)
class BoundaryProjection:
    """Nearest boundary point ``pi``, outer normal ``u`` and signed distance ``s``.

    ``x == pi + s * u``; ``s > 0`` exactly when ``x`` lies outside the body.
    Arrays carry a leading batch axis when ``project`` was given a batch.
    """

    pi: np.ndarray
    u: np.ndarray
    s: np.ndarray


def _as_points(body, x):
    x = np.asarray(x, dtype=float)
    d = body.dimension
    single = x.ndim <= 1
    pts = x.reshape(1, d) if single else x
    if pts.ndim != 2 or pts.shape[1] != d:
        raise DimensionMismatch(f"points of shape {x.shape} do not live in R^{d}")
    return pts, single


def _project_interval(body: Interval, x: np.ndarray):
    x = x[:, 0]
    if body.a == body.b:
        if np.any(x == body.a):
            raise DegenerateBody("degenerate interval: point coincides with the interval")
        u = np.sign(x - body.a)
        return np.full_like(x, body.a)[:, None], u[:, None], np.abs(x - body.a)
    mid = 0.5 * (body.a + body.b)
    if np.any(x == mid):
        raise SkeletonPoint(f"{mid} is the midpoint of the interval; projection is not unique")
    left = x < mid
    pi = np.where(left, body.a, body.b)
    u = np.where(left, -1.0, 1.0)
    s = (x - pi) * u
    return pi[:, None], u[:, None], s


def _project_ball(body: Ball, x: np.ndarray):
    v = x - body.c
    r = np.linalg.norm(v, axis=1)
    if np.any(r == 0):
        raise SkeletonPoint("the center of a ball has no unique boundary projection")
    u = v / r[:, None]
    return body.c + body.radius * u, u, r - body.radius


def _ellipsoid_root(a2: np.ndarray, y: np.ndarray):
    """Lagrange parameter t with sum(a2 * y^2 / (a2 + t)^2) == 1, per row of ``y``.

    Safeguarded Newton: any step leaving the current bracket is replaced by
    bisection, so the iteration cannot diverge.
    """
    q = np.sum(y * y / a2, axis=1)
    outside = q > 1.0
    amin2 = a2.min()
    lo = np.where(outside, 0.0, -amin2)
    hi = np.where(outside, np.linalg.norm(y, axis=1) * math.sqrt(a2.max()), 0.0)
    t = np.where(outside, 0.0, 0.5 * (lo + hi))
    done = q == 1.0
    t[done] = 0.0
    for _ in range(NEWTON_MAXITER):
        act = ~done
        if not act.any():
            break
        ta = t[act]
        den = a2 + ta[:, None]
        ya = y[act]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = a2 * ya * ya / (den * den)
            F = ratio.sum(axis=1) - 1.0
            dF = -2.0 * (ratio / den).sum(axis=1)
            newton = ta - F / dF
        lo_a = np.where(F > 0, ta, lo[act])
        hi_a = np.where(F > 0, hi[act], ta)
        bad = ~np.isfinite(newton) | (newton <= lo_a) | (newton >= hi_a)
        nxt = np.where(F == 0, ta, np.where(bad, 0.5 * (lo_a + hi_a), newton))
        step = np.abs(nxt - ta)
        lo[act], hi[act] = lo_a, hi_a
        t[act] = nxt
        conv = (step <= NEWTON_TOL * np.maximum(1.0, np.abs(nxt))) | (F == 0)
        idx = np.flatnonzero(act)
        done[idx[conv]] = True
    return t, q


def _project_ellipsoid(body: Ellipsoid, x: np.ndarray):
    a2 = body.axes ** 2
    R = body.rotation
    y = (x - body.c) @ R
    # Points on the focal segment (or the centre) have several nearest boundary points.
    smallest = np.isclose(a2, a2.min(), rtol=1e-14, atol=0)
    pole = np.any(y[:, smallest] != 0, axis=1)
    if not pole.all():
        yy = y[~pole]
        with np.errstate(divide="ignore", invalid="ignore"):
            den = a2[~smallest] - a2.min()
            f_at_pole = np.sum(a2[~smallest] * yy[:, ~smallest] ** 2 / den ** 2, axis=1) - 1.0
        q = np.sum(yy * yy / a2, axis=1)
        if np.any((q < 1.0) & (f_at_pole <= 0)):
            raise SkeletonPoint("point lies on the skeleton of the ellipsoid; projection is not unique")
    t, q = _ellipsoid_root(a2, y)
    z = a2 * y / (a2 + t[:, None])
    normal = z / a2
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    pi = body.c + z @ R.T
    u = normal @ R.T
    s = np.linalg.norm(x - pi, axis=1) * np.where(q > 1.0, 1.0, -1.0)
    return pi, u, s


def project(body: ConvexBody, x) -> BoundaryProjection:
    """Metric projection of ``x`` onto the boundary of ``body``.

    ``x`` is one point (shape ``(d,)``, or a scalar in 1D) or a batch of shape
    ``(m, d)``. Raises ``SkeletonPoint`` where the nearest boundary point is not
    unique (interval midpoint, ball centre, ellipsoid focal segment).
    """
    pts, single = _as_points(body, x)
    if isinstance(body, Interval):
        pi, u, s = _project_interval(body, pts)
    elif isinstance(body, Ball):
        pi, u, s = _project_ball(body, pts)
    elif isinstance(body, Ellipsoid):
        pi, u, s = _project_ellipsoid(body, pts)
    else:
        raise UnsupportedBody(f"projection is not implemented for {type(body).__name__}")
    if single:
        return BoundaryProjection(pi[0], u[0], float(s[0]))
    return BoundaryProjection(pi, u, s)


def _check_dims(A, B):
    if A.dimension != B.dimension:
        raise DimensionMismatch(f"bodies live in R^{A.dimension} and R^{B.dimension}")


def _as_ellipsoid(body):
    if isinstance(body, Ellipsoid):
        return body
    if isinstance(body, Ball):
        return body.as_ellipsoid()
    raise UnsupportedBody(f"{type(body).__name__} cannot be treated as an ellipsoid")


def hausdorff_distance(A: ConvexBody, B: ConvexBody, grid: int = HAUSDORFF_GRID) -> float:
    """Hausdorff distance between two convex bodies.

    Exact for interval pairs and ball pairs. Pairs involving an ellipse are
    evaluated on ``grid`` equally spaced boundary parameters of each body.
    """
    _check_dims(A, B)
    if isinstance(A, Interval) and isinstance(B, Interval):
        return max(abs(A.a - B.a), abs(A.b - B.b))
    if isinstance(A, Ball) and isinstance(B, Ball):
        return float(np.linalg.norm(A.c - B.c)) + abs(A.radius - B.radius)
    if A == B:
        return 0.0
    if A.dimension != 2:
        raise UnsupportedBody("grid Hausdorff distance is implemented for planar bodies")
    EA, EB = _as_ellipsoid(A), _as_ellipsoid(B)
    t = np.linspace(0.0, 2 * math.pi, grid, endpoint=False)
    return max(_directed_excess(EA.boundary_points(t), EB), _directed_excess(EB.boundary_points(t), EA))


def _directed_excess(points: np.ndarray, body: Ellipsoid) -> float:
    out = ~body.contains(points)
    if not out.any():
        return 0.0
    return float(project(body, points[out]).s.max())


def _lens_area(r1: float, r2: float, d: float) -> float:
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    c1 = (d * d + r1 * r1 - r2 * r2) / (2 * d * r1)
    c2 = (d * d + r2 * r2 - r1 * r1) / (2 * d * r2)
    k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return r1 * r1 * math.acos(c1) + r2 * r2 * math.acos(c2) - 0.5 * math.sqrt(max(k, 0.0))


def sym_diff_volume_qmc(A: ConvexBody, B: ConvexBody, n_points: int = 2 ** 16,
                        n_scrambles: int = 8, seed: int = 0):
    """Randomised quasi-Monte Carlo estimate of mu(A symdiff B) and its standard error.

    Scrambled Sobol points over the common bounding box; the scramble seeds
    derive from ``seed`` so repeated calls are bit-identical.
    """
    _check_dims(A, B)
    loA, hiA = A.bounds()
    loB, hiB = B.bounds()
    lo, hi = np.minimum(loA, loB), np.maximum(hiA, hiB)
    box = float(np.prod(hi - lo))
    m = int(round(math.log2(n_points)))
    estimates = []
    for k in range(n_scrambles):
        sob = qmc.Sobol(d=A.dimension, scramble=True, seed=np.random.default_rng([seed, k]))
        pts = lo + (hi - lo) * sob.random_base2(m)
        estimates.append(box * np.mean(A.contains(pts) != B.contains(pts)))
    estimates = np.array(estimates)
    return float(estimates.mean()), float(estimates.std(ddof=1) / math.sqrt(n_scrambles))


def sym_diff_volume(A: ConvexBody, B: ConvexBody, **qmc_kwargs) -> float:
    """Lebesgue measure of the symmetric difference of two bodies.

    Exact for intervals and planar ball pairs; other pairs fall back to
    ``sym_diff_volume_qmc`` (keyword arguments are forwarded).
    """
    _check_dims(A, B)
    if isinstance(A, Interval) and isinstance(B, Interval):
        overlap = max(0.0, min(A.b, B.b) - max(A.a, B.a))
        return A.volume + B.volume - 2.0 * overlap
    if A == B:
        return 0.0
    if isinstance(A, Ball) and isinstance(B, Ball) and A.dimension == 2:
        lens = _lens_area(A.radius, B.radius, float(np.linalg.norm(A.c - B.c)))
        return A.volume + B.volume - 2.0 * lens
    return sym_diff_volume_qmc(A, B, **qmc_kwargs)[0]


def parallel_set_volume(body: ConvexBody, eps: float, side: str = "outer") -> float:
    """Volume of the eps-shell outside, inside, or on both sides of the boundary."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if side not in ("outer", "inner", "both"):
        raise ValidationError(f"side must be outer, inner or both, not {side!r}")
    if side in ("inner", "both") and eps >= body.inradius:
        raise EpsTooLarge(f"inner shell of width {eps} exceeds the inradius {body.inradius}")
    if isinstance(body, Interval):
        outer, inner = 2 * eps, 2 * eps
    elif isinstance(body, Ball) and body.dimension == 2:
        r = body.radius
        outer = 2 * math.pi * r * eps + math.pi * eps ** 2
        inner = 2 * math.pi * r * eps - math.pi * eps ** 2
    elif isinstance(body, Square):
        a = body.side
        outer = 4 * a * eps + math.pi * eps ** 2
        inner = 4 * a * eps - 4 * eps ** 2
    else:
        raise UnsupportedBody(f"no closed-form parallel volume for {type(body).__name__}")
    return {"outer": outer, "inner": inner, "both": outer + inner}[side]


@dataclass(frozen=True)
class SteinerData:
    """Total masses of the support measures of a body and its local inner reach.

    ``surface_measure`` is the boundary measure s_lambda; ``lower_support_masses``
    lists the lower-order support measure masses in order j = 2, ..., d.
    """

    surface_measure: float
    lower_support_masses: tuple
    inner_reach: Callable[[float], float]
    dimension: int

    def outer_shell_volume(self, eps: float) -> float:
        """Steiner polynomial: sum_j C(d-1, j-1) * mass_{d-j} * eps^j / j."""
        masses = (self.surface_measure,) + tuple(self.lower_support_masses)
        d = self.dimension
        return sum(math.comb(d - 1, j - 1) * m * eps ** j / j for j, m in enumerate(masses, start=1))

    @property
    def quadratic_coefficient(self) -> float:
        if self.dimension < 2:
            return 0.0
        return (self.dimension - 1) * self.lower_support_masses[0] / 2


def steiner_data(body: ConvexBody) -> SteinerData:
    if isinstance(body, Interval):
        half = body.inradius
        return SteinerData(2.0, (), lambda _p: half, 1)
    if isinstance(body, Ball) and body.dimension == 2:
        r = body.radius
        return SteinerData(2 * math.pi * r, (2 * math.pi,), lambda _p: r, 2)
    if isinstance(body, Square):
        a = body.side

        def reach(p, a=a):
            # boundary parameter in [0, 4): edge index plus relative position along it
            frac = p % 1.0
            return min(a / 2, a * min(frac, 1.0 - frac))

        return SteinerData(4 * a, (2 * math.pi,), reach, 2)
    raise UnsupportedBody(f"support measures are not available for {type(body).__name__}")


def isoperimetric_gap(body: ConvexBody) -> float:
    """s_lambda - 2 sqrt(pi * area) for planar fixtures; non-negative by the isoperimetric inequality."""
    data = steiner_data(body)
    if data.dimension != 2:
        raise UnsupportedBody("isoperimetric check is planar")
    return data.surface_measure - 2 * math.sqrt(math.pi * body.volume)


def boundary_grid(body: ConvexBody, resolution: int):
    """Uniform parameter grid on a planar boundary with points, outer normals and speed.

    Speed is |d pi / d theta|, the density of the boundary measure with respect
    to the parameter.
    """
    theta = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
    if isinstance(body, Ball):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return theta, body.c + body.radius * u, u, np.full(resolution, body.radius)
    if isinstance(body, Ellipsoid) and body.dimension == 2:
        ax, R = body.axes, body.rotation
        cs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        pts = body.c + (cs * ax) @ R.T
        n = (cs / ax) @ R.T
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        tangent = (np.stack([-np.sin(theta), np.cos(theta)], axis=-1) * ax) @ R.T
        return theta, pts, n, np.linalg.norm(tangent, axis=1)
    raise UnsupportedBody(f"no planar boundary parameterisation for {type(body).__name__}")


def min_curvature_radius(body: ConvexBody) -> float:
    """Smallest radius of curvature on the boundary; a lower bound for the inner reach."""
    if isinstance(body, Ball):
        return body.radius
    if isinstance(body, Ellipsoid) and body.dimension == 2:
        a, b = body.axes[1], body.axes[0]
        return b * b / a
    if isinstance(body, Interval):
        return body.inradius
    raise UnsupportedBody(f"curvature is not available for {type(body).__name__}")
