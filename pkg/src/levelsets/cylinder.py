"""Local coordinates around a level-set boundary.

A point x near the boundary of L has coordinates (boundary point, unit
normal, signed distance s), with s > 0 outside L. Dividing s by eps
magnifies a thin shell into the product space "boundary x real line" with
measure M = boundary measure x Lebesgue. A set A close to L maps to the
cylinder set between the boundary and the offset of the boundary of A.
Every representation here is outward-positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    IncompatibleRepresentations,
    NonRepresentable,
    NotParallel,
    UnsupportedBody,
    ValidationError,
)
from .models import local_excess
from .geometry import Ball, ConvexBody, Ellipsoid, Interval, boundary_grid, min_curvature_radius, project

DEFAULT_CAP = 1e6
DEFAULT_GRID = 1024
DEMAGNIFY_TOL = 1e-6


@dataclass(frozen=True)
class IntervalShifts:
    """Outward shifts of the two endpoints, in magnified units."""

    t_left: float
    t_right: float

    @property
    def shifts(self) -> np.ndarray:
        return np.array([self.t_left, self.t_right])

    @property
    def c_bound(self) -> float:
        return float(np.abs(self.shifts).max())

    def positive_mass(self) -> float:
        return float(np.clip(self.shifts, 0, None).sum())

    def negative_mass(self) -> float:
        return float(np.clip(-self.shifts, 0, None).sum())

    def to_record(self) -> dict:
        return {"kind": "interval_shifts", "t_left": self.t_left, "t_right": self.t_right}


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Normal offset h(theta) of a perturbed planar boundary on a uniform angle grid.

    ``weights`` is the boundary-measure density |d pi/d theta| on the grid, so the
    boundary measure of a grid cell is weights * (2 pi / G).
    """

    theta: np.ndarray
    h: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not (self.theta.shape == self.h.shape == self.weights.shape) or self.theta.ndim != 1:
            raise ValidationError("theta, h and weights must be 1D arrays of equal length")

    @classmethod
    def from_function(cls, L: ConvexBody, h: Callable, resolution: int = DEFAULT_GRID) -> "RadialGraph":
        theta, _, _, speed = boundary_grid(L, resolution)
        return cls(theta, np.asarray(h(theta), dtype=float) * np.ones_like(theta), speed)

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.theta.size

    @property
    def c_bound(self) -> float:
        return float(np.abs(self.h).max())

    def _mass(self, values) -> float:
        # periodic trapezoid rule
        return float(np.sum(self.weights * values) * self.dtheta)

    def positive_mass(self) -> float:
        return self._mass(np.clip(self.h, 0, None))

    def negative_mass(self) -> float:
        return self._mass(np.clip(-self.h, 0, None))

    def to_record(self) -> dict:
        return {"kind": "radial_graph", "resolution": int(self.theta.size), "h": self.h.tolist(),
                "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class GridIndicator:
    """Cells of (boundary parameter x signed distance) that belong to the set.

    ``weights`` holds the boundary measure of each parameter cell and
    ``s_edges`` the cell edges in the magnified distance.
    """

    weights: np.ndarray
    s_edges: np.ndarray
    mask: np.ndarray

    @property
    def c_bound(self) -> float:
        return float(np.abs(self.s_edges).max())

    def _cell_mass(self) -> np.ndarray:
        return self.weights[:, None] * np.diff(self.s_edges)[None, :]

    def positive_mass(self) -> float:
        mid = 0.5 * (self.s_edges[1:] + self.s_edges[:-1])
        return float(np.sum(self._cell_mass() * self.mask * (mid > 0)))

    def negative_mass(self) -> float:
        mid = 0.5 * (self.s_edges[1:] + self.s_edges[:-1])
        return float(np.sum(self._cell_mass() * self.mask * (mid <= 0)))

    def to_record(self) -> dict:
        return {"kind": "grid_indicator", "weights": self.weights.tolist(),
                "s_edges": self.s_edges.tolist(), "mask": self.mask.astype(int).tolist()}


CylinderSet = Union[IntervalShifts, RadialGraph, GridIndicator]


def to_grid(B: CylinderSet, s_edges: np.ndarray) -> GridIndicator:
    """Rasterise a parametric cylinder set on the given distance cells."""
    s_edges = np.asarray(s_edges, dtype=float)
    mid = 0.5 * (s_edges[1:] + s_edges[:-1])
    if isinstance(B, GridIndicator):
        if B.s_edges.shape != s_edges.shape or np.any(B.s_edges != s_edges):
            raise IncompatibleRepresentations("grid indicators use different distance cells")
        return B
    if isinstance(B, IntervalShifts):
        h, weights = B.shifts, np.ones(2)
    else:
        h, weights = B.h, B.weights * B.dtheta
    h = h[:, None]
    mask = ((mid > 0) & (mid <= h)) | ((mid <= 0) & (mid > h))
    return GridIndicator(weights, s_edges, mask)


def m_measure(B: CylinderSet) -> float:
    """Mass of B under boundary measure x Lebesgue."""
    return B.positive_mass() + B.negative_mass()


def _same_grid(B: RadialGraph, B2: RadialGraph) -> bool:
    return B.theta.shape == B2.theta.shape and np.array_equal(B.weights, B2.weights)


def symdiff_measure(B: CylinderSet, B2: CylinderSet) -> float:
    if isinstance(B, IntervalShifts) and isinstance(B2, IntervalShifts):
        return float(np.abs(B.shifts - B2.shifts).sum())
    if isinstance(B, RadialGraph) and isinstance(B2, RadialGraph):
        if not _same_grid(B, B2):
            raise IncompatibleRepresentations("radial graphs live on different boundary grids")
        # two offsets on one fibre differ by the segment between them
        return B._mass(np.abs(B.h - B2.h))
    grid = B if isinstance(B, GridIndicator) else B2
    if not isinstance(grid, GridIndicator):
        raise IncompatibleRepresentations(f"cannot compare {type(B).__name__} with {type(B2).__name__}")
    g1, g2 = to_grid(B, grid.s_edges), to_grid(B2, grid.s_edges)
    if g1.mask.shape != g2.mask.shape or not np.allclose(g1.weights, g2.weights):
        raise IncompatibleRepresentations("grid indicators cover different boundary cells")
    return float(np.sum(g1._cell_mass() * (g1.mask ^ g2.mask)))


def d_metric(B: CylinderSet, B2: CylinderSet) -> float:
    """sqrt of the M-measure of the symmetric difference."""
    return math.sqrt(symdiff_measure(B, B2))


def is_in_Bstar(B: CylinderSet, tol: float = 0.0) -> bool:
    """Whether the outside and inside parts carry equal mass, up to ``tol``."""
    if tol < 0:
        raise ValidationError("tol must be non-negative")
    return abs(B.positive_mass() - B.negative_mass()) <= tol


# ---------------------------------------------------------------- magnification

def _line_hits(A, p: np.ndarray, n: np.ndarray):
    """Parameters t1 <= t2 where p + t n crosses the boundary of a ball or ellipse."""
    if isinstance(A, Ball):
        A = A.as_ellipsoid()
    if not isinstance(A, Ellipsoid) or A.dimension != 2:
        raise UnsupportedBody(f"planar magnification needs a disc or ellipse, got {type(A).__name__}")
    Qi = A.Qinv
    y = p - A.c
    a = np.einsum("ij,jk,ik->i", n, Qi, n)
    b = 2 * np.einsum("ij,jk,ik->i", n, Qi, y)
    c0 = np.einsum("ij,jk,ik->i", y, Qi, y) - 1.0
    disc = b * b - 4 * a * c0
    if np.any(disc < 0):
        raise NotParallel("a normal line of L misses A")
    # cancellation-free quadratic roots
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    r1 = q / a
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(q != 0, c0 / q, 0.0)
    return np.minimum(r1, r2), np.maximum(r1, r2)


def magnify(L: ConvexBody, A: ConvexBody, eps: float, resolution: int = DEFAULT_GRID,
            cap: float = DEFAULT_CAP) -> CylinderSet:
    """Image of the symmetric difference of A and L under the magnification map."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if isinstance(L, Interval) != isinstance(A, Interval):
        raise UnsupportedBody("magnify needs two intervals or two planar discs/ellipses")
    if isinstance(L, Interval):
        t_left, t_right = (L.a - A.a) / eps, (A.b - L.b) / eps
        # inward shifts must stay on their own side of the midpoint
        if min(t_left, 0.0) + min(t_right, 0.0) < -L.volume / eps:
            raise NotParallel("inward shifts of the two endpoints overlap")
        B = IntervalShifts(float(t_left), float(t_right))
    else:
        theta, pts, normals, speed = boundary_grid(L, resolution)
        t1, t2 = _line_hits(A, pts, normals)
        reach = min_curvature_radius(L)
        if np.any(t2 <= -reach) or np.any(t1 > -reach):
            raise NotParallel("the boundary of A is not a graph over the boundary of L")
        B = RadialGraph(theta, t2 / eps, speed)
    if B.c_bound > cap:
        raise NotParallel(f"magnified offset {B.c_bound:.3g} exceeds the cap {cap:.3g}")
    return B


def _fit_circle(points: np.ndarray):
    # algebraic (Kasa) start, then geometric least squares
    x, y = points[:, 0], points[:, 1]
    M = np.column_stack([x, y, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(M, x * x + y * y, rcond=None)
    c0 = sol[:2] / 2
    r0 = math.sqrt(max(sol[2] + c0 @ c0, 1e-300))

    def resid(p):
        return np.hypot(x - p[0], y - p[1]) - p[2]

    fit = least_squares(resid, np.array([*c0, r0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    body = Ball((fit.x[0], fit.x[1]), abs(fit.x[2]))
    return body, float(np.sqrt(np.mean(resid(fit.x) ** 2)))


def _fit_ellipse(points: np.ndarray, start: Ball):
    def body_of(p):
        return Ellipsoid.from_axes((p[0], p[1]), (math.exp(p[2]), math.exp(p[3])), p[4])

    def resid(p):
        return project(body_of(p), points).s

    r = math.log(start.radius)
    fit = least_squares(resid, np.array([*start.center, r, r, 0.0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return body_of(fit.x), float(np.sqrt(np.mean(resid(fit.x) ** 2)))


def demagnify(L: ConvexBody, B: CylinderSet, eps: float, tol: float = DEMAGNIFY_TOL,
              cls: str | None = None, full_output: bool = False):
    """Body A whose magnified symmetric difference with L is B.

    Intervals invert exactly. Radial graphs are fitted by least squares with a
    disc (``cls="balls"``, the default for a disc L) or an ellipse; the RMS
    geometric residual must not exceed ``tol``. With ``full_output`` the
    residual is returned alongside the body.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if isinstance(B, IntervalShifts):
        if not isinstance(L, Interval):
            raise IncompatibleRepresentations("interval shifts need an interval level set")
        A = Interval(L.a - eps * B.t_left, L.b + eps * B.t_right)
        return (A, 0.0) if full_output else A
    if not isinstance(B, RadialGraph):
        raise NonRepresentable("only parametric cylinder sets can be mapped back to a body")
    if not np.any(B.h):
        return (L, 0.0) if full_output else L
    _, pts, normals, _ = boundary_grid(L, B.theta.size)
    boundary = pts + eps * B.h[:, None] * normals
    cls = cls or ("balls" if isinstance(L, Ball) else "ellipsoids")
    A, residual = _fit_circle(boundary)
    if cls == "ellipsoids":
        A, residual = _fit_ellipse(boundary, A)
    elif cls != "balls":
        raise ValidationError(f"unknown class {cls!r}")
    if residual > tol:
        raise NonRepresentable(f"least-squares residual {residual:.3g} exceeds tolerance {tol:.3g}")
    return (A, residual) if full_output else A


# ---------------------------------------------------------------- drift

@dataclass(frozen=True)
class DriftSpec:
    """Boundary gradient magnitude of the density on the outer and inner side.

    Each side is a callable of the boundary parameter (endpoint index 0/1 in 1D,
    polar angle in 2D) or a constant.
    """

    f_plus: Union[float, Callable]
    f_minus: Union[float, Callable]
    lam: float = float("nan")

    @classmethod
    def from_model(cls, model) -> "DriftSpec":
        o = model.oracle
        return cls(o.f_prime_plus, o.f_prime_minus, o.lam)

    @staticmethod
    def _eval(f, param) -> np.ndarray:
        param = np.asarray(param, dtype=float)
        if callable(f):
            vals = np.array([f(p) for p in param.ravel()], dtype=float).reshape(param.shape)
        else:
            vals = np.full(param.shape, float(f))
        if np.any(vals < 0):
            raise ValidationError("boundary gradients must be non-negative")
        return vals

    def plus(self, param) -> np.ndarray:
        return self._eval(self.f_plus, param)

    def minus(self, param) -> np.ndarray:
        return self._eval(self.f_minus, param)


def drift_D(B: CylinderSet, spec: DriftSpec) -> float:
    """Quadratic drift: integral over B of s f'_+ (s > 0) and -s f'_- (s <= 0)."""
    if isinstance(B, IntervalShifts):
        t, param = B.shifts, np.array([0.0, 1.0])
        w = 1.0
    elif isinstance(B, RadialGraph):
        t, param = B.h, B.theta
        w = B.weights * B.dtheta
    else:
        raise IncompatibleRepresentations("drift needs a parametric cylinder set")
    slope = np.where(t > 0, spec.plus(param), spec.minus(param))
    return float(np.sum(w * slope * t * t / 2))


def empirical_drift_Dn(model, A: ConvexBody, n: int) -> float:
    """n^(2/3) (e(L minus A) - e(A minus L)): the finite-n drift of the set A."""
    if n < 1:
        raise ValidationError("n must be positive")
    inner, outer = local_excess(model, A)
    return n ** (2.0 / 3.0) * (inner - outer)


def shifted_interval(L: Interval, t_left: float, t_right: float, eps: float) -> Interval:
    """The interval whose magnified image is IntervalShifts(t_left, t_right)."""
    return demagnify(L, IntervalShifts(t_left, t_right), eps)
