"""Test densities whose lambda-level sets are known in closed form.

Every builtin density is symmetric about the origin, so its level set is an
interval (1D) or a disc (2D) and the oracle quantities p_lambda, v_lambda,
e_lambda and the boundary slopes are exact expressions. Probabilities of
arbitrary candidate sets are computed by adaptive quadrature; planar sets are
integrated in polar coordinates about the origin using the closed-form radial
mass function, which avoids fitting the integration domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from .errors import LambdaOutOfRange, QuadratureFailure, UnknownModel, ValidationError
from .geometry import Ball, ConvexBody, Ellipsoid, Interval, hausdorff_distance

QUAD_TOL_1D = 1e-10
QUAD_TOL_2D = 1e-6
_ANGLE_SCAN = 2048


@dataclass(frozen=True)
class ConstantSlope:
    """Boundary gradient that does not vary along the boundary; picklable for worker pools."""

    value: float

    def __call__(self, _param) -> float:
        return self.value


@dataclass(frozen=True)
class LevelSetOracle:
    lam: float
    body: ConvexBody
    p_lambda: float
    v_lambda: float
    e_lambda: float
    f_prime_plus: Callable
    f_prime_minus: Callable


@dataclass(frozen=True)
class DensityModel:
    """A density together with its exact level-set oracle.

    ``radial_mass`` (planar models only) is G(rho) = int_0^rho f(s) s ds, so the
    mass of the sector {angle in [t, t + dt], radius in [r1, r2]} is
    (G(r2) - G(r1)) dt.
    """

    name: str
    dimension: int
    pdf: Callable
    sampler: Callable
    oracle: LevelSetOracle
    f_max: float
    kinks: tuple = ()
    radial_pdf: Optional[Callable] = None
    radial_mass: Optional[Callable] = None

    @property
    def lam(self) -> float:
        return self.oracle.lam

    def sample(self, n: int, seed) -> np.ndarray:
        return sample(self, n, seed)


# ---------------------------------------------------------------- builtin densities

def _triangular1d(lam):
    half = 1.0 - lam

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.clip(1.0 - np.abs(x), 0.0, None)

    def sampler(rng, n):
        u = rng.random(n)
        return np.where(u < 0.5, -1.0 + np.sqrt(2.0 * u), 1.0 - np.sqrt(2.0 * (1.0 - u)))

    slope = ConstantSlope(1.0)
    oracle = LevelSetOracle(lam, Interval(-half, half), 1.0 - lam * lam, 2.0 * half,
                            1.0 - lam * lam - 2.0 * lam * half, slope, slope)
    return dict(dimension=1, pdf=pdf, sampler=sampler, oracle=oracle, f_max=1.0, kinks=(-1.0, 0.0, 1.0))


def _normal1d(lam):
    z = math.sqrt(-2.0 * math.log(lam * math.sqrt(2 * math.pi)))

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)

    def sampler(rng, n):
        return special.ndtri(rng.random(n))

    # |f'(z)| = z phi(z) = z * lambda on both sides of the boundary
    slope = ConstantSlope(lam * z)
    p = math.erf(z / math.sqrt(2))
    oracle = LevelSetOracle(lam, Interval(-z, z), p, 2 * z, p - 2 * lam * z, slope, slope)
    return dict(dimension=1, pdf=pdf, sampler=sampler, oracle=oracle, f_max=1 / math.sqrt(2 * math.pi))


def _epanechnikov1d(lam):
    z = math.sqrt(1.0 - 4.0 * lam / 3.0)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)

    def sampler(rng, n):
        # F(2 sin(phi)) = (1 + sin(3 phi)) / 2
        return 2.0 * np.sin(np.arcsin(2.0 * rng.random(n) - 1.0) / 3.0)

    slope = ConstantSlope(1.5 * z)
    p = 1.5 * z - 0.5 * z ** 3
    oracle = LevelSetOracle(lam, Interval(-z, z), p, 2 * z, p - 2 * lam * z, slope, slope)
    return dict(dimension=1, pdf=pdf, sampler=sampler, oracle=oracle, f_max=0.75, kinks=(-1.0, 1.0))


def _cone2d(lam):
    c = 3.0 / math.pi
    r = 1.0 - lam / c

    def radial_pdf(rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= 1.0, c * (1.0 - rho), 0.0)

    def radial_mass(rho):
        rho = np.minimum(np.asarray(rho, dtype=float), 1.0)
        return c * (rho * rho / 2.0 - rho ** 3 / 3.0)

    def sampler(rng, n):
        u, theta = rng.random(n), 2 * math.pi * rng.random(n)
        rho = 0.5 + np.sin(np.arcsin(2.0 * u - 1.0) / 3.0)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=1)

    slope = ConstantSlope(c)
    p = 3 * r * r - 2 * r ** 3
    v = math.pi * r * r
    oracle = LevelSetOracle(lam, Ball((0.0, 0.0), r), p, v, p - lam * v, slope, slope)
    return dict(dimension=2, pdf=_radial_to_pdf(radial_pdf), sampler=sampler, oracle=oracle, f_max=c,
                radial_pdf=radial_pdf, radial_mass=radial_mass, kinks=(1.0,))


def _gaussian2d(lam):
    r = math.sqrt(-2.0 * math.log(2 * math.pi * lam))

    def radial_pdf(rho):
        rho = np.asarray(rho, dtype=float)
        return np.exp(-0.5 * rho * rho) / (2 * math.pi)

    def radial_mass(rho):
        rho = np.asarray(rho, dtype=float)
        return -np.expm1(-0.5 * rho * rho) / (2 * math.pi)

    def sampler(rng, n):
        u, theta = rng.random(n), 2 * math.pi * rng.random(n)
        rho = np.sqrt(-2.0 * np.log1p(-u))
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=1)

    slope = ConstantSlope(lam * r)
    p = -math.expm1(-0.5 * r * r)
    v = math.pi * r * r
    oracle = LevelSetOracle(lam, Ball((0.0, 0.0), r), p, v, p - lam * v, slope, slope)
    return dict(dimension=2, pdf=_radial_to_pdf(radial_pdf), sampler=sampler, oracle=oracle,
                f_max=1 / (2 * math.pi), radial_pdf=radial_pdf, radial_mass=radial_mass)


def _radial_to_pdf(radial_pdf):
    def pdf(x):
        x = np.asarray(x, dtype=float)
        return radial_pdf(np.linalg.norm(x, axis=-1))
    return pdf


MODELS = {
    "triangular1d": _triangular1d,
    "normal1d": _normal1d,
    "epanechnikov1d": _epanechnikov1d,
    "cone2d": _cone2d,
    "gaussian2d": _gaussian2d,
}


F_MAX = {
    "triangular1d": 1.0,
    "normal1d": 1 / math.sqrt(2 * math.pi),
    "epanechnikov1d": 0.75,
    "cone2d": 3 / math.pi,
    "gaussian2d": 1 / (2 * math.pi),
}


def builtin_model(name: str, lam: float) -> DensityModel:
    """Instantiate a registered density at level ``lam`` (0 < lam < max f)."""
    if name not in MODELS:
        raise UnknownModel(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    f_max = F_MAX[name]
    if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not 0.0 < lam < f_max:
        raise LambdaOutOfRange(f"{name}: lambda must lie strictly between 0 and {f_max}, got {lam}")
    model = DensityModel(name=name, **MODELS[name](float(lam)))
    _check_normalised(model)
    return model


def _check_normalised(model: DensityModel):
    if model.dimension == 1:
        if model.kinks:
            edges = model.kinks
            total = sum(integrate.quad(model.pdf, a, b, epsabs=1e-13, epsrel=1e-13)[0]
                        for a, b in zip(edges[:-1], edges[1:]))
        else:
            total = integrate.quad(model.pdf, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
    else:
        upper = model.kinks[-1] if model.kinks else np.inf
        total = integrate.quad(lambda r: 2 * math.pi * float(model.radial_pdf(r)) * r, 0.0, upper,
                               epsabs=1e-13, epsrel=1e-13)[0]
    if abs(total - 1.0) > 1e-8:
        raise QuadratureFailure(f"{model.name} integrates to {total}, not 1")


def sample(model: DensityModel, n: int, seed) -> np.ndarray:
    """``n`` iid draws; 1D models return shape (n,), planar models (n, 2)."""
    if int(n) != n or n < 1:
        raise ValidationError(f"sample size must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    return model.sampler(rng, int(n))


def boundary_derivative(model: DensityModel, side: str, boundary_param: float) -> float:
    """|grad f| on the outer (``plus``) or inner (``minus``) side of the level-set boundary.

    The boundary parameter is the endpoint index (0 left, 1 right) in 1D and
    the polar angle in 2D.
    """
    if side == "plus":
        return float(model.oracle.f_prime_plus(boundary_param))
    if side == "minus":
        return float(model.oracle.f_prime_minus(boundary_param))
    raise ValidationError(f"side must be 'plus' or 'minus', not {side!r}")


# ---------------------------------------------------------------- quadrature

def _quad_1d(func, a, b, kinks, epsabs, epsrel=1e-12):
    if b <= a:
        return 0.0
    pts = [k for k in kinks if a < k < b]
    val, err = integrate.quad(func, a, b, points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=200)
    if err > max(epsabs, epsrel * abs(val)) * 10:
        raise QuadratureFailure(f"quadrature on [{a}, {b}] reached error {err:.3g}")
    return val


def _ray_hits(body: ConvexBody, theta: np.ndarray):
    """Radial extent [rho1, rho2] of body along rays from the origin; NaN when missed."""
    if isinstance(body, Ball):
        body = body.as_ellipsoid()
    if not isinstance(body, Ellipsoid):
        raise ValidationError(f"polar quadrature does not support {type(body).__name__}")
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    Qi, c = body.Qinv, body.c
    a = np.einsum("...i,ij,...j->...", u, Qi, u)
    b = u @ (Qi @ c)
    k = float(c @ Qi @ c) - 1.0
    disc = b * b - a * k
    with np.errstate(invalid="ignore"):
        sq = np.sqrt(disc)
    rho1 = np.maximum((b - sq) / a, 0.0)
    rho2 = (b + sq) / a
    miss = (disc < 0) | (rho2 <= 0)
    rho1 = np.where(miss, np.nan, rho1)
    rho2 = np.where(miss, np.nan, rho2)
    return rho1, rho2


def _angle_breaks(body, radii):
    """Angles where the integrand may kink: ray tangency and crossings of the given radii."""
    theta = np.linspace(0.0, 2 * math.pi, _ANGLE_SCAN + 1)

    def funcs():
        yield lambda t: _disc(body, t)
        for r in radii:
            yield lambda t, r=r: np.nan_to_num(_ray_hits(body, t)[1] - r, nan=-1.0)
            yield lambda t, r=r: np.nan_to_num(_ray_hits(body, t)[0] - r, nan=-1.0)

    breaks = set()
    for fn in funcs():
        vals = fn(theta)
        sign = np.sign(vals)
        for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
            try:
                breaks.add(optimize.brentq(lambda t: float(fn(np.array([t]))[0]), theta[i], theta[i + 1],
                                           xtol=1e-14))
            except ValueError:
                breaks.add(0.5 * (theta[i] + theta[i + 1]))
    return sorted(breaks)


def _disc(body, theta):
    if isinstance(body, Ball):
        body = body.as_ellipsoid()
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    Qi, c = body.Qinv, body.c
    a = np.einsum("...i,ij,...j->...", u, Qi, u)
    b = u @ (Qi @ c)
    return b * b - a * (float(c @ Qi @ c) - 1.0)


def _polar_integral(body, radial_fn, radii, tol):
    """int over angles of radial_fn(rho1, rho2), piecewise between kink angles."""
    def integrand(t):
        r1, r2 = _ray_hits(body, np.array([t]))
        if np.isnan(r2[0]):
            return float(radial_fn(None, None))
        return float(radial_fn(r1[0], r2[0]))

    edges = [0.0] + [b for b in _angle_breaks(body, radii) if 0.0 < b < 2 * math.pi] + [2 * math.pi]
    total, total_err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 1e-15:
            continue
        val, err = integrate.quad(integrand, lo, hi, epsabs=tol / len(edges), epsrel=1e-12, limit=200)
        total += val
        total_err += err
    if total_err > tol:
        raise QuadratureFailure(f"polar quadrature error {total_err:.3g} exceeds {tol}")
    return total


def probability(model: DensityModel, A: ConvexBody) -> float:
    """P(A) by adaptive quadrature (abs. tolerance 1e-10 in 1D, 1e-6 in 2D)."""
    if A.dimension != model.dimension:
        raise ValidationError("body and model dimensions differ")
    if model.dimension == 1:
        return _quad_1d(model.pdf, A.a, A.b, model.kinks, QUAD_TOL_1D)
    G = model.radial_mass

    def radial(r1, r2):
        return 0.0 if r1 is None else G(r2) - G(r1)

    return _polar_integral(A, radial, model.kinks, QUAD_TOL_2D)


def excess_mass_of(model: DensityModel, A: ConvexBody) -> float:
    """e_lambda(A) = P(A) - lambda * mu(A)."""
    return probability(model, A) - model.lam * A.volume


def local_excess(model: DensityModel, A: ConvexBody):
    """Return (e_lambda(L \\ A), e_lambda(A \\ L)) for the true level set L.

    Both integrate f - lambda directly over the two halves of the symmetric
    difference, which keeps full relative accuracy when A is very close to L.
    The first value is >= 0 and the second <= 0.
    """
    lam = model.lam
    L = model.oracle.body
    if model.dimension == 1:
        g = lambda x: model.pdf(x) - lam  # noqa: E731
        tol = 1e-16
        inner = _quad_1d(g, L.a, min(A.a, L.b), model.kinks, tol) + \
            _quad_1d(g, max(A.b, L.a), L.b, model.kinks, tol)
        outer = _quad_1d(g, A.a, min(A.b, L.a), model.kinks, tol) + \
            _quad_1d(g, max(A.a, L.b), A.b, model.kinks, tol)
        return inner, outer
    r = L.radius
    G = model.radial_mass

    def H(rho):
        return G(rho) - 0.5 * lam * rho * rho

    def outer_part(r1, r2):
        if r1 is None:
            return 0.0
        return H(max(r2, r)) - H(max(r1, r))

    def inner_part(r1, r2):
        full = H(r) - H(0.0)
        if r1 is None:
            return full
        return full - (H(min(r2, r)) - H(min(r1, r)))

    radii = (r,) + tuple(model.kinks)
    tol = 1e-12
    return _polar_integral(A, inner_part, radii, tol), _polar_integral(A, outer_part, radii, tol)


def probability_symdiff(model: DensityModel, A: ConvexBody) -> float:
    """P(A symdiff L_lambda) by quadrature over the two halves of the symmetric difference."""
    L = model.oracle.body
    if model.dimension == 1:
        pieces = [(L.a, min(A.a, L.b)), (max(A.b, L.a), L.b), (A.a, min(A.b, L.a)), (max(A.a, L.b), A.b)]
        return sum(_quad_1d(model.pdf, a, b, model.kinks, QUAD_TOL_1D) for a, b in pieces)
    r = L.radius
    G = model.radial_mass

    def part(r1, r2):
        full = G(r) - G(0.0)
        if r1 is None:
            return full
        inside_both = G(min(r2, r)) - G(min(r1, r))
        outside = G(max(r2, r)) - G(max(r1, r))
        return (full - inside_both) + outside

    return _polar_integral(A, part, (r,) + tuple(model.kinks), QUAD_TOL_2D)


def identifiability_certificate(model: DensityModel, delta: float = 0.1, span: float = 0.3,
                                steps: int = 13) -> float:
    """Smallest excess risk e_lambda - e_lambda(A) over a perturbation grid with d_H(A, L) >= delta.

    A positive value is numerical evidence (not proof) of global identifiability
    of the level set within the class; diagnostic only.
    """
    L, e = model.oracle.body, model.oracle.e_lambda
    grid = np.linspace(-span, span, steps)
    worst = np.inf
    if model.dimension == 1:
        for da in grid:
            for db in grid:
                A = Interval(L.a + da, L.b + db)
                if hausdorff_distance(A, L) >= delta:
                    worst = min(worst, e - excess_mass_of(model, A))
    else:
        for dx in grid:
            for dr in grid:
                A = Ball((dx, 0.0), L.radius + dr)
                if hausdorff_distance(A, L) >= delta:
                    worst = min(worst, e - excess_mass_of(model, A))
    return float(worst)
