"""Simulation of the limiting argmax set of sqrt(lam) W(B) - D(B).

W is Gaussian white noise on the cylinder (variance = M-mass) and D is the
quadratic drift. In 1D the cylinder is two real lines, one per endpoint, so
the free argmax separates into two independent argmaxes of two-sided Brownian
motion with a parabolic drift. The balanced variant restricts to sets whose
outside and inside parts have equal mass. In 2D the search runs over the
first-order images of discs: h(theta) = dr + dx cos(theta) + dy sin(theta).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .cylinder import DriftSpec, IntervalShifts, RadialGraph
from .errors import GridTooCoarse, InsufficientDraws, TruncationHit, ValidationError
from .geometry import Ball, boundary_grid

TIE_TOL = 1e-12


@dataclass(frozen=True)
class WienerGrid:
    """Grid for the 1D paths: spacing, truncation and optional sub-stepping.

    With ``substeps = m`` the path is generated at spacing ``step / m`` and read
    off every m-th point, so (step, m) and (step / m, 1) share one Brownian path.
    """

    step: float = 0.01
    c_max: float = 8.0
    substeps: int = 1

    def __post_init__(self):
        if not (self.step > 0 and self.c_max > self.step and self.substeps >= 1):
            raise ValidationError("grid needs step > 0, c_max > step and substeps >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.c_max / self.step))

    @property
    def t(self) -> np.ndarray:
        K = self.n_steps
        return np.arange(-K, K + 1) * self.step


@dataclass(frozen=True)
class PlanarGrid:
    """Grid for the planar white-noise field and the disc-parameter lattice."""

    resolution: int = 256
    step: float = 0.02
    c_max: float = 6.0
    lattice: int = 41
    span: float = 3.0

    @property
    def n_steps(self) -> int:
        return int(round(self.c_max / self.step))

    @property
    def lattice_spacing(self) -> float:
        return 2 * self.span / (self.lattice - 1)


@dataclass
class LimitDraw:
    argmax_set: object
    objective: float
    constrained: bool
    functionals: dict = field(default_factory=dict)
    ties: int = 0


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- 1D

def wiener_paths_1d(grid: WienerGrid, rng, masses=(1.0, 1.0)) -> np.ndarray:
    """Two-sided paths on ``grid.t`` for each boundary point, shape (2, 2K + 1).

    Increment columns are (left +, left -, right +, right -); rows are filled in
    order of distance from 0, so a larger c_max extends the same path.
    """
    K, m = grid.n_steps, grid.substeps
    inc = rng.standard_normal((K * m, 4)) * math.sqrt(grid.step / m)
    walk = np.cumsum(inc, axis=0)[m - 1::m]
    paths = np.empty((2, 2 * K + 1))
    for b in range(2):
        scale = math.sqrt(masses[b])
        paths[b, K] = 0.0
        paths[b, K + 1:] = scale * walk[:, 2 * b]
        paths[b, :K][::-1] = scale * walk[:, 2 * b + 1]
    return paths


def _drift_curve(t: np.ndarray, g_plus: float, g_minus: float) -> np.ndarray:
    return np.where(t > 0, g_plus, g_minus) * t * t / 2


def _first_max(values: np.ndarray):
    best = values.max()
    idx = int(np.argmax(values))
    ties = int(np.count_nonzero(values >= best - TIE_TOL)) - 1
    return idx, float(best), ties


def path_argmax(path: np.ndarray, t: np.ndarray, lam: float, g_plus: float, g_minus: float,
                scale: float = 1.0):
    """Index, value and near-tie count of the first maximiser of scale*(sqrt(lam) W - D)."""
    return _first_max(scale * (math.sqrt(lam) * path - _drift_curve(t, g_plus, g_minus)))


def _slopes(drift: DriftSpec):
    gp, gm = drift.plus([0.0, 1.0]), drift.minus([0.0, 1.0])
    if np.any(gp <= 0) or np.any(gm <= 0):
        raise ValidationError("drift slopes must be positive")
    return gp, gm


def _check_truncation(idx: int, K: int, what: str):
    if abs(idx - K) >= K - 2:
        raise TruncationHit(f"{what} argmax within 2 steps of the truncation bound")


def _interval_draw(shifts, objective, constrained, ties) -> LimitDraw:
    B = IntervalShifts(float(shifts[0]), float(shifts[1]))
    return LimitDraw(B, objective, constrained, {
        "M_total": B.positive_mass() + B.negative_mass(),
        "M_plus": B.positive_mass(),
        "M_minus": B.negative_mass(),
        "shifts": (B.t_left, B.t_right),
    }, ties)


def draw_Z_interval(drift: DriftSpec, lam: float, grid: WienerGrid = WienerGrid(), seed=0,
                    strict: bool = True) -> LimitDraw:
    """Free argmax over (t_left, t_right); each endpoint is handled separately."""
    if not lam > 0:
        raise ValidationError("lam must be positive")
    gp, gm = _slopes(drift)
    paths = wiener_paths_1d(grid, _rng(seed))
    t, K = grid.t, grid.n_steps
    shifts, total, ties = [], 0.0, 0
    for b in range(2):
        idx, val, tie = path_argmax(paths[b], t, lam, gp[b], gm[b])
        if strict:
            _check_truncation(idx, K, "endpoint")
        shifts.append(t[idx])
        total += val
        ties += tie
    return _interval_draw(shifts, total, False, ties)


def draw_Z_interval_constrained(drift: DriftSpec, lam: float, grid: WienerGrid = WienerGrid(), seed=0,
                                strict: bool = True) -> LimitDraw:
    """Argmax over the balanced diagonal t_left = -t_right (same noise as the free draw)."""
    if not lam > 0:
        raise ValidationError("lam must be positive")
    gp, gm = _slopes(drift)
    paths = wiener_paths_1d(grid, _rng(seed))
    t, K = grid.t, grid.n_steps
    # position k on the diagonal: right endpoint at t[k], left endpoint at -t[k]
    W = paths[1] + paths[0][::-1]
    D = _drift_curve(t, gp[1], gm[1]) + _drift_curve(-t, gp[0], gm[0])
    idx, val, ties = _first_max(math.sqrt(lam) * W - D)
    if strict:
        _check_truncation(idx, K, "diagonal")
    return _interval_draw((-t[idx], t[idx]), val, True, ties)


# ---------------------------------------------------------------- 2D

class NoiseField:
    """White noise on (angle cell) x (distance cell), both sides of the boundary.

    ``cum[k, side, g]`` is the noise mass between distance 0 and (k + 1) cells
    on side 0 (outside) or 1 (inside) of angle cell g. Sets are read off with
    linear interpolation inside a cell, which is the exact white-noise mass if
    each cell's noise is spread uniformly over it.
    """

    def __init__(self, L: Ball, grid: PlanarGrid, rng):
        self.grid = grid
        self.theta, _, _, speed = boundary_grid(L, grid.resolution)
        self.weights = speed
        self.cell_mass = speed * (2 * math.pi / grid.resolution) * grid.step
        K = grid.n_steps
        noise = rng.standard_normal((K, 2, grid.resolution)) * np.sqrt(self.cell_mass)
        self.cum = np.concatenate([np.zeros((1, 2, grid.resolution)), np.cumsum(noise, axis=0)])

    def W(self, h: np.ndarray) -> np.ndarray:
        """W of the radial graphs in the rows of ``h`` (shape (m, G) or (G,)).

        Rows leaving the simulated band get NaN.
        """
        h = np.atleast_2d(h)
        x = np.abs(h) / self.grid.step
        K = self.grid.n_steps
        outside = np.any(x > K, axis=1)
        x = np.minimum(x, K)
        k = np.minimum(np.floor(x).astype(int), K - 1)
        frac = x - k
        side = (h <= 0).astype(int)
        g = np.broadcast_to(np.arange(h.shape[1]), h.shape)
        lo, hi = self.cum[k, side, g], self.cum[k + 1, side, g]
        # the sign of W does not depend on the side: B is one set on the cylinder
        return np.where(outside, np.nan, np.sum(lo + frac * (hi - lo), axis=1))

    def graph(self, h: np.ndarray) -> RadialGraph:
        return RadialGraph(self.theta, np.asarray(h, dtype=float), self.weights)


def _disc_offsets(theta, params: np.ndarray) -> np.ndarray:
    """Rows of h = dr + dx cos + dy sin for parameter rows (dx, dy, dr)."""
    params = np.atleast_2d(params)
    return params[:, 2:3] + params[:, 0:1] * np.cos(theta) + params[:, 1:2] * np.sin(theta)


def _planar_objective(field_: NoiseField, drift: DriftSpec, lam: float, params, slopes):
    h = _disc_offsets(field_.theta, params)
    gp, gm = slopes
    slope = np.where(h > 0, gp, gm)
    D = np.sum(field_.weights * (2 * math.pi / field_.grid.resolution) * slope * h * h / 2, axis=1)
    value = math.sqrt(lam) * field_.W(h) - D
    return np.where(np.isnan(value), -np.inf, value)


def draw_Z_ball2d(drift: DriftSpec, lam: float, L: Ball, grid: PlanarGrid = PlanarGrid(), seed=0,
                  constrained: bool = False, chunk: int = 4096) -> LimitDraw:
    """Argmax over disc perturbations on a lattice, refined by Nelder-Mead.

    The balanced class forces dr = 0, which makes the outside and inside masses
    of every candidate equal.
    """
    if not lam > 0:
        raise ValidationError("lam must be positive")
    field_ = NoiseField(L, grid, _rng(seed))
    slopes = (drift.plus(field_.theta), drift.minus(field_.theta))
    axis = np.linspace(-grid.span, grid.span, grid.lattice)
    if constrained:
        dx, dy = np.meshgrid(axis, axis, indexing="ij")
        lattice = np.stack([dx.ravel(), dy.ravel(), np.zeros(dx.size)], axis=1)
    else:
        dx, dy, dr = np.meshgrid(axis, axis, axis, indexing="ij")
        lattice = np.stack([dx.ravel(), dy.ravel(), dr.ravel()], axis=1)
    # the empty set (all zeros) is on the lattice, so the objective is >= 0
    values = np.concatenate([_planar_objective(field_, drift, lam, lattice[i:i + chunk], slopes)
                             for i in range(0, lattice.shape[0], chunk)])
    idx, best, ties = _first_max(values)
    start = lattice[idx]
    if np.any(np.abs(start[:2 if constrained else 3]) >= grid.span):
        raise TruncationHit("lattice optimum on the boundary of the parameter box")

    free = slice(0, 2) if constrained else slice(0, 3)

    def neg(p):
        full = np.zeros(3)
        full[free] = p
        return -float(_planar_objective(field_, drift, lam, full, slopes)[0])

    res = minimize(neg, start[free], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400,
                            "initial_simplex": np.vstack([start[free]] + [
                                start[free] + 0.5 * grid.lattice_spacing * e
                                for e in np.eye(len(start[free]))])})
    final = start.copy()
    if -res.fun > best:
        final[free] = res.x
        best = -float(res.fun)
    if np.max(np.abs(final - start)) > 2 * grid.lattice_spacing:
        raise GridTooCoarse("refinement moved the optimum by more than two lattice cells")
    h = _disc_offsets(field_.theta, final)[0]
    if np.max(np.abs(h)) >= grid.c_max - 2 * grid.step:
        raise TruncationHit("argmax set reaches the truncation band")
    B = field_.graph(h)
    return LimitDraw(B, best, constrained, {
        "M_total": B.positive_mass() + B.negative_mass(),
        "M_plus": B.positive_mass(),
        "M_minus": B.negative_mass(),
        "shifts": tuple(float(v) for v in final),
    }, ties)


# ---------------------------------------------------------------- distributions

def _run_one(args):
    op, seed, index = args
    try:
        return op(seed=(seed, index))
    except TruncationHit as exc:
        raise TruncationHit(f"draw {index}: {exc}", index=index) from None


@dataclass
class ZDistribution:
    """Per-draw functionals, in draw order, plus sorted views."""

    draws: list

    def values(self, name: str) -> np.ndarray:
        return np.array([_flat(d)[name] for d in self.draws])

    def sorted(self, name: str) -> np.ndarray:
        return np.sort(self.values(name))

    @property
    def names(self):
        return list(_flat(self.draws[0]).keys()) if self.draws else []

    def rows(self):
        for i, d in enumerate(self.draws):
            for name, value in _flat(d).items():
                yield i, name, value

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["draw_index", "functional", "value"])
        for i, name, value in self.rows():
            w.writerow([i, name, repr(float(value))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _flat(d: LimitDraw) -> dict:
    out = {"objective": d.objective, "M_total": d.functionals["M_total"],
           "M_plus": d.functionals["M_plus"], "M_minus": d.functionals["M_minus"]}
    for k, v in enumerate(d.functionals["shifts"]):
        out[f"shift_{k}"] = v
    out["ties"] = d.ties
    return out


def z_distribution(draw_op: Callable, n_draws: int, seed: int = 0, workers: int | None = None) -> ZDistribution:
    """Run ``n_draws`` draws with seeds (seed, index); identical for any worker count.

    ``draw_op`` must accept a ``seed`` keyword (e.g. a functools.partial of a
    draw function) and be picklable when workers > 1.
    """
    if n_draws < 1:
        raise InsufficientDraws("n_draws must be at least 1")
    jobs = [(draw_op, seed, i) for i in range(n_draws)]
    if workers is None or workers <= 1:
        draws = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(_run_one, jobs, chunksize=max(1, n_draws // (4 * workers))))
    return ZDistribution(draws)
