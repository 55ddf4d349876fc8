"""Exact estimators over the class of closed intervals.

Every estimator returns an interval whose endpoints are order statistics
(the equal-volume variant then widens it). Ties are broken by the smallest
left index, then the smallest right index.
"""
from __future__ import annotations

import contextlib
import math
from fractions import Fraction

import numpy as np

from ..errors import EmptySample, ValidationError
from ..geometry import Interval
from .kinds import (
    EstimateResult,
    ExcessMass,
    MaxProb,
    MaxProbEqualVol,
    MinVolume,
    Relaxed,
    required_count,
)

# "first" is the contract; "last" exists only so the self-test can prove the
# oracle comparison notices a broken tie rule.
_TIE_RULE = "first"


@contextlib.contextmanager
def flipped_tie_rule():
    """Temporarily break ties towards the largest index (fault injection)."""
    global _TIE_RULE
    previous = _TIE_RULE
    _TIE_RULE = "last"
    try:
        yield
    finally:
        _TIE_RULE = previous


def _pick(candidates: np.ndarray) -> int:
    return int(candidates[0] if _TIE_RULE == "first" else candidates[-1])


def prepare_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptySample("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValidationError("sample contains non-finite values")
    if np.any(np.diff(x) < 0):
        raise ValidationError("sample must be sorted ascending")
    return x


def _count_in(x: np.ndarray, a: float, b: float) -> int:
    return int(np.searchsorted(x, b, side="right") - np.searchsorted(x, a, side="left"))


def _result(x, i, j, objective, kind, ties, interval=None) -> EstimateResult:
    n = x.size
    body = interval if interval is not None else Interval(float(x[i]), float(x[j]))
    return EstimateResult(
        set=body,
        objective=float(objective),
        kind=kind,
        n=n,
        diagnostics={
            "tie_count": int(ties),
            "search_restarts": 0,
            "empirical_mass": Fraction(_count_in(x, body.a, body.b), n),
            "indices": (int(i), int(j)),
        },
    )


def _prefix_scores(x: np.ndarray, lam: float):
    """g_k = k/n - lam*X_(k), its running minimum and the first index attaining it.

    The objective of [X_(i), X_(j)] is g_j - g_i + 1/n, so the best right end j
    pairs with the earliest minimiser of g over 0..j (maximum-subarray form).
    """
    n = x.size
    k = np.arange(n)
    g = k / n - lam * x
    runmin = np.minimum.accumulate(g)
    fresh = np.empty(n, dtype=bool)
    fresh[0] = True
    fresh[1:] = g[1:] < runmin[:-1]
    first_min = np.maximum.accumulate(np.where(fresh, k, 0))
    return g, runmin, first_min


def _near_optimal_pairs(x: np.ndarray, lam: float):
    """All (i, j) whose prefix-score gain is within roundoff of the best gain.

    The prefix form g_j - g_i rounds differently from the direct objective, so
    exact ties in the direct objective can be split by a few ulps here; the
    caller rescores these candidates directly.
    """
    g, runmin, _ = _prefix_scores(x, lam)
    gain = g - runmin
    tol = 64 * np.finfo(float).eps * (1.0 + lam * float(np.abs(x).max()))
    I, J = [], []
    for j in np.flatnonzero(gain >= gain.max() - tol):
        i = np.flatnonzero(g[: j + 1] <= runmin[j] + tol)
        I.append(i)
        J.append(np.full(i.size, j))
    return np.concatenate(I), np.concatenate(J)


def excess_mass_1d(sorted_sample, lam: float) -> EstimateResult:
    kind = ExcessMass(lam)
    x = prepare_sample(sorted_sample)
    n = x.size
    I, J = _near_optimal_pairs(x, lam)
    score = (J - I + 1) / n - lam * (x[J] - x[I])
    winners = np.flatnonzero(score == score.max())
    # lexicographic order of (i, j) among exact maximisers
    winners = winners[np.lexsort((J[winners], I[winners]))]
    w = _pick(winners)
    i, j = int(I[w]), int(J[w])
    return _result(x, i, j, score[w], kind, winners.size - 1)


def min_volume_1d(sorted_sample, p_lambda: float) -> EstimateResult:
    kind = MinVolume(p_lambda)
    x = prepare_sample(sorted_sample)
    n = x.size
    k = required_count(n, p_lambda)
    widths = x[k - 1:] - x[: n - k + 1]
    winners = np.flatnonzero(widths == widths.min())
    i = _pick(winners)
    j = i + k - 1
    return _result(x, i, j, x[j] - x[i], kind, winners.size - 1)


def _window_ends(x: np.ndarray, v: float) -> np.ndarray:
    """Largest j with X_(j) - X_(i) <= v, for every i, using the exact difference."""
    n = x.size
    j = np.searchsorted(x, x + v, side="right") - 1
    idx = np.arange(n)
    # x + v rounds; repair in both directions against the subtraction actually used
    while True:
        over = x[j] - x > v
        if not over.any():
            break
        j[over] -= 1
    while True:
        room = j + 1 < n
        grow = np.zeros(n, dtype=bool)
        grow[room] = x[j[room] + 1] - x[idx[room]] <= v
        if not grow.any():
            break
        j[grow] += 1
    return j


def _max_prob_indices(x: np.ndarray, v: float):
    j = _window_ends(x, v)
    counts = j - np.arange(x.size) + 1
    winners = np.flatnonzero(counts == counts.max())
    i = _pick(winners)
    return i, int(j[i]), winners.size - 1


def max_prob_1d(sorted_sample, v_lambda: float) -> EstimateResult:
    kind = MaxProb(v_lambda)
    x = prepare_sample(sorted_sample)
    i, j, ties = _max_prob_indices(x, v_lambda)
    return _result(x, i, j, (j - i + 1) / x.size, kind, ties)


def widen_to_volume(body: Interval, volume: float) -> Interval:
    """Grow ``body`` symmetrically until its length is exactly ``volume``."""
    extra = volume - body.volume
    if extra < 0:
        raise ValidationError("cannot widen an interval to a smaller volume")
    a = body.a - extra / 2
    return Interval(a, a + volume)


def max_prob_equal_vol_1d(sorted_sample, v_lambda: float) -> EstimateResult:
    kind = MaxProbEqualVol(v_lambda)
    x = prepare_sample(sorted_sample)
    i, j, ties = _max_prob_indices(x, v_lambda)
    wide = widen_to_volume(Interval(float(x[i]), float(x[j])), v_lambda)
    return _result(x, i, j, (j - i + 1) / x.size, kind, ties, interval=wide)


def relaxed_1d(sorted_sample, kind: Relaxed) -> EstimateResult:
    """First window in (i, j) scan order whose objective is within the slack."""
    x = prepare_sample(sorted_sample)
    n = x.size
    slack = kind.delta_n * n ** (-2.0 / 3.0)
    inner = kind.inner
    idx = np.arange(n)
    if isinstance(inner, ExcessMass):
        g, _, first_min = _prefix_scores(x, inner.lam)
        best = (g - g[first_min]).max()
        suffix_max = np.maximum.accumulate(g[::-1])[::-1]
        ok_i = np.flatnonzero(suffix_max - g >= best - slack)
        i = int(ok_i[0])
        j = i + int(np.flatnonzero(g[i:] - g[i] >= best - slack)[0])
        objective = (j - i + 1) / n - inner.lam * (x[j] - x[i])
    elif isinstance(inner, MinVolume):
        k = required_count(n, inner.p_lambda)
        widths = x[k - 1:] - x[: n - k + 1]
        i = int(np.flatnonzero(widths <= widths.min() + slack)[0])
        j = i + k - 1
        objective = x[j] - x[i]
    else:
        ends = _window_ends(x, inner.v_lambda)
        counts = ends - idx + 1
        need = max(1, math.ceil(counts.max() - slack * n - 1e-9))
        i = int(np.flatnonzero(counts >= need)[0])
        j = i + need - 1
        objective = need / n
    result = _result(x, i, j, objective, kind, 0)
    result.diagnostics["slack"] = slack
    return result


def estimate_1d(sorted_sample, kind) -> EstimateResult:
    """Dispatch on the estimator kind."""
    if isinstance(kind, ExcessMass):
        return excess_mass_1d(sorted_sample, kind.lam)
    if isinstance(kind, MinVolume):
        return min_volume_1d(sorted_sample, kind.p_lambda)
    if isinstance(kind, MaxProbEqualVol):
        return max_prob_equal_vol_1d(sorted_sample, kind.v_lambda)
    if isinstance(kind, MaxProb):
        return max_prob_1d(sorted_sample, kind.v_lambda)
    if isinstance(kind, Relaxed):
        return relaxed_1d(sorted_sample, kind)
    raise ValidationError(f"unknown estimator kind {kind!r}")
