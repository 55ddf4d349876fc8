"""Exhaustive O(n^2) reference for the 1D estimators.

Scores every index pair (i, j) with i <= j directly and takes the first optimum
in row-major order, which is the lexicographic tie rule of the fast paths.
Used only to cross-check them.
"""
from __future__ import annotations

import numpy as np

from ..errors import SampleTooLarge, ValidationError
from ..geometry import Interval
from .interval import _result, prepare_sample, widen_to_volume
from .kinds import EstimateResult, ExcessMass, MaxProb, MaxProbEqualVol, MinVolume, required_count

MAX_ORACLE_N = 200


def brute_force_oracle_1d(sample, kind) -> EstimateResult:
    x = prepare_sample(np.sort(np.asarray(sample, dtype=float).reshape(-1)))
    n = x.size
    if n > MAX_ORACLE_N:
        raise SampleTooLarge(f"oracle is limited to n <= {MAX_ORACLE_N}, got {n}")
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    upper = J >= I
    length = x[J] - x[I]
    count = J - I + 1

    if isinstance(kind, ExcessMass):
        score = np.where(upper, count / n - kind.lam * length, -np.inf)
        sense = "max"
    elif isinstance(kind, MinVolume):
        k = required_count(n, kind.p_lambda)
        score = np.where(upper & (count >= k), length, np.inf)
        sense = "min"
    elif isinstance(kind, (MaxProb, MaxProbEqualVol)):
        score = np.where(upper & (length <= kind.v_lambda), count, -1)
        sense = "max"
    else:
        raise ValidationError(f"oracle does not handle {kind!r}")

    target = score.max() if sense == "max" else score.min()
    hits = np.flatnonzero(score.ravel() == target)
    i, j = divmod(int(hits[0]), n)
    if isinstance(kind, (MaxProb, MaxProbEqualVol)):
        objective = count[i, j] / n
        # a tight window is fixed by its left index; do not count longer
        # duplicates of the same point set as separate ties
        ties = np.unique(hits // n).size - 1
    else:
        objective = score[i, j]
        ties = hits.size - 1
    wide = None
    if isinstance(kind, MaxProbEqualVol):
        wide = widen_to_volume(Interval(float(x[i]), float(x[j])), kind.v_lambda)
    return _result(x, i, j, objective, kind, ties, interval=wide)
