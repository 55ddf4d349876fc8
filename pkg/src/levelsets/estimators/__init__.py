"""Empirical level-set estimators: exact 1D paths, a brute-force oracle and 2D search."""
from .brute import MAX_ORACLE_N, brute_force_oracle_1d
from .interval import (
    estimate_1d,
    excess_mass_1d,
    max_prob_1d,
    max_prob_equal_vol_1d,
    min_volume_1d,
    relaxed_1d,
    widen_to_volume,
)
from .kinds import (
    EstimateResult,
    EstimatorKind,
    ExcessMass,
    MaxProb,
    MaxProbEqualVol,
    MinVolume,
    Relaxed,
    required_count,
)
from .planar import SearchConfig, estimate_2d


def relaxed_estimate(sample, kind: Relaxed, cls: str = "balls", search: SearchConfig | None = None):
    """Relaxed estimator on intervals (1D input) or on discs/ellipses (2D input)."""
    import numpy as np

    arr = np.asarray(sample, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return estimate_2d(arr, kind, cls, search)
    return relaxed_1d(np.sort(arr.reshape(-1)), kind)


def estimate(sample, kind, cls: str = "balls", search: SearchConfig | None = None) -> EstimateResult:
    """Sort 1D input and run the exact path, or run the planar search on (n, 2) input."""
    import numpy as np

    arr = np.asarray(sample, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return estimate_2d(arr, kind, cls, search)
    return estimate_1d(np.sort(arr.reshape(-1)), kind)


__all__ = [
    "EstimateResult", "EstimatorKind", "ExcessMass", "MaxProb", "MaxProbEqualVol", "MinVolume",
    "Relaxed", "SearchConfig", "MAX_ORACLE_N", "brute_force_oracle_1d", "estimate", "estimate_1d",
    "estimate_2d", "excess_mass_1d", "max_prob_1d", "max_prob_equal_vol_1d", "min_volume_1d",
    "relaxed_1d", "relaxed_estimate", "required_count", "widen_to_volume",
]
