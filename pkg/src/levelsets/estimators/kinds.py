"""Estimator selectors and the common result record."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from ..errors import ValidationError
from ..geometry import ConvexBody


@dataclass(frozen=True)
class ExcessMass:
    """Maximise P_n(A) - lam * mu(A)."""

    lam: float

    def __post_init__(self):
        # lam == 0 is accepted: the volume penalty vanishes and the full sample range wins
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"excess-mass level must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class MinVolume:
    """Minimise mu(A) subject to P_n(A) >= p_lambda."""

    p_lambda: float

    def __post_init__(self):
        if not 0 < self.p_lambda <= 1:
            raise ValidationError(f"p_lambda must lie in (0, 1], got {self.p_lambda}")


@dataclass(frozen=True)
class MaxProb:
    """Maximise P_n(A) subject to mu(A) <= v_lambda."""

    v_lambda: float

    def __post_init__(self):
        if not (math.isfinite(self.v_lambda) and self.v_lambda > 0):
            raise ValidationError(f"v_lambda must be positive, got {self.v_lambda}")


@dataclass(frozen=True)
class MaxProbEqualVol:
    """Maximise P_n(A) subject to mu(A) == v_lambda."""

    v_lambda: float

    def __post_init__(self):
        if not (math.isfinite(self.v_lambda) and self.v_lambda > 0):
            raise ValidationError(f"v_lambda must be positive, got {self.v_lambda}")


@dataclass(frozen=True)
class Relaxed:
    """Accept any candidate within ``delta_n * n**(-2/3)`` of the optimum of ``inner``."""

    inner: Union[ExcessMass, MinVolume, MaxProb]
    delta_n: float

    def __post_init__(self):
        if not isinstance(self.inner, (ExcessMass, MinVolume, MaxProb)):
            raise ValidationError("relaxed estimators wrap ExcessMass, MinVolume or MaxProb")
        if not (math.isfinite(self.delta_n) and self.delta_n >= 0):
            raise ValidationError(f"delta_n must be >= 0, got {self.delta_n}")


EstimatorKind = Union[ExcessMass, MinVolume, MaxProb, MaxProbEqualVol, Relaxed]


@dataclass
class EstimateResult:
    """Selected set with its objective value.

    ``objective`` is P_n - lam * mu for ExcessMass, mu for MinVolume and P_n for
    the two maximum-probability kinds. ``diagnostics`` always carries
    ``tie_count``, ``search_restarts`` and ``empirical_mass`` (a Fraction).
    """

    set: ConvexBody
    objective: float
    kind: EstimatorKind
    n: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def empirical_mass(self) -> Fraction:
        return self.diagnostics["empirical_mass"]


def required_count(n: int, p_lambda: float) -> int:
    """ceil(n * p_lambda) in exact rational arithmetic.

    The level is read through its shortest decimal repr so that 0.8 means 4/5
    rather than the binary double just above it.
    """
    return math.ceil(Fraction(repr(float(p_lambda))) * n)
