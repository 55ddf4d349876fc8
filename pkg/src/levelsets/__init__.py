"""Level-set estimation over convex classes: estimators, local magnification,
limit-law simulation and a Monte Carlo harness."""

__version__ = "0.1.0"

from .errors import ComputationError, LevelSetError, ValidationError  # noqa: E402
from .geometry import Ball, Ellipsoid, Interval, Square  # noqa: E402
from .models import builtin_model  # noqa: E402

__all__ = ["__version__", "Ball", "Ellipsoid", "Interval", "Square", "builtin_model",
           "LevelSetError", "ValidationError", "ComputationError"]
