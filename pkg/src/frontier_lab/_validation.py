"""Small input checks used by the estimators and tests."""

import numpy as np

from .exceptions import DomainError


def check_responses(ys, min_size=2):
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 1:
        raise DomainError(f"responses must be one-dimensional, got shape {ys.shape}")
    if ys.size < min_size:
        raise DomainError(f"need at least {min_size} responses, got {ys.size}")
    if not np.all(np.isfinite(ys)):
        raise DomainError("responses contain NaN or infinite values")
    return ys


def check_bandwidth(h, name="h", upper=0.5):
    h = float(h)
    if not (0.0 < h < upper):
        raise DomainError(f"{name}={h} must lie in (0, {upper})")
    return h


def check_positive(value, name):
    value = float(value)
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")
    return value


def check_level(level):
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    return level


def check_grid(grid, lo, hi, tol=1e-12):
    """Return ``grid`` as a float array, raising if any point leaves [lo, hi]."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("evaluation grid must be a non-empty 1-d array")
    if grid.min() < lo - tol or grid.max() > hi + tol:
        raise DomainError(
            f"grid [{grid.min():.6g}, {grid.max():.6g}] leaves admissible interval "
            f"[{lo:.6g}, {hi:.6g}]"
        )
    return grid


def degree_for(beta):
    """Polynomial degree ceil(beta) - 1 used by the boundary estimator."""
    beta = check_positive(beta, "beta")
    return max(int(np.ceil(beta)) - 1, 0)
