"""Shared input validation for the estimator facade."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError


def as_param_matrix(x, dim: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce to a finite (n, d) float array; 1-D input becomes one column."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigurationError(
            f"{name} must be a non-empty 2-D array of parameter points, "
            f"got shape {x.shape}"
        )
    if dim is not None and x.shape[1] != dim:
        raise ConfigurationError(
            f"{name} has {x.shape[1]} columns but the problem has {dim} parameters"
        )
    if not np.all(np.isfinite(x)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return x
