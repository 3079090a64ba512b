"""Input validation helpers shared across modules."""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError, DimMismatch, NonFiniteInput


def as_matrix(a, name: str = "array") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinity")
    return arr


def as_vector(a, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float64 array of optional fixed length."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise DimMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimMismatch(f"{name} has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinity")
    return arr


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return ``arr`` with its write flag cleared (shared-read safety)."""
    arr.flags.writeable = False
    return arr


def resolve_threads(requested: int | None = None) -> int:
    """Worker count for per-question parallelism.

    ``requested=None`` defers to the MCQA_THREADS environment variable,
    where 0 (the default) means one worker per CPU.  A positive env value
    caps any explicit request.
    """
    raw = os.environ.get("MCQA_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"MCQA_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ConfigError(f"MCQA_THREADS must be >= 0, got {cap}")
    auto = os.cpu_count() or 1
    if requested is None:
        n = auto if cap == 0 else cap
    else:
        if requested < 1:
            raise ConfigError(f"thread count must be >= 1, got {requested}")
        n = requested if cap == 0 else min(requested, cap)
    return max(1, min(n, auto))
