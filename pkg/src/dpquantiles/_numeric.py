"""Small numeric helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np


def ceil_tol(x: float, rtol: float = 1e-12) -> int:
    """Ceiling that ignores float noise just above an integer."""
    nearest = round(x)
    if abs(x - nearest) <= rtol * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


def ceil_log(x: int, base: int) -> int:
    """Smallest integer T >= 0 with base**T >= x (exact integer arithmetic)."""
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    t, p = 0, 1
    while p < x:
        p *= base
        t += 1
    return t


def round_half_up(x):
    """Round to the nearest integer, ties going up: k - 1/2 -> k."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)
