"""Exponential mechanism for a single rank over the gaps between data points."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._numeric import ceil_tol
from .errors import EmptyDatasetError


@dataclass(frozen=True, eq=False)
class SortedDataset:
    """Strictly increasing values inside the open interval ``bounds``.

    ``min_gap`` is a lower bound on consecutive differences, checked up to a
    few ulps of the largest magnitude to absorb float rounding of ``x + i/n``.
    """

    values: np.ndarray
    bounds: tuple[float, float]
    min_gap: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        a, b = self.bounds
        if v.ndim != 1 or v.size == 0:
            raise EmptyDatasetError("dataset is empty")
        if not a < b:
            raise ValueError(f"bounds must satisfy a < b, got {self.bounds}")
        if not self.min_gap > 0:
            raise ValueError(f"min_gap must be positive, got {self.min_gap}")
        if not (a < v[0] and v[-1] < b):
            raise ValueError("all values must lie strictly inside the bounds")
        if v.size > 1:
            gaps = np.diff(v)
            slack = 8 * np.finfo(np.float64).eps * max(abs(a), abs(b))
            if gaps.min() < self.min_gap * (1 - 1e-9) - slack:
                raise ValueError(f"consecutive gap {gaps.min():.3g} below min_gap {self.min_gap:.3g}")

    @classmethod
    def from_values(cls, values, bounds, min_gap: float | None = None) -> "SortedDataset":
        v = np.sort(np.asarray(values, dtype=np.float64))
        if min_gap is None:
            if v.size < 2:
                raise ValueError("min_gap is required for a single value")
            min_gap = float(np.diff(v).min())
        return cls(v, (float(bounds[0]), float(bounds[1])), float(min_gap))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def psi(self) -> float:
        return self.bounds[1] / self.min_gap

    def rank(self, z):
        """Number of data points strictly below ``z``."""
        return np.searchsorted(self.values, z, side="left")

    def __len__(self) -> int:
        return self.n


def _values_and_range(X, range_):
    if isinstance(X, SortedDataset):
        values = X.values
        lo, hi = X.bounds if range_ is None else range_
    else:
        values = np.asarray(X, dtype=np.float64)
        if range_ is None:
            raise ValueError("a range is required when X is a plain array")
        lo, hi = range_
    if values.size == 0:
        raise EmptyDatasetError("cannot run the exponential mechanism on an empty dataset")
    return values, float(lo), float(hi)


def _check(values, lo, hi, r, epsilon):
    n = values.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"target rank must lie in [1, {n}], got {r}")
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if not lo <= hi:
        raise ValueError(f"invalid range ({lo}, {hi})")
    if values[0] < lo or values[-1] > hi:
        raise ValueError("range must contain all values")
    if n > 1 and np.any(np.diff(values) < 0):
        raise ValueError("values must be sorted ascending")


def single_quantile(X, r: int, epsilon: float, range_=None, rng: np.random.Generator | None = None,
                    size: int | None = None):
    """Private estimate of the element of rank ``r``.

    Picks interval ``[x_(k), x_(k+1)]`` (with ``x_(0) = a``, ``x_(n+1) = b``)
    with probability proportional to ``exp(epsilon/2 * u_k) * length`` where
    ``u_k = -|k - r|``, then returns a uniform point of it.
    """
    values, lo, hi = _values_and_range(X, range_)
    _check(values, lo, hi, r, epsilon)
    rng = np.random.default_rng() if rng is None else rng
    edges = np.concatenate(([lo], values, [hi]))
    count = 1 if size is None else size
    pick_u = rng.random(count)
    pos_u = rng.random(count)
    idx = _kernels.em_pick(edges, r, epsilon / 2, pick_u)
    if idx[0] < 0:
        z = np.full(count, lo)
    else:
        left = edges[idx]
        z = left + pos_u * (edges[idx + 1] - left)
    return float(z[0]) if size is None else z


def exact_interval_probabilities(X, r: int, epsilon: float, range_=None) -> np.ndarray:
    """Exact selection probabilities of the ``n + 1`` intervals.

    Utilities are computed from the definition, ``-| #{x < right end} - r |``,
    independently of the sampler's shortcut.
    """
    values, lo, hi = _values_and_range(X, range_)
    _check(values, lo, hi, r, epsilon)
    edges = np.concatenate(([lo], values, [hi]))
    lengths = np.diff(edges)
    below = np.searchsorted(values, edges[1:], side="left")
    below[-1] = values.shape[0]
    util = -np.abs(below - r).astype(np.float64)
    positive = lengths > 0
    if not positive.any():
        return np.zeros_like(lengths)
    if math.isinf(epsilon):
        best = util[positive].max()
        weights = np.where(positive & (util == best), lengths, 0.0)
        return weights / weights.sum()
    logw = np.full(lengths.shape, -np.inf)
    logw[positive] = np.log(lengths[positive]) + 0.5 * epsilon * util[positive]
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def slice_median_param(epsilon: float, beta: float, b: float, g: float, m: int = 1) -> int:
    """Slice radius ``ceil((2/epsilon) ln(2 m b / (g beta)) - 1)``.

    With ``m = 1`` this is the single-rank radius; the factor ``m`` union-bounds
    over ``m`` slices.
    """
    if not (epsilon > 0 and b > 0 and g > 0 and m >= 1):
        raise ValueError("epsilon, b, g must be positive and m >= 1")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return ceil_tol((2.0 / epsilon) * math.log(2.0 * m * b / (g * beta)) - 1.0)


def slice_bounds(center_rank: int, h: int) -> tuple[int, int]:
    """0-based half-open index range ``[c - h, c + h)`` of a slice.

    In 1-based order statistics this is ``x_(c-h+1) .. x_(c+h)``: ``2h`` points
    with the gap ``(x_(c), x_(c+1))`` in the middle.
    """
    return center_rank - h, center_rank + h


def slice_median(X: SortedDataset, center_rank: int, h: int, epsilon: float, range_=None,
                 rng: np.random.Generator | None = None) -> float:
    """Exponential-mechanism median of the ``2h`` points around ``center_rank``.

    Slice points outside ``range_`` are clipped to its ends (their intervals
    then have zero length). The u = 0 interval is ``[x_(c), x_(c+1)]``, so the
    estimate targets rank ``c`` in ``X``.
    """
    if h < 1:
        raise ValueError(f"half-width must be >= 1, got {h}")
    lo_i, hi_i = slice_bounds(center_rank, h)
    if lo_i < 0 or hi_i > X.n:
        raise ValueError(f"slice [{lo_i}, {hi_i}) out of bounds for n = {X.n}")
    lo, hi = X.bounds if range_ is None else range_
    piece = np.clip(X.values[lo_i:hi_i], lo, hi)
    return single_quantile(piece, h, epsilon, (lo, hi), rng)
