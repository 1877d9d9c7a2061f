"""Recursive approximate-quantiles baseline.

The middle quantile is estimated with the exponential mechanism, the data is
split at the estimate and both halves are solved recursively with their
quantiles renormalised. Calls at the same recursion level see disjoint data,
so the budget is divided evenly over the ``ceil(log2(m + 1))`` levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError
from .exp_mechanism import SortedDataset, single_quantile
from .slice_quantiles import QuantileQuery


@dataclass(frozen=True)
class AQBudget:
    mode: Literal["pure", "zcdp"]
    epsilon_or_rho: float
    m: int

    def __post_init__(self):
        if self.mode not in ("pure", "zcdp"):
            raise ConfigError(f"unknown AQ budget mode {self.mode!r}")
        if not self.epsilon_or_rho > 0:
            raise ConfigError("budget must be positive")
        if self.m < 1:
            raise ConfigError("m must be >= 1")

    @property
    def depth(self) -> int:
        return max(1, math.ceil(math.log2(self.m + 1)))

    @property
    def per_call_epsilon(self) -> float:
        """pure: ``eps / depth``; zcdp: ``eps'`` with ``depth * eps'^2 / 8 = rho``."""
        if self.mode == "pure":
            return self.epsilon_or_rho / self.depth
        return math.sqrt(8 * self.epsilon_or_rho / self.depth)


def aq_quantiles(X: SortedDataset, Q: QuantileQuery, budget: AQBudget, range_=None,
                 rng: np.random.Generator | None = None, trace: list | None = None) -> np.ndarray:
    """Estimates for every quantile of ``Q``.

    If ``trace`` is a list, one ``(level, epsilon, n_sub)`` tuple per
    exponential-mechanism call is appended to it.
    """
    if budget.m != Q.m:
        raise ConfigError("budget was built for a different m")
    rng = np.random.default_rng() if rng is None else rng
    lo, hi = X.bounds if range_ is None else range_
    eps = budget.per_call_epsilon
    out = np.empty(Q.m)

    def solve(values, qs, idx, lo, hi, q_lo, q_hi, level):
        if not idx:
            return
        if values.size == 0:
            out[idx] = (lo + hi) / 2
            return
        mid = (len(idx) + 1) // 2 - 1
        n_sub = values.size
        q = qs[idx[mid]]
        q_mid = (q - q_lo) / (q_hi - q_lo)
        r = min(max(math.floor(q_mid * n_sub), 1), n_sub)
        z = single_quantile(values, r, eps, (lo, hi), rng)
        if trace is not None:
            trace.append((level, eps, n_sub))
        out[idx[mid]] = z
        cut = np.searchsorted(values, z, side="right")
        solve(values[:cut], qs, idx[:mid], lo, z, q_lo, q, level + 1)
        solve(values[cut:], qs, idx[mid + 1:], z, hi, q, q_hi, level + 1)

    solve(X.values, Q.quantiles, list(range(Q.m)), float(lo), float(hi), 0.0, 1.0, 0)
    return out


def zcdp_to_dp(rho: float, delta: float) -> float:
    """``rho + 2 sqrt(rho ln(1/delta))``."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return rho + 2 * math.sqrt(rho * math.log(1 / delta))


def calibrate_zcdp(epsilon: float, delta: float) -> float:
    """Largest ``rho`` with ``zcdp_to_dp(rho, delta) <= epsilon``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    L = math.log(1 / delta)
    rho = (math.sqrt(L + epsilon) - math.sqrt(L)) ** 2
    if rho > 0 and zcdp_to_dp(rho, delta) <= epsilon * (1 + 1e-12):
        return rho
    return brentq(lambda x: zcdp_to_dp(x, delta) - epsilon, 1e-300, epsilon, xtol=1e-15)
