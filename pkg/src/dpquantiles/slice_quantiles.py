"""Multi-quantile release from disjoint slices around correlated noisy ranks.

Pipeline: check that the target ranks are well separated, perturb them with
the tree mechanism, fall back to uniform output on a gamma-coin or when the
noisy ranks crowd together, otherwise release each slice median in tree order
with its range clipped by the already released neighbours.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from ._numeric import ceil_tol, round_half_up
from .continual_counting import TreeMechanismConfig, cc_error_bound, cc_perturb, cc_tail_bound
from .errors import ConfigError, GapTooSmallError
from .exp_mechanism import SortedDataset, slice_median, slice_median_param

Adjacency = Literal["add_remove", "substitute"]


@dataclass(frozen=True)
class QuantileQuery:
    quantiles: tuple[float, ...]

    def __init__(self, quantiles):
        q = tuple(float(x) for x in np.ravel(quantiles))
        if not q:
            raise ValueError("at least one quantile is required")
        if any(not 0 < x < 1 for x in q):
            raise ValueError("quantiles must lie in (0, 1)")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("quantiles must be strictly increasing")
        object.__setattr__(self, "quantiles", q)

    @property
    def m(self) -> int:
        return len(self.quantiles)

    def ranks(self, n: int) -> np.ndarray:
        return np.array([math.floor(q * n) for q in self.quantiles], dtype=np.int64)


@dataclass(frozen=True)
class PrivacyBudget:
    """Budgets for the rank perturbation (``epsilon1``) and slice medians (``epsilon2``).

    ``gamma > 0`` selects pure mode (uniform mixing, discretised output);
    otherwise ``delta > 0`` is required (approximate mode).
    """

    epsilon1: float
    epsilon2: float
    delta: float = 0.0
    gamma: float = 0.0
    adjacency: Adjacency = "add_remove"

    def __post_init__(self):
        if not (self.epsilon1 > 0 and self.epsilon2 > 0):
            raise ConfigError("epsilon1 and epsilon2 must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError(f"delta must lie in [0, 1), got {self.delta}")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.adjacency not in ("add_remove", "substitute"):
            raise ConfigError(f"unknown adjacency {self.adjacency!r}")

    @classmethod
    def split(cls, epsilon: float, **kwargs) -> "PrivacyBudget":
        """Half of ``epsilon`` to each stage."""
        return cls(epsilon / 2, epsilon / 2, **kwargs)

    @property
    def mode(self) -> str:
        return "pure" if self.gamma > 0 else "approx"


def privacy_guarantee(budget: PrivacyBudget) -> tuple[float, float]:
    """Reported (epsilon, delta) of the approximate-mode mechanism.

    Substitute adjacency has two published forms; the larger of each
    coordinate is reported.
    """
    e1, e2, d = budget.epsilon1, budget.epsilon2, budget.delta
    if budget.adjacency == "add_remove":
        return e1 + 2 * e2, d
    eps = max(2 * e1 + 3 * e2, 3 * e1 + 2 * e2)
    return eps, max(d + d * math.exp(e1 + 2 * e2), d + d * math.exp(2 * e1 + e2))


@dataclass(frozen=True)
class SliceParams:
    """``w``: allowed rank perturbation; ``ell``: slice-median error radius.

    ``h = ell + 1`` is the slice half-width, so every slice holds ``2 ell + 2``
    points and the median escapes it with probability at most beta.
    """

    w: int
    ell: int
    h: int = field(init=False)

    def __post_init__(self):
        if self.w < 0 or self.ell < 0:
            raise ConfigError("w and ell must be non-negative")
        object.__setattr__(self, "h", self.ell + 1)

    @property
    def require_margin(self) -> int:
        """Target ranks must lie in Good(m, n, w + h + 1)."""
        return self.w + self.h + 1

    def required_n(self, m: int) -> int:
        """Smallest n for which m equally spaced ranks can pass the requirement."""
        return 2 * m * self.require_margin


@dataclass
class QuantileEstimates:
    values: np.ndarray
    failure_flag: bool
    noisy_ranks: np.ndarray | None = None


def good_set_contains(rv, m: int, n: int, h: int) -> bool:
    """``h <= rv_1``, ``rv_{i-1} + 2h <= rv_i`` for i = 2..m, ``rv_m <= n - h``."""
    rv = np.asarray(rv)
    if rv.shape != (m,):
        raise ValueError(f"expected length {m}, got shape {rv.shape}")
    if rv[0] < h or rv[-1] > n - h:
        return False
    return bool(np.all(np.diff(rv) >= 2 * h))


def _log_m(m: int) -> float:
    # log2(1) = 0 would zero out w; a single rank still gets one tree level
    return math.log2(max(m, 2))


def calibrate_approx(m: int, n: int, budget: PrivacyBudget, b: float, g: float, beta: float) -> SliceParams:
    """``w = ceil(3 log2(m) log2(2m/delta) / epsilon1)``, ``ell`` from the slice radius."""
    if not budget.delta > 0:
        raise ConfigError("approximate mode needs delta > 0")
    w = ceil_tol(3 * _log_m(m) * math.log2(2 * m / budget.delta) / budget.epsilon1)
    return SliceParams(w=w, ell=slice_median_param(budget.epsilon2, beta, b, g, m))


def calibrate_pure(m: int, n: int, budget: PrivacyBudget, b: int, g: float = 1.0, beta: float = 0.05,
                   mixing_epsilon: float | None = None) -> SliceParams:
    """Calibrate ``w`` for pure DP via uniform mixing over the size-``b`` output grid.

    ``w = 3 log2(m)/eps1 * (m log2 b + log2(2m (e^x - 1)/gamma) [+ eps1 + 2 eps2])``,
    the bracketed term only under substitute adjacency. ``x`` defaults to
    ``epsilon2`` (add/remove) or ``epsilon1`` (substitute); ``mixing_epsilon``
    overrides it.
    """
    if not budget.gamma > 0:
        raise ConfigError("pure mode needs gamma > 0")
    e1, e2 = budget.epsilon1, budget.epsilon2
    sub = budget.adjacency == "substitute"
    x = mixing_epsilon if mixing_epsilon is not None else (e1 if sub else e2)
    inner = m * math.log2(b) + math.log2(2 * m * math.expm1(x) / budget.gamma)
    if sub:
        inner += e1 + 2 * e2
    w = ceil_tol(3 * _log_m(m) / e1 * inner)
    return SliceParams(w=w, ell=slice_median_param(e2, beta, b, g, m))


def release_order(m: int) -> list[int]:
    """1-based release order: segment midpoints (``ceil(len/2)``), level by level."""
    if m < 1:
        raise ValueError("m must be >= 1")
    order = []
    queue = deque([(1, m)])
    while queue:
        lo, hi = queue.popleft()
        if lo > hi:
            continue
        mid = lo + (hi - lo + 2) // 2 - 1
        order.append(mid)
        queue.append((lo, mid - 1))
        queue.append((mid + 1, hi))
    return order


def clip_range(released: Mapping[int, float], j: int, a: float, b: float) -> tuple[float, float]:
    """Output range for position ``j`` given the estimates released so far.

    Lower end: the released estimate at the nearest position below ``j``
    (``a`` if none); upper end likewise (``b`` if none).
    """
    if j in released:
        raise ValueError(f"position {j} already released")
    items = sorted(released.items())
    vals = [v for _, v in items]
    if any(y <= x for x, y in zip(vals, vals[1:])):
        raise ValueError("released estimates are not increasing in position")
    lo, hi = a, b
    for pos, val in items:
        if pos < j:
            lo = val
        else:
            hi = val
            break
    return lo, hi


def discretize_output(Z, b: int):
    """Round estimates to the grid ``{1, ..., b}`` (half-up)."""
    return np.clip(round_half_up(Z), 1, int(b))


def max_rank_error(X: SortedDataset, Q: QuantileQuery, Z) -> int:
    """``max_i |rank_X(z_i) - floor(q_i n)|`` with the strict-less rank."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != (Q.m,):
        raise ValueError("one estimate per quantile is required")
    ranks = X.rank(Z)
    return int(np.max(np.abs(ranks - Q.ranks(X.n))))


def audit_min_spacing(Q: QuantileQuery, n: int, params: SliceParams, epsilon1: float, delta: float, m: int,
                      cc_config: TreeMechanismConfig | None = None) -> bool:
    """True iff the smallest gap between target ranks exceeds ``2 (ell + E_cc)``.

    ``E_cc`` is :func:`cc_tail_bound` of ``cc_config`` at ``delta`` when a
    mechanism is given, else the generic :func:`cc_error_bound`.
    """
    if m < 2:
        return True
    ranks = Q.ranks(n)
    spacing = int(np.min(np.diff(ranks)))
    if cc_config is not None:
        e_cc = cc_tail_bound(cc_config, delta)
    else:
        e_cc = cc_error_bound(m, epsilon1, delta)
    return spacing > 2 * (params.ell + e_cc)


def _fallback(X: SortedDataset, m: int, budget: PrivacyBudget, rng: np.random.Generator) -> np.ndarray:
    a, b = X.bounds
    if budget.mode == "pure":
        return rng.integers(1, int(b), size=m, endpoint=True).astype(np.float64)
    return rng.uniform(a, b, size=m)


def _check_pure_domain(X: SortedDataset):
    a, b = X.bounds
    if a != 0 or b != int(b):
        raise ConfigError("pure mode needs bounds (0, b) with integer b")


def slice_quantiles(X: SortedDataset, Q: QuantileQuery, budget: PrivacyBudget, params: SliceParams,
                    rng: np.random.Generator, cc_config: TreeMechanismConfig | None = None,
                    clip: bool = True) -> QuantileEstimates:
    """Release ``m`` quantile estimates.

    Raises :class:`GapTooSmallError` when the target ranks are not in
    ``Good(m, n, w + h + 1)``. ``cc_config`` defaults to a binary tree with
    Laplace noise at ``budget.epsilon1``.
    """
    m, n = Q.m, X.n
    if budget.mode == "pure":
        _check_pure_domain(X)
    if cc_config is None:
        cc_config = TreeMechanismConfig(m, budget.epsilon1)
    elif cc_config.m != m or not math.isclose(cc_config.epsilon, budget.epsilon1):
        raise ConfigError("cc_config must match m and epsilon1")
    ranks = Q.ranks(n)
    if not good_set_contains(ranks, m, n, params.require_margin):
        raise GapTooSmallError(
            f"target ranks need gaps >= {2 * params.require_margin} and margin {params.require_margin} "
            f"from both ends (n = {n}, m = {m})"
        )
    h = params.h
    noisy = cc_perturb(ranks, cc_config, rng)
    heads = rng.random() < budget.gamma
    if heads or not good_set_contains(noisy, m, n, h):
        return QuantileEstimates(_fallback(X, m, budget, rng), True, noisy)

    a, b = X.bounds
    released: dict[int, float] = {}
    for j in release_order(m):
        lo, hi = clip_range(released, j, a, b) if clip else (a, b)
        released[j] = slice_median(X, int(noisy[j - 1]), h, budget.epsilon2, (lo, hi), rng)
    z = np.array([released[j] for j in range(1, m + 1)])
    if budget.mode == "pure":
        z = discretize_output(z, int(b)).astype(np.float64)
    return QuantileEstimates(z, False, noisy)
