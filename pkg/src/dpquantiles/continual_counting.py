"""Tree-based continual counting used as a one-shot correlated rank perturbation.

A rank vector ``r_1..r_m`` is read as the prefix sums of a stream of ``m``
increments (leaf ``j`` holds ``r_{j+1} - r_j``). A k-ary tree is laid over the
leaves, every node gets independent noise of scale ``depth / epsilon`` and
``r_i`` is perturbed by the noise of the nodes decomposing ``[0, i)``.
A contiguous shift of ``r`` changes one leaf, hence one node per level, which
is what makes the perturbation hide such shifts.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from ._numeric import ceil_log, ceil_tol, round_half_up

NoiseKind = Literal["laplace", "two_sided_geometric"]
NOISE_KINDS = ("laplace", "two_sided_geometric")


@dataclass(frozen=True)
class TreeMechanismConfig:
    """Shape and privacy parameter of the tree mechanism over ``m`` leaves.

    ``depth`` is ``ceil(log_branching(m + 1))``: every prefix length ``i <= m``
    has at most ``depth`` base-``branching`` digits, and each leaf sits in one
    stored node per level.
    """

    m: int
    epsilon: float
    branching: int = 2
    noise_kind: NoiseKind = "laplace"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.branching < 2:
            raise ValueError(f"branching must be >= 2, got {self.branching}")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")

    @property
    def depth(self) -> int:
        return ceil_log(self.m + 1, self.branching)

    @property
    def scale(self) -> float:
        """Per-node noise scale ``depth / epsilon``."""
        return self.depth / self.epsilon

    @cached_property
    def offsets(self) -> np.ndarray:
        counts = [self.m // self.branching**j for j in range(self.depth)]
        return np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return int(self.offsets[-1])


@dataclass(frozen=True, order=True)
class TreeNode:
    level: int
    index: int
    start: int
    stop: int


def _node(level: int, index: int, k: int) -> TreeNode:
    w = k**level
    return TreeNode(level, index, index * w, (index + 1) * w)


@dataclass(frozen=True)
class ContiguousShift:
    """Shift vector ``e`` over ``m`` coordinates: 0 up to ``pivot``, ``direction`` after."""

    pivot: int
    direction: int
    m: int

    def __post_init__(self):
        if not 0 <= self.pivot <= self.m:
            raise ValueError(f"pivot must lie in [0, {self.m}], got {self.pivot}")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be -1 or +1")

    def vector(self) -> np.ndarray:
        e = np.zeros(self.m, dtype=np.int64)
        e[self.pivot:] = self.direction
        return e


def sample_noise(scale: float, kind: NoiseKind, rng: np.random.Generator, size=None):
    """Draw symmetric zero-mean noise.

    ``laplace`` is continuous Laplace(scale). ``two_sided_geometric`` puts mass
    proportional to ``alpha**|k|`` on integer ``k`` with ``alpha = exp(-1/scale)``,
    drawn as the difference of two geometric variables.
    """
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    if kind == "laplace":
        return rng.laplace(0.0, scale, size=size)
    if kind == "two_sided_geometric":
        p = -math.expm1(-1.0 / scale)
        diff = rng.geometric(p, size=size) - rng.geometric(p, size=size)
        return np.asarray(diff, dtype=np.float64) if size is not None else float(diff)
    raise ValueError(f"unknown noise kind {kind!r}")


def interval_decomposition(i: int, config: TreeMechanismConfig) -> list[TreeNode]:
    """Stored tree nodes whose disjoint union is ``[0, i)``, widest first."""
    if not 0 <= i <= config.m:
        raise ValueError(f"prefix length must lie in [0, {config.m}], got {i}")
    k = config.branching
    nodes = []
    for level in reversed(range(config.depth)):
        w = k**level
        digit = (i // w) % k
        base = (i // (w * k)) * k
        nodes.extend(_node(level, base + c, k) for c in range(digit))
    return nodes


def draw_node_noise(config: TreeMechanismConfig, rng: np.random.Generator, size: int | None = None):
    shape = config.n_nodes if size is None else (size, config.n_nodes)
    return sample_noise(config.scale, config.noise_kind, rng, size=shape)


def cc_noise(config: TreeMechanismConfig, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Unrounded prefix noise, shape ``(m,)`` or ``(size, m)``."""
    node_noise = draw_node_noise(config, rng, size=1 if size is None else size)
    out = _kernels.prefix_noise(node_noise, config.offsets, config.m, config.branching, config.depth)
    return out[0] if size is None else out


def cc_perturb(r, config: TreeMechanismConfig, rng: np.random.Generator) -> np.ndarray:
    """Integer noisy ranks ``round(r_i + prefix noise_i)``, ties rounded up.

    The noise is drawn from ``rng`` alone, so for a fixed seed the difference
    ``result - r`` does not depend on ``r``.
    """
    r = np.asarray(r, dtype=np.int64)
    if r.ndim != 1 or r.shape[0] != config.m:
        raise ValueError(f"expected a rank vector of length {config.m}, got shape {r.shape}")
    return round_half_up(r + cc_noise(config, rng))


def cc_error_bound(m: int, epsilon: float, beta: float) -> int:
    """``ceil(3 log2(m) log2(m / (2 beta)) / epsilon)``.

    Generic high-probability bound on the max rank perturbation of the binary
    tree mechanism.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2 (log m must be positive), got {m}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return ceil_tol(3 * math.log2(m) * math.log2(m / (2 * beta)) / epsilon)


def _log_mgf(s: float, kind: str, scale: float) -> float:
    if kind == "laplace":
        return -math.log1p(-((scale * s) ** 2))
    alpha = math.exp(-1.0 / scale)
    return 2 * math.log1p(-alpha) - math.log1p(-alpha * math.exp(s)) - math.log1p(-alpha * math.exp(-s))


def _log_upper_tail(t: float, terms: int, kind: str, scale: float) -> float:
    """Chernoff bound on log P[sum of ``terms`` node noises >= t]."""
    s_max = 1.0 / scale
    res = minimize_scalar(
        lambda s: -s * t + terms * _log_mgf(s, kind, scale),
        bounds=(s_max * 1e-9, s_max * (1 - 1e-9)),
        method="bounded",
        options={"xatol": s_max * 1e-10},
    )
    return min(0.0, float(res.fun))


def prefix_term_counts(config: TreeMechanismConfig) -> Counter:
    """How many prefixes ``[0, i)``, ``1 <= i <= m``, use each number of nodes."""
    k = config.branching
    counts: Counter = Counter()
    for i in range(1, config.m + 1):
        s, x = 0, i
        while x:
            s += x % k
            x //= k
        counts[s] += 1
    return counts


def cc_tail_bound(config: TreeMechanismConfig, delta: float) -> int:
    """Smallest integer ``w`` with ``P[max_i |noisy_i - r_i| > w] <= delta``.

    Mechanism-specific bound for the configured tree and noise: a Chernoff
    bound per prefix (using its exact node count) and a union bound over the
    ``m`` prefixes. Rounding is accounted for by testing ``|noise| >= w + 1/2``
    for Laplace noise and ``>= w + 1`` for integer noise.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    counts = prefix_term_counts(config)
    slack = 0.5 if config.noise_kind == "laplace" else 1.0

    def fails(w: int) -> bool:
        log_total = [math.log(2 * cnt) + _log_upper_tail(w + slack, terms, config.noise_kind, config.scale)
                     for terms, cnt in counts.items()]
        top = max(log_total)
        return top + math.log(sum(math.exp(v - top) for v in log_total)) > math.log(delta)

    hi = max(1, int(config.scale))
    while fails(hi):
        hi *= 2
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fails(mid):
            lo = mid
        else:
            hi = mid
    return hi


def shift_node_delta(shift: ContiguousShift, config: TreeMechanismConfig) -> set[TreeNode]:
    """Stored nodes whose count changes when ``shift`` is added to the ranks.

    The shift changes the increment at leaf ``pivot`` by ``direction``; the
    affected nodes are that leaf's stored ancestors, one per level, and each
    count moves by exactly one. Zero shift (``pivot == m``) changes nothing.
    """
    if shift.m != config.m:
        raise ValueError("shift and config disagree on m")
    t = shift.pivot
    if t >= config.m:
        return set()
    k = config.branching
    out = set()
    for level in range(config.depth):
        node = _node(level, t // k**level, k)
        if node.stop <= config.m:
            out.add(node)
    return out


def node_counts(stream, config: TreeMechanismConfig) -> dict[TreeNode, float]:
    """Sum of the leaf stream over every stored node (reference computation)."""
    stream = np.asarray(stream)
    csum = np.concatenate(([0], np.cumsum(stream)))
    k = config.branching
    out = {}
    for level in range(config.depth):
        for idx in range(config.m // k**level):
            node = _node(level, idx, k)
            out[node] = csum[node.stop] - csum[node.start]
    return out


def node_position(node: TreeNode, config: TreeMechanismConfig) -> int:
    """Flat index of ``node`` in the node-noise vector."""
    return int(config.offsets[node.level]) + node.index
