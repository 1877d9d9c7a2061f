"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled with numba and a vectorised
numpy version. ``prefix_noise`` and ``em_pick`` dispatch on the backend chosen
in :mod:`dpquantiles._backend`; the ``*_numpy`` / ``*_numba`` names stay
importable so tests and the benchmark can compare both paths directly.

Kernels never draw randomness themselves. Callers pass pre-drawn node noise
or uniforms, which keeps the two paths comparable bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import NUMBA_AVAILABLE, njit

# ---------------------------------------------------------------------------
# k-ary tree prefix sums
#
# Level j holds nodes of width k**j; node p covers [p * k**j, (p+1) * k**j).
# Only nodes with (p+1) * k**j <= m can appear in a prefix decomposition, so
# level j stores m // k**j of them, flattened with ``offsets``.
# ---------------------------------------------------------------------------


def prefix_noise_numpy(noise, offsets, m, k, depth):
    noise = np.atleast_2d(noise)
    trials = noise.shape[0]
    out = np.zeros((trials, m))
    i = np.arange(1, m + 1)
    for j in range(depth):
        block = k**j
        lo, hi = offsets[j], offsets[j + 1]
        count = hi - lo
        if count == 0:
            continue
        groups = -(-count // k)
        padded = np.zeros((trials, groups * k))
        padded[:, :count] = noise[:, lo:hi]
        csum = np.cumsum(padded.reshape(trials, groups, k), axis=2)
        digit = (i // block) % k
        used = digit > 0
        group = i[used] // (block * k)
        out[:, used] += csum[:, group, digit[used] - 1]
    return out


@njit(cache=True, nogil=True)
def _prefix_noise_loop(noise, offsets, m, k, depth):
    trials = noise.shape[0]
    out = np.zeros((trials, m))
    for t in range(trials):
        for i in range(1, m + 1):
            acc = 0.0
            block = 1
            for j in range(depth):
                digit = (i // block) % k
                if digit > 0:
                    base = offsets[j] + (i // (block * k)) * k
                    s = 0.0
                    for c in range(digit):
                        s += noise[t, base + c]
                    acc += s
                block *= k
            out[t, i - 1] = acc
    return out


def prefix_noise_numba(noise, offsets, m, k, depth):
    noise = np.ascontiguousarray(np.atleast_2d(noise), dtype=np.float64)
    return _prefix_noise_loop(noise, np.asarray(offsets, dtype=np.int64), m, k, depth)


# ---------------------------------------------------------------------------
# Exponential mechanism over the intervals between consecutive edges.
#
# edges = [a, s_1, ..., s_n, b]; interval k = [edges[k], edges[k+1]] has
# utility -|k - r| and weight exp(half_eps * utility) * length. Zero-length
# intervals get weight 0. Weights are shifted by their max in log space.
# ``half_eps = inf`` puts all mass on the best positive-length intervals.
# ---------------------------------------------------------------------------


def em_log_weights_numpy(edges, r, half_eps):
    lengths = np.diff(edges)
    k = np.arange(lengths.shape[0])
    positive = lengths > 0
    lw = np.full(lengths.shape[0], -np.inf)
    if math.isinf(half_eps):
        if positive.any():
            dist = np.abs(k - r)
            best = dist[positive].min()
            sel = positive & (dist == best)
            lw[sel] = np.log(lengths[sel])
        return lw
    lw[positive] = np.log(lengths[positive]) - half_eps * np.abs(k[positive] - r)
    return lw


def em_pick_numpy(edges, r, half_eps, uniforms):
    lw = em_log_weights_numpy(edges, r, half_eps)
    top = lw.max()
    if not np.isfinite(top):
        return np.full(np.shape(uniforms), -1, dtype=np.int64)
    cdf = np.cumsum(np.exp(lw - top))
    idx = np.searchsorted(cdf, np.asarray(uniforms) * cdf[-1], side="right")
    return np.minimum(idx, cdf.shape[0] - 1).astype(np.int64)


@njit(cache=True, nogil=True)
def _em_pick_loop(edges, r, half_eps, uniforms):
    n_int = edges.shape[0] - 1
    lw = np.empty(n_int)
    top = -np.inf
    exact = half_eps == np.inf
    best = n_int + 1
    if exact:
        for kk in range(n_int):
            if edges[kk + 1] - edges[kk] > 0:
                d = abs(kk - r)
                if d < best:
                    best = d
    for kk in range(n_int):
        length = edges[kk + 1] - edges[kk]
        if length > 0:
            if exact:
                v = np.log(length) if abs(kk - r) == best else -np.inf
            else:
                v = np.log(length) - half_eps * abs(kk - r)
        else:
            v = -np.inf
        lw[kk] = v
        if v > top:
            top = v
    out = np.empty(uniforms.shape[0], dtype=np.int64)
    if top == -np.inf:
        out[:] = -1
        return out
    cdf = np.empty(n_int)
    total = 0.0
    for kk in range(n_int):
        total += np.exp(lw[kk] - top)
        cdf[kk] = total
    for t in range(uniforms.shape[0]):
        target = uniforms[t] * total
        lo = 0
        hi = n_int
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[mid] <= target:
                lo = mid + 1
            else:
                hi = mid
        out[t] = min(lo, n_int - 1)
    return out


def em_pick_numba(edges, r, half_eps, uniforms):
    u = np.ascontiguousarray(np.atleast_1d(uniforms), dtype=np.float64)
    out = _em_pick_loop(np.ascontiguousarray(edges, dtype=np.float64), int(r), float(half_eps), u)
    return out.reshape(np.shape(uniforms))


if NUMBA_AVAILABLE:
    prefix_noise = prefix_noise_numba
    em_pick = em_pick_numba
else:
    prefix_noise = prefix_noise_numpy
    em_pick = em_pick_numpy
