"""Executable versions of the noisy-rank maps behind the privacy argument.

For adjacent datasets the maps send each well-separated noisy rank vector of
one dataset to a vector for the other such that (1) the map is injective,
(2) the slices on both sides differ by few substitutions and (3) the
difference is a contiguous +-1 vector. This module implements the maps, the
naive removal map that breaks injectivity, and an exhaustive checker.

Conventions (fixed by exhaustive checking): slices are the 0-based half-open
index ranges ``[r - h, r + h)`` of the sorted data, ``s`` is the 0-based
position of the extra point in the larger dataset (the number of points of the
smaller dataset below it), and ``n`` is the size of the smaller dataset.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

from .slice_quantiles import good_set_contains


@dataclass(frozen=True)
class AdjacentPair:
    """``X`` and ``X_prime`` sorted, differing by one point.

    ``kind == "add"`` means ``X_prime`` has the extra point, ``"remove"`` means
    ``X`` has it. ``s`` is derived from the data, never supplied.
    """

    X: tuple
    X_prime: tuple
    kind: Literal["add", "remove"]
    s: int

    @classmethod
    def from_datasets(cls, X, X_prime) -> "AdjacentPair":
        X = tuple(sorted(X))
        Xp = tuple(sorted(X_prime))
        if len(Xp) == len(X) + 1:
            kind, small, big = "add", X, Xp
        elif len(X) == len(Xp) + 1:
            kind, small, big = "remove", Xp, X
        else:
            raise ValueError("datasets must differ in size by exactly one")
        s = next((i for i, (x, y) in enumerate(zip(small, big)) if x != y), len(small))
        if small[s:] != big[s + 1:]:
            raise ValueError("datasets are not add/remove adjacent")
        return cls(X, Xp, kind, s)


def _check_good(rv, n, h):
    rv = tuple(int(x) for x in rv)
    if not good_set_contains(rv, len(rv), n, h):
        raise ValueError(f"{rv} is not in Good(m={len(rv)}, n={n}, h={h})")
    return rv


def map_add(rv: Sequence[int], s: int, h: int, n: int | None = None) -> tuple[int, ...]:
    """Shift every coordinate whose slice starts after ``s`` up by one."""
    if n is not None:
        rv = _check_good(rv, n, h)
    return tuple(int(r) + (1 if r - h > s else 0) for r in rv)


def map_remove(rv: Sequence[int], s: int, h: int, n: int | None = None) -> tuple[int, ...]:
    """Shift coordinate i down by one iff i > 1 and slice i-1 starts after ``s``."""
    if n is not None:
        rv = _check_good(rv, n, h)
    return tuple(int(r) - (1 if i > 0 and rv[i - 1] - h > s else 0) for i, r in enumerate(rv))


def naive_map_remove(rv: Sequence[int], s: int, h: int) -> tuple[int, ...]:
    """Mirror image of :func:`map_add`; collides, kept to exhibit that."""
    return tuple(int(r) - (1 if r - h > s else 0) for r in rv)


def shift_vector(rv, mapped) -> tuple[int, ...]:
    return tuple(int(b) - int(a) for a, b in zip(rv, mapped))


def is_contiguous(e: Sequence[int]) -> bool:
    """``e_i = d * 1[i >= j]`` for some j and d in {-1, +1} (all zeros allowed)."""
    nz = [i for i, v in enumerate(e) if v != 0]
    if not nz:
        return True
    d = e[nz[0]]
    return d in (-1, 1) and all(v == d for v in e[nz[0]:])


def _sub_distance(a, b) -> int:
    return sum((Counter(a) - Counter(b)).values())


def slice_substitution_cost(X, X_prime, rv, mapped, h: int) -> int:
    """Total substitutions turning the slices of ``X`` at ``rv`` into those of ``X_prime`` at ``mapped``."""
    X, Xp = list(X), list(X_prime)
    total = 0
    for r, rp in zip(rv, mapped):
        lo, hi, lo_p, hi_p = r - h, r + h, rp - h, rp + h
        if lo < 0 or hi > len(X) or lo_p < 0 or hi_p > len(Xp):
            raise ValueError("slice out of bounds")
        total += _sub_distance(X[lo:hi], Xp[lo_p:hi_p])
    return total


def enumerate_good(m: int, n: int, h: int) -> Iterator[tuple[int, ...]]:
    """All vectors of Good(m, n, h) in lexicographic order."""
    def rec(prefix, start, i):
        if i == m:
            yield tuple(prefix)
            return
        last = n - h - 2 * h * (m - 1 - i)
        for r in range(start, last + 1):
            prefix.append(r)
            yield from rec(prefix, r + 2 * h, i + 1)
            prefix.pop()

    if m < 1:
        return
    yield from rec([], h, 0)


@dataclass
class LemmaReport:
    m: int
    n: int
    h: int
    good_size: int = 0
    checks: int = 0
    add_injective: bool = True
    remove_injective: bool = True
    add_in_target: bool = True
    remove_in_target: bool = True
    contiguous: bool = True
    max_add_cost: int = 0
    max_remove_cost: int = 0
    naive_collisions: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.add_injective and self.remove_injective and self.add_in_target
                and self.remove_in_target and self.contiguous and self.max_add_cost <= 1
                and self.max_remove_cost <= 2 and self.naive_collisions >= 1)


def verify_lemma(m: int, n: int, h: int) -> LemmaReport:
    """Exhaustively check the map properties for one (m, n, h).

    Datasets are distinct even integers; the extra point takes every possible
    sorted position. Only positions matter for the properties checked.
    """
    rep = LemmaReport(m, n, h)
    goods = list(enumerate_good(m, n, h))
    rep.good_size = len(goods)
    base = [2 * i + 2 for i in range(n)]

    for pos in range(n + 1):
        extra = 2 * pos + 1
        X, Xp = base, sorted(base + [extra])
        pair = AdjacentPair.from_datasets(X, Xp)
        seen = set()
        for rv in goods:
            out = map_add(rv, pair.s, h)
            rep.checks += 1
            if out in seen:
                rep.add_injective = False
                rep.failures.append(("add-collision", rv, pair.s))
            seen.add(out)
            if not good_set_contains(out, m, n + 1, h):
                rep.add_in_target = False
            if not is_contiguous(shift_vector(rv, out)):
                rep.contiguous = False
            rep.max_add_cost = max(rep.max_add_cost, slice_substitution_cost(pair.X, pair.X_prime, rv, out, h))

    big = [2 * i + 2 for i in range(n + 1)]
    for pos in range(n + 1):
        X, Xp = big, big[:pos] + big[pos + 1:]
        pair = AdjacentPair.from_datasets(X, Xp)
        seen, seen_naive = set(), set()
        for rv in goods:
            out = map_remove(rv, pair.s, h)
            rep.checks += 1
            if out in seen:
                rep.remove_injective = False
                rep.failures.append(("remove-collision", rv, pair.s))
            seen.add(out)
            if not good_set_contains(out, m, n, h - 1):
                rep.remove_in_target = False
            if not is_contiguous(shift_vector(rv, out)):
                rep.contiguous = False
            rep.max_remove_cost = max(rep.max_remove_cost,
                                      slice_substitution_cost(pair.X, pair.X_prime, rv, out, h))
            naive = naive_map_remove(rv, pair.s, h)
            if naive in seen_naive:
                rep.naive_collisions += 1
            seen_naive.add(naive)
    return rep


def utility_shift_bound(values, r: int) -> np.ndarray:
    """Interval utilities ``-| #{x < right end} - r |`` for sorted ``values`` (helper for sensitivity checks)."""
    values = np.asarray(values)
    rights = np.concatenate((values, [np.inf]))
    below = np.searchsorted(values, rights, side="left")
    return -np.abs(below - r)
