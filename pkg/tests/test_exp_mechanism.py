import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpquantiles.errors import EmptyDatasetError
from dpquantiles.exp_mechanism import (SortedDataset, exact_interval_probabilities, single_quantile,
                                       slice_bounds, slice_median, slice_median_param)


def brute_probs(values, r, eps, lo, hi):
    # independent re-count: utility of each interval straight from its right end
    edges = [lo] + list(values) + [hi]
    weights = []
    for k in range(len(values) + 1):
        right = edges[k + 1]
        below = sum(1 for x in values if x < right) if k < len(values) else len(values)
        length = edges[k + 1] - edges[k]
        weights.append(math.exp(eps / 2 * -abs(below - r)) * length)
    total = sum(weights)
    return np.array([w / total for w in weights])


def test_sorted_dataset_validation():
    X = SortedDataset.from_values([3, 1, 2], (0, 10))
    assert X.n == 3 and len(X) == 3 and X.min_gap == 1 and X.psi == 10
    assert X.rank(2.5) == 2 and X.rank(2.0) == 1 and X.rank(-1) == 0
    with pytest.raises(EmptyDatasetError):
        SortedDataset(np.array([]), (0, 1), 0.1)
    with pytest.raises(ValueError):
        SortedDataset(np.array([0.0, 1.0]), (0, 2), 0.5)  # touches a
    with pytest.raises(ValueError):
        SortedDataset(np.array([1.0, 1.2]), (0, 2), 0.5)  # gap too small
    with pytest.raises(ValueError):
        SortedDataset(np.array([1.0]), (2, 1), 0.5)


def test_exact_probabilities_worked_example():
    p = exact_interval_probabilities(np.array([1.0, 2, 3]), 2, 2.0, (0, 10))
    w = np.array([math.exp(-2), math.exp(-1), 1, 7 * math.exp(-1)])
    np.testing.assert_allclose(p, w / w.sum(), rtol=1e-12)


def test_exact_probabilities_two_interval_closed_form():
    p = exact_interval_probabilities(np.array([5.0]), 1, 2.0, (0, 10))
    e = math.exp(-1)
    np.testing.assert_allclose(p, [e / (e + 1), 1 / (e + 1)], rtol=1e-12)


def test_exact_probabilities_uniform_at_zero_epsilon():
    p = exact_interval_probabilities(np.array([1.0, 2, 3, 4]), 2, 0.0, (0, 5))
    np.testing.assert_allclose(p, np.full(5, 0.2), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 99), min_size=1, max_size=6, unique=True), st.data(),
       st.floats(0.0, 8.0))
def test_exact_probabilities_match_brute_force(vals, data, eps):
    values = np.sort(np.array(vals, dtype=float))
    r = data.draw(st.integers(1, values.size))
    np.testing.assert_allclose(exact_interval_probabilities(values, r, eps, (0, 100)),
                               brute_probs(values, r, eps, 0, 100), rtol=1e-10, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 100), st.integers(0, 2**32 - 1), st.floats(0.0, 10.0))
def test_normalisation(n, seed, eps):
    rng = np.random.default_rng(seed)
    values = np.sort(rng.choice(np.arange(1, 1000), size=n, replace=False)).astype(float)
    r = int(rng.integers(1, n + 1))
    p = exact_interval_probabilities(values, r, eps, (0, 1000))
    assert abs(p.sum() - 1) < 1e-12 and np.all(p >= 0)


def test_true_interval_has_zero_utility():
    for n in range(1, 51):
        values = np.arange(1, n + 1, dtype=float)
        for r in range(1, n + 1):
            p = exact_interval_probabilities(values, r, math.inf, (0, n + 1))
            # all mass on [x_(r), x_(r+1)]: the interval holding the rank-r boundary
            assert p[r] == pytest.approx(1.0)


def test_single_quantile_infinite_epsilon():
    rng = np.random.default_rng(0)
    z = single_quantile(np.array([1.0, 2, 3]), 2, math.inf, (0, 10), rng, size=1000)
    assert np.all((z >= 2) & (z <= 3))


def test_single_quantile_zero_epsilon_is_uniform():
    rng = np.random.default_rng(1)
    z = single_quantile(np.array([1.0, 2, 3]), 2, 0.0, (0, 10), rng, size=200_000)
    hist, _ = np.histogram(z, bins=10, range=(0, 10))
    np.testing.assert_allclose(hist / z.size, 0.1, atol=0.005)


def test_single_quantile_sampler_fidelity():
    rng = np.random.default_rng(2)
    values = np.array([1.0, 2, 3])
    z = single_quantile(values, 2, 2.0, (0, 10), rng, size=10**5)
    idx = np.searchsorted(values, z)
    emp = np.bincount(idx, minlength=4) / z.size
    assert 0.5 * np.abs(emp - exact_interval_probabilities(values, 2, 2.0, (0, 10))).sum() < 0.01


def test_single_quantile_errors():
    rng = np.random.default_rng(3)
    with pytest.raises(EmptyDatasetError):
        single_quantile(np.array([]), 1, 1.0, (0, 1), rng)
    for r in (0, 4):
        with pytest.raises(ValueError):
            single_quantile(np.array([1.0, 2, 3]), r, 1.0, (0, 10), rng)
    with pytest.raises(ValueError):
        single_quantile(np.array([1.0, 2, 3]), 1, -1.0, (0, 10), rng)
    with pytest.raises(ValueError):
        single_quantile(np.array([1.0, 2, 30]), 1, 1.0, (0, 10), rng)
    with pytest.raises(ValueError):
        single_quantile(np.array([1.0, 2, 3]), 1, 1.0, None, rng)


def test_single_quantile_large_epsilon_no_overflow():
    values = np.arange(1, 2001, dtype=float)
    z = single_quantile(values, 1000, 10.0, (0, 2001), np.random.default_rng(4), size=100)
    assert np.all(np.isfinite(z)) and np.all(np.abs(np.searchsorted(values, z) - 1000) <= 3)


def test_slice_median_param_values():
    assert slice_median_param(0.5, 0.05, 100, 1 / 5e5, 200) == 106
    # (2/eps) ln(2 psi / beta) = 1 -> ell = 0
    psi, beta = 10.0, 0.5
    eps = 2 * math.log(2 * psi / beta)
    assert slice_median_param(eps, beta, psi, 1.0, 1) == 0
    with pytest.raises(ValueError):
        slice_median_param(0, 0.05, 100, 1, 1)
    with pytest.raises(ValueError):
        slice_median_param(1, 1.0, 100, 1, 1)


def test_slice_bounds_and_errors():
    assert slice_bounds(10, 3) == (7, 13)
    X = SortedDataset(np.arange(1, 21, dtype=float), (0, 21), 1.0)
    with pytest.raises(ValueError):
        slice_median(X, 2, 3, 1.0)
    with pytest.raises(ValueError):
        slice_median(X, 18, 3, 1.0)
    with pytest.raises(ValueError):
        slice_median(X, 10, 0, 1.0)


def test_slice_median_infinite_epsilon_targets_center_gap():
    X = SortedDataset(np.arange(1, 101, dtype=float), (0, 101), 1.0)
    rng = np.random.default_rng(5)
    for c in (5, 50, 90):
        z = slice_median(X, c, 5, math.inf, rng=rng)
        assert X.values[c - 1] <= z <= X.values[c]


def test_slice_median_monte_carlo():
    n = 1001
    X = SortedDataset(np.arange(1, n + 1) / (n + 1) * 100, (0, 100), 100 / (n + 1))
    ell = slice_median_param(1.0, 0.05, 100, X.min_gap, 1)
    rng = np.random.default_rng(6)
    errs = [abs(X.rank(slice_median(X, 500, ell + 1, 1.0, rng=rng)) - 500) for _ in range(1000)]
    assert np.mean(np.array(errs) <= ell) >= 0.95


def test_slice_median_respects_range():
    X = SortedDataset(np.arange(1, 101, dtype=float), (0, 101), 1.0)
    rng = np.random.default_rng(7)
    for _ in range(200):
        z = slice_median(X, 50, 20, 0.1, (45.5, 52.5), rng)
        assert 45.5 <= z <= 52.5


def test_escape_mass_bound():
    # exact mass outside the slice's extreme intervals <= 2 psi exp(-(eps/2)(ell+1))
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(20, 200))
        g = 1.0
        b = float(n + 1 + rng.integers(0, 50))
        values = np.arange(1, n + 1, dtype=float) * g
        eps = float(rng.uniform(0.2, 3))
        h = int(rng.integers(1, n // 2))
        c = int(rng.integers(h, n - h + 1))
        piece = values[c - h:c + h]
        p = exact_interval_probabilities(piece, h, eps, (0, b))
        outside = p[0] + p[-1]
        ell = h - 1
        assert outside <= 2 * (b / g) * math.exp(-(eps / 2) * (ell + 1)) + 1e-12


def test_utility_sensitivity_small_grid():
    grid = np.arange(12, dtype=float)
    zs = np.arange(-0.5, 12.5, 1.0)
    for n in range(1, 6):
        for subset in itertools.combinations(range(12), n):
            xs = grid[list(subset)]
            base = np.searchsorted(xs, zs)
            for i in range(n):
                for v in set(range(12)) - set(subset):
                    ys = np.sort(np.concatenate((np.delete(xs, i), [grid[v]])))
                    assert np.abs(np.searchsorted(ys, zs) - base).max() <= 1
