"""Time the numba and numpy kernel paths against each other.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both paths receive the same pre-drawn inputs; results are checked to agree
before timing. The first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from dpquantiles import _kernels
from dpquantiles._backend import NUMBA_AVAILABLE
from dpquantiles.continual_counting import TreeMechanismConfig, draw_node_noise


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def prefix_case(m, k, trials):
    cfg = TreeMechanismConfig(m, 1.0, branching=k)
    noise = draw_node_noise(cfg, np.random.default_rng(0), size=trials)
    args = (noise, cfg.offsets, m, k, cfg.depth)
    return f"prefix_noise m={m} k={k} trials={trials}", args, _kernels.prefix_noise_numpy, _kernels.prefix_noise_numba


def em_case(n, draws):
    rng = np.random.default_rng(1)
    edges = np.concatenate(([0.0], np.sort(rng.uniform(1, 99, n)), [100.0]))
    args = (edges, n // 2, 0.5, rng.random(draws))
    return f"em_pick n={n} draws={draws}", args, _kernels.em_pick_numpy, _kernels.em_pick_numba


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba backend unavailable (unset DPQUANTILES_DISABLE_NUMBA)")

    cases = [prefix_case(256, 2, 1000), prefix_case(4096, 4, 200), prefix_case(200, 4, 1),
             em_case(1000, 1), em_case(100_000, 1), em_case(100_000, 64)]
    print(f"{'case':40s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, a, np_fn, nb_fn in cases:
        ref, got = np_fn(*a), nb_fn(*a)  # also compiles
        if ref.dtype.kind == "f":
            assert np.allclose(ref, got, atol=1e-9)
        else:
            assert np.mean(ref == got) >= 0.99
        t_np = best_of(lambda: np_fn(*a), args.repeat)
        t_nb = best_of(lambda: nb_fn(*a), args.repeat)
        print(f"{name:40s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
