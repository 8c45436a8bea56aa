"""Time the numba kernels against their numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
called once per backend before timing so numba compilation is excluded.
"""
import argparse
import time

import numpy as np

from littoral import _accel, kernels
from littoral.scene import ClutterModel, sample_clutter


def _best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _cases(rng):
    power = sample_clutter((128, 512), ClutterModel(), rng) ** 2
    cells = np.unique(rng.integers(0, 128, size=(3000, 2)).astype(float), axis=0)
    n = 200
    w = rng.random(n)
    m = rng.normal(scale=3.0, size=(n, 4))
    A = rng.normal(size=(n, 4, 4))
    P = A @ np.swapaxes(A, 1, 2) + np.eye(4)
    return {
        "ca_cfar 128x512": lambda be: kernels.cfar_mask(power, 7, 7, 6, 3, 1e-3, backend=be),
        "eps graph 3000 pts": lambda be: kernels.eps_neighbours(cells, 4.0, backend=be),
        "dbscan 3000 pts": lambda be: kernels.dbscan_labels(cells, 4.0, 2, backend=be),
        "gm merge 200 comps": lambda be: kernels.merge_components(w, m, P, 4.0, backend=be),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<22}{'numba ms':>10}{'numpy ms':>10}{'speed-up':>10}")
    for name, fn in cases.items():
        t_nb = _best_of(lambda: fn("numba"), args.repeat)
        t_np = _best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:<22}{t_nb * 1e3:>10.2f}{t_np * 1e3:>10.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
