"""Compare the numba and pure-numpy trajectory engine backends.

Run:  python3 benchmarks/bench_trajectory.py
"""

import time

import numpy as np

from critsense.kernels import CountingKernelSetup, get_backend, backend_name
from critsense.model import g_critical, params_at
from critsense import trajectories


def bench(backend: str, setup, n_bins, grid_bins, n_traj: int) -> float:
    # warm up (JIT compilation for numba)
    trajectories.fast_sample(setup, n_bins, grid_bins, 0, 0, backend=backend)
    t0 = time.perf_counter()
    for idx in range(n_traj):
        clicks, lg, nb = trajectories.fast_sample(
            setup, n_bins, grid_bins, 12345, idx, backend=backend)
        trajectories.fast_replay(setup, n_bins, clicks, grid_bins,
                                 backend=backend)
    return time.perf_counter() - t0


def main():
    p = params_at(g=g_critical(1.0, 0.1), eta=10, n_cutoff=24)
    dt = 0.004
    t_final = 500.0
    n_bins = int(round(t_final / dt))
    grid_bins = np.unique(np.geomspace(10, n_bins, 24).astype(np.int64))
    setup = CountingKernelSetup(p, dt)
    n_traj = 200

    print(f"eta={p.eta:g} n_cutoff={p.n_cutoff} t_final={t_final:g} "
          f"n_bins={n_bins} n_traj={n_traj}")
    results = {}
    for backend in ("numpy", "numba"):
        try:
            resolved = backend_name(get_backend(backend))
        except ImportError:
            print(f"{backend}: unavailable")
            continue
        elapsed = bench(backend, setup, n_bins, grid_bins, n_traj)
        results[resolved] = elapsed
        print(f"{resolved:6s}: {elapsed:8.3f} s "
              f"({1e3 * elapsed / n_traj:.3f} ms per sample+replay)")
    if len(results) == 2:
        print(f"speedup: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
