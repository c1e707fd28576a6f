"""Throughput comparison of the numeric backends.

Times the fixed-step RK4 kernel on both built-in models for a single
extremal and for a batch, which brackets the two usage patterns: one-shot
integration (CLI ``shoot``, exponential map) and batched finite-difference
Jacobians.  Run as ``python benchmarks/bench_backends.py``.
"""
from __future__ import annotations

import time

import numpy as np

from ssgeo.backends import get_backend
from ssgeo.models import MODEL_IDS, get_model

NSTEPS = 1000
T_END = 1.0
REPEATS = 5


def best_time(backend, pack, x0, xi0) -> float:
    backend.rk4_flow(pack, x0, xi0, T_END, NSTEPS)  # warm-up
    samples = []
    for _ in range(REPEATS):
        start = time.perf_counter()
        backend.rk4_flow(pack, x0, xi0, T_END, NSTEPS)
        samples.append(time.perf_counter() - start)
    return min(samples)


def main() -> None:
    pure = get_backend("pure")
    try:
        compiled = get_backend("compiled")
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"rk4_flow, {NSTEPS} steps to t={T_END}, best of {REPEATS}")
    print(f"{'model':<22}{'batch':>6}{'pure [ms]':>12}{'compiled [ms]':>15}{'speedup':>9}")
    for model_id in sorted(MODEL_IDS):
        field = get_model(model_id)
        for batch in (1, 16):
            x0 = np.zeros((batch, field.dim))
            xi0 = rng.normal(size=(batch, field.dim))
            t_pure = best_time(pure, field.pack, x0, xi0)
            t_compiled = best_time(compiled, field.pack, x0, xi0)
            print(
                f"{model_id:<22}{batch:>6}{1e3 * t_pure:>12.2f}"
                f"{1e3 * t_compiled:>15.2f}{t_pure / t_compiled:>8.1f}x"
            )


if __name__ == "__main__":
    main()
