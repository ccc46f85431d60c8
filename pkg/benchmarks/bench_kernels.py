"""Throughput comparison of the two slot-loop backends.

Runs the same seeded workload through the jit-compiled kernel and the pure
numpy/python fallback, reports slots per second for each, and checks that the
outputs are bit-identical along the way.

    python benchmarks/bench_kernels.py [--horizon N] [--repeats K]
"""

import argparse
import time

import numpy as np

from aojc.kernels import available_backends
from aojc.model import SystemParams, constant_sampling_table, uniform_policy
from aojc.simulator import run


def make_workloads():
    open_params = SystemParams(
        n_users=4,
        arrival_rates=np.array([0.04, 0.05, 0.06, 0.06]),
        service_rates=np.array([0.4, 0.6, 0.8, 0.94]),
        flip_prob=0.5,
        post_busy_prob=0.5,
        sampling_cost=5.0,
    )
    return [
        ("open / randomized", open_params, uniform_policy(4, 0.8), {}),
        ("open / max-age", open_params, constant_sampling_table(4, 0.8), {}),
        (
            "saturated / max-age",
            open_params,
            constant_sampling_table(4, 0.8),
            {"saturated": True, "subset": 0b1111},
        ),
    ]


def time_backend(backend, params, policy, horizon, repeats, mode):
    run(params, policy, 2_000, 0, backend=backend, **mode)  # warm up / compile
    best = np.inf
    metrics = None
    for r in range(repeats):
        t0 = time.perf_counter()
        metrics = run(params, policy, horizon, 12345, backend=backend, **mode)
        best = min(best, time.perf_counter() - t0)
    return best, metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=1_000_000)
    ap.add_argument("--python-horizon", type=int, default=100_000,
                    help="shorter horizon for the slow fallback")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'workload':24s} {'backend':8s} {'slots/s':>12s} {'wall':>9s}")

    for name, params, policy, mode in make_workloads():
        rates = {}
        for backend in backends:
            horizon = args.horizon if backend == "numba" else args.python_horizon
            wall, m = time_backend(backend, params, policy, horizon, args.repeats, mode)
            rates[backend] = horizon / wall
            print(f"{name:24s} {backend:8s} {horizon / wall:12.0f} {wall:8.3f}s")
        if "numba" in rates and "python" in rates:
            print(f"{'':24s} speedup  {rates['numba'] / rates['python']:10.1f}x")

        if len(backends) == 2:
            a = run(params, policy, 50_000, 7, backend=backends[0], **mode)
            b = run(params, policy, 50_000, 7, backend=backends[1], **mode)
            same = (
                a.samples == b.samples
                and np.array_equal(a.final_queues, b.final_queues)
                and np.array_equal(a.final_ages, b.final_ages)
            )
            print(f"{'':24s} backends agree bit-for-bit: {same}")


if __name__ == "__main__":
    main()
