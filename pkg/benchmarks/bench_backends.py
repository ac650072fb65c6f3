"""Benchmark the numba kernels against the pure-numpy fallback.

Times one training epoch and one batch-vote pass on synthetic data at a
few sizes. Run from the repository root:

    python benchmarks/bench_backends.py

The numpy path is the portability/debugging fallback (selected globally
with COTM_DISABLE_NUMBA=1); expect it to trail the kernels by one to two
orders of magnitude on training.
"""

import time

import numpy as np

from cotm import _kernels
from cotm.data import Dataset
from cotm.learn import fit_epoch
from cotm.model import Config, init_coalesced, vote_matrix
from cotm.rng import RandomSource


def synthetic(count, n_inputs, n_outputs, seed=0):
    gen = np.random.default_rng(seed)
    X = gen.integers(0, 2, size=(count, n_inputs)).astype(np.uint8)
    labels = gen.integers(0, n_outputs, size=count)
    Y = np.zeros((count, n_outputs), dtype=np.uint8)
    Y[np.arange(count), labels] = 1
    return Dataset.from_arrays(X, Y)


def time_backend(backend, config, dataset, repeats=3):
    fit_seconds = []
    vote_seconds = []
    for rep in range(repeats):
        model = init_coalesced(config)
        rng = RandomSource(config.seed)
        start = time.perf_counter()
        fit_epoch(model, dataset, rng, epoch=rep, backend=backend)
        fit_seconds.append(time.perf_counter() - start)
        start = time.perf_counter()
        vote_matrix(model, dataset, backend=backend)
        vote_seconds.append(time.perf_counter() - start)
    return min(fit_seconds), min(vote_seconds)


def main():
    backends = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    cases = [
        ("small  (500 x o=16,  n=128)", 500, 16, 2, 128, 50),
        ("medium (2500 x o=16, n=1024)", 2500, 16, 2, 1024, 400),
        ("wide   (500 x o=256, n=512)", 500, 256, 4, 512, 200),
    ]
    print(f"default backend: {_kernels.DEFAULT_BACKEND}")
    header = f"{'case':32s} {'backend':8s} {'fit epoch':>12s} {'batch votes':>12s}"
    print(header)
    print("-" * len(header))
    for label, count, o, m, n, t in cases:
        dataset = synthetic(count, o, m)
        config = Config(
            n_outputs=m, n_clauses=n, n_inputs=o, memory_depth=64,
            voting_margin=t, specificity=5.0, seed=3,
        )
        results = {}
        for backend in backends:
            if backend == "numba":  # compile outside the timed region
                warm = init_coalesced(config)
                fit_epoch(warm, dataset, RandomSource(3), backend="numba")
                vote_matrix(warm, dataset, backend="numba")
            results[backend] = time_backend(backend, config, dataset)
            fit_s, vote_s = results[backend]
            print(f"{label:32s} {backend:8s} {fit_s * 1e3:10.1f}ms {vote_s * 1e3:10.1f}ms")
        if len(results) == 2:
            speedup = results["numpy"][0] / results["numba"][0]
            print(f"{'':32s} {'':8s} {'fit speedup:':>12s} {speedup:10.1f}x")


if __name__ == "__main__":
    main()
