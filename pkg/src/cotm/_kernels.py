"""Hot training and inference kernels.

The kernels are numba-jitted scalar loops over packed 64-bit literal
words. Setting COTM_DISABLE_NUMBA=1 (or running without numba installed)
makes the pure-numpy implementations in `learn` and `model` the default;
an explicit ``backend=`` argument overrides the default either way.

The hash chain here must stay bit-identical to `rng.RandomSource`: the
kernels fold coordinates with the same splitmix64 finalizer so that the
fused loops, the vectorized fallback and the dense oracle all read the
same draws. `tests/test_rng.py` cross-checks the two implementations.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError

_DISABLED = os.environ.get("COTM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

if not _DISABLED:
    try:
        from numba import njit, prange

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_AVAILABLE = False
else:
    NUMBA_AVAILABLE = False

DEFAULT_BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ConfigError(f"backend must be 'numba' or 'numpy', got {backend!r}")
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise ConfigError(
            "numba backend requested but numba is unavailable "
            "(not installed, or disabled via COTM_DISABLE_NUMBA)"
        )
    return backend


if NUMBA_AVAILABLE:
    _INV_2_53 = 1.0 / float(1 << 53)
    _SITE_TYPE_I = 1
    _SITE_TYPE_II = 2
    _SITE_TYPE_IA = 3
    _SITE_TYPE_IB = 4

    @njit(cache=True, inline="always")
    def _mix(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True, inline="always")
    def _chain(h, v):
        return _mix(h ^ np.uint64(v))

    @njit(cache=True, inline="always")
    def _unit(h):
        return np.float64(h >> np.uint64(11)) * _INV_2_53

    @njit(cache=True)
    def kernel_uniform(base_key, epoch, example, site, i, j, k):
        """Scalar draw matching RandomSource.uniform; used by tests."""
        h = np.uint64(base_key)
        h = _chain(h, epoch)
        h = _chain(h, example)
        h = _chain(h, site)
        h = _chain(h, i)
        h = _chain(h, j)
        h = _chain(h, k)
        return _unit(h)

    @njit(cache=True)
    def fit_batch(
        memory,
        weights,
        frozen,
        actions,
        include_words,
        lit_words,
        y_rows,
        visit,
        keys,
        epoch,
        base_key,
        depth,
        margin,
        inv_s,
        gate_ia,
        boost,
        e_scale,
    ):
        """Train on a sequence of examples, updating the model in place.

        `visit[t]` indexes rows of lit_words/y_rows; `keys[t]` is the
        example index used for draw addressing. All selections and
        feedback for one example are taken from the pre-update state,
        memory deltas accumulate across outputs and clip once.
        """
        n, two_o = memory.shape
        m = weights.shape[0]
        wd = include_words.shape[1]
        hi_state = 2 * depth

        lit = np.empty(two_o, dtype=np.uint8)
        c = np.empty(n, dtype=np.uint8)
        votes = np.empty(m, dtype=np.int64)
        delta_mem = np.zeros((n, two_o), dtype=np.int32)
        delta_w = np.zeros((m, n), dtype=np.int32)
        touched = np.zeros(n, dtype=np.uint8)
        touch_list = np.empty(n, dtype=np.int64)
        pair_list = np.empty(m * n, dtype=np.int64)

        h_epoch = _chain(np.uint64(base_key), epoch)

        for step in range(visit.shape[0]):
            row = visit[step]

            for w in range(wd):
                word = lit_words[row, w]
                base = w * 64
                for b in range(64):
                    kk = base + b
                    if kk >= two_o:
                        break
                    lit[kk] = np.uint8((word >> np.uint64(b)) & np.uint64(1))

            for j in range(n):
                fired = True
                for w in range(wd):
                    if (include_words[j, w] & ~lit_words[row, w]) != np.uint64(0):
                        fired = False
                        break
                c[j] = 1 if fired else 0

            for i in range(m):
                votes[i] = 0
            for j in range(n):
                if c[j]:
                    for i in range(m):
                        votes[i] += weights[i, j]

            h_ex = _chain(h_epoch, keys[step])
            n_touched = 0
            n_pairs = 0

            for i in range(m):
                y_i = y_rows[row, i]
                q = margin if y_i else -margin
                v = votes[i]
                if v > margin:
                    v = margin
                elif v < -margin:
                    v = -margin
                d_i = abs(q - v) / (2.0 * margin)
                if d_i <= 0.0:
                    continue
                d_ii = d_i * e_scale
                h1 = _chain(_chain(h_ex, _SITE_TYPE_I), i)
                h2 = _chain(_chain(h_ex, _SITE_TYPE_II), i)
                ha = _chain(_chain(h_ex, _SITE_TYPE_IA), i)
                hb = _chain(_chain(h_ex, _SITE_TYPE_IB), i)
                dw = 1 if y_i else -1

                for j in range(n):
                    if frozen[i, j] == 1 and weights[i, j] == 0:
                        continue  # structurally disconnected pair
                    positive = weights[i, j] >= 0
                    if (y_i == 1) == positive:
                        if _unit(_chain(_chain(h1, j), 0)) >= d_i:
                            continue
                        if touched[j] == 0:
                            touched[j] = 1
                            touch_list[n_touched] = j
                            n_touched += 1
                        hbj = _chain(hb, j)
                        if c[j]:
                            delta_w[i, j] += dw
                            pair_list[n_pairs] = i * n + j
                            n_pairs += 1
                            if boost:
                                for k in range(two_o):
                                    if lit[k]:
                                        delta_mem[j, k] += 1
                                    elif _unit(_chain(hbj, k)) < inv_s:
                                        delta_mem[j, k] -= 1
                            else:
                                haj = _chain(ha, j)
                                for k in range(two_o):
                                    if lit[k]:
                                        if _unit(_chain(haj, k)) < gate_ia:
                                            delta_mem[j, k] += 1
                                    elif _unit(_chain(hbj, k)) < inv_s:
                                        delta_mem[j, k] -= 1
                        else:
                            for k in range(two_o):
                                if _unit(_chain(hbj, k)) < inv_s:
                                    delta_mem[j, k] -= 1
                    else:
                        if _unit(_chain(_chain(h2, j), 0)) >= d_ii:
                            continue
                        if c[j]:
                            delta_w[i, j] += dw
                            pair_list[n_pairs] = i * n + j
                            n_pairs += 1
                            if touched[j] == 0:
                                touched[j] = 1
                                touch_list[n_touched] = j
                                n_touched += 1
                            for k in range(two_o):
                                if lit[k] == 0 and actions[j, k] == 0:
                                    delta_mem[j, k] += 1

            for t in range(n_touched):
                j = touch_list[t]
                for k in range(two_o):
                    dme = delta_mem[j, k]
                    if dme != 0:
                        nv = memory[j, k] + dme
                        if nv < 1:
                            nv = 1
                        elif nv > hi_state:
                            nv = hi_state
                        memory[j, k] = nv
                        delta_mem[j, k] = 0
                        na = np.uint8(1) if nv > depth else np.uint8(0)
                        if na != actions[j, k]:
                            actions[j, k] = na
                            include_words[j, k >> 6] ^= np.uint64(1) << np.uint64(k & 63)
                touched[j] = 0

            for p in range(n_pairs):
                code = pair_list[p]
                i = code // n
                j = code % n
                if frozen[i, j] == 0:
                    weights[i, j] += delta_w[i, j]
                delta_w[i, j] = 0

    @njit(cache=True, parallel=True)
    def votes_batch(include_words, nonempty, weights, lit_words, zero_empty, out):
        """Vote sums for a batch of packed literal rows (parallel over rows)."""
        count = lit_words.shape[0]
        n = include_words.shape[0]
        m = weights.shape[0]
        wd = include_words.shape[1]
        for e in prange(count):
            for i in range(m):
                out[e, i] = 0
            for j in range(n):
                fired = True
                for w in range(wd):
                    if (include_words[j, w] & ~lit_words[e, w]) != np.uint64(0):
                        fired = False
                        break
                if fired:
                    if zero_empty and nonempty[j] == 0:
                        continue
                    for i in range(m):
                        out[e, i] += weights[i, j]
