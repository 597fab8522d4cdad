"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

Public names (``countsketch_apply``, ``countsketch_decode``,
``max_pairwise_overlap``) are bound to the jitted versions when numba is
importable and the environment variable ``SKETCHREG_NO_NUMBA`` is unset;
setting ``SKETCHREG_NO_NUMBA=1`` (or a failed numba import) selects the
numpy fallbacks.  Both implementations of each kernel produce identical
output; ``benchmarks/bench_kernels.py`` times them against each other.
"""

import os
import warnings

import numpy as np

_NUMBA_DISABLED = os.environ.get("SKETCHREG_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _NUMBA_DISABLED:
        raise ImportError("numba disabled via SKETCHREG_NO_NUMBA")
    from numba import njit, prange

    # An outdated TBB makes numba fall back to another threading layer and
    # warn about it on the first parallel call; the fallback is fine.
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# CountSketch table update: out[tau, buckets[tau, i]] += signs[tau, i] * y[i]

def countsketch_apply_numpy(y, buckets, signs, n_buckets):
    t = buckets.shape[0]
    out = np.empty((t, n_buckets), dtype=np.float64)
    for tau in range(t):
        out[tau] = np.bincount(buckets[tau], weights=signs[tau] * y, minlength=n_buckets)
    return out


# ---------------------------------------------------------------------------
# CountSketch decode: per index, lower median over tables of the signed
# bucket contents.

def countsketch_decode_numpy(tables, buckets, signs):
    t = buckets.shape[0]
    vals = signs * np.take_along_axis(tables, buckets, axis=1)
    vals = np.sort(vals, axis=0)
    return vals[(t - 1) // 2]


# ---------------------------------------------------------------------------
# Maximum pairwise intersection size among the rows of a 0/1 incidence
# matrix (n_members x universe).  Returns (max_overlap, i, j) with i < j the
# first witness pair attaining it; (0, -1, -1) when there are fewer than two
# rows.

def max_pairwise_overlap_numpy(incidence, block=2048):
    inc = np.ascontiguousarray(incidence, dtype=np.float32)
    n = inc.shape[0]
    if n < 2:
        return 0, -1, -1
    best, bi, bj = -1, -1, -1
    for s0 in range(0, n, block):
        a = inc[s0 : s0 + block]
        for s1 in range(s0, n, block):
            c = a @ inc[s1 : s1 + block].T
            if s0 == s1:
                c[np.tril_indices_from(c)] = -1.0
            flat = int(np.argmax(c))
            v = c.flat[flat]
            if v > best:
                best = v
                bi = s0 + flat // c.shape[1]
                bj = s1 + flat % c.shape[1]
    return int(best), bi, bj


if HAS_NUMBA:

    @njit(cache=True)
    def _countsketch_apply_jit(y, buckets, signs, n_buckets):
        t, n = buckets.shape
        out = np.zeros((t, n_buckets), dtype=np.float64)
        for tau in range(t):
            for i in range(n):
                out[tau, buckets[tau, i]] += signs[tau, i] * y[i]
        return out

    @njit(cache=True)
    def _countsketch_decode_jit(tables, buckets, signs):
        t, n = buckets.shape
        est = np.empty(n, dtype=np.float64)
        buf = np.empty(t, dtype=np.float64)
        for i in range(n):
            for tau in range(t):
                buf[tau] = signs[tau, i] * tables[tau, buckets[tau, i]]
            # insertion sort; t is small
            for a in range(1, t):
                v = buf[a]
                pos = a - 1
                while pos >= 0 and buf[pos] > v:
                    buf[pos + 1] = buf[pos]
                    pos -= 1
                buf[pos + 1] = v
            est[i] = buf[(t - 1) // 2]
        return est

    @njit(inline="always")
    def _popcount64(x):
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + (
            (x >> np.uint64(2)) & np.uint64(0x3333333333333333)
        )
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)

    @njit(parallel=True, cache=True)
    def _max_overlap_bits_jit(bits):
        n, words = bits.shape
        row_best = np.full(n, -1, dtype=np.int64)
        row_arg = np.full(n, -1, dtype=np.int64)
        for i in prange(n - 1):
            loc = -1
            arg = -1
            for j in range(i + 1, n):
                s = 0
                for w in range(words):
                    s += int(_popcount64(bits[i, w] & bits[j, w]))
                if s > loc:
                    loc = s
                    arg = j
            row_best[i] = loc
            row_arg[i] = arg
        return row_best, row_arg

    def _pack_bits(incidence):
        inc = np.ascontiguousarray(incidence, dtype=np.uint8)
        packed = np.packbits(inc, axis=1, bitorder="little")
        pad = (-packed.shape[1]) % 8
        if pad:
            packed = np.hstack([packed, np.zeros((packed.shape[0], pad), dtype=np.uint8)])
        return packed.view(np.uint64)

    def max_pairwise_overlap_numba(incidence):
        if incidence.shape[0] < 2:
            return 0, -1, -1
        bits = _pack_bits(incidence)
        row_best, row_arg = _max_overlap_bits_jit(bits)
        i = int(np.argmax(row_best))
        return int(row_best[i]), i, int(row_arg[i])

    def countsketch_apply_numba(y, buckets, signs, n_buckets):
        return _countsketch_apply_jit(
            np.ascontiguousarray(y, dtype=np.float64), buckets, signs, n_buckets
        )

    def countsketch_decode_numba(tables, buckets, signs):
        return _countsketch_decode_jit(np.ascontiguousarray(tables), buckets, signs)

    countsketch_apply = countsketch_apply_numba
    countsketch_decode = countsketch_decode_numba
    max_pairwise_overlap = max_pairwise_overlap_numba
else:
    countsketch_apply = countsketch_apply_numpy
    countsketch_decode = countsketch_decode_numpy
    max_pairwise_overlap = max_pairwise_overlap_numpy
