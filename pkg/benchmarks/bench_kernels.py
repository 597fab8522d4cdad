"""Time the numba kernels against their pure-numpy fallbacks.

Covers the three hot loops: CountSketch apply, CountSketch decode, and the
all-pairs support-overlap scan used when validating membership families.
Run as a script; pass --quick for a smaller problem set.

The numpy path is always available.  The numba path needs an importable
numba and SKETCHREG_NO_NUMBA unset (the library picks its default path the
same way).
"""

import argparse
import time

import numpy as np

from sketchreg import RngStream, build_countsketch, build_support_family
from sketchreg import _kernels


def best_of(fn, repeats=5):
    """Best wall time over `repeats` runs (first run is a free warmup)."""
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def report(name, t_numpy, t_numba):
    if t_numba is None:
        print(f"{name:28s} numpy {t_numpy * 1e3:9.2f} ms   numba     (unavailable)")
    else:
        print(
            f"{name:28s} numpy {t_numpy * 1e3:9.2f} ms   "
            f"numba {t_numba * 1e3:9.2f} ms   x{t_numpy / t_numba:6.2f}"
        )


def bench_countsketch(n, b, t, repeats):
    cs = build_countsketch(b, t, n, RngStream(7, 0))
    y = RngStream(7, 1).generator().standard_normal(n)

    out_np = _kernels.countsketch_apply_numpy(y, cs.buckets, cs.signs, b)
    t_apply_np = best_of(lambda: _kernels.countsketch_apply_numpy(y, cs.buckets, cs.signs, b), repeats)
    t_apply_nb = None
    if _kernels.HAS_NUMBA:
        out_nb = _kernels.countsketch_apply_numba(y, cs.buckets, cs.signs, b)
        assert np.allclose(out_np, out_nb)
        t_apply_nb = best_of(lambda: _kernels.countsketch_apply_numba(y, cs.buckets, cs.signs, b), repeats)
    report(f"apply  n={n} b={b} t={t}", t_apply_np, t_apply_nb)

    dec_np = _kernels.countsketch_decode_numpy(out_np, cs.buckets, cs.signs)
    t_dec_np = best_of(lambda: _kernels.countsketch_decode_numpy(out_np, cs.buckets, cs.signs), repeats)
    t_dec_nb = None
    if _kernels.HAS_NUMBA:
        dec_nb = _kernels.countsketch_decode_numba(out_np, cs.buckets, cs.signs)
        assert np.allclose(dec_np, dec_nb)
        t_dec_nb = best_of(lambda: _kernels.countsketch_decode_numba(out_np, cs.buckets, cs.signs), repeats)
    report(f"decode n={n} b={b} t={t}", t_dec_np, t_dec_nb)


def bench_overlap(d, k, t, repeats):
    fam = build_support_family(d, k, t, RngStream(7, 2))
    cores = fam.members[:, 1:] - 2
    incidence = np.zeros((fam.size, fam.d - 1), dtype=np.uint8)
    incidence[np.arange(fam.size)[:, None], cores] = 1

    res_np = _kernels.max_pairwise_overlap_numpy(incidence)
    t_np = best_of(lambda: _kernels.max_pairwise_overlap_numpy(incidence), repeats)
    t_nb = None
    if _kernels.HAS_NUMBA:
        res_nb = _kernels.max_pairwise_overlap_numba(incidence)
        assert res_np[0] == res_nb[0], (res_np, res_nb)
        t_nb = best_of(lambda: _kernels.max_pairwise_overlap_numba(incidence), repeats)
    report(f"overlap N={fam.size} d={d}", t_np, t_nb)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller sizes, fewer repeats")
    args = ap.parse_args()
    repeats = 3 if args.quick else 5

    print(f"numba path available: {_kernels.HAS_NUMBA}")
    if args.quick:
        bench_countsketch(n=100_000, b=512, t=5, repeats=repeats)
        bench_overlap(d=102, k=3, t=1, repeats=repeats)
    else:
        bench_countsketch(n=1_000_000, b=2048, t=7, repeats=repeats)
        bench_countsketch(n=5_000_000, b=256, t=5, repeats=repeats)
        bench_overlap(d=102, k=5, t=3, repeats=repeats)


if __name__ == "__main__":
    main()
