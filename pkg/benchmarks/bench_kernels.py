"""Compiled vs numpy-fallback timings for the image-source and matched-filter kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from rirsf import _kernels_py
from rirsf._backend import COMPILED, kernels
from rirsf.room import SINC_RESOLUTION, SINC_TAPS, ArrayGeometry, RoomSpec, _rir_length, _sinc_table


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def ism_case(rt60=0.6):
    room = RoomSpec((5.0, 4.0, 3.0), rt60)
    src = np.array([1.5, 2.2, 1.6])
    arr = ArrayGeometry.linear([2.0, 1.0, 1.2])
    n = _rir_length(room, 16000)
    args = (np.asarray(room.dims), src, np.ascontiguousarray(arr.mic_positions), 0.85, 16000.0,
            343.0, -1, _sinc_table(SINC_TAPS, SINC_RESOLUTION))
    return args, (arr.n_mics, n)


def mf_case(frames=400, bins=257, k=20, seed=0):
    rng = np.random.default_rng(seed)
    spec = rng.standard_normal((frames, bins)) + 1j * rng.standard_normal((frames, bins))
    ker = rng.standard_normal((k, bins)) + 1j * rng.standard_normal((k, bins))
    return spec, ker, k


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rt60", type=float, default=0.6)
    args = ap.parse_args(argv)
    if not COMPILED:
        print("compiled extension not built; only the fallback is timed")
    impls = [("numpy", _kernels_py)] + ([("cython", kernels)] if COMPILED else [])

    ism_args, shape = ism_case(args.rt60)
    spec, ker, k = mf_case()
    results = {}
    for name, mod in impls:
        out = np.zeros(shape)
        t_ism = _best(lambda: (out.fill(0), mod.ism_rir(*ism_args, out)), args.repeat)
        mf = np.zeros(spec.shape, complex)
        t_mf = _best(lambda: mod.matched_filter(spec, ker, k, mf), args.repeat)
        results[name] = (t_ism, t_mf, out.copy(), mf.copy())
        print(f"{name:>6}: ism_rir {t_ism * 1e3:9.1f} ms   matched_filter {t_mf * 1e3:8.2f} ms")
    if COMPILED:
        a, b = results["numpy"], results["cython"]
        print(f"speedup: ism_rir x{a[0] / b[0]:.1f}, matched_filter x{a[1] / b[1]:.1f}")
        print(f"max |diff|: ism_rir {np.abs(a[2] - b[2]).max():.2e}, "
              f"matched_filter {np.abs(a[3] - b[3]).max():.2e}")


if __name__ == "__main__":
    main()
