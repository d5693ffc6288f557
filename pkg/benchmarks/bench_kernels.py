"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Sizes match what one localization update does: 100 particles over a
500 x 500 BEV, one 20k-point scan binned, one path registration, plus
the template splat behind the FFT matching route.
Reports the best of ``--repeat`` runs after a warm-up call (JIT compile).
"""

import argparse
import math
import time

import numpy as np

from similoc import kernels


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    size = 500
    G = rng.random((size, size))
    S = np.ascontiguousarray(rng.random((1400, 1400, 1)))
    th = rng.uniform(-0.05, 0.05, 100)
    aff = np.stack([450 + rng.uniform(-20, 20, 100), 450 + rng.uniform(-20, 20, 100),
                    np.cos(th), -np.sin(th), np.sin(th), np.cos(th)], axis=1)
    aff = np.ascontiguousarray(aff)
    yield "affine_ncc (100 poses, 500^2)", (G[..., None].copy(), S, aff), kernels.affine_ncc_numba, kernels.affine_ncc_numpy

    yield ("sample_affine (500^2)", (S, size, size, aff[0]),
           kernels.sample_affine_numba, kernels.sample_affine_numpy)

    a = aff[0].copy()
    a[0] = 400.0 - 250 * (a[2] + a[3])  # 500^2 footprint centered on an 800^2 canvas
    a[1] = 400.0 - 250 * (a[4] + a[5])
    yield "splat (500^2 onto 800^2)", (G, a, 0, 0, 800, 800), kernels.splat_numba, kernels.splat_numpy

    n = 20000
    cols = rng.integers(-10, size + 10, n)
    rows = rng.integers(-10, size + 10, n)
    z = rng.random(n)
    colors = rng.random((n, 3))
    yield "bin_max_z (20k points)", (cols, rows, z, colors, size), kernels.bin_max_z_numba, kernels.bin_max_z_numpy

    t = np.linspace(0, 2 * math.pi, 800)
    pc = (500 + 300 * np.cos(t)).astype(np.int64)
    pr = (500 + 200 * np.sin(2 * t)).astype(np.int64)
    yield "draw_polyline (800 vertices)", (pc, pr, 1000), kernels.draw_polyline_numba, kernels.draw_polyline_numpy

    mask = kernels.draw_polyline_numpy(pc, pr, 1000)
    rr, cc = np.nonzero(mask)
    offsets = np.ascontiguousarray(np.stack([cc - 500, rr - 500], axis=1), dtype=np.float64)
    rots = np.radians(np.arange(-5, 5.5, 0.5))
    cs = np.ascontiguousarray(np.stack([np.cos(rots), np.sin(rots)], axis=1))
    shifts = np.arange(-20, 21, dtype=np.int64)
    yield ("overlap_grid (21 rot x 41^2 shifts)", (offsets, mask, 500.0, 500.0, cs, shifts, shifts),
           kernels.overlap_grid_numba, kernels.overlap_grid_numpy)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, call_args, nb, npy in cases(rng):
        t_nb = best_of(lambda: nb(*call_args), args.repeat)
        t_np = best_of(lambda: npy(*call_args), max(1, args.repeat // 2))
        print(f"{name:40s} {t_nb * 1e3:10.2f} {t_np * 1e3:10.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
