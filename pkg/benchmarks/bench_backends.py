#!/usr/bin/env python3
"""Benchmark the fused numba kernels against the pure-numpy fallback.

Times apply_K / apply_K_adjoint on a few volume sizes and a full denoise
run, and verifies both backends agree. Run:

    python3 benchmarks/bench_backends.py [--sizes 64x64x16,128x128x32]
"""

import argparse
import time

import numpy as np

from tdvid import backend, ops
from tdvid.pipeline import rule_of_thumb, tdv_denoise
from tdvid.solver import SolverConfig
from tdvid.volume import NoiseSpec, add_gaussian_noise, franke_video


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def parse_sizes(text):
    sizes = []
    for tok in text.split(","):
        m, n, t = (int(x) for x in tok.lower().split("x"))
        sizes.append((m, n, t))
    return sizes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="32x32x8,64x64x16,128x128x32")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if not backend.numba_available():
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.Generator(np.random.Philox(key=1))
    print(f"{'size':>12} {'op':>10} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for shape in parse_sizes(args.sizes):
        u = rng.standard_normal(shape)
        cells = tuple(c - 1 for c in shape)
        w = ops.random_weight_field(cells, rng)
        y = rng.standard_normal(cells + (6,))
        ops.apply_K(u, w, "numba")  # trigger jit compilation
        ops.apply_K_adjoint(y, w, "numba")

        np.testing.assert_allclose(
            ops.apply_K(u, w, "numpy"), ops.apply_K(u, w, "numba"), atol=1e-12
        )
        np.testing.assert_allclose(
            ops.apply_K_adjoint(y, w, "numpy"), ops.apply_K_adjoint(y, w, "numba"), atol=1e-12
        )

        label = "x".join(str(c) for c in shape)
        for name, np_fn, nb_fn in (
            ("apply_K", lambda: ops.apply_K(u, w, "numpy"), lambda: ops.apply_K(u, w, "numba")),
            (
                "adjoint",
                lambda: ops.apply_K_adjoint(y, w, "numpy"),
                lambda: ops.apply_K_adjoint(y, w, "numba"),
            ),
        ):
            t_np = time_call(np_fn, args.repeats)
            t_nb = time_call(nb_fn, args.repeats)
            print(f"{label:>12} {name:>10} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")

    # end-to-end: one denoise of a small noisy clip per backend
    clean = franke_video(64, 64, 16)
    noisy = add_gaussian_noise(clean, NoiseSpec(20.0, 3))
    p = rule_of_thumb(20.0)
    cfg = SolverConfig(tol=1e-4, maxiter=1000)
    tdv_denoise(noisy, p, cfg, backend_name="numba")  # warm jit
    for name in ("numpy", "numba"):
        t0 = time.perf_counter()
        out, reports = tdv_denoise(noisy, p, cfg, backend_name=name)
        dt = time.perf_counter() - t0
        print(f"{'64x64x16':>12} {'denoise':>10} backend={name}: {dt:6.2f}s "
              f"({reports[0].iterations} iterations)")


if __name__ == "__main__":
    main()
