"""Timing comparison of the compiled and pure-numpy kernel backends.

Run directly:

    python benchmarks/bench_kernels.py [--repeats 5]

Both backends are exercised on identical inputs and cross-checked for
exact agreement before timing, so a reported speedup is never measuring a
divergent implementation.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from collage._kernels import available_backends


def _time(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_nearest_codes(backends: dict, rng: np.random.Generator, repeats: int) -> list[tuple]:
    rows = []
    for n, k, d in ((1000, 512, 128), (8192, 512, 128), (8192, 2048, 64)):
        x = rng.standard_normal((n, d))
        codebook = rng.standard_normal((k, d))
        outputs = {name: mod.nearest_codes(x, codebook) for name, mod in backends.items()}
        first = next(iter(outputs.values()))
        for name, out in outputs.items():
            if not np.array_equal(out, first):
                raise AssertionError(f"backend {name} disagrees on nearest_codes")
        times = {name: _time(mod.nearest_codes, x, codebook, repeats=repeats)
                 for name, mod in backends.items()}
        rows.append((f"nearest_codes[{n}x{d} vs {k}]", times))
    return rows


def bench_box_signed_distance(backends: dict, rng: np.random.Generator, repeats: int) -> list[tuple]:
    rows = []
    for n in (1000, 100_000):
        points = rng.standard_normal((n, 3)) * 2.0
        center = rng.standard_normal(3)
        theta = rng.uniform(0, 2 * np.pi)
        rotation = np.array(
            [
                [np.cos(theta), -np.sin(theta), 0.0],
                [np.sin(theta), np.cos(theta), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        half = np.array([0.3, 0.25, 0.2])
        outputs = {
            name: mod.box_signed_distance(points, center, rotation, half)
            for name, mod in backends.items()
        }
        first = next(iter(outputs.values()))
        for name, out in outputs.items():
            if not np.allclose(out, first, atol=1e-12):
                raise AssertionError(f"backend {name} disagrees on box_signed_distance")
        times = {
            name: _time(mod.box_signed_distance, points, center, rotation, half, repeats=repeats)
            for name, mod in backends.items()
        }
        rows.append((f"box_signed_distance[{n}]", times))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="best-of-N timing")
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    rows = bench_nearest_codes(backends, rng, args.repeats)
    rows += bench_box_signed_distance(backends, rng, args.repeats)

    names = sorted(backends)
    header = f"{'kernel':<36s}" + "".join(f"{n:>12s}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for label, times in rows:
        line = f"{label:<36s}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f"{times['python'] / times['native']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
