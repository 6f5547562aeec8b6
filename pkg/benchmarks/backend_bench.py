#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot paths (batch attribution against a codebook, and
codebook growth under the approximate tree search) on every available
backend and prints per-backend timings plus the speedup over the
pure-Python one. Run from the repository root::

    python benchmarks/backend_bench.py
    python benchmarks/backend_bench.py --users 1000 --samples 5000
"""

import argparse
import statistics
import time

import numpy as np

from wmattrib import _kernels
from wmattrib.bitstring import Codebook, max_pairwise_ba
from wmattrib.channel import simulate_watermarked_batch
from wmattrib.rng import substream
from wmattrib.selection import SelectionStrategy, register_user


def timed(fn, repeat: int) -> tuple[float, float]:
    """(best, median) wall time of ``fn`` in milliseconds."""
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return min(times), statistics.median(times)


def build_attribution_inputs(n: int, users: int, samples: int, seed: int):
    strategy = SelectionStrategy("random", rng_seed=seed)
    book = Codebook(n)
    for i in range(users):
        register_user(book, f"u{i + 1:06d}", strategy)
    decoded = simulate_watermarked_batch(
        book.watermark(0), 0.9, samples, substream(seed, 77)
    )
    return book, decoded


def bench_attribution(args) -> dict[str, tuple[float, float]]:
    book, decoded = build_attribution_inputs(args.n, args.users, args.samples, args.seed)
    results = {}
    for backend in _kernels.available_backends():
        _kernels.set_backend(backend)
        results[backend] = timed(
            lambda: _kernels.attribute_batch(book.words, decoded, args.n), args.repeat
        )
    return results


def bench_selection(args) -> dict[str, tuple[float, float]]:
    results = {}
    for backend in _kernels.available_backends():
        _kernels.set_backend(backend)

        def grow():
            strategy = SelectionStrategy("absta", depth=args.depth, rng_seed=args.seed)
            book = Codebook(args.n)
            for i in range(args.grow_users):
                register_user(book, f"u{i + 1:06d}", strategy)
            return book

        results[backend] = timed(grow, max(1, args.repeat // 2))
        peak = max_pairwise_ba(grow())
        results[backend] += (float(peak),)
    return results


def print_table(title: str, unit: str, results: dict) -> None:
    print(f"\n{title}")
    base = results.get("python")
    for backend, row in results.items():
        best, median = row[0], row[1]
        extra = f" max_pairwise_ba={row[2]}" if len(row) > 2 else ""
        speedup = f" speedup_vs_python={base[0] / best:.1f}x" if base and backend != "python" else ""
        print(f"  {backend:<9} best={best:9.2f}{unit} median={median:9.2f}{unit}{extra}{speedup}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=64)
    parser.add_argument("--users", type=int, default=500, help="codebook size for attribution")
    parser.add_argument("--samples", type=int, default=2000, help="decoded strings per attribution call")
    parser.add_argument("--grow-users", type=int, default=100, help="registrations in the selection bench")
    parser.add_argument("--depth", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    if len(backends) < 2:
        print("note: only one backend importable, no comparison possible")
    previous = _kernels.active_backend()
    try:
        attribution = bench_attribution(args)
        selection = bench_selection(args)
    finally:
        _kernels.set_backend(previous)
    print_table(
        f"attribute_batch: {args.samples} samples x {args.users} users, n={args.n}",
        "ms",
        attribution,
    )
    print_table(
        f"codebook growth: {args.grow_users} users, depth={args.depth}, n={args.n}",
        "ms",
        selection,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
