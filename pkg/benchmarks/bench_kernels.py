"""Time the block-product kernel: compiled extension vs numpy fallback.

    python benchmarks/bench_kernels.py [--samples 50000] [--delays 64] [--block 100] [--repeat 5]

The kernel dominates the cross-ambiguity stage: one call per dwell, eight
dwells per sweep.
"""

import argparse
import timeit

import numpy as np

from passivetrack import _fallback


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--delays", type=int, default=64)
    p.add_argument("--block", type=int, default=100)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    n = args.samples
    sur = rng.normal(size=n) + 1j * rng.normal(size=n)
    ref = rng.normal(size=n) + 1j * rng.normal(size=n)

    backends = {"python": _fallback.block_products}
    try:
        from passivetrack import _kernels
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    else:
        backends["cython"] = _kernels.block_products

    results = {}
    for name, fn in backends.items():
        fn(sur, ref, args.delays, args.block)  # warm-up
        times = timeit.repeat(lambda: fn(sur, ref, args.delays, args.block), number=1, repeat=args.repeat)
        results[name] = min(times)
        print(f"{name:>7}: {1e3 * results[name]:8.2f} ms per dwell "
              f"(N={n}, delays 0..{args.delays}, block {args.block})")
    if len(results) == 2:
        out_c = backends["cython"](sur, ref, args.delays, args.block)
        out_p = backends["python"](sur, ref, args.delays, args.block)
        err = np.max(np.abs(out_c - out_p)) / np.max(np.abs(out_p))
        print(f"speed-up: {results['python'] / results['cython']:.2f}x, max relative difference {err:.1e}")


if __name__ == "__main__":
    main()
