"""Compare the compiled and pure-numpy scan kernels.

Times lti_scan and selective_scan on both backends at a few realistic
shapes (the forward pass runs four scans of length H*W per block) and
prints a speedup table.  Also cross-checks that the outputs agree, so a
miscompiled extension cannot look fast and wrong.

Usage:
    python3 benchmarks/bench_scan.py
    python3 benchmarks/bench_scan.py --repeats 9 --sizes 16x8x1024
"""

import argparse
import sys
import time

import numpy as np

from lidarsr import kernels


def parse_sizes(text):
    sizes = []
    for part in text.split(","):
        d, n, l = (int(v) for v in part.split("x"))
        sizes.append((d, n, l))
    return sizes


def make_cases(rng, d, n, length):
    lti = dict(
        a_bar=np.exp(-rng.uniform(0.01, 2.0, (d, n))),
        b_bar=rng.normal(size=(d, n)),
        c=rng.normal(size=(d, n)),
        d=rng.normal(size=d),
        x=rng.normal(size=(d, length)),
    )
    selective = dict(
        a=-rng.uniform(0.1, 3.0, (d, n)),
        d=rng.normal(size=d),
        delta=rng.uniform(0.01, 0.5, (d, length)),
        b=rng.normal(size=(n, length)),
        c=rng.normal(size=(n, length)),
        x=rng.normal(size=(d, length)),
    )
    for case in (lti, selective):
        for key, val in case.items():
            case[key] = np.ascontiguousarray(val)
    return lti, selective


def best_of(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best-of (default 5)")
    parser.add_argument("--sizes", default="16x8x1024,32x8x4096,64x8x16384",
                        help="comma-separated DxNxL shapes")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not available; nothing to compare")
        print("numpy fallback is active and remains fully functional")
        return 0

    rng = np.random.default_rng(args.seed)
    numpy_mod = backends["numpy"]
    cython_mod = backends["cython"]

    header = f"{'kernel':<16} {'D x N x L':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for d, n, length in parse_sizes(args.sizes):
        lti, selective = make_cases(rng, d, n, length)
        for name, case in (("lti_scan", lti), ("selective_scan", selective)):
            args_tuple = tuple(case.values())
            t_np, y_np = best_of(getattr(numpy_mod, name), args_tuple, args.repeats)
            t_cy, y_cy = best_of(getattr(cython_mod, name), args_tuple, args.repeats)
            if not np.allclose(y_np, y_cy, atol=1e-10, rtol=1e-10):
                print(f"BACKEND MISMATCH in {name} at {d}x{n}x{length}", file=sys.stderr)
                return 1
            shape = f"{d}x{n}x{length}"
            print(f"{name:<16} {shape:<16} {t_np*1e3:>8.2f}ms {t_cy*1e3:>8.2f}ms "
                  f"{t_np/t_cy:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
