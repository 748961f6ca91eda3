"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--seed S]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from helix import _fallback

try:
    from helix import _core
except ImportError:
    _core = None


def cases(rng: np.random.Generator) -> dict[str, tuple]:
    a = rng.integers(4, size=400)
    b = a.copy()
    b[rng.integers(400, size=40)] = rng.integers(4, size=40)
    probs = rng.dirichlet(np.ones(5), size=150)
    labels = rng.integers(4, size=40)
    x = rng.integers(2, size=(4, 8, 128)).astype(np.int8)
    w = rng.integers(4, size=(4, 3, 128, 128)).astype(np.int8)
    return {
        "edit_distance": (a, b),
        "longest_match": (a[:200], b[100:]),
        "ctc_log_prob": (probs, labels, 4),
        "bitplane_mvm": (x, w),
    }


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call_args in cases(rng).items():
        py = min(timeit.repeat(lambda: getattr(_fallback, name)(*call_args), number=1, repeat=args.repeat))
        if _core is None:
            print(f"{name:<16}{py * 1e3:>12.3f}{'n/a':>12}{'n/a':>10}")
            continue
        fast = getattr(_core, name)
        assert np.all(np.asarray(fast(*call_args)) == np.asarray(getattr(_fallback, name)(*call_args))), name
        cy = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<16}{py * 1e3:>12.3f}{cy * 1e3:>12.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
