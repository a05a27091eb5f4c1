"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 500 2000 8000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from survanchor import kernels


def _inputs(n, rng):
    scores = rng.standard_normal(n)
    time = rng.integers(1, n // 4 + 2, n).astype(float)
    event = rng.integers(0, 2, n)
    return scores, time, event


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>7}" + "".join(f"{name:>14}" for name in impls) + f"{'speedup':>10}")
    for n in args.sizes:
        s, t, e = _inputs(n, rng)
        cases = {
            "cox_loss_grad": lambda impl: kernels.cox_loss_grad(s, t, e, impl=impl),
            "concordance": lambda impl: kernels.concordance_counts(s, t, e, impl=impl),
            "kendall_s": lambda impl: kernels.kendall_s(s, t, impl=impl),
        }
        for name, fn in cases.items():
            timings = {}
            results = {}
            for label, impl in impls.items():
                results[label] = fn(impl)
                timings[label] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
            if len(results) == 2:
                a, b = results["numpy"], results["cython"]
                if name == "cox_loss_grad":
                    assert abs(a[0] - b[0]) <= 1e-9 * max(1.0, abs(a[0]))
                    assert np.allclose(a[1], b[1], rtol=1e-9, atol=1e-12)
                else:
                    assert a == b, (name, a, b)
            speed = timings["numpy"] / timings["cython"] if "cython" in timings else float("nan")
            cells = "".join(f"{timings[k] * 1e3:>12.3f}ms" for k in impls)
            print(f"{name:<20}{n:>7}{cells}{speed:>9.1f}x")


if __name__ == "__main__":
    main()
