"""Compare the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_backends.py [--repeat 7]
"""
import argparse
import timeit

import numpy as np

from ppcokrig import _backend, _kernels_py

try:
    from ppcokrig import _ckernels
except ImportError:
    _ckernels = None


def _cases(rng):
    for n, d in [(50, 2), (200, 2), (500, 5)]:
        A = rng.random((n, d))
        phis = rng.uniform(0.2, 1.0, d)
        yield f"corr_matrix n={n} d={d}", "corr_matrix", (A, A, phis, 2.5)
    for n, N in [(60, 40), (200, 1000), (60, 4000)]:
        Yp = np.ascontiguousarray(rng.standard_normal((n, N)))
        Wp = np.ascontiguousarray(rng.standard_normal((n, N)))
        yield f"profile_columns n={n} N={N}", "profile_columns", (Yp, Wp)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=7)
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; nothing to compare")
        return 1
    print(f"active backend: {_backend.BACKEND}")
    print(f"{'case':<32}{'cython (ms)':>14}{'numpy (ms)':>14}{'speedup':>10}")
    for label, name, fargs in _cases(np.random.default_rng(0)):
        times = []
        for mod in (_ckernels, _kernels_py):
            f = getattr(mod, name)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: f(*fargs), number=1), 1e-6)))
            t = min(timeit.repeat(lambda: f(*fargs), number=number, repeat=args.repeat)) / number
            times.append(t * 1e3)
        print(f"{label:<32}{times[0]:>14.3f}{times[1]:>14.3f}{times[1] / times[0]:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
