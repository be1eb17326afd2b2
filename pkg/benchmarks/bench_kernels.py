"""Compare the compiled and NumPy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints the median time of
each kernel per backend and the speedup of the compiled one.
"""

import argparse
import timeit

import numpy as np

from cslds import kernels


def _have_cython():
    try:
        kernels._pick("cython")
    except ImportError:
        return False
    return True


def bench_fwht(k, n, repeat):
    rng = np.random.default_rng(0)
    base = rng.standard_normal((k, n))
    out = {}
    for backend in ("python", "cython"):
        if backend == "cython" and not _have_cython():
            continue
        buf = base.copy()
        times = timeit.repeat(lambda: kernels.fwht_rows(buf, backend=backend), number=1, repeat=repeat)
        out[backend] = float(np.median(times))
    return out


def bench_fold(m, q, T, repeat):
    rng = np.random.default_rng(1)
    H = rng.standard_normal((m * q, T - q + 1))
    out = {}
    for backend in ("python", "cython"):
        if backend == "cython" and not _have_cython():
            continue
        times = timeit.repeat(lambda: kernels.hankel_fold(H, m, q, backend=backend), number=1, repeat=repeat)
        out[backend] = float(np.median(times))
    return out


def _report(name, res):
    line = f"{name:<34}" + "".join(f"{b:>8}: {t * 1e3:9.3f} ms" for b, t in res.items())
    if len(res) == 2:
        line += f"   speedup x{res['python'] / res['cython']:.2f}"
    print(line)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=7)
    args = p.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}")
    for k, n in [(1, 16384), (250, 16384), (500, 256), (1, 1048576)]:
        _report(f"fwht_rows k={k} n={n}", bench_fwht(k, n, args.repeat))
    for m, q, T in [(1, 100, 500), (1, 250, 500), (60, 2, 250), (10, 20, 500)]:
        _report(f"hankel_fold m={m} q={q} T={T}", bench_fold(m, q, T, args.repeat))


if __name__ == "__main__":
    main()
