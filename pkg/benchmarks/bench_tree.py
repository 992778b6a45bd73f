"""Time gradient-boosted tree fitting with the compiled and the numpy tree kernels.

Usage::

    python benchmarks/bench_tree.py --sizes 1000 4000 --features 6 --rounds 50
"""
import argparse
import time

import numpy as np

from bope.classify import GBTConfig, _backend
from bope.classify.gbt import fit_gbt
from bope.core import RngSpec


def _data(n, p, seed):
    gen = RngSpec(seed, 1).generator()
    x = gen.normal(size=(n, p))
    y = (x[:, 0] * x[:, 1] + np.sin(2 * x[:, 2 % p]) + 0.5 * gen.normal(size=n) > 0).astype(float)
    return x, y


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000, 16000])
    ap.add_argument("--features", type=int, default=6)
    ap.add_argument("--rounds", type=int, default=50)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    backends = [("python", _backend.python_kernels)]
    if _backend.compiled_kernels is not None:
        backends.insert(0, ("cython", _backend.compiled_kernels))
    else:
        print("compiled extension not built; timing the numpy kernels only")

    cfg = GBTConfig(rounds=args.rounds, depth=args.depth)
    print(f"{'n':>8} {'backend':>8} {'seconds':>10} {'ms/tree':>9} {'speedup':>8} identical")
    for n in args.sizes:
        x, y = _data(n, args.features, n)
        times, fits = {}, {}
        for name, kern in backends:
            fits[name] = fit_gbt(x, y, cfg, "log", kernels=kern)
            times[name] = _best_of(lambda: fit_gbt(x, y, cfg, "log", kernels=kern), args.repeats)
        same = len(fits) < 2 or fits["cython"][1] == fits["python"][1]
        for name, _ in backends:
            speed = times["python"] / times[name]
            print(f"{n:>8} {name:>8} {times[name]:>10.4f} {1000 * times[name] / args.rounds:>9.3f} "
                  f"{speed:>7.1f}x {same}")


if __name__ == "__main__":
    main()
