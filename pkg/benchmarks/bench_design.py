"""Time the exhaustive design search with the compiled and pure-Python backends.

    python3 benchmarks/bench_design.py --sizes 10 12 14 16 --repeat 3

Both backends run the same depth-first enumeration on the same inputs, so the
selected subsets and node counts must agree; the script checks that too.
"""

import argparse
import time

import numpy as np

from gre import _purepy
from gre.problems import euler_design_problem

try:
    from gre._speedups import exhaustive_search as compiled_search
except ImportError:
    compiled_search = None


def inputs(n):
    prob = euler_design_problem(n)
    Kj = prob.kernel.gram(prob.candidates)
    u = 1 / np.array([prob.bound(x) for x in prob.candidates])
    # a budget wide enough that every subset stays feasible: the worst case
    return Kj, u, prob.costs, float(prob.costs.sum()), 1e-12, 1e-13


def best_time(fn, args, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 12, 14, 16])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled_search is None:
        print("compiled extension not built; run 'pip install -e . --no-build-isolation' first")
    print(f"{'n':>3}  {'nodes':>8}  {'python s':>10}  {'cython s':>10}  {'speedup':>8}")
    for n in args.sizes:
        data = inputs(n)
        t_py, ref = best_time(_purepy.exhaustive_search, data, args.repeat)
        if compiled_search is None:
            print(f"{n:>3}  {ref[2]:>8}  {t_py:>10.4f}  {'-':>10}  {'-':>8}")
            continue
        t_cy, got = best_time(compiled_search, data, args.repeat)
        if list(got[0]) != list(ref[0]) or got[2] != ref[2]:
            raise SystemExit(f"backends disagree at n={n}")
        print(f"{n:>3}  {ref[2]:>8}  {t_py:>10.4f}  {t_cy:>10.4f}  {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
