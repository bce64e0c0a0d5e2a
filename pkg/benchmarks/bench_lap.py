"""Time the compiled and pure-Python LAP backends on random dense profits.

    python benchmarks/bench_lap.py --sizes 50 100 200 400 --repeats 3

Both backends run the same algorithm, so assignments are also compared.
"""
import argparse
import time

import numpy as np

from cdom import lap


def best_time(fn, arg, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(arg)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = sorted(lap.BACKENDS)
    if "native" not in backends:
        print("compiled backend not built; timing the Python fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} " + " ".join(f"{b + ' [s]':>14}" for b in backends) + f" {'speedup':>9} {'same':>5}")
    for n in args.sizes:
        profit = rng.standard_normal((n, n))
        times, perms = {}, {}
        for b in backends:
            times[b], (p, _) = best_time(lambda m, b=b: lap.solve_lap(m, backend=b), profit, args.repeats)
            perms[b] = p
        speed = times["python"] / times["native"] if "native" in times else float("nan")
        same = len({tuple(p.tolist()) for p in perms.values()}) == 1
        print(f"{n:>6} " + " ".join(f"{times[b]:>14.5f}" for b in backends) + f" {speed:>9.1f} {str(same):>5}")


if __name__ == "__main__":
    main()
