"""N-step return rate into W, per stratum, for a range of N.

    python scripts/return_rate_scan.py --n 3 12 --trials 1000
"""

import argparse
import time

from catattr.config import RunConfig
from catattr.field import FieldSpec
from catattr.lemmas import estimate_return_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs=2, default=(3, 12), metavar=("LO", "HI"))
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=RunConfig().seed)
    args = ap.parse_args()
    params = RunConfig().params
    spec = FieldSpec(params)
    print("N,eta_hat,eta_lower,worst_stratum,W,U\\W,U^c,seconds")
    for N in range(args.n[0], args.n[1] + 1):
        t0 = time.perf_counter()
        r = estimate_return_rate(params, spec, N, args.trials, seed=args.seed)
        rates = ",".join(f"{r.per_stratum[k]:.4g}" for k in ("W", "U\\W", "U^c"))
        print(f"{N},{r.eta_hat:.4g},{r.eta_lower:.4g},{r.worst_stratum},{rates},"
              f"{time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
