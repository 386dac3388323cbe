"""Tail domination of the layer histograms by the comparison chains.

Idealized model for several reinjection rates q, then the full system at
N-step snapshots with eta set to the Clopper-Pearson lower return rate.

    python scripts/domination.py --particles 100000 --q 0.05 0.1 0.2 --N 10
"""

import argparse
from fractions import Fraction

from catattr.chain import BirthDeathChain, NStepChain, domination_check
from catattr.config import RunConfig
from catattr.field import FieldSpec
from catattr.lemmas import estimate_return_rate, idealized_layer_run, real_layer_run


def summary(res) -> str:
    return (f"ok={res.ok} min_margin={res.min_margin:.3e} at {res.worst} "
            f"min_scaled={res.min_scaled:.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=100_000)
    ap.add_argument("--q", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    ap.add_argument("--N", type=int, default=10)
    ap.add_argument("--snapshots", type=int, default=50)
    ap.add_argument("--seed", type=int, default=RunConfig().seed)
    args = ap.parse_args()
    params = RunConfig().params
    n = args.particles
    for q in args.q:
        hists = idealized_layer_run(params, q, n, args.snapshots, seed=args.seed)
        chain = BirthDeathChain(Fraction(q).limit_denominator(10**6))
        print(f"idealized q={q}: {summary(domination_check(hists, chain, n))}")
    spec = FieldSpec(params)
    rr = estimate_return_rate(params, spec, args.N, 1000, seed=args.seed)
    print(f"return rate N={args.N}: eta_hat={rr.eta_hat:.4g} eta_lower={rr.eta_lower:.4g} "
          f"worst stratum {rr.worst_stratum}")
    if rr.eta_lower <= 0:
        print("no positive lower bound on eta; skipping the full-system check")
        return
    hists = real_layer_run(params, spec, args.N, n, args.snapshots, seed=args.seed, threads=0)
    print(f"full system N={args.N}: {summary(domination_check(hists, NStepChain(args.N, rr.eta_lower), n))}")


if __name__ == "__main__":
    main()
