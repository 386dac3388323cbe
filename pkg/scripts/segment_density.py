"""Stationary density of the segment chain against the 1/(2 eps) ceiling, over eps.

    python scripts/segment_density.py --eps 0.08 0.1 0.15 --steps 10000000
"""

import argparse

import numpy as np

from catattr.dynamics import segment_chain_histogram
from catattr.geometry import DEFAULT_PARAMS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.1, 0.15, 0.2])
    ap.add_argument("--steps", type=int, default=10**7)
    ap.add_argument("--bins", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    print("eps,ceiling,max_density,worst_excess_sigma,escapes")
    for eps in args.eps:
        p = DEFAULT_PARAMS.replace(epsilon=eps)
        st = segment_chain_histogram(p, args.seed, args.steps, bins=args.bins)
        ceiling = 1.0 / (2.0 * eps)
        z = (st.density - ceiling) / np.maximum(st.density_se, 1e-300)
        print(f"{eps},{ceiling:.6g},{st.max_density:.6g},{z.max():.2f},{st.escapes}")


if __name__ == "__main__":
    main()
