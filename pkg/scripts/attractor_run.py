"""Uniform ensemble under the default parameters; prints the approach to the segment.

    python scripts/attractor_run.py --particles 10000 --steps 2500 --out out/attractor
"""

import argparse
import sys

from catattr.cli import cmd_attractor
from catattr.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=2500)
    ap.add_argument("--every", type=int, default=10)
    ap.add_argument("--seed", type=int, default=RunConfig().seed)
    ap.add_argument("--threads", type=int, default=0)
    ap.add_argument("--out", default="out/attractor")
    args = ap.parse_args()
    cfg = RunConfig(particles=args.particles, steps=args.steps, snapshot_every=args.every,
                    seed=args.seed, threads=args.threads, out_dir=args.out)
    code = cmd_attractor(cfg)
    rows = (cfg.out_path / "attractor.csv").read_text().splitlines()[1:]
    first = next((r.split(",")[0] for r in rows if float(r.split(",")[2]) > 0.95), None)
    print(f"first snapshot with frac_within > 0.95: {first}")
    sys.exit(code)


if __name__ == "__main__":
    main()
