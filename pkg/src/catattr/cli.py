"""Command line entry point: validate | attractor | lemmas | segment | chain.

Exit codes: 0 pass, 1 domain failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# --- validate ------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out=None) -> int:
    from .geometry import check_constraints
    out = out or sys.stdout

    report = check_constraints(cfg.params)
    for c in report.constraints:
        status = "ok" if c.holds else "FAIL"
        note = f"  ({c.note})" if c.note else ""
        print(f"{c.name:6s} {c.lhs:.17g} {c.relation} {c.rhs:.17g}  {status}{note}", file=out)
    if report.ok:
        print("all constraints hold", file=out)
        return EXIT_OK
    print("violated: " + ", ".join(report.violated), file=out)
    return EXIT_FAIL


# --- attractor -------------------------------------------------------------------

def attractor_header(n_max: int) -> list[str]:
    return (["step", "mean_dist", "frac_within", "mass_W"]
            + [f"layer_{i}" for i in range(n_max + 1)] + ["overflow"])


def run_attractor(cfg: RunConfig, progress=None):
    """Run a uniform ensemble; return the snapshot reports and the Cesaro accumulator."""
    from .dynamics import CesaroAccumulator, Ensemble, propagate, report
    from .field import FieldSpec

    params = cfg.params
    spec = FieldSpec(params, cfg.blend_sharpness)
    e = Ensemble.uniform(cfg.particles, cfg.seed, spec)
    ces = CesaroAccumulator(params, cfg.delta, cfg.segment_bins)
    reports = []
    while True:
        r = report(e, params, cfg.delta, cfg.n_max_layers, cfg.segment_bins)
        reports.append(r)
        ces.add(e)
        if progress:
            progress(r)
        if e.step_count >= cfg.steps:
            break
        e = propagate(e, spec, min(cfg.snapshot_every, cfg.steps - e.step_count), cfg.threads)
    return reports, ces


def cmd_attractor(cfg: RunConfig, out=None) -> int:
    from .geometry import validate_params
    out = out or sys.stdout

    bad = validate_params(cfg.params)
    if bad:
        print("refusing to run: violated " + ", ".join(bad), file=out)
        return EXIT_FAIL
    reports, ces = run_attractor(cfg)
    n_max = cfg.n_max_layers
    rows = []
    for r in reports:
        m = r.layer_hist.mass
        # the segment bucket joins overflow: both are deeper than every layer
        rows.append([r.step, r.mean_dist, r.frac_within, r.mass_W, *m[: n_max + 1],
                     m[n_max + 1] + m[n_max + 2]])
    write_csv(cfg.out_path / "attractor.csv", attractor_header(n_max), rows)
    hist = ces.histogram()
    write_csv(cfg.out_path / "segment_hist.csv", ["x_bin", "cesaro_density"],
              zip(hist.centers, hist.density))
    last = reports[-1]
    l1, sd = ces.asymmetry()
    print(f"step {last.step}: frac_within={last.frac_within:.6f} mean_dist={last.mean_dist:.6g}",
          file=out)
    print(f"cesaro mirror asymmetry L1={l1:.6g} (batch sigma {sd:.6g})", file=out)
    print(f"wrote {cfg.out_path / 'attractor.csv'} and {cfg.out_path / 'segment_hist.csv'}", file=out)
    return EXIT_OK


# --- lemmas -------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    statistic: float
    threshold: float
    passed: bool | None  # None = skipped


def chain_checks(cfg: RunConfig) -> list[Check]:
    from .chain import (BirthDeathChain, ChainDistribution, NStepChain, escape_profile,
                        hitting_probability, lyapunov_check, row_sums_exact)

    bd = BirthDeathChain(Fraction(1, 2))
    ns = NStepChain(cfg.return_n, Fraction(1, 100))
    out = []
    for name, ch in (("lyapunov_birth_death", bd), ("lyapunov_n_step", ns)):
        r = lyapunov_check(ch)
        out.append(Check(name, float(r.max_residual), 0.0, r.ok))
        out.append(Check(name.replace("lyapunov", "row_sums"), 0.0, 0.0, row_sums_exact(ch)))
    h = hitting_probability(bd, 1, 0, 10**4, n_paths=10**5, seed=cfg.seed)
    out.append(Check("hitting_1_to_0_mc", abs(h.mc - 0.5), 0.02, abs(h.mc - 0.5) <= 0.02))
    out.append(Check("hitting_1_to_0_dp", abs(h.exact - 0.5), 1e-6, abs(h.exact - 0.5) <= 1e-6))
    prof = escape_profile(bd, ChainDistribution.point(0), 200, 10)
    out.append(Check("escape_mass_0_10_n200", prof[-1], 0.05, prof[-1] < 0.05))
    return out


def geometry_checks(cfg: RunConfig) -> list[Check]:
    from .chain import BirthDeathChain, NStepChain, domination_check
    from .field import FieldSpec
    from .layers import arc_within_x0, distinct_gap_lengths, rotation_gap_max
    from .lemmas import (check_layer_lemma, estimate_return_rate, idealized_layer_run,
                         increase_fraction, real_layer_run)

    params = cfg.params
    spec = FieldSpec(params, cfg.blend_sharpness)
    out = []
    ll = check_layer_lemma(params, spec, 10**6, seed=cfg.seed)
    out.append(Check("layer_lemma_clause1", ll.clause1_violations, 0, ll.clause1_violations == 0))
    out.append(Check("layer_lemma_clause2", ll.clause2_violations, 0, ll.clause2_violations == 0))
    arcs = max(arc_within_x0(k, params) for k in np.linspace(0.0, params.b, 100))
    out.append(Check("arc_within_x0_max", arcs, params.epsilon / 3, arcs < params.epsilon / 3))
    inc = increase_fraction(params, spec, 10**5, seed=cfg.seed, threads=cfg.threads)
    thr = 2.0 / 3.0 - 3.0 * inc.sigma
    out.append(Check("fraction_increasing", inc.fraction, thr, inc.ok))

    q = Fraction(1, 10)
    hists = idealized_layer_run(params, float(q), cfg.particles, 50, seed=cfg.seed)
    dom = domination_check(hists, BirthDeathChain(q), cfg.particles)
    out.append(Check("domination_idealized_min_margin", dom.min_margin, 0.0, dom.ok))

    rr = estimate_return_rate(params, spec, cfg.return_n, cfg.return_trials, seed=cfg.seed)
    out.append(Check(f"return_rate_eta_lower_N{cfg.return_n}", rr.eta_lower, 0.0, rr.eta_lower > 0))
    if rr.eta_lower > 0:
        hists = real_layer_run(params, spec, cfg.return_n, cfg.particles, 50, seed=cfg.seed,
                               threads=cfg.threads)
        dom = domination_check(hists, NStepChain(cfg.return_n, rr.eta_lower), cfg.particles)
        out.append(Check("domination_n_step_min_margin", dom.min_margin, 0.0, dom.ok))
    else:
        out.append(Check("domination_n_step_min_margin", math.nan, 0.0, None))

    n_hi = 2000
    worst = max(n * rotation_gap_max(n) for n in range(2, n_hi + 1))
    out.append(Check("rotation_gap_times_n_max", worst, 2.0, worst <= 2.0))
    most = max(len(distinct_gap_lengths(n)) for n in range(1, n_hi + 1))
    out.append(Check("rotation_distinct_gaps_max", most, 3, most <= 3))
    return out


def cmd_lemmas(cfg: RunConfig, chain_only: bool = False, out=None) -> int:
    from .geometry import check_constraints
    out = out or sys.stdout

    checks: list[Check] = []
    if not chain_only:
        rep = check_constraints(cfg.params)
        checks += [Check(f"constraint_{c.name}", c.lhs, c.rhs, c.holds) for c in rep.constraints]
        if rep.ok:
            checks += geometry_checks(cfg)
        else:
            checks.append(Check("geometry_checks", math.nan, math.nan, None))
    checks += chain_checks(cfg)

    def status(c):
        return "skipped" if c.passed is None else fmt(c.passed)

    rows = [[c.name, c.statistic, c.threshold, status(c)] for c in checks]
    write_csv(cfg.out_path / "lemmas.csv", ["check", "statistic", "threshold", "pass"], rows)
    print("check,statistic,threshold,pass", file=out)
    for c in checks:
        print(f"{c.name},{fmt(c.statistic)},{fmt(c.threshold)},{status(c)}", file=out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# --- segment chain and birth-death chain --------------------------------------------

def cmd_segment(cfg: RunConfig, out=None) -> int:
    from .dynamics import segment_chain_histogram
    out = out or sys.stdout

    st = segment_chain_histogram(cfg.params, cfg.seed, cfg.segment_steps, 1000, cfg.segment_bins)
    centers = 0.5 * (st.edges[1:] + st.edges[:-1])
    write_csv(cfg.out_path / "segment_chain.csv", ["x_bin", "density", "density_se"],
              zip(centers, st.density, st.density_se))
    ceiling = 1.0 / (2.0 * cfg.epsilon)
    j = int(np.argmax(st.density - 3.0 * st.density_se))
    ok = bool(np.all(st.density <= ceiling + 3.0 * st.density_se)) and st.escapes == 0
    print(f"max density {st.max_density:.6g} (ceiling {ceiling:.6g}, bin {j} se "
          f"{st.density_se[j]:.3g}); escapes {st.escapes}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_chain(cfg: RunConfig, out=None) -> int:
    from .chain import BirthDeathChain, ChainDistribution, escape_profile
    out = out or sys.stdout

    bd = BirthDeathChain(Fraction(1, 2))
    prof = escape_profile(bd, ChainDistribution.point(0), 200, 10)
    write_csv(cfg.out_path / "chain_escape.csv", ["n", "mass_0_10"], enumerate(prof))
    checks = chain_checks(cfg)
    for c in checks:
        print(f"{c.name},{fmt(c.statistic)},{fmt(c.threshold)},{fmt(c.passed)}", file=out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# --- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catattr", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["validate", "attractor", "lemmas", "segment", "chain"])
    p.add_argument("--config", help="key = value config file (defaults built in)")
    p.add_argument("--seed", type=int)
    p.add_argument("--particles", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--chain-only", action="store_true", help="lemmas: skip geometry checks")
    return p


def load_config(args, env=None) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.with_overrides(env, seed=args.seed, particles=args.particles, steps=args.steps,
                              threads=args.threads, out_dir=args.out_dir)


def main(argv=None, env=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args, env)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate":
        return cmd_validate(cfg)
    if args.command == "attractor":
        return cmd_attractor(cfg)
    if args.command == "lemmas":
        return cmd_lemmas(cfg, args.chain_only)
    if args.command == "segment":
        return cmd_segment(cfg)
    return cmd_chain(cfg)


if __name__ == "__main__":
    sys.exit(main())
