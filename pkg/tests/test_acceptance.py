"""Acceptance criteria 1-9; each test records one PASS/FAIL line with its timing."""

import io
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from catattr.chain import (BirthDeathChain, ChainDistribution, NStepChain, domination_check,
                           escape_profile, hitting_probability, lyapunov_check)
from catattr.cli import cmd_attractor, run_attractor
from catattr.config import RunConfig
from catattr.dynamics import segment_chain_histogram
from catattr.geometry import DEFAULT_PARAMS, LAM, MU, validate_params
from catattr.lemmas import (check_layer_lemma, estimate_return_rate, idealized_layer_run,
                            increase_fraction, real_layer_run)

SEED = RunConfig().seed
pytestmark = pytest.mark.slow


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


def test_criterion_1_parameter_gate(record):
    mutations = [(dict(epsilon=0.07), "B1"), (dict(beta=0.012), "B2a"), (dict(b=0.002), "B2b"),
                 (dict(phi=0.02), "B3"), (dict(epsilon=0.3), "chart")]
    with Timer() as t:
        ok = validate_params(DEFAULT_PARAMS) == []
        named = []
        for change, target in mutations:
            p = DEFAULT_PARAMS.replace(**change)
            got = validate_params(p)
            truth = oracles.violated(p.epsilon, p.sigma, p.b, p.beta, p.phi)
            ok &= target in got and got == truth
            named.append(f"{target}->{'+'.join(got)}")
    ok &= t.s < 1.0
    record(1, ok, f"defaults clean; {' '.join(named)}; {t.s:.2f}s")
    assert ok


def test_criterion_2_exact_identities(record):
    with Timer() as t:
        bd = lyapunov_check(BirthDeathChain(Fraction(1, 2)), 500)
        ns = lyapunov_check(NStepChain(10, Fraction(1, 1000)), 500)
        p = DEFAULT_PARAMS
        rel = max(abs(MU * LAM - 1), abs(MU + LAM - 3) / 3, abs(MU * p.a + p.epsilon - p.a) / p.a)
    ok = bd.max_residual == 0 and ns.max_residual == 0 and rel <= 1e-14 and t.s < 1.0
    record(2, ok, f"residuals {bd.max_residual}, {ns.max_residual}; identity rel err {rel:.1e}; {t.s:.2f}s")
    assert ok


def test_criterion_3_layer_lemma(record, params, spec):
    with Timer() as t:
        res = check_layer_lemma(params, spec, 10**6, seed=SEED, n_quantiles=101)
    ok = res.ok and res.n_transitions >= 10**6 and t.s < 60
    record(3, ok, f"{res.n_transitions} transitions, clause violations "
                  f"{res.clause1_violations}/{res.clause2_violations}, worst drop {res.worst_drop}; {t.s:.1f}s")
    assert ok


def test_criterion_4_increase_fraction(record, params, spec):
    with Timer() as t:
        res = increase_fraction(params, spec, 10**5, seed=SEED, threads=0)
    ok = res.ok and t.s < 60
    record(4, ok, f"fraction {res.fraction:.4f} vs 2/3 - 3sigma = {2 / 3 - 3 * res.sigma:.4f}; {t.s:.1f}s")
    assert ok


def test_criterion_5_density_ceiling(record, params):
    with Timer() as t:
        st = segment_chain_histogram(params, SEED, 10**7, burn_in=1000, bins=200)
    ceiling = 1 / (2 * params.epsilon)
    excess = (st.density - ceiling) / np.maximum(st.density_se, 1e-300)
    ok = bool(np.all(st.density <= ceiling + 3 * st.density_se)) and st.escapes == 0 and t.s < 30
    record(5, ok, f"max density {st.max_density:.4f} (ceiling {ceiling}), worst excess "
                  f"{excess.max():.2f} sigma, escapes {st.escapes}; {t.s:.1f}s")
    assert ok


def test_criterion_6_transience(record):
    with Timer() as t:
        bd = BirthDeathChain(Fraction(1, 2))
        h = hitting_probability(bd, 1, 0, 10**4, n_paths=10**5, seed=SEED)
        prof = escape_profile(bd, ChainDistribution.point(0), 200, 10)
    ok = abs(h.mc - 0.5) <= 0.02 and abs(h.exact - 0.5) <= 1e-6 and prof[-1] < 0.05 and t.s < 30
    record(6, ok, f"MC {h.mc:.4f}, DP {h.exact:.10f}, mass on 0..10 at n=200 {prof[-1]:.2e}; {t.s:.1f}s")
    assert ok


def _later(res):
    # row n = 0 compares the start with itself and is zero by construction
    m, sd = res.margins[1:], res.sigmas[1:]
    z = np.where(sd > 0, m / np.where(sd > 0, sd, 1.0), np.inf)
    i = np.unravel_index(np.argmin(z), z.shape)
    return f"{m[i]:+.2e} = {z[i]:+.2f} sigma at (n={i[0] + 1}, k={i[1]})"


def test_criterion_7_domination(record, params, spec):
    n = 10**5
    with Timer() as t:
        q = Fraction(1, 10)
        ideal = domination_check(idealized_layer_run(params, float(q), n, 50, seed=SEED),
                                 BirthDeathChain(q), n)
        N = 10
        rr = estimate_return_rate(params, spec, N, 1000, seed=SEED)
        real = None
        if rr.eta_lower > 0:
            hists = real_layer_run(params, spec, N, n, 50, seed=SEED, threads=0)
            real = domination_check(hists, NStepChain(N, rr.eta_lower), n)
    ok = ideal.ok and real is not None and real.ok and t.s < 300
    real_txt = f"worst margin n>=1 {_later(real)}" if real else "no positive eta"
    record(7, ok, f"(a) q=1/10 worst margin n>=1 {_later(ideal)}; "
                  f"(b) N={N} eta={rr.eta_lower:.2e} [{rr.worst_stratum}] {real_txt}; {t.s:.0f}s")
    assert ok


def test_criterion_8_global_attractor(record):
    cfg = RunConfig(particles=10**4, steps=2500, snapshot_every=10, delta=0.01)
    with Timer() as t:
        reports, ces = run_attractor(cfg)
    steps = np.array([r.step for r in reports])
    frac = np.array([r.frac_within for r in reports])
    above = np.flatnonzero(frac > 0.95)
    first = int(steps[above[0]]) if above.size else None
    hold = None
    if first is not None:
        window = (steps >= first) & (steps <= first + 500)
        hold = float(frac[window].min())
    l1, sd = ces.asymmetry()
    ok = (first is not None and first <= 2000 and hold >= 0.9
          and l1 <= 5 * sd and t.s < 600)
    record(8, ok, f"first >0.95 at step {first}, min over next 500 steps {hold}, "
                  f"final {frac[-1]:.4f}; Cesaro L1 {l1:.4f} <= 5 x {sd:.4f}; {t.s:.0f}s")
    assert ok


def test_criterion_9_reproducibility(record, tmp_path):
    outs = []
    with Timer() as t:
        for threads in (1, 4):
            cfg = RunConfig(particles=10**4, steps=200, threads=threads,
                            out_dir=str(tmp_path / f"t{threads}"))
            assert cmd_attractor(cfg, out=io.StringIO()) == 0
            outs.append({f: (cfg.out_path / f).read_bytes()
                         for f in ("attractor.csv", "segment_hist.csv")})
    same = outs[0] == outs[1]
    ok = same and t.s < 120
    size = sum(len(v) for v in outs[0].values())
    record(9, ok, f"threads 1 vs 4: {size} bytes {'identical' if same else 'DIFFER'}; {t.s:.1f}s")
    assert ok
