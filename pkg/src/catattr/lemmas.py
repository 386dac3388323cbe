"""Numerical checks of the local lemmas and Monte Carlo return rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from . import _kernels as K
from .dynamics import Ensemble, idealized_propagate, idealized_start, perturb, propagate
from .field import FieldSpec
from .geometry import LAM, MU, FramePoint, Params, RegionTag, region_classify
from .kernel import uniforms
from .layers import N_MAX_EXACT, LayerHistogram, _table, fraction_increasing, layer_codes


# --- layer lemma --------------------------------------------------------------

@dataclass
class LayerLemmaResult:
    n_sources: int
    n_transitions: int
    clause1_violations: int  # an image fell more than one layer outward
    clause2_violations: int  # a source with |x| > x0 failed to move inward
    clause2_sources: int
    worst_drop: int  # most negative (image depth - source depth) seen

    @property
    def ok(self) -> bool:
        return self.clause1_violations == 0 and self.clause2_violations == 0


def sample_layer_points(params: Params, n: int, seed: int, layers=range(1, 21),
                        first_stream: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points spread over the given layers: x uniform on [-a, a], level uniform in the layer."""
    layers = np.asarray(list(layers))
    c = _table(params.b, int(layers.max()))
    streams = np.arange(first_stream, first_stream + n, dtype=np.uint64)
    ux = uniforms(seed, streams, 0)
    uk = uniforms(seed, streams, 1)
    us = uniforms(seed, streams, 2)
    depth = layers[np.arange(n) % len(layers)]
    lo, hi = c[depth], c[depth - 1]
    Kl = lo + uk * (hi - lo)
    xs = params.a * (2.0 * ux - 1.0)
    ys = np.where(us < 0.5, -1.0, 1.0) * Kl * np.exp(-xs**2 / (2.0 * params.sigma**2))
    return xs, ys, depth


def check_layer_lemma(params: Params, spec: FieldSpec, n_samples: int = 10**6,
                      seed: int = 0, n_quantiles: int = 101,
                      layers=range(1, 21)) -> LayerLemmaResult:
    """Sweep the full kernel support of f(q) for sources q in the layers.

    Image depths use an effectively untruncated layer table, so overflow
    never hides a violation.
    """
    n_src = max(1, math.ceil(n_samples / n_quantiles))
    xs, ys, _ = sample_layer_points(params, n_src, seed, layers)
    c = _table(params.b, N_MAX_EXACT)
    src = layer_codes(xs, ys, params, N_MAX_EXACT)
    codes = np.empty((n_src, n_quantiles), dtype=np.int64)
    K.sweep_codes(xs, ys, n_quantiles, spec.packed, c, codes)
    # the segment bucket sits past overflow, so plain comparisons are safe
    worst = codes.min(axis=1)
    drop = worst - src
    v1 = int(np.count_nonzero(worst < src - 1))
    far = np.abs(xs) > params.x0
    v2 = int(np.count_nonzero(worst[far] < src[far] + 1))
    return LayerLemmaResult(n_src, n_src * n_quantiles, v1, v2, int(far.sum()), int(drop.min()))


# --- increase fraction on the prepared ensemble ------------------------------------

def sample_w_preimage(params: Params, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Points of W whose cat-map image is again in W (rejection on (x, K) uniform)."""
    sig2 = 2.0 * params.sigma**2
    xs, ys = [], []
    got, block, stream0 = 0, max(n, 1024), 0
    while got < n:
        streams = np.arange(stream0, stream0 + block, dtype=np.uint64)
        stream0 += block
        x = params.a * (2.0 * uniforms(seed, streams, 0) - 1.0)
        Kl = params.b * (2.0 * uniforms(seed, streams, 1) - 1.0)
        y = Kl * np.exp(-x**2 / sig2)
        k_img = LAM * y * np.exp((MU * x) ** 2 / sig2)
        ok = (np.abs(x) < params.a) & (np.abs(k_img) < params.b)
        xs.append(x[ok])
        ys.append(y[ok])
        got += int(ok.sum())
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


@dataclass
class IncreaseResult:
    fraction: float
    sigma: float
    n_in_w: int
    prior_steps: int

    @property
    def ok(self) -> bool:
        return self.fraction >= 2.0 / 3.0 - 3.0 * self.sigma


def increase_fraction(params: Params, spec: FieldSpec, n: int = 10**5, seed: int = 0,
                      prior_steps: int = 2, threads: int = 1) -> IncreaseResult:
    """Start on W intersect f^-1 W, apply F ``prior_steps`` times, then score one more step."""
    xs, ys = sample_w_preimage(params, n, seed)
    e = Ensemble.from_frame(xs, ys, seed)
    e = propagate(e, spec, prior_steps, threads)
    before = layer_codes(e.xs, e.ys, params, N_MAX_EXACT)
    after = layer_codes(*_xy(propagate(e, spec, 1, threads)), params, N_MAX_EXACT)
    frac = fraction_increasing(before, after)
    m = int(np.count_nonzero(before >= 1))
    return IncreaseResult(frac, math.sqrt(frac * (1.0 - frac) / max(m, 1)), m, prior_steps)


def _xy(e: Ensemble):
    return e.xs, e.ys


# --- return rates ----------------------------------------------------------------

def clopper_pearson(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    alpha = 1.0 - conf
    lo = 0.0 if k == 0 else float(beta_dist.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def return_rate_grid(params: Params, m: int = 8) -> dict[str, list[FramePoint]]:
    """Image points f(x) for each stratum, including the extremal corners."""
    a, b, beta, sig, x0 = params.a, params.b, params.beta, params.sigma, params.x0
    g = lambda x: math.exp(-x * x / (2.0 * sig * sig))  # noqa: E731
    shrink = 1.0 - 1e-9
    w = [FramePoint(fx * a, fk * b * g(fx * a))
         for fx in (-0.99, -0.5, 0.0, 0.5, 0.99) for fk in (-0.99, -0.5, 0.5, 0.99)]
    u_minus_w = [
        FramePoint((a + beta) * shrink, params.d_prime * (1 - 1e-6)),
        FramePoint(-(a + beta) * shrink, -params.d_prime * (1 - 1e-6)),
        FramePoint(-x0, (b + beta) * g(x0) * shrink),
        FramePoint(x0, -(b + beta) * g(x0) * shrink),
        FramePoint(0.0, (b + 0.5 * beta)),
        FramePoint(0.0, -(b + 0.99 * beta)),
        FramePoint(a + 0.5 * beta, 0.0),
        FramePoint(-(a + 0.5 * beta), 0.5 * (b + beta) * g(a + 0.5 * beta)),
    ]
    outside = []
    X, Y = params.chart_half_widths
    packed = K.pack_params(params)
    for i in range(m):
        for j in range(m):
            x, y = K.torus_to_plane((i + 0.5) / m, (j + 0.5) / m, packed)
            q = FramePoint(x, y)
            inside_chart = abs(x) <= X and abs(y) <= Y
            if not inside_chart or region_classify(q, params) is RegionTag.EXTERIOR:
                outside.append(q)
    for q in u_minus_w:
        assert region_classify(q, params) in (RegionTag.COLLAR, RegionTag.OUTER_COLLAR), q
    for q in w:
        assert region_classify(q, params) is RegionTag.W, q
    return {"U^c": outside, "U\\W": u_minus_w, "W": w}


def _start_at_image(z: FramePoint, spec: FieldSpec, n_trials: int, seed: int,
                    first_stream: int) -> Ensemble:
    # the first transition is Q_z itself; starting from f^-1(z) on the torus
    # would round away the sub-1e-17 heights of W near its tips
    e = Ensemble.from_frame(np.full(n_trials, z.x), np.full(n_trials, z.y), seed, first_stream)
    return perturb(e, spec)


def in_w_count(e: Ensemble, params: Params) -> int:
    return int(np.count_nonzero(layer_codes(e.xs, e.ys, params, 20) != 0))


def w_occupancy(z: FramePoint, spec: FieldSpec, steps: int, n_trials: int, seed: int,
                first_stream: int = 0) -> np.ndarray:
    """Counts in W after the perturbation of the point mass at z plus 0..steps-1 F-steps."""
    e = _start_at_image(z, spec, n_trials, seed, first_stream)
    counts = np.empty(steps, dtype=np.int64)
    counts[0] = in_w_count(e, spec.params)
    for t in range(1, steps):
        e = propagate(e, spec, 1)
        counts[t] = in_w_count(e, spec.params)
    return counts


@dataclass
class ReturnRate:
    N: int
    n_trials: int
    eta_hat: float  # worst empirical N-step W-occupancy over the grid
    eta_lower: float  # Clopper-Pearson lower bound at the worst grid point
    eta_upper: float
    worst_stratum: str
    worst_point: FramePoint
    per_stratum: dict[str, float] = field(default_factory=dict)


def estimate_return_rate(params: Params, spec: FieldSpec, N: int, n_trials: int = 1000,
                         seed: int = 0, grid: int = 8) -> ReturnRate:
    """Worst N-step W-occupancy over stratified image points f(x).

    Each trial is the kernel at the image point followed by N - 1 steps of F.
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    strata = return_rate_grid(params, grid)
    per: dict[str, float] = {}
    worst = (2.0, None, None, 0)
    stream = 0
    for name, pts in strata.items():
        best = 1.0
        for z in pts:
            e = _start_at_image(z, spec, n_trials, seed, stream)
            stream += n_trials
            k = in_w_count(propagate(e, spec, N - 1), params)
            rate = k / n_trials
            best = min(best, rate)
            if rate < worst[0]:
                worst = (rate, name, z, k)
        per[name] = best
    lo, hi = clopper_pearson(worst[3], n_trials)
    return ReturnRate(N, n_trials, worst[0], lo, hi, worst[1], worst[2], per)


# --- domination runs ---------------------------------------------------------------

def real_layer_run(params: Params, spec: FieldSpec, N: int, n_particles: int,
                   n_snapshots: int = 50, seed: int = 0, threads: int = 1,
                   n_max: int = 20) -> list[LayerHistogram]:
    """Layer histograms of a uniform ensemble at steps 0, N, 2N, ..."""
    e = Ensemble.uniform(n_particles, seed, spec)
    hists = [LayerHistogram.from_codes(layer_codes(e.xs, e.ys, params, n_max), n_max)]
    for _ in range(n_snapshots):
        e = propagate(e, spec, N, threads)
        hists.append(LayerHistogram.from_codes(layer_codes(e.xs, e.ys, params, n_max), n_max))
    return hists


def idealized_layer_run(params: Params, q: float, n_particles: int, n_steps: int = 50,
                        seed: int = 0, n_max: int = 20,
                        frac_outside: float = 0.5) -> list[LayerHistogram]:
    """Layer histograms of the local model with reinjection rate q, one per step."""
    e = idealized_start(n_particles, params, seed, q, frac_outside)
    hists = [LayerHistogram.from_codes(e.codes(params, n_max), n_max)]
    for _ in range(n_steps):
        e = idealized_propagate(e, params, 1)
        hists.append(LayerHistogram.from_codes(e.codes(params, n_max), n_max))
    return hists
