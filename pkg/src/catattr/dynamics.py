"""The perturbed dynamics F = Q o f on particle ensembles, and attractor diagnostics.

Particles are stored as plane coordinates: chart coordinates when the point
lies in the chart window, otherwise coordinates of the centred lift.  Particle
i draws its t-th kernel sample from stream ``streams[i]`` at counter t, so any
partition of the particles over threads gives bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import os

import numpy as np

from . import _kernels as K
from .field import FieldSpec
from .geometry import MU, FramePoint, Params, TorusPoint
from .kernel import RngStream, plane_coords, quantile, uniforms
from .layers import N_MAX_DEFAULT, LayerHistogram, layer_codes

# initial positions use counters far from the ones consumed by stepping
INIT_COUNTER = 1 << 63


@dataclass
class Ensemble:
    xs: np.ndarray
    ys: np.ndarray
    streams: np.ndarray  # uint64, distinct
    seed: int
    step_count: int = 0

    def __post_init__(self):
        self.xs = np.ascontiguousarray(self.xs, dtype=float)
        self.ys = np.ascontiguousarray(self.ys, dtype=float)
        self.streams = np.ascontiguousarray(self.streams, dtype=np.uint64)
        if not (self.xs.shape == self.ys.shape == self.streams.shape):
            raise ValueError("xs, ys and streams must have equal length")
        if len(np.unique(self.streams)) != len(self.streams):
            raise ValueError("stream ids must be distinct")

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def particles(self) -> list[TorusPoint]:
        return [TorusPoint(*K.plane_to_torus(x, y)) for x, y in zip(self.xs, self.ys)]

    def rng_streams(self) -> list[RngStream]:
        """Stream handles positioned at the next unused counter."""
        return [RngStream(self.seed, int(s), self.step_count) for s in self.streams]

    def copy(self) -> "Ensemble":
        return Ensemble(self.xs.copy(), self.ys.copy(), self.streams.copy(),
                        self.seed, self.step_count)

    @classmethod
    def uniform(cls, n: int, seed: int, spec: FieldSpec, first_stream: int = 0) -> "Ensemble":
        """n particles drawn uniformly on the torus."""
        streams = np.arange(first_stream, first_stream + n, dtype=np.uint64)
        u = uniforms(seed, streams, INIT_COUNTER)
        v = uniforms(seed, streams, INIT_COUNTER + 1)
        xs = np.empty(n)
        ys = np.empty(n)
        packed = spec.packed
        for i in range(n):
            xs[i], ys[i] = K.torus_to_plane(u[i], v[i], packed)
        return cls(xs, ys, streams, seed)

    @classmethod
    def from_frame(cls, xs, ys, seed: int, first_stream: int = 0) -> "Ensemble":
        xs = np.asarray(xs, dtype=float)
        streams = np.arange(first_stream, first_stream + len(xs), dtype=np.uint64)
        return cls(xs, np.asarray(ys, dtype=float), streams, seed)

    @classmethod
    def from_points(cls, points, spec: FieldSpec, seed: int, first_stream: int = 0) -> "Ensemble":
        q = [plane_coords(p, spec) for p in points]
        return cls.from_frame([c.x for c in q], [c.y for c in q], seed, first_stream)

    @classmethod
    def on_segment(cls, n: int, params: Params, seed: int, first_stream: int = 0) -> "Ensemble":
        """n particles evenly spaced on [-a, a] x {0}."""
        xs = np.linspace(-params.a, params.a, n)
        return cls.from_frame(xs, np.zeros(n), seed, first_stream)


def step(p: TorusPoint, spec: FieldSpec, rng) -> TorusPoint:
    """One step of F: the cat map, then a kernel sample drawn from ``rng``."""
    q = plane_coords(p, spec)
    x, y = K.catmap_plane(q.x, q.y, spec.packed)
    return quantile(TorusPoint(*K.plane_to_torus(x, y)), spec, rng.next_uniform())


def step_plane(q: FramePoint, spec: FieldSpec, u: float) -> FramePoint:
    """One step of F on plane coordinates with a given kernel quantile u."""
    x, y = K.catmap_plane(q.x, q.y, spec.packed)
    return FramePoint(*K.kernel_point(x, y, u, spec.packed))


def default_threads() -> int:
    return os.cpu_count() or 1


def _chunks(n: int, parts: int):
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def propagate(e: Ensemble, spec: FieldSpec, n: int, threads: int = 1) -> Ensemble:
    """Advance every particle n steps; threads only changes wall time."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = e.copy()
    if n == 0 or len(out) == 0:
        return out
    threads = default_threads() if threads <= 0 else threads
    packed = spec.packed
    seed = np.uint64(e.seed)
    c0 = np.uint64(e.step_count)

    def work(bounds):
        lo, hi = bounds
        K.advance(out.xs[lo:hi], out.ys[lo:hi], out.streams[lo:hi], seed, c0, n, packed)

    parts = _chunks(len(out), max(1, threads))
    if len(parts) == 1:
        work(parts[0])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, parts))
    out.step_count = e.step_count + n
    return out


def perturb(e: Ensemble, spec: FieldSpec) -> Ensemble:
    """Apply the kernel alone (no map) using each particle's next counter."""
    out = e.copy()
    u = uniforms(e.seed, e.streams, e.step_count)
    packed = spec.packed
    for i in range(len(out)):
        out.xs[i], out.ys[i] = K.kernel_point(out.xs[i], out.ys[i], u[i], packed)
    out.step_count = e.step_count + 1
    return out


# --- diagnostics ------------------------------------------------------------

def segment_distances(xs: np.ndarray, ys: np.ndarray, params: Params) -> np.ndarray:
    """Frame distance to [-a, a] x {0}; off-chart points get the chart half-diagonal."""
    X, Y = params.chart_half_widths
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    dx = np.maximum(np.abs(xs) - params.a, 0.0)
    d = np.hypot(dx, ys)
    off = (np.abs(xs) > X) | (np.abs(ys) > Y)
    return np.where(off, math.hypot(X, Y), d)


def distance_to_segment(p: TorusPoint | FramePoint, params: Params) -> float:
    if isinstance(p, FramePoint):
        x, y = p.x, p.y
    else:
        x, y = K.torus_to_plane(p.u, p.v, K.pack_params(params))
    return float(segment_distances(np.array([x]), np.array([y]), params)[0])


@dataclass
class SegmentHistogram:
    """Density of x over [-a, a] (fixed bin width) for particles near the segment."""

    edges: np.ndarray
    density: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


@dataclass
class AttractorReport:
    step: int
    mean_dist: float
    frac_within: float
    mass_W: float
    layer_hist: LayerHistogram
    segment_hist: SegmentHistogram


def _near_segment(xs, ys, params, delta):
    return (segment_distances(xs, ys, params) <= delta) & (np.abs(xs) <= params.a)


def segment_counts(xs, ys, params: Params, delta: float, bins: int) -> np.ndarray:
    sel = _near_segment(xs, ys, params, delta)
    a = params.a
    j = np.floor((xs[sel] + a) / (2.0 * a) * bins).astype(np.int64)
    return np.bincount(np.clip(j, 0, bins - 1), minlength=bins)


def report(e: Ensemble, params: Params, delta: float, n_max: int = N_MAX_DEFAULT,
           bins: int = 200) -> AttractorReport:
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = len(e)
    dist = segment_distances(e.xs, e.ys, params)
    codes = layer_codes(e.xs, e.ys, params, n_max)
    hist = LayerHistogram.from_codes(codes, n_max)
    counts = segment_counts(e.xs, e.ys, params, delta, bins)
    edges = np.linspace(-params.a, params.a, bins + 1)
    width = 2.0 * params.a / bins
    density = counts / (max(n, 1) * width)
    return AttractorReport(
        step=e.step_count,
        mean_dist=math.fsum(dist) / max(n, 1),
        frac_within=float(np.count_nonzero(dist <= delta)) / max(n, 1),
        mass_W=math.fsum(hist.mass[1:]),
        layer_hist=hist,
        segment_hist=SegmentHistogram(edges, density),
    )


@dataclass
class CesaroAccumulator:
    """Running segment histogram summed over snapshots, split by particle batch.

    Particle i belongs to batch i mod ``batches``; batch-wise densities give
    the standard errors used by the symmetry test.
    """

    params: Params
    delta: float
    bins: int = 200
    batches: int = 20
    counts: np.ndarray = field(init=False)
    snapshots: int = field(default=0, init=False)
    batch_sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.zeros((self.batches, self.bins), dtype=np.int64)
        self.batch_sizes = np.zeros(self.batches, dtype=np.int64)

    def add(self, e: Ensemble) -> None:
        idx = np.arange(len(e)) % self.batches
        for b in range(self.batches):
            sel = idx == b
            self.counts[b] += segment_counts(e.xs[sel], e.ys[sel], self.params, self.delta, self.bins)
            if self.snapshots == 0:
                self.batch_sizes[b] = int(sel.sum())
        self.snapshots += 1

    @property
    def width(self) -> float:
        return 2.0 * self.params.a / self.bins

    def _batch_density(self) -> np.ndarray:
        norm = self.batch_sizes[:, None] * max(self.snapshots, 1) * self.width
        return self.counts / np.maximum(norm, 1)

    def density(self) -> np.ndarray:
        n = int(self.batch_sizes.sum())
        return self.counts.sum(axis=0) / (max(n, 1) * max(self.snapshots, 1) * self.width)

    def histogram(self) -> SegmentHistogram:
        return SegmentHistogram(np.linspace(-self.params.a, self.params.a, self.bins + 1),
                                self.density())

    def asymmetry(self) -> tuple[float, float]:
        """(L1 distance between the density and its mirror image, its batch-means sigma)."""
        return mirror_asymmetry(self._batch_density(), self.width, self.batch_sizes)


def mirror_asymmetry(batch_density: np.ndarray, width: float,
                     weights: np.ndarray | None = None) -> tuple[float, float]:
    """L1 mirror asymmetry of a batched histogram and its standard error.

    ``batch_density`` has shape (batches, bins).  Each batch gives the
    antisymmetric part A = h - h[::-1] over the left half; the pooled mean
    enters the L1 norm and the batch spread gives the per-bin standard error.
    """
    B, nb = batch_density.shape
    w = np.ones(B) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    half = nb // 2
    A = batch_density[:, :half] - batch_density[:, ::-1][:, :half]
    mean = w @ A
    var = (w[:, None] * (A - mean) ** 2).sum(axis=0) * B / max(B - 1, 1)
    se = np.sqrt(var / B)
    return 2.0 * width * float(np.abs(mean).sum()), 2.0 * width * float(se.sum())


# --- the one-dimensional chain on the segment ---------------------------------

def simulate_segment_chain(x: float, params: Params, rng, n: int) -> float:
    """Iterate x -> uniform[mu x - eps, mu x + eps] n times; needs |x| <= a."""
    a = params.a
    if abs(x) > a:
        raise ValueError("x must lie in [-a, a]")
    eps = params.epsilon
    for _ in range(n):
        x = MU * x + eps * (2.0 * rng.next_uniform() - 1.0)
    return x


@dataclass
class SegmentChainStats:
    edges: np.ndarray
    density: np.ndarray
    density_se: np.ndarray
    escapes: int
    steps: int
    burn_in: int

    @property
    def max_density(self) -> float:
        return float(self.density.max())

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])


def segment_chain_histogram(params: Params, seed: int, n: int = 10**7, burn_in: int = 1000,
                            bins: int = 200, batches: int = 50, x0: float = 0.0,
                            stream: int = 0) -> SegmentChainStats:
    """Stationary histogram of the segment chain with batch-means standard errors."""
    if n <= burn_in:
        raise ValueError("n must exceed burn_in")
    counts = np.zeros((batches, bins), dtype=np.int64)
    a = params.a
    _, esc = K.segment_run(x0, MU, params.epsilon, a, np.uint64(seed), np.uint64(stream),
                           np.uint64(0), n, burn_in, counts)
    width = 2.0 * a / bins
    per_batch = counts.sum(axis=1, keepdims=True)
    bd = counts / (np.maximum(per_batch, 1) * width)
    dens = counts.sum(axis=0) / ((n - burn_in) * width)
    se = bd.std(axis=0, ddof=1) / math.sqrt(batches)
    return SegmentChainStats(np.linspace(-a, a, bins + 1), dens, se, int(esc), n, burn_in)


# --- idealized local model ------------------------------------------------------

@dataclass
class IdealizedEnsemble:
    """Particles of the local model with reinjection (see the kernel docstring)."""

    xs: np.ndarray
    ys: np.ndarray
    out: np.ndarray  # True once a particle has left W
    streams: np.ndarray
    seed: int
    q: float
    step_count: int = 0

    def codes(self, params: Params, n_max: int = N_MAX_DEFAULT) -> np.ndarray:
        c = layer_codes(self.xs, self.ys, params, n_max)
        c[self.out] = 0
        return c


def idealized_start(n: int, params: Params, seed: int, q: float,
                    frac_outside: float = 0.5) -> IdealizedEnsemble:
    """A mixture: ``frac_outside`` of the particles outside W, the rest reinjected."""
    streams = np.arange(n, dtype=np.uint64)
    xs = np.zeros(n)
    ys = np.zeros(n)
    n_out = int(round(frac_outside * n))
    out = np.zeros(n, dtype=bool)
    out[:n_out] = True
    # a forced reinjection step for the inside part uses the q = 1 branch
    tmp_out = np.ones(n - n_out, dtype=bool)
    xi, yi = xs[n_out:].copy(), ys[n_out:].copy()
    K.idealized_advance(xi, yi, tmp_out, streams[n_out:], np.uint64(seed), np.uint64(INIT_COUNTER),
                        1, 1.0, K.pack_params(params))
    xs[n_out:], ys[n_out:] = xi, yi
    return IdealizedEnsemble(xs, ys, out, streams, seed, q)


def idealized_propagate(e: IdealizedEnsemble, params: Params, n: int) -> IdealizedEnsemble:
    out = replace(e, xs=e.xs.copy(), ys=e.ys.copy(), out=e.out.copy())
    K.idealized_advance(out.xs, out.ys, out.out, out.streams, np.uint64(e.seed),
                        np.uint64(4 * e.step_count), n, float(e.q), K.pack_params(params))
    out.step_count = e.step_count + n
    return out
