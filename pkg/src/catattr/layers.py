"""Layer decomposition of W, closed-form return-rate bounds and rotation gaps."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .field import LevelCurve, arc_length
from .geometry import LAM, TAU, FramePoint, Params, check_constraints

N_MAX_DEFAULT = 20
# effectively untruncated: c_n underflows long before this
N_MAX_EXACT = 2500


@dataclass(frozen=True, order=True)
class LayerIndex:
    """Position in the layer order; ``depth`` grows toward the segment.

    depth 0 is L_0 = W^c, depth n is L_n, depth n_max + 1 is the overflow
    bucket and depth n_max + 2 the segment itself.
    """

    depth: int
    n_max: int = field(default=N_MAX_DEFAULT, compare=False)

    @property
    def is_outside(self) -> bool:
        return self.depth == 0

    @property
    def is_attractor(self) -> bool:
        return self.depth == self.n_max + 2

    @property
    def is_overflow(self) -> bool:
        return self.depth == self.n_max + 1

    @property
    def layer(self) -> int | None:
        return self.depth if 1 <= self.depth <= self.n_max else None

    def __repr__(self):
        if self.is_outside:
            return "Outside"
        if self.is_attractor:
            return "Attractor"
        if self.is_overflow:
            return f"Overflow(>{self.n_max})"
        return f"Layer({self.depth})"


@lru_cache(maxsize=32)
def _table(b: float, n_max: int) -> np.ndarray:
    t = K.level_table(b, min(n_max, N_MAX_EXACT))
    t.setflags(write=False)
    return t


def _packed(params: Params) -> np.ndarray:
    return K.pack_params(params)


def layer_index(q: FramePoint, params: Params, n_max: int = N_MAX_DEFAULT) -> LayerIndex:
    c = _table(params.b, n_max)
    code = K.layer_code(q.x, q.y, _packed(params), c)
    return LayerIndex(_widen(code, len(c) - 1, n_max), n_max)


def _widen(code, n_eff, n_max):
    # map codes from a table capped at n_eff back onto the requested n_max
    if n_eff == n_max:
        return code
    if code == n_eff + 2:
        return n_max + 2
    return code


def layer_codes(xs: np.ndarray, ys: np.ndarray, params: Params,
                n_max: int = N_MAX_DEFAULT) -> np.ndarray:
    """Vectorised layer depths (see LayerIndex) for chart coordinates."""
    c = _table(params.b, n_max)
    out = np.empty(len(xs), dtype=np.int64)
    K.layer_codes(np.ascontiguousarray(xs, dtype=float), np.ascontiguousarray(ys, dtype=float),
                  _packed(params), c, out)
    n_eff = len(c) - 1
    if n_eff != n_max:
        out[out == n_eff + 2] = n_max + 2
    return out


@dataclass
class LayerHistogram:
    """Mass per depth: [L_0, L_1 .. L_nmax, overflow, segment]."""

    mass: np.ndarray
    n_max: int = N_MAX_DEFAULT

    @classmethod
    def from_codes(cls, codes: np.ndarray, n_max: int = N_MAX_DEFAULT,
                   weight: float | None = None) -> "LayerHistogram":
        counts = np.bincount(codes, minlength=n_max + 3).astype(float)
        w = 1.0 / max(len(codes), 1) if weight is None else weight
        return cls(counts * w, n_max)

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    @property
    def overflow(self) -> float:
        return float(self.mass[self.n_max + 1])

    @property
    def attractor(self) -> float:
        return float(self.mass[self.n_max + 2])

    def tail(self, k: int) -> float:
        """Mass at depth >= k; overflow and segment count toward every tail."""
        return math.fsum(self.mass[k:])

    def tails(self) -> np.ndarray:
        return np.array([self.tail(k) for k in range(self.n_max + 1)])

    def rebin(self, n_max: int) -> "LayerHistogram":
        """Coarsen to a smaller truncation, folding deep layers into overflow."""
        if n_max > self.n_max:
            raise ValueError("can only rebin to a coarser truncation")
        m = np.zeros(n_max + 3)
        m[: n_max + 1] = self.mass[: n_max + 1]
        m[n_max + 1] = math.fsum(self.mass[n_max + 1: self.n_max + 2])
        m[n_max + 2] = self.mass[self.n_max + 2]
        return LayerHistogram(m, n_max)


def fraction_increasing(before: np.ndarray, after: np.ndarray) -> float:
    """Fraction of the W-mass whose layer depth strictly increased.

    ``before``/``after`` are paired per-particle depths computed with the same
    truncation; particles outside W beforehand are ignored.
    """
    before = np.asarray(before)
    after = np.asarray(after)
    if before.shape != after.shape:
        raise ValueError("before and after must be paired")
    in_w = before >= 1
    n = int(in_w.sum())
    if n == 0:
        return float("nan")
    return float(np.count_nonzero(after[in_w] > before[in_w])) / n


def arc_within_x0(K_level: float, params: Params) -> float:
    """Length of gamma_K over [0, x0]; below eps/3 whenever B1 holds."""
    if not 0.0 <= K_level <= params.b:
        raise ValueError("level must lie in [0, b]")
    val = arc_length(LevelCurve(K_level, params.sigma), 0.0, params.x0)
    b1 = check_constraints(params).constraints[0]
    if b1.holds and not val < params.epsilon / 3.0:
        raise ArithmeticError(f"arc {val} >= eps/3 although B1 holds")
    return val


def log_kappa_bound(k: int, params: Params, tilted: bool = False) -> float:
    if k < 0:
        raise ValueError("k must be >= 0")
    eps, dp = params.epsilon, params.d_prime
    lc = math.log(math.cos(params.phi)) if tilted else 0.0
    if k == 0:
        return math.log(dp) - math.log(LAM) - math.log(eps) - lc
    return k * (math.log(dp) - math.log(eps) - lc) - k * (k + 3) / 2.0 * math.log(LAM)


def kappa_bound(k: int, params: Params, tilted: bool = False) -> float:
    """Lower bound on the mass steered into U after k wrapping steps.

    k = 0 gives d'/(lam eps) (divided by cos(phi) when tilted); larger k use the
    telescoped product (d')^k / (eps^k [cos^k phi] lam^(k(k+3)/2)).  Values
    below the float range underflow to 0; ``log_kappa_bound`` keeps them.
    """
    return math.exp(log_kappa_bound(k, params, tilted))


def _rotation_points(n: int) -> np.ndarray:
    i = np.arange(n + 1, dtype=float)
    return np.sort(np.mod(i * TAU, 1.0))


def rotation_gaps(n: int) -> np.ndarray:
    """Circular gaps between the points i*tau mod 1, 0 <= i <= n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = _rotation_points(n)
    return np.diff(np.append(pts, pts[0] + 1.0))


def rotation_gap_max(n: int) -> float:
    return float(rotation_gaps(n).max())


def min_crossing_count(alpha: float) -> int:
    """Smallest n such that every arc of length alpha meets {i tau : i <= n}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = 1, 2
    while rotation_gap_max(hi) >= alpha:
        lo, hi = hi, hi * 2
    # gap_max is nonincreasing in n
    while lo < hi:
        mid = (lo + hi) // 2
        if rotation_gap_max(mid) < alpha:
            hi = mid
        else:
            lo = mid + 1
    return lo


def distinct_gap_lengths(n: int, rel_tol: float = 1e-9) -> list[float]:
    """Distinct gap lengths among the rotation points (clustered to rel_tol).

    Points i*tau mod 1 carry absolute rounding error of order n ulp, so the
    clustering tolerance never drops below that.
    """
    floor = 64.0 * (n + 1) * np.finfo(float).eps
    vals: list[float] = []
    for g in np.sort(rotation_gaps(n)):
        tol = max(rel_tol * g, floor)
        j = bisect.bisect_left(vals, g - tol)
        if j < len(vals) and abs(vals[j] - g) <= tol:
            continue
        bisect.insort(vals, float(g))
    return vals
