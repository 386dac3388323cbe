"""The perturbation vector field and arc-length geometry of Gaussian level curves.

Inside W the field is tangent to the curves y = K exp(-x^2 / 2 sigma^2) with
positive x-component; outside U' it is the constant unit vector at angle phi
from the unstable axis; in U' \\ W the two are mixed by a smooth bump of the
normalised transverse coordinate and renormalised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels as K
from ._kernels import NonConvergence
from .geometry import FramePoint, Params, TorusPoint, from_frame

__all__ = [
    "FieldSpec", "LevelCurve", "NonConvergence", "arc_length", "arc_point",
    "field_at", "flow_curve", "flow_plane", "level_of",
]


@dataclass(frozen=True)
class LevelCurve:
    K: float
    sigma: float

    def __call__(self, x: float) -> float:
        return self.K * math.exp(-x * x / (2.0 * self.sigma**2))

    def speed(self, x: float) -> float:
        """|d/dx (x, gamma(x))|."""
        slope = -x * self(x) / self.sigma**2
        return math.sqrt(1.0 + slope * slope)


@dataclass(frozen=True)
class FieldSpec:
    params: Params
    blend_sharpness: float = 1.0

    def __post_init__(self):
        if not self.blend_sharpness > 0:
            raise ValueError("blend_sharpness must be positive")

    @cached_property
    def packed(self) -> np.ndarray:
        return K.pack_params(self.params, self.blend_sharpness)

    @property
    def step(self) -> float:
        """RK4 step used in the blend zone."""
        return float(self.packed[K.H])


def level_of(q: FramePoint, sigma: float) -> float:
    return K.level(q.x, q.y, sigma)


def field_at(q: FramePoint, spec: FieldSpec) -> np.ndarray:
    return np.array(K.field(q.x, q.y, spec.packed))


def blend_weight(q: FramePoint, spec: FieldSpec) -> float:
    """Weight of the tilted field at q (0 on closed W, 1 outside U')."""
    return K.chi(q.x, q.y, spec.packed)


def _adaptive_simpson(f, a, b, tol, fa, fm, fb, whole, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    diff = left + right - whole
    if depth <= 0 or abs(diff) <= 15.0 * tol:
        return left + right + diff / 15.0
    return (_adaptive_simpson(f, a, m, tol / 2.0, fa, flm, fm, left, depth - 1)
            + _adaptive_simpson(f, m, b, tol / 2.0, fm, frm, fb, right, depth - 1))


def arc_length(curve: LevelCurve, x1: float, x2: float, tol: float = 1e-10) -> float:
    """Length of the curve between abscissae x1 <= x2 (adaptive Simpson)."""
    if x2 < x1:
        raise ValueError("arc_length needs x1 <= x2")
    if x1 == x2:
        return 0.0
    if curve.K == 0.0:
        return x2 - x1
    # the integrand has features on the scale sigma; seed the recursion with
    # panels no wider than that so no bump is skipped
    n = max(1, math.ceil((x2 - x1) / curve.sigma))
    edges = np.linspace(x1, x2, n + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        fa, fb = curve.speed(a), curve.speed(b)
        fm = curve.speed(0.5 * (a + b))
        whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        total += _adaptive_simpson(curve.speed, a, b, tol / n, fa, fm, fb, whole, 50)
    return total


def _signed_arc(curve, x_start, x):
    if x >= x_start:
        return arc_length(curve, x_start, x)
    return -arc_length(curve, x, x_start)


def arc_point(curve: LevelCurve, x_start: float, s: float, tol: float = 1e-10,
              max_iter: int = 200) -> FramePoint:
    """Point at signed arc length s from (x_start, curve(x_start)), by bisection."""
    if s == 0.0:
        return FramePoint(x_start, curve(x_start))
    # arc >= |dx| and exceeds it by at most the curve's total variation 2|K|
    if s > 0:
        lo, hi = x_start + max(s - 2.0 * abs(curve.K), 0.0), x_start + s
    else:
        lo, hi = x_start + s, x_start + min(s + 2.0 * abs(curve.K), 0.0)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = _signed_arc(curve, x_start, mid) - s
        if abs(err) < tol or hi - lo < 1e-15:
            return FramePoint(mid, curve(mid))
        if err > 0:
            hi = mid
        else:
            lo = mid
    raise NonConvergence(f"arc_point bisection did not converge in {max_iter} iterations")


def flow_plane(q: FramePoint, spec: FieldSpec, s: float) -> FramePoint:
    """Integral curve of V through q at arc length s, in unwrapped plane coordinates."""
    x, y = K.flow_plane(q.x, q.y, s, spec.packed)
    return FramePoint(x, y)


def flow_curve(q: FramePoint, spec: FieldSpec, s: float) -> TorusPoint:
    return from_frame(flow_plane(q, spec, s))
