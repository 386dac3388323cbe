"""Transition kernel Q_p: uniform measure on the arc of length 2 eps centred at p.

Random numbers come from Philox4x32-10 (Random123).  A draw is a pure function
of (seed, stream_id, counter): the 128-bit counter block is
(counter_lo, counter_hi, stream_lo, stream_hi), the key is (seed_lo, seed_hi),
and the top 53 of the first 64 output bits form a double in [0, 1).  Each
kernel sample consumes exactly one counter value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .field import FieldSpec
from .geometry import FramePoint, TorusPoint

_U64 = (1 << 64) - 1


@dataclass
class RngStream:
    seed: int
    stream_id: int
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id", "counter"):
            val = getattr(self, name)
            if not 0 <= val <= _U64:
                raise ValueError(f"{name} must fit in 64 unsigned bits")

    def peek(self, counter: int | None = None) -> float:
        c = self.counter if counter is None else counter
        return K.uniform01(np.uint64(self.seed), np.uint64(self.stream_id), np.uint64(c))

    def next_uniform(self) -> float:
        u = self.peek()
        self.counter = (self.counter + 1) & _U64
        return u


def uniforms(seed: int, stream_ids: np.ndarray, counter: int) -> np.ndarray:
    """One draw per stream at a common counter value."""
    streams = np.ascontiguousarray(stream_ids, dtype=np.uint64)
    out = np.empty(streams.shape[0])
    K.uniform_block(np.uint64(seed), streams, np.uint64(counter), out)
    return out


def plane_coords(p: TorusPoint, spec: FieldSpec) -> FramePoint:
    """Chart coordinates of p, or coordinates of its centred lift if off-chart."""
    x, y = K.torus_to_plane(p.u, p.v, spec.packed)
    return FramePoint(x, y)


@dataclass
class KernelSupport:
    center: TorusPoint
    epsilon: float
    parameterization: Callable[[float], TorusPoint]

    def frame_path(self, spec: FieldSpec, n: int = 101) -> np.ndarray:
        """(n, 2) array of plane coordinates along the arc, s from -eps to eps."""
        q = plane_coords(self.center, spec)
        out = np.empty((n, 2))
        for i, s in enumerate(np.linspace(-self.epsilon, self.epsilon, n)):
            out[i] = K.flow_plane(q.x, q.y, s, spec.packed)
        return out


def support(p: TorusPoint, spec: FieldSpec) -> KernelSupport:
    eps = spec.params.epsilon
    q = plane_coords(p, spec)

    def param(s: float) -> TorusPoint:
        if abs(s) > eps:
            raise ValueError(f"|s| must not exceed eps={eps}")
        x, y = K.flow_plane(q.x, q.y, s, spec.packed)
        return TorusPoint(*K.plane_to_torus(x, y))

    return KernelSupport(p, eps, param)


def quantile(p: TorusPoint, spec: FieldSpec, u: float) -> TorusPoint:
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    q = plane_coords(p, spec)
    x, y = K.kernel_point(q.x, q.y, u, spec.packed)
    return TorusPoint(*K.plane_to_torus(x, y))


def quantile_frame(q: FramePoint, spec: FieldSpec, u: float) -> FramePoint:
    """Quantile in chart coordinates; the image is settled into the chart when possible."""
    x, y = K.kernel_point(q.x, q.y, u, spec.packed)
    return FramePoint(x, y)


def sample(p: TorusPoint, spec: FieldSpec, rng) -> TorusPoint:
    """Draw from Q_p; ``rng`` is anything with ``next_uniform()``."""
    return quantile(p, spec, rng.next_uniform())
