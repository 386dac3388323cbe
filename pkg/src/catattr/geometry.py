"""Torus arithmetic, the cat map, the stable/unstable chart and parameter checks.

Frame coordinates are taken at the fixed point (0, 0): ``x`` runs along the
stable eigenvector ``(-tau, 1)`` and ``y`` along the unstable eigenvector
``(1, tau)``, both normalised.  The matrix is symmetric, so the frame is an
orthonormal rotation of the standard coordinates and the cat map acts in it as
``(x, y) -> (mu x, lam y)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SQRT5 = math.sqrt(5.0)
MU = (3.0 - SQRT5) / 2.0
LAM = (3.0 + SQRT5) / 2.0
TAU = (SQRT5 - 1.0) / 2.0

_NORM = math.sqrt(1.0 + TAU * TAU)
E_S = np.array([-TAU / _NORM, 1.0 / _NORM])
E_U = np.array([1.0 / _NORM, TAU / _NORM])

# x0 / sigma, the half-width (in units of sigma) outside of which one cat-map
# step strictly lowers the Gaussian level by a factor lam.
X0_OVER_SIGMA = math.sqrt(4.0 * math.log(LAM) / (1.0 - MU * MU))


class OutOfChart(ValueError):
    """Raised when a torus point has no representative inside the chart window."""


def _mod1(t: float) -> float:
    r = t % 1.0
    # -1e-17 % 1.0 == 1.0 in IEEE arithmetic
    return 0.0 if r >= 1.0 else r


@dataclass(frozen=True)
class TorusPoint:
    u: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "u", _mod1(float(self.u)))
        object.__setattr__(self, "v", _mod1(float(self.v)))


@dataclass(frozen=True)
class FramePoint:
    x: float
    y: float


@dataclass(frozen=True)
class Params:
    """Construction constants; every derived quantity is a property."""

    epsilon: float
    sigma: float
    b: float
    beta: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "sigma", "b", "beta"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val!r}")
        if not (math.isfinite(self.phi) and abs(self.phi) < math.pi / 2):
            raise ValueError(f"phi must lie in (-pi/2, pi/2), got {self.phi!r}")

    mu = MU
    lam = LAM
    tau = TAU

    @property
    def a(self) -> float:
        return self.epsilon / (1.0 - MU)

    @property
    def x0(self) -> float:
        return self.sigma * X0_OVER_SIGMA

    @property
    def d(self) -> float:
        return self.b * math.exp(-self.a**2 / (2.0 * self.sigma**2))

    @property
    def d_prime(self) -> float:
        return (self.b + self.beta) * math.exp(-((self.a + self.beta) ** 2) / (2.0 * self.sigma**2))

    @property
    def chart_half_widths(self) -> tuple[float, float]:
        """Half-widths (X, Y) of the chart rectangle in frame coordinates."""
        return (self.a + self.beta + self.epsilon, self.b + self.beta + self.epsilon)

    def replace(self, **changes) -> "Params":
        vals = dict(epsilon=self.epsilon, sigma=self.sigma, b=self.b, beta=self.beta, phi=self.phi)
        vals.update(changes)
        return Params(**vals)


DEFAULT_PARAMS = Params(epsilon=0.08, sigma=0.01, b=0.005, beta=0.005, phi=0.009)


class RegionTag(enum.Enum):
    W = "W"
    COLLAR = "Collar"  # U' \ W
    OUTER_COLLAR = "OuterCollar"  # U \ U'
    EXTERIOR = "Exterior"  # complement of U
    QC_SUB = "QcSub"  # (U \ W) & f^-1 W
    QF_SUB = "QfSub"  # (U \ W) \ f^-1 W


# --- torus maps -----------------------------------------------------------

def cat_map(p: TorusPoint) -> TorusPoint:
    return TorusPoint(2.0 * p.u + p.v, p.u + p.v)


def cat_map_inverse(p: TorusPoint) -> TorusPoint:
    return TorusPoint(p.u - p.v, -p.u + 2.0 * p.v)


def cat_map_array(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.mod(2.0 * u + v, 1.0), np.mod(u + v, 1.0)


# --- chart ----------------------------------------------------------------

def in_window(x: float, y: float, params: Params) -> bool:
    X, Y = params.chart_half_widths
    return abs(x) <= X and abs(y) <= Y


def to_frame(p: TorusPoint, params: Params) -> FramePoint:
    """Frame coordinates of the chart representative of ``p``.

    Raises OutOfChart when no lattice translate of ``p`` falls in the window.
    """
    cu = p.u - round(p.u)
    cv = p.v - round(p.v)
    best = None
    for n1 in (0, -1, 1):
        for n2 in (0, -1, 1):
            pu, pv = cu - n1, cv - n2
            x = pu * E_S[0] + pv * E_S[1]
            y = pu * E_U[0] + pv * E_U[1]
            if in_window(x, y, params):
                r = x * x + y * y
                if best is None or r < best[0]:
                    best = (r, x, y)
    if best is None:
        raise OutOfChart(f"{p} is outside the chart window")
    return FramePoint(best[1], best[2])


def from_frame(q: FramePoint) -> TorusPoint:
    return TorusPoint(q.x * E_S[0] + q.y * E_U[0], q.x * E_S[1] + q.y * E_U[1])


def frame_map(q: FramePoint) -> FramePoint:
    """The cat map in frame coordinates (exact linear form)."""
    return FramePoint(MU * q.x, LAM * q.y)


def chart_overlaps(params: Params) -> list[tuple[int, int]]:
    """Nonzero lattice vectors whose translate of the chart rectangle meets it."""
    X, Y = params.chart_half_widths
    reach = max(3, math.ceil(math.hypot(2 * X, 2 * Y)) + 1)
    hits = []
    for n1 in range(-reach, reach + 1):
        for n2 in range(-reach, reach + 1):
            if n1 == 0 and n2 == 0:
                continue
            x = n1 * E_S[0] + n2 * E_S[1]
            y = n1 * E_U[0] + n2 * E_U[1]
            if abs(x) < 2 * X and abs(y) < 2 * Y:
                hits.append((n1, n2))
    return hits


# --- regions --------------------------------------------------------------

def _gauss(x: float, sigma: float) -> float:
    return math.exp(-x * x / (2.0 * sigma * sigma))


def _in_w(x: float, y: float, params: Params) -> bool:
    return abs(x) < params.a and abs(y) < params.b * _gauss(x, params.sigma)


def region_classify(q: FramePoint, params: Params, refine: bool = False) -> RegionTag:
    """Region of a frame point; all regions are open, boundaries go outward.

    With ``refine=True`` points of U \\ W are split into QcSub (those mapped into
    W by one cat-map step) and QfSub.
    """
    x, y = q.x, q.y
    g = _gauss(x, params.sigma)
    if _in_w(x, y, params):
        return RegionTag.W
    in_band = abs(y) < (params.b + params.beta) * g
    in_u = in_band and abs(x) < params.a + params.beta
    if not in_u:
        return RegionTag.EXTERIOR
    if refine:
        return RegionTag.QC_SUB if _in_w(MU * x, LAM * y, params) else RegionTag.QF_SUB
    if abs(x) < params.a + params.beta / 2:
        return RegionTag.COLLAR
    return RegionTag.OUTER_COLLAR


# --- parameter regime -----------------------------------------------------

@dataclass
class Constraint:
    name: str
    lhs: float
    relation: str
    rhs: float
    holds: bool
    note: str = ""


@dataclass
class ValidationReport:
    constraints: list[Constraint] = field(default_factory=list)

    @property
    def violated(self) -> list[str]:
        return [c.name for c in self.constraints if not c.holds]

    @property
    def ok(self) -> bool:
        return not self.violated


def check_constraints(params: Params) -> ValidationReport:
    """Evaluate every regime inequality with both sides exposed.

    The tilt enters only through |phi|; the construction is mirror symmetric.
    """
    p = params
    eps, b, beta = p.epsilon, p.b, p.beta
    sphi, tphi = abs(math.sin(p.phi)), abs(math.tan(p.phi))
    rep = ValidationReport()

    def add(name, lhs, rel, rhs, note=""):
        holds = {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs}[rel]
        rep.constraints.append(Constraint(name, lhs, rel, rhs, bool(holds), note))

    add("B1", eps, ">", 3.0 * (p.x0 + b), "eps > 3(x0 + b)")
    add("B2a", beta, "<", eps / 7.0, "beta < eps/7")
    add("B2b", beta, "<=", (LAM - 1.0) * b, "beta <= (lam-1) b")
    add("B3", beta / 4.0, ">", eps * sphi / (1.0 - MU) + p.d_prime * tphi,
        "beta/4 > eps sin(phi)/(1-mu) + d' tan(phi)")
    add("eps<2a", eps, "<", 2.0 * p.a, "eps < 2a")
    overlaps = chart_overlaps(p)
    add("chart", float(len(overlaps)), "<=", 0.0,
        "chart rectangle free of lattice self-overlap" + (f" (hits {overlaps[:3]})" if overlaps else ""))
    return rep


def validate_params(params: Params) -> list[str]:
    """Names of violated constraints; an empty list means the regime is valid."""
    return check_constraints(params).violated
