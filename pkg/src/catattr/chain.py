"""Countable-state chains that dominate the layer dynamics.

Transition rows are built in exact rational arithmetic; float matrices for
pushing distributions are derived from them.  States above the truncation
``n_max`` collapse into an absorbing overflow state, which only ever makes
tail sums larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._kernels import uniform01  # noqa: F401  (re-exported for scripts)
from .kernel import uniforms

TWO_THIRDS = Fraction(2, 3)
ONE_THIRD = Fraction(1, 3)
N_MAX_CHAIN = 500


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class BirthDeathChain:
    """Up 2/3, down 1/3 from k >= 1; 0 -> 1 with probability q."""

    q: Fraction | float

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError("q must lie in (0, 1]")

    def row(self, k: int) -> dict[int, Fraction]:
        if k < 0:
            raise ValueError("states are nonnegative")
        if k == 0:
            q = _exact(self.q)
            return {0: 1 - q, 1: q} if q < 1 else {1: q}
        return {k + 1: TWO_THIRDS, k - 1: ONE_THIRD}

    @property
    def max_down(self) -> int:
        return 1


@dataclass(frozen=True)
class NStepChain:
    """Binomial N-step version; low states send the truncated remainder to 0."""

    N: int
    eta: Fraction | float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")

    def _binom(self, s: int) -> Fraction:
        return math.comb(self.N, s) * TWO_THIRDS ** (self.N - s) * ONE_THIRD**s

    def row(self, k: int) -> dict[int, Fraction]:
        if k < 0:
            raise ValueError("states are nonnegative")
        N = self.N
        if k == 0:
            eta = _exact(self.eta)
            return {0: 1 - eta, 1: eta} if eta < 1 else {1: eta}
        if k >= N:
            return {k + N - 2 * s: self._binom(s) for s in range(N + 1)}
        s_last = (k + N - 1) // 2  # 1 <= k + N - 2 s_last <= 2
        r = {k + N - 2 * i: self._binom(i) for i in range(s_last + 1)}
        rest = 1 - sum(r.values())
        if rest:
            r[0] = r.get(0, Fraction(0)) + rest
        return r

    @property
    def max_down(self) -> int:
        return self.N


@lru_cache(maxsize=64)
def transition_matrix(chain, n_max: int = N_MAX_CHAIN) -> np.ndarray:
    """Float matrix on states 0..n_max plus an absorbing overflow state."""
    size = n_max + 2
    P = np.zeros((size, size))
    for k in range(n_max + 1):
        for j, pr in chain.row(k).items():
            P[k, min(j, n_max + 1)] += float(pr)
    P[n_max + 1, n_max + 1] = 1.0
    P.setflags(write=False)
    return P


@dataclass
class ChainDistribution:
    """Mass on states 0..n_max; the last entry is the overflow state."""

    mass: np.ndarray

    @classmethod
    def point(cls, k: int, n_max: int = N_MAX_CHAIN) -> "ChainDistribution":
        m = np.zeros(n_max + 2)
        m[min(k, n_max + 1)] = 1.0
        return cls(m)

    @property
    def n_max(self) -> int:
        return len(self.mass) - 2

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    def tail(self, k: int) -> float:
        return math.fsum(self.mass[k:])


def push(dist: ChainDistribution, chain) -> ChainDistribution:
    P = transition_matrix(chain, dist.n_max)
    return ChainDistribution(dist.mass @ P)


# --- Lyapunov certificate --------------------------------------------------

@dataclass
class LyapunovResult:
    max_residual: Fraction  # max |E_k phi(S_1) - phi(k)| over the checked states
    e0: Fraction  # E_0 phi(S_1)
    checked: range
    low_state_excess: dict[int, Fraction] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.max_residual == 0 and self.e0 <= 1


def _phi(k: int) -> Fraction:
    return Fraction(1, 2**k)


def expected_phi(chain, k: int) -> Fraction:
    return sum((pr * _phi(j) for j, pr in chain.row(k).items()), Fraction(0))


def lyapunov_check(chain, n_max: int = N_MAX_CHAIN) -> LyapunovResult:
    """Residuals of E_k phi(S_1) = phi(k) for phi(k) = 2^-k, exactly.

    For the N-step chain the identity is checked for k >= N; the states
    1..N-1 form the finite exceptional set and their excess is reported.
    """
    first = getattr(chain, "N", 1)
    checked = range(first, n_max + 1)
    worst = Fraction(0)
    for k in checked:
        r = abs(expected_phi(chain, k) - _phi(k))
        if r > worst:
            worst = r
    low = {k: expected_phi(chain, k) - _phi(k) for k in range(1, first)}
    return LyapunovResult(worst, expected_phi(chain, 0), checked, low)


def row_sums_exact(chain, n_max: int = N_MAX_CHAIN) -> bool:
    return all(sum(chain.row(k).values()) == 1 for k in range(n_max + 1))


# --- hitting probabilities ---------------------------------------------------

@dataclass
class HittingResult:
    mc: float
    mc_se: float
    exact: float
    n_paths: int


def hitting_dp(chain, start: int, target: int, horizon: int, n_trunc: int = 200) -> float:
    """P(reach a state <= target within horizon steps), by backward recursion.

    States above n_trunc count as never returning, which biases the value
    down by at most the return probability from n_trunc.
    """
    if start <= target:
        return 1.0
    size = n_trunc + 1
    P = np.zeros((size, size))
    for k in range(size):
        for j, pr in chain.row(k).items():
            if j < size:
                P[k, j] += float(pr)
    v = (np.arange(size) <= target).astype(float)
    hit = v.copy()
    for _ in range(horizon):
        v = np.where(hit > 0, 1.0, P @ v)
    return float(v[start])


def _sampling_tables(chain, n_trunc: int):
    rows = [sorted(chain.row(k).items()) for k in range(n_trunc + 1)]
    width = max(len(r) for r in rows)
    dst = np.full((n_trunc + 1, width), n_trunc + 1, dtype=np.int64)
    cum = np.ones((n_trunc + 1, width))
    for k, r in enumerate(rows):
        acc = Fraction(0)
        for i, (j, pr) in enumerate(r):
            acc += pr
            dst[k, i] = j
            cum[k, i] = float(acc)
        cum[k, len(r) - 1:] = 1.0
        dst[k, len(r):] = r[-1][0]
    return dst, cum


def hitting_probability(chain, start: int, target: int, horizon: int,
                        n_paths: int = 100_000, seed: int = 0,
                        n_trunc: int = 200) -> HittingResult:
    """Monte Carlo estimate of the hitting probability plus the exact DP value.

    Path i draws its j-th step from stream i at counter j.  A path that climbs
    above n_trunc is stopped as a miss (its return chance is below 2^-n_trunc
    for these chains).
    """
    if start < target:
        raise ValueError("start must be >= target")
    exact = hitting_dp(chain, start, target, horizon, n_trunc)
    if start == target:
        return HittingResult(1.0, 0.0, exact, n_paths)
    dst, cum = _sampling_tables(chain, n_trunc)
    state = np.full(n_paths, start, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)
    hit = np.zeros(n_paths, dtype=bool)
    ids = np.arange(n_paths, dtype=np.uint64)
    for t in range(horizon):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        u = uniforms(seed, ids[idx], t)
        s = state[idx]
        choice = (cum[s] <= u[:, None]).sum(axis=1)
        choice = np.minimum(choice, cum.shape[1] - 1)
        new = dst[s, choice]
        state[idx] = new
        got = new <= target
        hit[idx[got]] = True
        alive[idx[got | (new > n_trunc)]] = False
    p = hit.mean()
    return HittingResult(float(p), math.sqrt(p * (1 - p) / n_paths), exact, n_paths)


# --- domination and escape ------------------------------------------------------

@dataclass
class DominationResult:
    margins: np.ndarray  # (n_steps + 1, k_max + 1) layer tail minus chain tail
    sigmas: np.ndarray  # binomial standard error of each layer tail
    min_margin: float  # over n >= 1 when later rows exist
    worst: tuple[int, int]
    min_scaled: float  # min of margin / sigma over entries with sigma > 0
    atol: float = 1e-12  # float slack for tails that are exactly 0 or 1

    @property
    def ok(self) -> bool:
        return bool(np.all(self.margins >= -3.0 * self.sigmas - self.atol))


def chain_start_from_layers(hist, n_max: int = N_MAX_CHAIN) -> ChainDistribution:
    """nu[i] = mu(L_i); overflow and segment mass sit just past the last layer."""
    m = np.zeros(n_max + 2)
    L = hist.n_max
    m[: L + 1] = hist.mass[: L + 1]
    m[L + 1] += hist.mass[L + 1] + hist.mass[L + 2]
    return ChainDistribution(m)


def domination_check(layer_hists, chain, n_particles: int, k_max: int = 20,
                     n_max: int = N_MAX_CHAIN) -> DominationResult:
    """Compare tails of the layer histograms against the chain started from the first.

    ``layer_hists[n]`` is the ensemble's layer histogram after n chain-steps'
    worth of dynamics.
    """
    dist = chain_start_from_layers(layer_hists[0], n_max)
    n_steps = len(layer_hists) - 1
    margins = np.empty((n_steps + 1, k_max + 1))
    sigmas = np.empty_like(margins)
    for n, hist in enumerate(layer_hists):
        if n > 0:
            dist = push(dist, chain)
        for k in range(k_max + 1):
            lt = hist.tail(k)
            p = min(max(lt, 0.0), 1.0)
            margins[n, k] = lt - dist.tail(k)
            sigmas[n, k] = math.sqrt(p * (1.0 - p) / n_particles)
    # row 0 compares the start with itself; summarise the later rows when there are any
    r0 = 1 if n_steps else 0
    m, sd = margins[r0:], sigmas[r0:]
    idx = np.unravel_index(np.argmin(m), m.shape)
    pos = sd > 0
    # no division where the tail estimate has zero variance
    scaled = float(np.min(m[pos] / sd[pos])) if pos.any() else float("inf")
    return DominationResult(margins, sigmas, float(m[idx]), (int(idx[0]) + r0, int(idx[1])), scaled)


def escape_profile(chain, dist: ChainDistribution, n: int, k: int) -> np.ndarray:
    """Mass on states 0..k after 0..n exact pushes (length n + 1)."""
    out = np.empty(n + 1)
    out[0] = math.fsum(dist.mass[: k + 1])
    for t in range(1, n + 1):
        dist = push(dist, chain)
        out[t] = math.fsum(dist.mass[: k + 1])
    return out
