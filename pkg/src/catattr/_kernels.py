"""Compiled per-particle kernels shared by the public modules.

Everything here is scalar code over a packed parameter vector so that each
particle's result depends only on its own inputs: chunking particles across
threads cannot change a single bit of output.
"""

import math

import numpy as np
from numba import njit

from .geometry import E_S, E_U, LAM, MU

# packed parameter vector layout
EPS, SIG, B, BETA, PHI, A, XW, YW, H, SINP, COSP, SHARP = range(12)
NPARAM = 12

ES0, ES1 = float(E_S[0]), float(E_S[1])
EU0, EU1 = float(E_U[0]), float(E_U[1])

_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)
GL_T = np.ascontiguousarray(_GL_T)
GL_W = np.ascontiguousarray(_GL_W)
GL_PANEL = 0.5  # panel width in units of sigma
EXCESS_CUT = 14.0  # beyond |t| = 14 the arc-length excess integrand is < 1e-80

# Random123 Philox4x32-10 constants
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


class NonConvergence(RuntimeError):
    """A numerical iteration failed to reach its tolerance."""


def pack_params(params, blend_sharpness=1.0):
    X, Y = params.chart_half_widths
    p = np.empty(NPARAM)
    p[EPS] = params.epsilon
    p[SIG] = params.sigma
    p[B] = params.b
    p[BETA] = params.beta
    p[PHI] = params.phi
    p[A] = params.a
    p[XW] = X
    p[YW] = Y
    p[H] = min(params.sigma, params.beta) / 50.0
    p[SINP] = math.sin(params.phi)
    p[COSP] = math.cos(params.phi)
    p[SHARP] = blend_sharpness
    return p


# --- counter-based RNG ------------------------------------------------------

@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0), lo1, (hi0 ^ c3 ^ k1), lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def uniform01(seed, stream, counter):
    """Double in [0, 1) from one Philox block keyed by ``seed``.

    Counter block = (counter lo, counter hi, stream lo, stream hi); the first
    two output words give 64 bits, of which the top 53 are used.
    """
    seed = np.uint64(seed)
    stream = np.uint64(stream)
    counter = np.uint64(counter)
    r0, r1, _, _ = philox4x32(counter & _MASK, counter >> _S32, stream & _MASK,
                              stream >> _S32, seed & _MASK, seed >> _S32)
    bits = r0 | (r1 << _S32)
    return float(bits >> _S11) * _TWO_M53


# --- field ------------------------------------------------------------------

@njit(cache=True, nogil=True)
def in_win(x, y, p):
    return abs(x) <= p[XW] and abs(y) <= p[YW]


@njit(cache=True, nogil=True)
def level(x, y, sig):
    if y == 0.0:
        return 0.0
    return y * math.exp(x * x / (2.0 * sig * sig))


@njit(cache=True, nogil=True)
def bump(t, sharp):
    """Smooth step: 0 for t <= 0, 1 for t >= 1, C-infinity in between."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    e1 = math.exp(-sharp / t)
    e2 = math.exp(-sharp / (1.0 - t))
    return e1 / (e1 + e2)


@njit(cache=True, nogil=True)
def blend_coords(x, y, p):
    tx = (abs(x) - p[A]) / (0.5 * p[BETA])
    K = abs(level(x, y, p[SIG]))
    ty = (K - p[B]) / p[BETA]
    return tx, ty, K


@njit(cache=True, nogil=True)
def zone(x, y, p):
    """0: Gaussian-tangent closed region, 1: blend zone, 2: constant tilt."""
    if not in_win(x, y, p):
        return 2
    tx, ty, K = blend_coords(x, y, p)
    if tx <= 0.0 and K <= p[B]:
        return 0
    if tx >= 1.0 or ty >= 1.0:
        return 2
    return 1


@njit(cache=True, nogil=True)
def chi(x, y, p):
    if not in_win(x, y, p):
        return 1.0
    tx, ty, _ = blend_coords(x, y, p)
    return 1.0 - (1.0 - bump(tx, p[SHARP])) * (1.0 - bump(ty, p[SHARP]))


@njit(cache=True, nogil=True)
def field(x, y, p):
    c = chi(x, y, p)
    if c >= 1.0:
        return p[SINP], p[COSP]
    sig = p[SIG]
    slope = -x * y / (sig * sig)
    n = math.sqrt(1.0 + slope * slope)
    gx = 1.0 / n
    gy = slope / n
    if c <= 0.0:
        return gx, gy
    vx = c * p[SINP] + (1.0 - c) * gx
    vy = c * p[COSP] + (1.0 - c) * gy
    m = math.sqrt(vx * vx + vy * vy)
    return vx / m, vy / m


# --- Gaussian level curves ----------------------------------------------------

@njit(cache=True, nogil=True)
def _excess_integrand(k, t):
    q = k * k * t * t * math.exp(-t * t)
    return q / (1.0 + math.sqrt(1.0 + q))


@njit(cache=True, nogil=True)
def excess(k, u1, u2):
    """Signed integral of sqrt(1 + k^2 t^2 exp(-t^2)) - 1 from u1 to u2."""
    if u1 == u2 or k == 0.0:
        return 0.0
    sgn = 1.0
    lo, hi = u1, u2
    if lo > hi:
        lo, hi = hi, lo
        sgn = -1.0
    lo = max(lo, -EXCESS_CUT)
    hi = min(hi, EXCESS_CUT)
    if hi <= lo:
        return 0.0
    npan = int(math.ceil((hi - lo) / GL_PANEL))
    w = (hi - lo) / npan
    total = 0.0
    for j in range(npan):
        mid = lo + (j + 0.5) * w
        acc = 0.0
        for i in range(GL_T.shape[0]):
            acc += GL_W[i] * _excess_integrand(k, mid + 0.5 * w * GL_T[i])
        total += 0.5 * w * acc
    return sgn * total


@njit(cache=True, nogil=True)
def arc(K, sig, x1, x2):
    """Signed arc length along y = K exp(-x^2/2 sig^2) from x1 to x2."""
    return (x2 - x1) + sig * excess(K / sig, x1 / sig, x2 / sig)


@njit(cache=True, nogil=True)
def speed(K, sig, x):
    t = x / sig
    k = K / sig
    return math.sqrt(1.0 + k * k * t * t * math.exp(-t * t))


@njit(cache=True, nogil=True)
def arc_inverse(K, sig, x0, s):
    """x with signed arc(K, x0, x) == s, by safeguarded Newton."""
    if s == 0.0:
        return x0
    if K == 0.0:
        return x0 + s
    aK = abs(K)
    if s > 0.0:
        lo = x0 + max(s - 2.0 * aK, 0.0)
        hi = x0 + s
        x = hi
    else:
        lo = x0 + s
        hi = x0 + min(s + 2.0 * aK, 0.0)
        x = lo
    cur = arc(K, sig, x0, x)
    tol = 1e-14 * max(1.0, abs(s))
    for _ in range(100):
        f = cur - s
        if abs(f) <= tol:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        xn = x - f / speed(K, sig, x)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if xn == x:
            return x
        cur += arc(K, sig, x, xn)
        x = xn
    raise NonConvergence("arc_inverse did not converge")


# --- integral curves ----------------------------------------------------------

@njit(cache=True, nogil=True)
def _rk4(x, y, h, p):
    k1x, k1y = field(x, y, p)
    k2x, k2y = field(x + 0.5 * h * k1x, y + 0.5 * h * k1y, p)
    k3x, k3y = field(x + 0.5 * h * k2x, y + 0.5 * h * k2y, p)
    k4x, k4y = field(x + h * k3x, y + h * k3y, p)
    return (x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0,
            y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0)


@njit(cache=True, nogil=True)
def _in_uprime_open(x, y, p):
    if not in_win(x, y, p):
        return False
    tx, ty, _ = blend_coords(x, y, p)
    return tx < 1.0 and ty < 1.0


@njit(cache=True, nogil=True)
def _tilt_entry(x, y, dx, dy, rem, p):
    """Arc length along a tilted ray at which it first enters U' (or rem)."""
    ex = p[A] + 0.5 * p[BETA]
    ey = p[B] + p[BETA]
    x2 = x + rem * dx
    y2 = y + rem * dy
    if min(x, x2) > ex or max(x, x2) < -ex or min(y, y2) > ey or max(y, y2) < -ey:
        return rem
    h = p[H]
    n = int(math.ceil(rem / h))
    tprev = 0.0
    for j in range(1, n + 1):
        t = min(j * h, rem)
        if _in_uprime_open(x + t * dx, y + t * dy, p):
            lo, hi = tprev, t
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _in_uprime_open(x + mid * dx, y + mid * dy, p):
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-13:
                    break
            return hi
        tprev = t
    return rem


@njit(cache=True, nogil=True)
def flow_plane(x, y, s, p):
    """Point at signed arc length s along the unit-speed integral curve of V.

    Works in plane coordinates about the origin's chart; closed forms in the
    Gaussian region and on the tilted region, fixed-step RK4 in the blend zone.
    """
    if s == 0.0:
        return x, y
    direction = 1.0 if s > 0.0 else -1.0
    rem = abs(s)
    h = p[H]
    sig = p[SIG]
    a = p[A]
    cap = 20 * int(rem / h) + 10000
    it = 0
    while rem > 0.0:
        it += 1
        if it > cap:
            raise NonConvergence("flow_plane exceeded its step budget")
        z = zone(x, y, p)
        if z == 0:
            K = level(x, y, sig)
            xend = direction * a
            L = direction * arc(K, sig, x, xend)
            if L >= rem:
                xn = arc_inverse(K, sig, x, direction * rem)
                if abs(xn) > a:  # rounding guard: L >= rem puts the exact answer inside
                    xn = math.copysign(a, xn)
                x = xn
                y = K * math.exp(-x * x / (2.0 * sig * sig))
                rem = 0.0
            else:
                x = xend
                y = K * math.exp(-a * a / (2.0 * sig * sig))
                rem -= L
                if rem > 0.0:
                    hh = min(h, rem)
                    x, y = _rk4(x, y, direction * hh, p)
                    rem -= hh
        elif z == 2:
            dx = direction * p[SINP]
            dy = direction * p[COSP]
            t = _tilt_entry(x, y, dx, dy, rem, p)
            x = x + t * dx
            y = y + t * dy
            rem -= t
        else:
            hh = min(h, rem)
            x, y = _rk4(x, y, direction * hh, p)
            rem -= hh
    return x, y


# --- torus bookkeeping --------------------------------------------------------

@njit(cache=True, nogil=True)
def plane_to_torus(x, y):
    u = (x * ES0 + y * EU0) % 1.0
    v = (x * ES1 + y * EU1) % 1.0
    if u >= 1.0:
        u = 0.0
    if v >= 1.0:
        v = 0.0
    return u, v


@njit(cache=True, nogil=True)
def torus_to_plane(u, v, p):
    """Frame coordinates of the chart representative, else of the centred one."""
    cu = u - math.floor(u + 0.5)
    cv = v - math.floor(v + 0.5)
    x = cu * ES0 + cv * ES1
    y = cu * EU0 + cv * EU1
    if in_win(x, y, p):
        return x, y
    for n1 in range(-1, 2):
        for n2 in range(-1, 2):
            if n1 == 0 and n2 == 0:
                continue
            pu = cu - n1
            pv = cv - n2
            xx = pu * ES0 + pv * ES1
            yy = pu * EU0 + pv * EU1
            if in_win(xx, yy, p):
                return xx, yy
    return x, y


@njit(cache=True, nogil=True)
def settle(x, y, p):
    if in_win(x, y, p):
        return x, y
    u, v = plane_to_torus(x, y)
    return torus_to_plane(u, v, p)


@njit(cache=True, nogil=True)
def catmap_plane(x, y, p):
    if in_win(x, y, p):
        nx = MU * x
        ny = LAM * y
        if in_win(nx, ny, p):
            return nx, ny
        u, v = plane_to_torus(nx, ny)
        return torus_to_plane(u, v, p)
    u, v = plane_to_torus(x, y)
    nu = (2.0 * u + v) % 1.0
    nv = (u + v) % 1.0
    return torus_to_plane(nu, nv, p)


@njit(cache=True, nogil=True)
def kernel_point(x, y, uu, p):
    """Quantile uu of the kernel at plane point (x, y), settled into the chart."""
    s = p[EPS] * (2.0 * uu - 1.0)
    nx, ny = flow_plane(x, y, s, p)
    return settle(nx, ny, p)


@njit(cache=True, nogil=True)
def advance(xs, ys, streams, seed, counter0, nsteps, p):
    """Advance particles in place by nsteps of (cat map, then kernel sample)."""
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        st = streams[i]
        for t in range(nsteps):
            x, y = catmap_plane(x, y, p)
            uu = uniform01(seed, st, np.uint64(counter0) + np.uint64(t))
            x, y = kernel_point(x, y, uu, p)
        xs[i] = x
        ys[i] = y


@njit(cache=True, nogil=True)
def uniform_block(seed, streams, counter, out):
    for i in range(streams.shape[0]):
        out[i] = uniform01(seed, streams[i], counter)


# --- layers -------------------------------------------------------------------

@njit(cache=True, nogil=True)
def layer_code(x, y, p, c):
    """0 outside W, n for L_n (1..n_max), n_max+1 overflow, n_max+2 on segment."""
    n_max = c.shape[0] - 1
    if not in_win(x, y, p) or abs(x) > p[A]:
        return 0
    if y == 0.0:
        return n_max + 2
    K = abs(level(x, y, p[SIG]))
    if K >= c[0]:
        return 0
    if K < c[n_max]:
        return n_max + 1
    # smallest j >= 1 with c[j] <= K
    lo = 1
    hi = n_max
    while lo < hi:
        mid = (lo + hi) // 2
        if c[mid] <= K:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def layer_codes(xs, ys, p, c, out):
    for i in range(xs.shape[0]):
        out[i] = layer_code(xs[i], ys[i], p, c)


def level_table(b, n_max):
    """c_0 = b, c_n = c_{n-1} / lam, by repeated division."""
    c = np.empty(n_max + 1)
    c[0] = b
    for n in range(1, n_max + 1):
        c[n] = c[n - 1] / LAM
    return c


# --- one-dimensional segment chain -------------------------------------------

@njit(cache=True, nogil=True)
def segment_run(x, mu, eps, a, seed, stream, counter0, n, burn, counts):
    """Iterate x -> mu x + eps (2u - 1), binning post-burn-in iterates.

    counts has shape (batches, bins) over [-a, a]; the post-burn-in steps are
    split into equal consecutive batches.  Returns (final x, escapes).
    """
    nb, nbins = counts.shape
    per = max((n - burn) // nb, 1)
    escapes = 0
    for t in range(n):
        u = uniform01(seed, stream, np.uint64(counter0) + np.uint64(t))
        x = mu * x + eps * (2.0 * u - 1.0)
        if abs(x) > a:
            escapes += 1
        if t >= burn:
            j = int((x + a) / (2.0 * a) * nbins)
            j = min(max(j, 0), nbins - 1)
            bb = min((t - burn) // per, nb - 1)
            counts[bb, j] += 1
    return x, escapes


# --- idealized local model (test fixture for the one-step chain) -------------

@njit(cache=True, nogil=True)
def idealized_advance(xs, ys, out, streams, seed, counter0, nsteps, q, p):
    """Local linear map with reinjection, four counters per particle per step.

    Inside W the point is mapped by (mu x, lam y) and perturbed along its level
    curve; once it leaves W it is flagged out.  A flagged particle re-enters
    with probability q at a kernel image of a point (x_c, K e^{-x_c^2/2s^2})
    with x_c uniform in [-mu a, mu a] and K uniform in (-b, b).
    """
    sig = p[SIG]
    eps = p[EPS]
    a = p[A]
    b = p[B]
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        o = out[i]
        st = streams[i]
        for t in range(nsteps):
            c = np.uint64(counter0) + np.uint64(4) * np.uint64(t)
            if o:
                if uniform01(seed, st, c) < q:
                    xc = MU * a * (2.0 * uniform01(seed, st, c + np.uint64(1)) - 1.0)
                    K = b * (2.0 * uniform01(seed, st, c + np.uint64(2)) - 1.0)
                    s = eps * (2.0 * uniform01(seed, st, c + np.uint64(3)) - 1.0)
                    x = min(max(arc_inverse(K, sig, xc, s), -a), a)
                    y = K * math.exp(-x * x / (2.0 * sig * sig))
                    o = False
            else:
                x = MU * x
                y = LAM * y
                K = level(x, y, sig)
                if abs(K) >= b:
                    o = True
                else:
                    s = eps * (2.0 * uniform01(seed, st, c + np.uint64(3)) - 1.0)
                    x = min(max(arc_inverse(K, sig, x, s), -a), a)
                    y = K * math.exp(-x * x / (2.0 * sig * sig))
        xs[i] = x
        ys[i] = y
        out[i] = o


# --- quantile sweeps -------------------------------------------------------------

@njit(cache=True, nogil=True)
def sweep_codes(xs, ys, nq, p, c, out):
    """out[i, j] = layer code of the j/(nq-1) kernel quantile at f(xs[i], ys[i])."""
    for i in range(xs.shape[0]):
        fx, fy = catmap_plane(xs[i], ys[i], p)
        for j in range(nq):
            x, y = kernel_point(fx, fy, j / (nq - 1.0), p)
            out[i, j] = layer_code(x, y, p, c)
