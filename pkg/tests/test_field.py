import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from catattr import _kernels as K
from catattr.field import (FieldSpec, LevelCurve, NonConvergence, arc_length, arc_point,
                           blend_weight, field_at, flow_curve, flow_plane, level_of)
from catattr.geometry import DEFAULT_PARAMS, LAM, MU, FramePoint, from_frame

P = DEFAULT_PARAMS
SPEC = FieldSpec(P)


def test_level_examples():
    assert level_of(FramePoint(0, 0.003), P.sigma) == 0.003
    assert level_of(FramePoint(P.sigma, 0.003 * math.exp(-0.5)), P.sigma) == pytest.approx(0.003, rel=1e-15)


def test_level_after_map_at_x0_drops_by_lambda():
    K0 = 0.003
    x = P.x0
    img = level_of(FramePoint(MU * x, LAM * K0 * math.exp(-x * x / (2 * P.sigma**2))), P.sigma)
    assert img == pytest.approx(K0 / LAM, rel=1e-12)


def test_field_examples():
    assert field_at(FramePoint(0, 0), SPEC) == pytest.approx([1.0, 0.0])
    assert field_at(FramePoint(0, 0.004), SPEC) == pytest.approx([1.0, 0.0])
    far = field_at(FramePoint(0.2, 0.07), SPEC)
    assert far == pytest.approx([math.sin(P.phi), math.cos(P.phi)], abs=1e-15)
    assert field_at(FramePoint(-0.19, -0.05), SPEC) == pytest.approx(far, abs=1e-15)


def test_blend_weight_orientation():
    assert blend_weight(FramePoint(0, 0.0049), SPEC) == 0.0
    assert blend_weight(FramePoint(0, P.b + P.beta), SPEC) == 1.0
    mid = blend_weight(FramePoint(0, P.b + 0.5 * P.beta), SPEC)
    assert 0.0 < mid < 1.0 and mid == pytest.approx(0.5)


@given(st.floats(-0.21, 0.21), st.floats(-0.085, 0.085))
def test_field_is_unit(x, y):
    v = field_at(FramePoint(x, y), SPEC)
    assert np.hypot(*v) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-0.129, 0.129), st.floats(0, 0.99))
def test_field_tangent_in_w(x, frac):
    y = frac * P.b * math.exp(-x * x / (2 * P.sigma**2))
    v = field_at(FramePoint(x, y), SPEC)
    slope = -x * y / P.sigma**2
    assert v[0] > 0
    assert v[1] == pytest.approx(slope * v[0], abs=1e-12)


@given(st.floats(-0.129, 0.129), st.floats(-0.99, 0.99))
def test_field_mirror_symmetry_in_w(x, frac):
    y = frac * P.b * math.exp(-x * x / (2 * P.sigma**2))
    vx, vy = field_at(FramePoint(x, y), SPEC)
    wx, wy = field_at(FramePoint(x, -y), SPEC)
    assert (vx, vy) == pytest.approx((wx, -wy), abs=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.01, -0.05])
def test_field_continuous_across_collar(x):
    g = math.exp(-x * x / (2 * P.sigma**2))
    ys = np.linspace(0.9 * P.b * g, 1.1 * (P.b + P.beta) * g, 4001)
    v = np.array([field_at(FramePoint(x, y), SPEC) for y in ys])
    jumps = np.hypot(*np.diff(v, axis=0).T)
    # the bump is C-infinity; its steepest slope is a few units per unit t
    assert jumps.max() < 50 * (ys[1] - ys[0]) / (P.beta * g)


def test_field_continuous_across_end_of_w():
    xs = np.linspace(P.a - P.beta, P.a + P.beta, 4001)
    v = np.array([field_at(FramePoint(x, 0.0), SPEC) for x in xs])
    assert np.hypot(*np.diff(v, axis=0).T).max() < 50 * (xs[1] - xs[0]) / (0.5 * P.beta)


@pytest.mark.parametrize("Kl, x1, x2", [(0.004, 0.0, 0.05), (0.005, -0.1, 0.12),
                                        (0.001, 0.003, 0.02), (0.0, -0.1, 0.1)])
def test_arc_length_against_mpmath(Kl, x1, x2):
    ref = float(oracles.arc_length(Kl, P.sigma, x1, x2))
    assert arc_length(LevelCurve(Kl, P.sigma), x1, x2) == pytest.approx(ref, abs=1e-10)
    # the compiled Gauss-Legendre path used by the sampler
    assert K.arc(Kl, P.sigma, x1, x2) == pytest.approx(ref, abs=1e-13)


@given(st.floats(0, 0.005), st.floats(0, 0.13))
@settings(max_examples=50)
def test_arc_length_bounds(Kl, x):
    L = arc_length(LevelCurve(Kl, P.sigma), 0.0, x)
    assert x - 1e-12 <= L <= x + Kl + 1e-12


def test_arc_length_rejects_reversed_limits():
    with pytest.raises(ValueError):
        arc_length(LevelCurve(0.001, P.sigma), 0.1, 0.0)


def test_arc_point_examples():
    c0 = LevelCurve(0.0, P.sigma)
    assert arc_point(c0, 0.0, 0.05) == FramePoint(0.05, 0.0)
    c = LevelCurve(0.004, P.sigma)
    assert arc_point(c, 0.01, 0.0) == FramePoint(0.01, c(0.01))


@pytest.mark.parametrize("x_start, s", [(0.0, 0.03), (-0.02, 0.05), (0.01, -0.04)])
def test_arc_point_against_mpmath(x_start, s):
    Kl = 0.004
    ref = float(oracles.arc_point_x(Kl, P.sigma, x_start, s))
    q = arc_point(LevelCurve(Kl, P.sigma), x_start, s)
    assert q.x == pytest.approx(ref, abs=1e-8)
    assert K.arc_inverse(Kl, P.sigma, x_start, s) == pytest.approx(ref, abs=1e-12)


@given(st.floats(0, 0.005), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
@settings(max_examples=40)
def test_arc_point_inverts_arc_length(Kl, x1, x2):
    c = LevelCurve(Kl, P.sigma)
    lo, hi = min(x1, x2), max(x1, x2)
    s = arc_length(c, lo, hi)
    q = arc_point(c, lo, s)
    assert q.x == pytest.approx(hi, abs=1e-8)


def test_arc_point_reports_nonconvergence():
    with pytest.raises(NonConvergence):
        arc_point(LevelCurve(0.004, P.sigma), 0.0, 0.05, tol=0.0, max_iter=3)


@given(st.floats(-0.05, 0.05), st.floats(-0.079, 0.079))
def test_flow_on_segment_is_translation(x, s):
    if abs(x + s) > P.a:
        return
    q = flow_plane(FramePoint(x, 0.0), SPEC, s)
    assert (q.x, q.y) == pytest.approx((x + s, 0.0), abs=1e-15)


def test_flow_in_exterior_is_straight():
    q0 = FramePoint(0.18, 0.06)
    q = flow_plane(q0, SPEC, -0.02)
    assert q.x == pytest.approx(q0.x - 0.02 * math.sin(P.phi), abs=1e-15)
    assert q.y == pytest.approx(q0.y - 0.02 * math.cos(P.phi), abs=1e-15)


@given(st.floats(-0.1, 0.1), st.floats(-0.9, 0.9), st.floats(-0.08, 0.08))
@settings(max_examples=60)
def test_flow_matches_arc_point_in_w(x, frac, s):
    Kl = frac * P.b
    if abs(x) + abs(s) >= P.a:
        return
    y = Kl * math.exp(-x * x / (2 * P.sigma**2))
    q = flow_plane(FramePoint(x, y), SPEC, s)
    ref = arc_point(LevelCurve(Kl, P.sigma), x, s)
    assert q.x == pytest.approx(ref.x, abs=1e-8)
    assert level_of(q, P.sigma) == pytest.approx(Kl, abs=1e-8)


@pytest.mark.parametrize("q", [FramePoint(0.0, 0.0062), FramePoint(0.02, 0.0055),
                               FramePoint(-0.01, -0.007), FramePoint(0.17, 0.05)])
def test_flow_is_reversible(q):
    fwd = flow_plane(q, SPEC, 0.03)
    back = flow_plane(fwd, SPEC, -0.03)
    assert (back.x, back.y) == pytest.approx((q.x, q.y), abs=1e-7)


@pytest.mark.parametrize("q", [FramePoint(0.0, 0.0075), FramePoint(0.015, 0.004)])
def test_flow_unit_speed(q):
    # curvature in the collar reaches ~500, so the chord deficit k^2 h^2 / 24 needs small h
    h = 1e-6
    for s in (0.0, 0.01, 0.03):
        a = flow_plane(q, SPEC, s)
        b = flow_plane(q, SPEC, s + h)
        assert math.hypot(b.x - a.x, b.y - a.y) / h == pytest.approx(1.0, abs=1e-6)


def test_rk4_richardson_in_blend_zone():
    q = FramePoint(0.0, P.b + 0.5 * P.beta)
    packed = K.pack_params(P)
    half = packed.copy()
    half[K.H] = packed[K.H] / 2
    x1, y1 = K.flow_plane(q.x, q.y, 0.01, packed)
    x2, y2 = K.flow_plane(q.x, q.y, 0.01, half)
    # fourth order: the halved-step error estimate is (z_h - z_h/2) / 15
    assert math.hypot(x1 - x2, y1 - y2) / 15 < 1e-10


@pytest.mark.parametrize("phi", [0.009, -0.009])
def test_tilt_sign_flows(phi):
    spec = FieldSpec(P.replace(phi=phi))
    q = flow_plane(FramePoint(0.19, 0.0), spec, 0.05)
    assert q.x == pytest.approx(0.19 + 0.05 * math.sin(phi), abs=1e-12)


def test_flow_curve_returns_torus_point():
    p = flow_curve(FramePoint(0.0, 0.0), SPEC, 0.05)
    assert p == from_frame(FramePoint(0.05, 0.0))
