import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from catattr.geometry import DEFAULT_PARAMS, LAM, FramePoint
from catattr.layers import (N_MAX_DEFAULT, N_MAX_EXACT, LayerHistogram, arc_within_x0,
                            distinct_gap_lengths, fraction_increasing, kappa_bound, layer_codes,
                            layer_index, log_kappa_bound, min_crossing_count, rotation_gap_max,
                            rotation_gaps)

P = DEFAULT_PARAMS
NM = N_MAX_DEFAULT


def _g(x):
    return math.exp(-x * x / (2 * P.sigma**2))


def _expected(x, y, n_max=NM):
    d = oracles.layer_depth(x, y, P.b, P.sigma, n_max)
    if abs(x) >= P.a and d != "attractor":
        return 0
    return {"attractor": n_max + 2, "overflow": n_max + 1}.get(d, d)


def test_layer_examples():
    assert layer_index(FramePoint(0, 0.004), P).depth == 1
    assert layer_index(FramePoint(0, 0.001), P).depth == 2
    assert layer_index(FramePoint(0, 0.0), P).is_attractor
    assert layer_index(FramePoint(0, P.b), P).is_outside
    assert layer_index(FramePoint(0, P.b / LAM**25), P).is_overflow
    assert layer_index(FramePoint(0, P.b / LAM**25), P, N_MAX_EXACT).layer == 25
    assert repr(layer_index(FramePoint(0, 0.004), P)) == "Layer(1)"


@given(st.floats(-0.129, 0.129), st.floats(0.0, 1.0), st.integers(0, 24))
@settings(max_examples=200)
def test_layer_index_matches_oracle(x, frac, n):
    y = P.b * _g(x) * LAM**-n * (1 - frac * (1 - 1 / LAM))
    # skip points within rounding of a boundary
    r = math.log(P.b * _g(x) / y) / math.log(LAM) if y > 0 else 0
    if y > 0 and abs(r - round(r)) < 1e-9:
        return
    assert layer_index(FramePoint(x, y), P).depth == _expected(x, y)
    assert layer_index(FramePoint(x, -y), P).depth == _expected(x, y)


def test_vector_codes_match_scalar():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-0.2, 0.2, 2000)
    ys = rng.uniform(-1, 1, 2000) * P.b * np.exp(-xs**2 / (2 * P.sigma**2)) * LAM ** -rng.integers(0, 30, 2000)
    codes = layer_codes(xs, ys, P)
    assert [layer_index(FramePoint(x, y), P).depth for x, y in zip(xs[:300], ys[:300])] == list(codes[:300])


def test_layers_nest_monotonically():
    x = 0.013
    ys = P.b * _g(x) * np.geomspace(1.0, LAM**-22, 2000)[1:]
    codes = layer_codes(np.full(len(ys), x), ys, P)
    assert np.all(np.diff(codes) >= 0)
    assert codes[0] == 1 and codes[-1] == NM + 1


def test_histogram_tails_and_rebin():
    codes = np.array([0, 1, 1, 2, 5, NM + 1, NM + 2, 3])
    h = LayerHistogram.from_codes(codes)
    assert h.total == pytest.approx(1.0)
    assert h.tail(0) == 1.0
    assert h.tail(2) == pytest.approx(5 / 8)
    assert h.overflow == pytest.approx(1 / 8) and h.attractor == pytest.approx(1 / 8)
    assert np.all(np.diff(h.tails()) <= 0)
    r = h.rebin(3)
    assert r.mass.tolist() == pytest.approx([1 / 8, 2 / 8, 1 / 8, 1 / 8, 2 / 8, 1 / 8])
    assert r.tail(3) == pytest.approx(h.tail(3))
    with pytest.raises(ValueError):
        r.rebin(4)


def test_fraction_increasing():
    before = np.array([0, 1, 2, 3, 4])
    after = np.array([5, 2, 2, 1, 9])
    assert fraction_increasing(before, after) == 0.5
    assert math.isnan(fraction_increasing(np.zeros(3, int), np.ones(3, int)))
    with pytest.raises(ValueError):
        fraction_increasing(before, after[:3])


def test_arc_within_x0_sweep():
    for Kl in np.linspace(0, P.b, 100):
        val = arc_within_x0(float(Kl), P)
        assert P.x0 <= val < P.epsilon / 3
        assert val == pytest.approx(float(oracles.arc_length(Kl, P.sigma, 0, P.x0)), abs=1e-10)


def test_arc_within_x0_rejects_bad_level():
    with pytest.raises(ValueError):
        arc_within_x0(2 * P.b, P)


def test_kappa_examples():
    assert kappa_bound(0, P) == pytest.approx(P.d_prime / (LAM * P.epsilon), rel=1e-12)
    for k in (1, 2, 3):
        ratio = kappa_bound(k + 1, P) / kappa_bound(k, P)
        assert ratio == pytest.approx(P.d_prime / P.epsilon * LAM ** -(k + 2), rel=1e-10)
    for k in range(6):
        assert kappa_bound(k, P, tilted=True) >= kappa_bound(k, P)
    assert kappa_bound(400, P) == 0.0 and math.isfinite(log_kappa_bound(400, P))
    with pytest.raises(ValueError):
        kappa_bound(-1, P)


def test_rotation_gap_examples():
    assert rotation_gap_max(1) == pytest.approx(0.6180339887, abs=1e-9)
    assert rotation_gap_max(2) == pytest.approx(0.3819660113, abs=1e-9)
    ref = sorted(float(g) for g in oracles.rotation_gaps(12))
    assert sorted(rotation_gaps(12)) == pytest.approx(ref, abs=1e-12)


def test_three_distance_and_gap_decay():
    for n in list(range(1, 200)) + list(range(200, 10_001, 97)):
        assert len(distinct_gap_lengths(n)) <= 3
        assert rotation_gap_max(n) * n <= 2.0


@given(st.floats(1e-4, 0.99))
@settings(max_examples=40)
def test_min_crossing_count_is_minimal(alpha):
    n = min_crossing_count(alpha)
    assert rotation_gap_max(n) < alpha
    if n > 1:
        assert rotation_gap_max(n - 1) >= alpha
