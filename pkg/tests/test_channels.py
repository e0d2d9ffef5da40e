import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcitysim.channels import (DetectorParams, FiberChannel, HorizontalChannel, Outcome, SlantChannel,
                               beam_spot_horizontal, beam_spot_slant, dark_count_prob, detect,
                               fiber_transmittance, pdtc_params, sample_transmissivity,
                               transmissivity_at, waist_from_divergence, wander_sigma,
                               weibull_pdtc_params)
from qcitysim.simcore import make_rng

from oracles import pdtc_moments, weibull_law

# frozen oracle values
ETA0_A1_W275 = 0.23238180387911456
SPOT_HORIZONTAL_377KM = 1.8871257367907637
WANDER_HORIZONTAL_377KM = 1.3422005065625167
FIBER_31KM = 0.27669416454115114


# -- beam geometry -------------------------------------------------------------

def test_slant_spot():
    assert beam_spot_slant(5e-6, 550e3) == pytest.approx(2.75)
    assert beam_spot_slant(5e-6, 0.0) == 0.0
    assert beam_spot_slant(10e-6, 550e3) == pytest.approx(5.5)


def test_horizontal_spot():
    assert beam_spot_horizontal(0.0987, 1.55e-6, 0.0) == 0.0987
    assert beam_spot_horizontal(0.0987, 1.55e-6, 377e3) == pytest.approx(SPOT_HORIZONTAL_377KM, rel=1e-12)
    assert beam_spot_horizontal(0.0987, 1.55e-6, 377e3) == pytest.approx(1.886, abs=2e-3)


@pytest.mark.parametrize("theta", [2e-6, 5e-6, 20e-6])
def test_far_field_consistency(theta):
    w0 = waist_from_divergence(theta, 1.55e-6)
    L = 1e4 * math.pi * w0**2 / 1.55e-6
    assert beam_spot_horizontal(w0, 1.55e-6, L) == pytest.approx(beam_spot_slant(theta, L), rel=0.01)


def test_wander():
    assert wander_sigma(0.5e-6, 550e3) == pytest.approx(0.275)
    assert wander_sigma(0.5e-6, 377e3, 0.0, kind="horizontal") == 0.5e-6 * 377e3
    got = wander_sigma(0.5e-6, 377e3, 1e-17, 0.0987, kind="horizontal")
    assert got == pytest.approx(WANDER_HORIZONTAL_377KM, rel=1e-12)
    assert got == pytest.approx(1.34, abs=5e-3)


def test_wander_needs_waist_with_turbulence():
    with pytest.raises(ValueError):
        wander_sigma(0.5e-6, 1e3, 1e-15, kind="horizontal")


# -- transmissivity law -------------------------------------------------------------

def test_eta0_example():
    eta0, _, _ = weibull_pdtc_params(1.0, 2.75)
    assert eta0 == pytest.approx(ETA0_A1_W275, rel=1e-14)
    assert eta0 == pytest.approx(0.2325, abs=2e-4)  # example rounds the exponent to 0.2645


def test_eta0_limits():
    assert weibull_pdtc_params(100.0, 1.0)[0] == pytest.approx(1.0)
    assert weibull_pdtc_params(1e-3, 10.0)[0] < 1e-7


@pytest.mark.parametrize("a,w", [(0.4, 5.5), (1.0, 2.75), (1.2, 1.0), (0.4, 1.89), (0.05, 3.0)])
def test_shape_scale_match_textbook(a, w):
    got = weibull_pdtc_params(a, w)
    want = weibull_law(a, w)
    assert got == pytest.approx(want, rel=1e-8)


def test_tiny_ratio_stays_finite():
    eta0, shape, scale = weibull_pdtc_params(1e-4, 10.0)
    assert 0 < eta0 < 1e-9 and math.isfinite(shape) and math.isfinite(scale)


def test_centered_beam_is_deterministic():
    p = pdtc_params(1.0, 2.75, 0.0)
    eta = sample_transmissivity(p, make_rng(1, 0), 1000)
    assert np.all(eta == p.eta0)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.05, 2.0), w=st.floats(0.2, 10.0), sigma=st.floats(0.0, 5.0),
       seed=st.integers(0, 2**32))
def test_support(a, w, sigma, seed):
    p = pdtc_params(a, w, sigma)
    eta = sample_transmissivity(p, make_rng(seed, 0), 2000)
    assert np.all(eta <= p.eta0)
    assert np.all(eta >= 0.0)
    assert np.mean(eta <= p.eta0) == 1.0


def test_support_strictly_positive_in_regime():
    p = pdtc_params(1.0, 2.75, 0.275)
    eta = sample_transmissivity(p, make_rng(3, 0), 100_000)
    assert eta.min() > 0.0


def test_transmissivity_at_origin():
    p = pdtc_params(0.4, 1.9, 1.3)
    assert transmissivity_at(p, 0.0) == p.eta0


@pytest.mark.parametrize("a,w,sigma", [(1.0, 2.75, 0.275), (0.4, 1.89, 1.34), (1.2, 5.5, 0.55)])
def test_sample_moments_match_quadrature(a, w, sigma):
    mean, var = pdtc_moments(a, w, sigma)
    eta = sample_transmissivity(pdtc_params(a, w, sigma), make_rng(11, 0), 1_000_000)
    assert abs(eta.mean() - mean) < 1e-3
    assert abs(eta.var() - var) < 1e-3


def _mean_and_se(a, w, sigma, seed=5, n=100_000):
    eta = sample_transmissivity(pdtc_params(a, w, sigma), make_rng(seed, 0), n)
    return eta.mean(), eta.std(ddof=1) / math.sqrt(n)


def _assert_nonincreasing(points):
    for (m0, s0), (m1, s1) in zip(points, points[1:]):
        assert m1 <= m0 + 3 * math.hypot(s0, s1)


def test_mean_nonincreasing_in_sigma():
    _assert_nonincreasing([_mean_and_se(1.0, 2.75, s) for s in (0.0, 0.1, 0.275, 0.6, 1.34, 3.0)])


def test_mean_nonincreasing_in_spot():
    _assert_nonincreasing([_mean_and_se(1.0, w, 0.275) for w in (1.0, 2.0, 2.75, 4.0, 5.5, 8.0)])


def test_mean_nondecreasing_in_aperture():
    pts = [_mean_and_se(a, 2.75, 0.275) for a in (1.2, 1.0, 0.8, 0.6, 0.4, 0.2)]
    _assert_nonincreasing(pts)


# -- channels ---------------------------------------------------------------------

def test_slant_channel_pieces():
    ch = SlantChannel(5e-6, 0.5e-6, 1.0, 550e3)
    p = ch.pdtc()
    assert p.beam_spot == pytest.approx(2.75) and p.wander_std == pytest.approx(0.275)
    assert ch.t_atm() == 0.96753
    assert SlantChannel(5e-6, 0.5e-6, 1.0, 550e3, t_atm_zenith=0.5).t_atm() == 0.5


def test_slant_channel_validation():
    with pytest.raises(ValueError):
        SlantChannel(5e-6, 0.5e-6, 1.0, 550e3, zenith_rad=math.pi / 2)
    with pytest.raises(ValueError):
        SlantChannel(0.0, 0.5e-6, 1.0, 550e3)


def test_horizontal_channel_from_divergence():
    ch = HorizontalChannel.from_divergence(5e-6, cn2=0.0, pointing_error_rad=0.5e-6,
                                           rx_aperture_m=0.4, length_m=377e3)
    assert ch.divergence_rad == pytest.approx(5e-6)
    assert ch.transmittance() == 0.96753
    assert ch.pdtc().wander_std == pytest.approx(0.5e-6 * 377e3)


# -- fiber and detectors ------------------------------------------------------------

def test_fiber_examples():
    assert fiber_transmittance(0.0) == 1.0
    assert fiber_transmittance(31.0) == pytest.approx(FIBER_31KM, rel=1e-14)
    assert fiber_transmittance(31.0) == pytest.approx(0.115 / 0.423, rel=0.02)
    assert FiberChannel(31.0).transmittance() == fiber_transmittance(31.0)
    with pytest.raises(ValueError):
        fiber_transmittance(-1.0)


@given(st.floats(0, 200), st.floats(0, 200))
def test_fiber_multiplicative(l1, l2):
    assert fiber_transmittance(l1 + l2) == pytest.approx(fiber_transmittance(l1) * fiber_transmittance(l2),
                                                        rel=1e-12, abs=1e-300)


def test_dark_count_prob():
    assert dark_count_prob(100, 100e-12) == pytest.approx(1e-8)
    assert dark_count_prob(0, 1.0) == 0.0
    assert dark_count_prob(1e6, 1e-9) == pytest.approx(1e-3)
    assert DetectorParams().p_dark == pytest.approx(1e-8)


def test_detect_perfect():
    det = DetectorParams(p_det=1.0, dark_rate_hz=0.0, p_crosstalk=0.0)
    out = detect(np.ones(10_000), det, make_rng(1, 0))
    assert np.all(out == Outcome.CLICK_CORRECT)
    assert detect(1.0, det, make_rng(1, 0)) is Outcome.CLICK_CORRECT


def test_detect_dark_fraction():
    det = DetectorParams()
    rng = make_rng(2, 0)
    darks, n = 0, 0
    for _ in range(100):  # 1e9 gates in chunks
        darks += int(np.count_nonzero(detect(0.0, det, rng, size=10_000_000) == Outcome.DARK_CLICK))
        n += 10_000_000
    # Poisson(10): 4 sigma window
    assert abs(darks - 10) <= 4 * math.sqrt(10) + 1
    assert darks / n == pytest.approx(1e-8, abs=1.4e-8)


def test_detect_click_fraction():
    n = 1_000_000
    out = detect(np.full(n, 0.5), DetectorParams(p_det=0.95), make_rng(3, 0))
    clicks = np.count_nonzero((out == Outcome.CLICK_CORRECT) | (out == Outcome.CLICK_FLIPPED))
    assert abs(clicks / n - 0.475) < 3 * math.sqrt(0.475 * 0.525 / n)


def test_detect_crosstalk():
    n = 1_000_000
    out = detect(np.ones(n), DetectorParams(p_det=1.0, p_crosstalk=0.1, dark_rate_hz=0), make_rng(4, 0))
    assert abs(np.mean(out == Outcome.CLICK_FLIPPED) - 0.1) < 3 * math.sqrt(0.09 / n)


def test_detect_rejects_bad_probability():
    with pytest.raises(ValueError):
        detect(1.5, DetectorParams(), make_rng(0, 0))
