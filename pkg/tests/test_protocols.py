import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcitysim.channels import DetectorParams, FiberChannel, SlantChannel
from qcitysim.orbit import EphemerisSample, GroundStation, PassWindow, horizon_distance
from qcitysim.protocols import (BalloonScenario, Bbm92Arm, LinkRate, NodeParams, SourceParams,
                                apply_sifting, balloon_chain, bbm92_trial, chain_qber, chain_rate,
                                flip_compose, key_per_pass, midpoint_geometry, qber_estimate,
                                run_bb84_downlink, run_bb84_fiber, run_bbm92, slant_channel_at,
                                throughput)
from qcitysim.simcore import RateEstimate, make_rng

from oracles import pdtc_moments

SRC = SourceParams()
DET = DetectorParams()
MICIUS = SlantChannel(5e-6, 0.5e-6, 1.0, 550e3)

# frozen from the composition formula evaluated by hand
QBER_FIBER_EXAMPLE = 0.010009804899901999


def _lr(rate, name="x", qber=0.0):
    return LinkRate(name, RateEstimate(rate, 0.0, 1, 1), qber)


def _close(a: LinkRate, b: LinkRate, k=3.0):
    return abs(a.rate - b.rate) <= k * math.hypot(a.estimate.sem, b.estimate.sem) + 1e-12


# -- QBER -----------------------------------------------------------------------------

def test_qber_examples():
    assert qber_estimate(0, 0, 0, 0) == 0.0
    assert qber_estimate(0, 1e-5) == pytest.approx(1e-5)
    assert qber_estimate(0, 1e-5, 0.02, 1e-8) == pytest.approx(QBER_FIBER_EXAMPLE, rel=1e-12)
    assert qber_estimate(0, 1e-5, 0.02, 1e-8) == pytest.approx(0.01001, abs=1e-6)


@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 1), st.floats(0, 1))
def test_qber_in_range(p_flip, p_ct, p_deph, dark):
    q = qber_estimate(p_flip, p_ct, p_deph, dark)
    assert 0.0 <= q <= 0.5 + 1e-15


def test_qber_rejects_bad_inputs():
    with pytest.raises(ValueError):
        qber_estimate(1.5, 0)


def test_flip_compose_matches_enumeration():
    ps = (0.1, 0.2, 0.05)
    odd = 0.0
    for bits in itertools.product((0, 1), repeat=3):
        pr = math.prod(p if b else 1 - p for p, b in zip(ps, bits))
        odd += pr * (sum(bits) % 2)
    assert flip_compose(*ps) == pytest.approx(odd, rel=1e-14)


# -- chains and derived quantities ---------------------------------------------------

def test_chain_examples():
    assert chain_rate([0.374, 0.238, 0.228, 0.253]) == 0.228
    assert chain_rate([0.115, 0.238, 0.228, 0.043]) == 0.043
    assert chain_rate([_lr(0.3)]) == 0.3
    with pytest.raises(ValueError):
        chain_rate([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.randoms())
def test_chain_min_and_permutation(rates, rnd):
    links = [_lr(r) for r in rates]
    base = chain_rate(links)
    assert all(base <= r for r in rates)
    shuffled = list(links)
    rnd.shuffle(shuffled)
    assert chain_rate(shuffled) == base


def test_chain_qber_composes():
    assert chain_qber([_lr(0.1, qber=0.01), _lr(0.2, qber=0.0)]) == pytest.approx(0.01)


def test_throughput_examples():
    assert throughput(0.228, 80e6, 0.1) == pytest.approx(1.824e6)
    assert throughput(0.0, 80e6, 0.1) == 0.0
    assert throughput(0.0183, 80e6, 0.1) == pytest.approx(146.4e3)


def _window(n):
    samples = tuple(EphemerisSample(10.0 * i, {"A": 60.0}, {"A": 600.0}) for i in range(n))
    return PassWindow(samples[0].t_s, samples[-1].t_s, samples)


def test_key_per_pass_examples():
    assert key_per_pass(_window(1), 6000, lambda s: 0.238) == pytest.approx(1428)
    assert key_per_pass(_window(5), 6000, lambda s: 0.0) == 0.0
    assert key_per_pass(_window(3), 100, lambda s: 0.5) == pytest.approx(150)


def test_sifting_flag():
    assert apply_sifting(0.4) == 0.4
    assert apply_sifting(0.4, True) == 0.2


# -- BB84 -----------------------------------------------------------------------------

def test_downlink_matches_quadrature_mean():
    mean_eta, _ = pdtc_moments(1.0, 2.75, 0.275)
    expected = mean_eta * 0.96753 * DET.p_det
    lr = run_bb84_downlink(MICIUS, SRC, DET, 1.0, 100_000, n_trials=10, seed=3)
    assert abs(lr.rate - expected) <= 3 * lr.estimate.sem


def test_downlink_blocked_aperture():
    ch = SlantChannel(5e-6, 0.5e-6, 1e-5, 550e3)
    assert run_bb84_downlink(ch, SRC, DET, n_photons=2000, n_trials=2).rate == 0.0


def test_fiber_perfect_link():
    lr = run_bb84_fiber(FiberChannel(0.0, p_coupling=1.0), SRC, DetectorParams(p_det=1.0), 1.0, 1000,
                        n_trials=3)
    assert lr.rate == 1.0


@pytest.mark.parametrize("km", [31.0, 54.0])
def test_fiber_ratio_to_alice(km):
    n = 200_000
    alice = run_bb84_fiber(FiberChannel(0.001), SRC, DET, 1.0, n, n_trials=10, seed=1, link_id="Alice")
    far = run_bb84_fiber(FiberChannel(km), SRC, DET, 1.0, n, n_trials=10, seed=1, link_id="far")
    ratio = far.rate / alice.rate
    sigma = ratio * math.hypot(far.estimate.sem / far.rate, alice.estimate.sem / alice.rate)
    assert abs(ratio - 10 ** (-0.18 * km / 10)) <= 3 * sigma


def test_fiber_qber_includes_dephasing():
    lr = run_bb84_fiber(FiberChannel(3.0), SRC, DET, n_trials=2)
    assert lr.qber == pytest.approx(0.01001, abs=1e-5)


def _rates(channels, n=20_000):
    return [run_bb84_downlink(ch, SRC, DET, 1.0, n, n_trials=10, seed=9, link_id=f"p{i}")
            for i, ch in enumerate(channels)]


def _assert_nonincreasing(rates):
    for a, b in zip(rates, rates[1:]):
        assert b.rate <= a.rate + 3 * math.hypot(a.estimate.sem, b.estimate.sem)


def test_rate_monotone_in_fiber_length():
    _assert_nonincreasing([run_bb84_fiber(FiberChannel(km), SRC, DET, 1.0, 20_000, n_trials=10, seed=2,
                                          link_id=f"f{km}") for km in (0, 3, 7, 19, 31, 54)])


def test_rate_monotone_in_pointing():
    _assert_nonincreasing(_rates([SlantChannel(5e-6, p, 1.0, 550e3) for p in (0, 0.5e-6, 1e-6, 2.5e-6)]))


def test_rate_monotone_in_divergence():
    _assert_nonincreasing(_rates([SlantChannel(d, 0.5e-6, 1.0, 550e3) for d in (5e-6, 10e-6, 15e-6, 20e-6)]))


def test_rate_monotone_in_zenith():
    chans = [slant_channel_at(el, 550.0 / math.sin(math.radians(el)) if el < 90 else 550.0)
             for el in (90, 70, 50, 30, 20)]
    _assert_nonincreasing(_rates(chans))


def test_rate_stable_under_more_photons():
    small = run_bb84_downlink(MICIUS, SRC, DET, 1.0, 6000, n_trials=10, seed=4, link_id="small")
    large = run_bb84_downlink(MICIUS, SRC, DET, 1.0, 60_000, n_trials=10, seed=4, link_id="large")
    assert _close(small, large)


def test_same_seed_same_rate():
    a = run_bb84_downlink(MICIUS, SRC, DET, n_trials=3, seed=7)
    b = run_bb84_downlink(MICIUS, SRC, DET, n_trials=3, seed=7)
    assert a == b


# -- BBM92 ----------------------------------------------------------------------------

def _arms():
    return (Bbm92Arm(slant_channel_at(60.0, 630.0), FiberChannel(3.0)),
            Bbm92Arm(slant_channel_at(55.0, 670.0), FiberChannel(13.0)))


def test_bbm92_arm_independence():
    left, right = _arms()
    c = bbm92_trial(left, right, NodeParams(), 2_000_000, make_rng(5, 0))
    n = c.sent
    pl, pr, pj = c.left / n, c.right / n, c.pairs / n
    sigma = math.hypot(math.sqrt(pj * (1 - pj) / n),
                       pl * pr * math.hypot(math.sqrt((1 - pl) / (pl * n)), math.sqrt((1 - pr) / (pr * n))))
    assert abs(pj - pl * pr) <= 3 * sigma


def test_bbm92_blocked_arm():
    left, _ = _arms()
    dead = Bbm92Arm(slant_channel_at(60.0, 630.0), FiberChannel(3.0), cal=0.0)
    assert run_bbm92(left, dead, NodeParams(), 5000, n_trials=2).rate == 0.0


def test_bbm92_qber_has_both_fibers():
    left, right = _arms()
    lr = run_bbm92(left, right, NodeParams(), 2000, n_trials=2)
    assert lr.qber == pytest.approx(flip_compose(1e-5, 1e-5, 0.01, 0.01), abs=1e-6)


def test_midpoint_geometry_symmetric_ground_distance():
    a = GroundStation("A", 48.8467, 2.3567)
    b = GroundStation("B", 51.999, 4.3731)
    geo = midpoint_geometry(a, b, 550.0)
    assert geo["A"][1] == pytest.approx(geo["B"][1], rel=1e-6)
    assert geo["A"][0] > 20.0


# -- balloons -------------------------------------------------------------------------

def test_balloon_chain_structure():
    links = balloon_chain(BalloonScenario(), n_photons=20_000, n_trials=4, seed=1)
    assert len(links) == 5
    assert min(links, key=lambda lr: lr.rate) is links[2]


def test_balloon_beyond_horizon():
    limit = horizon_distance(10, 10)
    with pytest.raises(ValueError, match="horizon"):
        balloon_chain(BalloonScenario(separation_km=limit + 1), n_photons=10, n_trials=1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_rates_are_probabilities(seed):
    lr = run_bb84_downlink(MICIUS, SRC, DET, 1.0, 500, n_trials=2, seed=seed)
    assert 0.0 <= lr.rate <= 1.0 and 0.0 <= lr.qber <= 0.5
    assert np.isfinite(lr.estimate.std)
