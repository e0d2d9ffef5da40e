"""QKD pipelines built on the channel models.

Rates are raw rates, ``n_arrived / n_sent``: states that register a real
detection at the receiver(s). Dark clicks never count towards the rate;
they only enter the QBER.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .atmosphere import AtmosphereTable
from .channels import (DetectorParams, FiberChannel, HorizontalChannel, Outcome,
                       SlantChannel, detect, sample_transmissivity)
from .orbit import GroundStation, PassWindow, horizon_distance
from .simcore import DEFAULT_TRIALS, RateEstimate, RngStream, run_trials


@dataclass(frozen=True)
class SourceParams:
    f_qubit_hz: float = 80e6
    p_qubit: float = 8e-3
    p_flip: float = 0.0
    f_epr_hz: float = 80e6
    p_epr: float = 1e-2

    def __post_init__(self) -> None:
        for name in ("p_qubit", "p_flip", "p_epr"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")
        if self.f_qubit_hz <= 0 or self.f_epr_hz <= 0:
            raise ValueError("source frequencies must be > 0")


@dataclass(frozen=True)
class NodeParams:
    # p_bsm and t_gate_s are carried for completeness; no pipeline here uses them.
    p_bsm: float = 0.36
    p_transmit: float = 0.81
    t_gate_s: float = 1e-9
    p_coupling: float = 0.81

    def __post_init__(self) -> None:
        for name in ("p_bsm", "p_transmit", "p_coupling"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")


@dataclass(frozen=True)
class LinkRate:
    link_id: str
    estimate: RateEstimate
    qber: float

    @property
    def rate(self) -> float:
        return self.estimate.mean


@dataclass(frozen=True)
class TrialCounts:
    arrived: int
    sent: int
    dark: int = 0

    def __iter__(self):
        return iter((self.arrived, self.sent, self.dark))


def flip_compose(*probs: float) -> float:
    """Probability of an odd number of independent flips."""
    # 1 - 2p multiplies under composition
    prod = 1.0
    for p in probs:
        prod *= 1.0 - 2.0 * p
    return 0.5 * (1.0 - prod)


def qber_estimate(p_flip: float, p_crosstalk: float, p_dephase: float = 0.0,
                  dark_fraction: float = 0.0) -> float:
    """Error probability of a sifted bit.

    Source flips, detector crosstalk and the basis-relevant half of fiber
    dephasing compose as independent flips; a ``dark_fraction`` share of
    counted bits is uniformly random.
    """
    for v in (p_flip, p_crosstalk, p_dephase, dark_fraction):
        if not 0.0 <= v <= 1.0:
            raise ValueError("QBER inputs must lie in [0, 1]")
    signal = flip_compose(p_flip, p_crosstalk, 0.5 * p_dephase)
    return (1.0 - dark_fraction) * signal + 0.5 * dark_fraction


def _collect(experiment: Callable[[RngStream], TrialCounts], n_trials: int, seed: int,
             key) -> tuple[RateEstimate, float]:
    darks: list[tuple[int, int]] = []

    def wrapped(rng: RngStream):
        c = experiment(rng)
        darks.append((c.dark, c.arrived))
        return c.arrived, c.sent

    est = run_trials(wrapped, n_trials, seed, key)
    dark = sum(d for d, _ in darks)
    counted = dark + sum(a for _, a in darks)
    return est, (dark / counted if counted else 0.0)


def _count(outcomes: np.ndarray, n: int) -> TrialCounts:
    clicks = int(np.count_nonzero((outcomes == Outcome.CLICK_CORRECT) | (outcomes == Outcome.CLICK_FLIPPED)))
    return TrialCounts(clicks, n, int(np.count_nonzero(outcomes == Outcome.DARK_CLICK)))


# -- BB84 -------------------------------------------------------------------

def bb84_downlink_trial(ch: SlantChannel, det: DetectorParams, cal: float, n_photons: int,
                        rng: RngStream, table: AtmosphereTable | None = None) -> TrialCounts:
    eta = sample_transmissivity(ch.pdtc(), rng, n_photons)
    arrival = np.minimum(eta * (ch.t_atm(table) * cal), 1.0)
    return _count(detect(arrival, det, rng), n_photons)


def run_bb84_downlink(ch: SlantChannel, src: SourceParams, det: DetectorParams, cal: float = 1.0,
                      n_photons: int = 6000, *, n_trials: int = DEFAULT_TRIALS, seed: int = 0,
                      link_id: str = "downlink", table: AtmosphereTable | None = None) -> LinkRate:
    """BB84 states from a satellite to one ground station at a fixed position."""
    est, dark_frac = _collect(
        lambda rng: bb84_downlink_trial(ch, det, cal, n_photons, rng, table),
        n_trials, seed, link_id)
    return LinkRate(link_id, est, qber_estimate(src.p_flip, det.p_crosstalk, 0.0, dark_frac))


def bb84_fiber_trial(ch: FiberChannel, det: DetectorParams, cal: float, n_photons: int,
                     rng: RngStream) -> TrialCounts:
    arrival = min(ch.p_coupling * ch.transmittance() * cal, 1.0)
    return _count(detect(arrival, det, rng, size=n_photons), n_photons)


def run_bb84_fiber(ch: FiberChannel, src: SourceParams, det: DetectorParams, cal: float = 1.0,
                   n_photons: int = 6000, *, n_trials: int = DEFAULT_TRIALS, seed: int = 0,
                   link_id: str = "fiber") -> LinkRate:
    """BB84 from a Qlient to its Qonnector over fiber."""
    est, dark_frac = _collect(lambda rng: bb84_fiber_trial(ch, det, cal, n_photons, rng),
                              n_trials, seed, link_id)
    return LinkRate(link_id, est, qber_estimate(src.p_flip, det.p_crosstalk, ch.p_dephase, dark_frac))


def bb84_horizontal_trial(ch: HorizontalChannel, det: DetectorParams, cal: float, n_photons: int,
                          rng: RngStream, table: AtmosphereTable | None = None) -> TrialCounts:
    eta = sample_transmissivity(ch.pdtc(), rng, n_photons)
    arrival = np.minimum(eta * (ch.transmittance(table) * cal), 1.0)
    return _count(detect(arrival, det, rng), n_photons)


def run_bb84_horizontal(ch: HorizontalChannel, src: SourceParams, det: DetectorParams,
                        cal: float = 1.0, n_photons: int = 6000, *, n_trials: int = DEFAULT_TRIALS,
                        seed: int = 0, link_id: str = "free-space",
                        table: AtmosphereTable | None = None) -> LinkRate:
    """BB84 over a free-space path inside the atmosphere (balloons, ground)."""
    est, dark_frac = _collect(
        lambda rng: bb84_horizontal_trial(ch, det, cal, n_photons, rng, table),
        n_trials, seed, link_id)
    return LinkRate(link_id, est, qber_estimate(src.p_flip, det.p_crosstalk, 0.0, dark_frac))


# -- chains and derived quantities -------------------------------------------------

def chain_rate(sublinks: Sequence[LinkRate | float]) -> float:
    """Trusted-node rate: the slowest sublink limits the chain."""
    if not sublinks:
        raise ValueError("chain needs at least one sublink")
    return min(s.rate if isinstance(s, LinkRate) else float(s) for s in sublinks)


def chain_qber(sublinks: Sequence[LinkRate]) -> float:
    # one-time-pad relaying XORs the sublink keys, so their errors compose
    return flip_compose(*(s.qber for s in sublinks))


def throughput(rate: float, f_source_hz: float, p_source: float) -> float:
    """Raw key throughput in bit/s."""
    return rate * f_source_hz * p_source


def key_per_pass(window: PassWindow, per_point_batch: int, link_fn: Callable) -> float:
    """Raw key bits accumulated over a pass, ``sum(batch * rate(point))``."""
    if not window.samples:
        raise ValueError("pass window has no samples")
    return math.fsum(per_point_batch * float(link_fn(s)) for s in window.samples)


def apply_sifting(rate: float, enabled: bool = False) -> float:
    return 0.5 * rate if enabled else rate


# -- BBM92 -------------------------------------------------------------------

@dataclass(frozen=True)
class Bbm92Arm:
    slant: SlantChannel
    fiber: FiberChannel
    det: DetectorParams = field(default_factory=DetectorParams)
    cal: float = 1.0

    def arrival_probs(self, node: NodeParams, rng: RngStream, n: int,
                      table: AtmosphereTable | None = None) -> np.ndarray:
        eta = sample_transmissivity(self.slant.pdtc(), rng, n)
        fixed = self.slant.t_atm(table) * self.cal * node.p_transmit * self.fiber.transmittance()
        return np.minimum(eta * fixed, 1.0)


@dataclass(frozen=True)
class Bbm92Counts:
    pairs: int
    sent: int
    left: int
    right: int
    dark_coincidences: int

    @property
    def arrived(self) -> int:
        return self.pairs

    @property
    def dark(self) -> int:
        return self.dark_coincidences


def bbm92_trial(left: Bbm92Arm, right: Bbm92Arm, node: NodeParams, n_pairs: int,
                rng: RngStream, table: AtmosphereTable | None = None) -> Bbm92Counts:
    """One batch of EPR pairs; index in the batch is the shared source timestamp."""
    out_l = detect(left.arrival_probs(node, rng, n_pairs, table), left.det, rng)
    out_r = detect(right.arrival_probs(node, rng, n_pairs, table), right.det, rng)
    real_l = (out_l == Outcome.CLICK_CORRECT) | (out_l == Outcome.CLICK_FLIPPED)
    real_r = (out_r == Outcome.CLICK_CORRECT) | (out_r == Outcome.CLICK_FLIPPED)
    any_l = real_l | (out_l == Outcome.DARK_CLICK)
    any_r = real_r | (out_r == Outcome.DARK_CLICK)
    both_real = real_l & real_r
    return Bbm92Counts(
        pairs=int(np.count_nonzero(both_real)),
        sent=n_pairs,
        left=int(np.count_nonzero(real_l)),
        right=int(np.count_nonzero(real_r)),
        dark_coincidences=int(np.count_nonzero(any_l & any_r & ~both_real)),
    )


def run_bbm92(left: Bbm92Arm, right: Bbm92Arm, node: NodeParams, n_pairs: int = 650, *,
              src: SourceParams | None = None, n_trials: int = DEFAULT_TRIALS, seed: int = 0,
              link_id: str = "bbm92", table: AtmosphereTable | None = None) -> LinkRate:
    """Entanglement-based QKD from a satellite EPR source to two Qlients.

    A pair counts when both arms register a real detection for the same
    source timestamp.
    """
    src = src or SourceParams()
    est, dark_frac = _collect(lambda rng: bbm92_trial(left, right, node, n_pairs, rng, table),
                              n_trials, seed, link_id)
    signal = flip_compose(src.p_flip, left.det.p_crosstalk, right.det.p_crosstalk,
                          0.5 * left.fiber.p_dephase, 0.5 * right.fiber.p_dephase)
    return LinkRate(link_id, est, (1.0 - dark_frac) * signal + 0.5 * dark_frac)


# -- balloons ------------------------------------------------------------------

@dataclass(frozen=True)
class BalloonScenario:
    """Two stationary balloons above two Qonnectors, trusted-node chain."""

    altitude_km: float = 10.0
    separation_km: float = 377.0
    cn2_balloons: float = 1e-17
    cn2_vertical: float = 1e-15
    balloon_aperture_m: float = 0.4
    qonnector_aperture_m: float = 1.0
    divergence_rad: float = 5e-6
    pointing_error_rad: float = 0.5e-6
    wavelength_m: float = 1550e-9
    aerosol: str = "none"
    t_atm_horizontal: float | None = None
    t_atm_vertical: float | None = None
    fiber_left_km: float = 3.0
    fiber_right_km: float = 13.0
    names: tuple[str, str, str, str] = ("Bob", "Paris", "Delft", "Hadi")
    fiber_cal: float = 1.0
    free_space_cal: float = 1.0

    def balloon_link(self) -> HorizontalChannel:
        return HorizontalChannel.from_divergence(
            self.divergence_rad, self.wavelength_m, cn2=self.cn2_balloons,
            pointing_error_rad=self.pointing_error_rad, rx_aperture_m=self.balloon_aperture_m,
            length_m=self.separation_km * 1e3, altitude_m=self.altitude_km * 1e3,
            aerosol=self.aerosol, t_atm=self.t_atm_horizontal)

    def vertical_link(self) -> HorizontalChannel:
        return HorizontalChannel.from_divergence(
            self.divergence_rad, self.wavelength_m, cn2=self.cn2_vertical,
            pointing_error_rad=self.pointing_error_rad, rx_aperture_m=self.qonnector_aperture_m,
            length_m=self.altitude_km * 1e3, altitude_m=self.altitude_km * 1e3,
            aerosol=self.aerosol, t_atm=self.t_atm_vertical)


def balloon_chain(sc: BalloonScenario, src: SourceParams | None = None,
                  det: DetectorParams | None = None, fiber: FiberChannel | None = None,
                  n_photons: int = 6000, *, n_trials: int = DEFAULT_TRIALS, seed: int = 0,
                  table: AtmosphereTable | None = None) -> list[LinkRate]:
    """Five sublinks Qlient - Qonnector - balloon - balloon - Qonnector - Qlient."""
    limit = horizon_distance(sc.altitude_km, sc.altitude_km)
    if sc.separation_km > limit:
        raise ValueError(f"balloons {sc.separation_km} km apart are beyond the "
                         f"{limit:.1f} km horizon at {sc.altitude_km} km altitude")
    src = src or SourceParams()
    det = det or DetectorParams()
    fiber = fiber or FiberChannel(0.0)
    qa, ca, cb, qb = sc.names

    def fiber_link(km: float, name: str) -> LinkRate:
        ch = FiberChannel(km, fiber.loss_db_per_km, fiber.p_coupling, fiber.p_dephase)
        return run_bb84_fiber(ch, src, det, sc.fiber_cal, n_photons, n_trials=n_trials,
                              seed=seed, link_id=name)

    def free(ch: HorizontalChannel, name: str) -> LinkRate:
        return run_bb84_horizontal(ch, src, det, sc.free_space_cal, n_photons, n_trials=n_trials,
                                   seed=seed, link_id=name, table=table)

    vertical = sc.vertical_link()
    return [
        fiber_link(sc.fiber_left_km, f"{qa}->{ca} Qonnector"),
        free(vertical, f"{ca} balloon->{ca} Qonnector"),
        free(sc.balloon_link(), f"{ca} balloon->{cb} balloon"),
        free(vertical, f"{cb} balloon->{cb} Qonnector"),
        fiber_link(sc.fiber_right_km, f"{cb} Qonnector->{qb}"),
    ]


# -- geometry helpers ----------------------------------------------------------------

def zenith_angle_rad(elevation_deg: float) -> float:
    return math.radians(90.0 - elevation_deg)


def slant_channel_at(elevation_deg: float, range_km: float, *, divergence_rad: float = 5e-6,
                     pointing_error_rad: float = 0.5e-6, rx_aperture_m: float = 1.0,
                     aerosol: str = "none", wavelength_m: float = 1550e-9,
                     t_atm_zenith: float | None = None) -> SlantChannel:
    return SlantChannel(divergence_rad, pointing_error_rad, rx_aperture_m, range_km * 1e3,
                        zenith_angle_rad(elevation_deg), aerosol, wavelength_m, t_atm_zenith)


def midpoint_geometry(a: GroundStation, b: GroundStation, alt_km: float) -> dict[str, tuple[float, float]]:
    """Elevation and range at both stations for a satellite above their great-circle midpoint."""
    from .orbit import elevation_range, great_circle_midpoint

    lat, lon = great_circle_midpoint(a, b)
    return {st.name: elevation_range((lat, lon, alt_km), st) for st in (a, b)}
