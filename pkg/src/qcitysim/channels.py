"""Per-photon loss and noise models for fiber and free-space links.

Free-space links use the beam-wandering model: a Gaussian beam of spot
radius ``W`` lands on a circular aperture of radius ``a`` with its centroid
displaced by a Rayleigh-distributed distance ``r`` (pointing jitter plus,
for horizontal paths, turbulence). The transmissivity for a displacement
``r`` is ``eta0 * exp(-(r / R) ** shape)``, with ``eta0``, ``shape`` and
``R`` fixed by ``a / W`` through modified Bessel functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .atmosphere import Aerosol, AtmosphereTable, atmospheric_transmittance
from .bessel import bessel_i
from .simcore import RngStream

DEFAULT_WAVELENGTH_M = 1550e-9


# -- dataclasses ----------------------------------------------------------

@dataclass(frozen=True)
class PdtcParams:
    eta0: float
    shape: float
    scale: float
    wander_std: float
    beam_spot: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta0 <= 1.0:
            raise ValueError(f"eta0={self.eta0} outside [0, 1]")
        if self.shape <= 0 or self.scale <= 0 or self.wander_std < 0:
            raise ValueError("shape and scale must be > 0 and wander_std >= 0")


@dataclass(frozen=True)
class SlantChannel:
    """Space-to-ground path characterised by the far-field divergence."""

    divergence_rad: float
    pointing_error_rad: float
    rx_aperture_m: float
    slant_range_m: float
    zenith_rad: float = 0.0
    aerosol: Aerosol = Aerosol.NONE
    wavelength_m: float = DEFAULT_WAVELENGTH_M
    t_atm_zenith: float | None = None  # overrides the table (needed for navy)

    def __post_init__(self) -> None:
        if self.divergence_rad <= 0 or self.rx_aperture_m <= 0 or self.slant_range_m <= 0:
            raise ValueError("divergence, aperture and slant range must be > 0")
        if not 0.0 <= self.zenith_rad < math.pi / 2:
            raise ValueError(f"zenith angle {self.zenith_rad} rad outside [0, pi/2)")
        object.__setattr__(self, "aerosol", Aerosol(self.aerosol))

    def pdtc(self) -> PdtcParams:
        w = beam_spot_slant(self.divergence_rad, self.slant_range_m)
        sigma = wander_sigma(self.pointing_error_rad, self.slant_range_m, kind="slant")
        return pdtc_params(self.rx_aperture_m, w, sigma)

    def t_atm(self, table: AtmosphereTable | None = None) -> float:
        if self.t_atm_zenith is not None:
            return self.t_atm_zenith ** (1.0 / math.cos(self.zenith_rad))
        return atmospheric_transmittance("slant", self.aerosol, zenith_rad=self.zenith_rad,
                                         table=table)


@dataclass(frozen=True)
class HorizontalChannel:
    """Path entirely inside the atmosphere, characterised by the beam waist."""

    beam_waist_m: float
    wavelength_m: float
    cn2: float
    pointing_error_rad: float
    rx_aperture_m: float
    length_m: float
    altitude_m: float = 10e3
    aerosol: Aerosol = Aerosol.NONE
    t_atm: float | None = None  # None -> table value at the link altitude

    def __post_init__(self) -> None:
        if self.beam_waist_m <= 0 or self.wavelength_m <= 0 or self.rx_aperture_m <= 0:
            raise ValueError("beam waist, wavelength and aperture must be > 0")
        if self.cn2 < 0 or self.length_m < 0:
            raise ValueError("cn2 and length must be >= 0")
        object.__setattr__(self, "aerosol", Aerosol(self.aerosol))

    @classmethod
    def from_divergence(cls, divergence_rad: float, wavelength_m: float = DEFAULT_WAVELENGTH_M,
                        **kwargs) -> "HorizontalChannel":
        return cls(beam_waist_m=waist_from_divergence(divergence_rad, wavelength_m),
                   wavelength_m=wavelength_m, **kwargs)

    @property
    def divergence_rad(self) -> float:
        return self.wavelength_m / (math.pi * self.beam_waist_m)

    def pdtc(self) -> PdtcParams:
        w = beam_spot_horizontal(self.beam_waist_m, self.wavelength_m, self.length_m)
        sigma = wander_sigma(self.pointing_error_rad, self.length_m, self.cn2,
                             self.beam_waist_m, kind="horizontal")
        return pdtc_params(self.rx_aperture_m, w, sigma)

    def transmittance(self, table: AtmosphereTable | None = None) -> float:
        return atmospheric_transmittance("horizontal", self.aerosol, self.altitude_m / 1e3,
                                         horizontal=self.t_atm, table=table)


@dataclass(frozen=True)
class FiberChannel:
    length_km: float
    loss_db_per_km: float = 0.18
    p_coupling: float = 0.81
    p_dephase: float = 0.02

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ValueError("fiber length must be >= 0")
        for name in ("p_coupling", "p_dephase"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")

    def transmittance(self) -> float:
        return fiber_transmittance(self.length_km, self.loss_db_per_km)


@dataclass(frozen=True)
class DetectorParams:
    p_det: float = 0.95
    dark_rate_hz: float = 100.0
    gate_s: float = 100e-12
    p_crosstalk: float = 1e-5

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_det <= 1.0 or not 0.0 <= self.p_crosstalk <= 1.0:
            raise ValueError("detector probabilities must lie in [0, 1]")
        if self.dark_rate_hz < 0 or self.gate_s < 0 or self.dark_rate_hz * self.gate_s >= 1.0:
            raise ValueError("dark_rate * gate must lie in [0, 1)")

    @property
    def p_dark(self) -> float:
        return dark_count_prob(self.dark_rate_hz, self.gate_s)


# -- beam geometry ----------------------------------------------------------

def waist_from_divergence(divergence_rad: float, wavelength_m: float = DEFAULT_WAVELENGTH_M) -> float:
    return wavelength_m / (math.pi * divergence_rad)


def beam_spot_slant(divergence_rad: float, distance_m: float) -> float:
    """Far-field spot radius ``theta_d * L``."""
    return divergence_rad * distance_m


def beam_spot_horizontal(waist_m: float, wavelength_m: float, distance_m: float) -> float:
    z_r = math.pi * waist_m**2 / wavelength_m
    return waist_m * math.sqrt(1.0 + (distance_m / z_r) ** 2)


def wander_sigma(pointing_error_rad: float, distance_m: float, cn2: float = 0.0,
                 waist_m: float | None = None, kind: str = "slant") -> float:
    """Standard deviation of the beam-centroid displacement per axis.

    Slant paths keep only pointing jitter. Horizontal paths add the
    turbulence term ``1.919 * cn2 * L**3 * (2 w0) ** (-1/3)``.
    """
    if pointing_error_rad < 0 or distance_m < 0 or cn2 < 0:
        raise ValueError("inputs must be nonnegative")
    var = (pointing_error_rad * distance_m) ** 2
    if kind == "horizontal":
        if cn2 > 0:
            if not waist_m or waist_m <= 0:
                raise ValueError("horizontal wander with turbulence needs a positive waist")
            var += 1.919 * cn2 * distance_m**3 * (2.0 * waist_m) ** (-1.0 / 3.0)
    elif kind != "slant":
        raise ValueError(f"unknown wander kind '{kind}'")
    return math.sqrt(var)


# -- PDTC -------------------------------------------------------------------

def _i0m1_scaled(x: float) -> float:
    """``exp(-x) * (I0(x) - 1)`` without cancellation for small ``x``."""
    if x < 1.0:
        q = 0.25 * x * x
        term, total, k = 1.0, 0.0, 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term <= 1e-17 * total:
                break
        return total * math.exp(-x)
    return bessel_i(0, x, scaled=True) - math.exp(-x)


def weibull_pdtc_params(aperture_m: float, spot_m: float) -> tuple[float, float, float]:
    """Return ``(eta0, shape, scale)`` of the beam-wander transmissivity law.

    ``eta0 = 1 - exp(-2 a^2/W^2)`` is the on-axis transmissivity. With
    ``x = 4 a^2/W^2`` and ``Q = 1 - exp(-x) I0(x)``::

        shape = 2x exp(-x) I1(x) / Q / ln(2 eta0 / Q)
        scale = a * ln(2 eta0 / Q) ** (-1 / shape)

    ``2 eta0 - Q`` equals ``expm1(-x/2)**2 + exp(-x)(I0(x) - 1)``, a sum of
    positive terms, which keeps the logarithm accurate as ``a/W -> 0``.
    """
    a, w = float(aperture_m), float(spot_m)
    if a <= 0 or w <= 0:
        raise ValueError("aperture and beam spot must be > 0")
    ratio2 = (a / w) ** 2
    x = 4.0 * ratio2
    eta0 = -math.expm1(-2.0 * ratio2)
    excess = math.expm1(-0.5 * x) ** 2 + _i0m1_scaled(x)
    q = 2.0 * eta0 - excess
    if not (q > 0.0) or not (excess > 0.0):
        raise ValueError(f"a/W = {a / w:.3g} underflows the transmissivity law")
    log_term = math.log1p(excess / q)
    shape = 2.0 * x * bessel_i(1, x, scaled=True) / q / log_term
    scale = a * log_term ** (-1.0 / shape)
    return eta0, shape, scale


def pdtc_params(aperture_m: float, spot_m: float, wander_std_m: float) -> PdtcParams:
    eta0, shape, scale = weibull_pdtc_params(aperture_m, spot_m)
    return PdtcParams(eta0=eta0, shape=shape, scale=scale, wander_std=wander_std_m,
                      beam_spot=spot_m)


def transmissivity_at(p: PdtcParams, r):
    """Transmissivity for a centroid displacement ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=float)
    return p.eta0 * np.exp(-((r / p.scale) ** p.shape))


def sample_transmissivity(p: PdtcParams, rng: RngStream, size=None):
    """Draw transmissivities for independent photons.

    The centroid displacement is Rayleigh with per-axis std ``wander_std``,
    drawn by inversion ``r = sigma * sqrt(-2 ln u)`` with ``u`` in (0, 1].
    """
    u = rng.uniform_open_low(size)
    if p.wander_std == 0.0:
        return np.full_like(u, p.eta0) if size is not None else p.eta0
    r = p.wander_std * np.sqrt(-2.0 * np.log(u))
    eta = transmissivity_at(p, r)
    return eta if size is not None else float(eta)


# -- fiber and detectors -------------------------------------------------------

def fiber_transmittance(length_km: float, loss_db_per_km: float = 0.18) -> float:
    if length_km < 0:
        raise ValueError("fiber length must be >= 0")
    return 10.0 ** (-loss_db_per_km * length_km / 10.0)


def dark_count_prob(dark_rate_hz: float, gate_s: float) -> float:
    return dark_rate_hz * gate_s


class Outcome(IntEnum):
    NO_CLICK = 0
    CLICK_CORRECT = 1
    CLICK_FLIPPED = 2
    DARK_CLICK = 3


def detect(arrival_prob, det: DetectorParams, rng: RngStream, size=None):
    """Detector response to photons arriving with probability ``arrival_prob``.

    A photon registers with ``arrival_prob * p_det`` and its outcome is
    flipped with ``p_crosstalk``; gates without a registered photon fire a
    dark click with ``p_dark``. Returns :class:`Outcome` codes (an int8
    array when ``size`` is given or ``arrival_prob`` is an array).
    """
    prob = np.asarray(arrival_prob, dtype=float)
    if np.any(prob < 0.0) or np.any(prob > 1.0):
        raise ValueError("arrival_prob must lie in [0, 1]")
    shape = size if size is not None else prob.shape
    u_click = rng.uniform(shape)
    u_flip = rng.uniform(shape)
    u_dark = rng.uniform(shape)
    click = u_click < prob * det.p_det
    out = np.where(click, np.where(u_flip < det.p_crosstalk, Outcome.CLICK_FLIPPED,
                                   Outcome.CLICK_CORRECT),
                   np.where(u_dark < det.p_dark, Outcome.DARK_CLICK, Outcome.NO_CLICK))
    out = out.astype(np.int8)
    if size is None and prob.ndim == 0:
        return Outcome(int(out))
    return out
