"""Satellite pass geometry over a spherical, rotating Earth.

Satellites come either from an ephemeris CSV export or from a two-body
circular orbit. Elevations are topocentric with no refraction correction.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5
SAMPLE_STEP_S = 10.0
DEFAULT_MASK_DEG = 20.0

GEODETIC_HEADER = ("t_s", "sat_lat_deg", "sat_lon_deg", "sat_alt_km")
TOPOCENTRIC_HEADER = ("t_s", "station", "elevation_deg", "range_km")


class EphemerisError(ValueError):
    pass


@dataclass(frozen=True)
class GroundStation:
    name: str
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.lat_deg) > 90 or abs(self.lon_deg) > 180:
            raise ValueError(f"station {self.name}: latitude/longitude out of range")


@dataclass(frozen=True)
class EphemerisSample:
    t_s: float
    elevation_deg: Mapping[str, float]
    range_km: Mapping[str, float]

    def __post_init__(self) -> None:
        for name, el in self.elevation_deg.items():
            if not -90.0 <= el <= 90.0:
                raise ValueError(f"elevation {el} deg at station {name} outside [-90, 90]")
        for name, rng in self.range_km.items():
            if not rng > 0:
                raise ValueError(f"slant range {rng} km at station {name} must be > 0")


@dataclass(frozen=True)
class PassWindow:
    start: float
    end: float
    samples: tuple[EphemerisSample, ...] = field(repr=False)

    @property
    def duration_s(self) -> float:
        return self.end - self.start


# -- geometry ---------------------------------------------------------------

def _unit(lat_deg: float, lon_deg: float) -> np.ndarray:
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])


def geodetic_to_ecef(lat_deg: float, lon_deg: float, alt_km: float) -> np.ndarray:
    return (EARTH_RADIUS_KM + alt_km) * _unit(lat_deg, lon_deg)


def ecef_to_geodetic(xyz) -> tuple[float, float, float]:
    x, y, z = (float(c) for c in xyz)
    r = math.sqrt(x * x + y * y + z * z)
    return (math.degrees(math.asin(z / r)), math.degrees(math.atan2(y, x)), r - EARTH_RADIUS_KM)


def elevation_range(sat: tuple[float, float, float], station: GroundStation) -> tuple[float, float]:
    """Topocentric ``(elevation_deg, slant_range_km)`` of a satellite.

    ``sat`` is ``(lat_deg, lon_deg, alt_km)``.
    """
    lat, lon, alt = sat
    if alt <= 0:
        raise ValueError("satellite altitude must be > 0")
    up = _unit(station.lat_deg, station.lon_deg)
    g = (EARTH_RADIUS_KM + station.alt_m / 1e3) * up
    d = geodetic_to_ecef(lat, lon, alt) - g
    dist = float(np.linalg.norm(d))
    sin_el = float(np.clip(np.dot(d, up) / dist, -1.0, 1.0))
    return math.degrees(math.asin(sin_el)), dist


def orbital_period(alt_km: float) -> float:
    return 2.0 * math.pi * math.sqrt((EARTH_RADIUS_KM + alt_km) ** 3 / MU_EARTH_KM3_S2)


def horizon_distance(h1_km: float, h2_km: float) -> float:
    """Line-of-sight limit between two altitudes, ``sqrt(2 R h1) + sqrt(2 R h2)``."""
    if h1_km < 0 or h2_km < 0:
        raise ValueError("altitudes must be >= 0")
    return math.sqrt(2 * EARTH_RADIUS_KM * h1_km) + math.sqrt(2 * EARTH_RADIUS_KM * h2_km)


def great_circle_midpoint(a: GroundStation, b: GroundStation) -> tuple[float, float]:
    m = _unit(a.lat_deg, a.lon_deg) + _unit(b.lat_deg, b.lon_deg)
    lat, lon, _ = ecef_to_geodetic(m / np.linalg.norm(m) * EARTH_RADIUS_KM)
    return lat, lon


def ground_distance_km(a: GroundStation, b: GroundStation) -> float:
    c = float(np.clip(np.dot(_unit(a.lat_deg, a.lon_deg), _unit(b.lat_deg, b.lon_deg)), -1, 1))
    return EARTH_RADIUS_KM * math.acos(c)


# -- circular orbits ------------------------------------------------------------

@dataclass(frozen=True)
class CircularOrbit:
    """Two-body circular orbit; angles are fixed in the Earth frame at ``t = 0``."""

    alt_km: float
    inclination_deg: float
    raan_deg: float = 0.0
    arg_lat0_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.alt_km <= 0:
            raise ValueError("orbit altitude must be > 0")

    @property
    def radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.alt_km

    @property
    def period_s(self) -> float:
        return orbital_period(self.alt_km)

    def ecef(self, t_s: float) -> np.ndarray:
        u = math.radians(self.arg_lat0_deg) + 2.0 * math.pi * t_s / self.period_s
        om, inc = math.radians(self.raan_deg), math.radians(self.inclination_deg)
        inertial = self.radius_km * np.array([
            math.cos(om) * math.cos(u) - math.sin(om) * math.sin(u) * math.cos(inc),
            math.sin(om) * math.cos(u) + math.cos(om) * math.sin(u) * math.cos(inc),
            math.sin(u) * math.sin(inc),
        ])
        th = EARTH_ROTATION_RAD_S * t_s
        c, s = math.cos(th), math.sin(th)
        return np.array([c * inertial[0] + s * inertial[1],
                         -s * inertial[0] + c * inertial[1],
                         inertial[2]])

    def geodetic(self, t_s: float) -> tuple[float, float, float]:
        lat, lon, _ = ecef_to_geodetic(self.ecef(t_s))
        return lat, lon, self.alt_km  # exact altitude; avoids rounding drift

    @classmethod
    def through_zenith(cls, station: GroundStation, alt_km: float, inclination_deg: float,
                       ascending: bool = True) -> "CircularOrbit":
        """Orbit whose sub-satellite point is ``station`` at ``t = 0``."""
        s_inc = math.sin(math.radians(inclination_deg))
        ratio = math.sin(math.radians(station.lat_deg)) / s_inc if s_inc else float("inf")
        if abs(ratio) > 1:
            raise ValueError(f"inclination {inclination_deg} deg never reaches latitude "
                             f"{station.lat_deg} deg")
        u = math.asin(ratio)
        if not ascending:
            u = math.pi - u
        offset = math.atan2(math.sin(u) * math.cos(math.radians(inclination_deg)), math.cos(u))
        raan = math.degrees(math.radians(station.lon_deg) - offset)
        return cls(alt_km, inclination_deg, raan, math.degrees(u))


def _as_stations(stations) -> list[GroundStation]:
    if isinstance(stations, GroundStation):
        return [stations]
    return list(stations)


def samples_from_track(times: Iterable[float], track: Iterable[tuple[float, float, float]],
                       stations) -> list[EphemerisSample]:
    stations = _as_stations(stations)
    out = []
    for t, sat in zip(times, track):
        el, rng = {}, {}
        for st in stations:
            el[st.name], rng[st.name] = elevation_range(sat, st)
        out.append(EphemerisSample(float(t), el, rng))
    return out


def sample_times(t0: float, t1: float, step: float = SAMPLE_STEP_S) -> list[float]:
    if t1 <= t0:
        raise ValueError("t1 must be > t0")
    n = int(math.floor((t1 - t0) / step + 1e-9))
    return [t0 + k * step for k in range(n + 1)]


def circular_pass(alt_km: float, inclination_deg: float, raan_deg: float, stations,
                  t0: float, t1: float, *, arg_lat0_deg: float = 0.0,
                  step: float = SAMPLE_STEP_S) -> list[EphemerisSample]:
    """Sample a circular orbit every ``step`` seconds over ``[t0, t1]``."""
    orbit = CircularOrbit(alt_km, inclination_deg, raan_deg, arg_lat0_deg)
    times = sample_times(t0, t1, step)
    return samples_from_track(times, (orbit.geodetic(t) for t in times), stations)


# -- ephemeris ingestion -----------------------------------------------------------

def _data_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() and not line.lstrip().startswith("#"):
            yield lineno, line


def _num(value: str, lineno: int, column: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise EphemerisError(f"line {lineno}: column '{column}' is not a number: {value!r}") from None
    if not math.isfinite(out):
        raise EphemerisError(f"line {lineno}: column '{column}' is not finite")
    return out


def load_ephemeris(path: str | Path, stations: Sequence[GroundStation] = ()) -> list[EphemerisSample]:
    """Read an ephemeris CSV in either supported schema.

    ``t_s,sat_lat_deg,sat_lon_deg,sat_alt_km``: one row per time; the
    elevation and range are computed for every station in ``stations``.

    ``t_s,station,elevation_deg,range_km``: one row per station per time;
    rows for the same time must be adjacent.
    """
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise EphemerisError(f"cannot read ephemeris {path}: {exc}") from None
    lines = list(_data_lines(text))
    if not lines:
        raise EphemerisError(f"{path}: no header row")
    header_no, header_line = lines[0]
    header = tuple(h.strip() for h in next(csv.reader(io.StringIO(header_line))))
    rows = [(n, [c.strip() for c in next(csv.reader(io.StringIO(ln)))]) for n, ln in lines[1:]]
    for n, cells in rows:
        if len(cells) != len(header):
            raise EphemerisError(f"line {n}: expected {len(header)} fields, got {len(cells)}")
    if header == GEODETIC_HEADER:
        return _load_geodetic(rows, _as_stations(stations))
    if header == TOPOCENTRIC_HEADER:
        return _load_topocentric(rows, _as_stations(stations))
    raise EphemerisError(f"line {header_no}: unrecognised header {','.join(header)}")


def _load_geodetic(rows, stations: list[GroundStation]) -> list[EphemerisSample]:
    if not stations:
        raise EphemerisError("geodetic ephemeris needs at least one ground station")
    out: list[EphemerisSample] = []
    for n, (t, lat, lon, alt) in rows:
        t = _num(t, n, "t_s")
        lat, lon, alt = _num(lat, n, "sat_lat_deg"), _num(lon, n, "sat_lon_deg"), _num(alt, n, "sat_alt_km")
        if abs(lat) > 90 or abs(lon) > 180 or alt <= 0:
            raise EphemerisError(f"line {n}: satellite position out of range")
        if out and t <= out[-1].t_s:
            raise EphemerisError(f"line {n}: timestamps must increase strictly")
        out.extend(samples_from_track([t], [(lat, lon, alt)], stations))
    return out


def _load_topocentric(rows, stations: list[GroundStation]) -> list[EphemerisSample]:
    wanted = [s.name for s in stations]
    groups: list[tuple[float, dict, dict, int]] = []
    for n, (t, name, el, rng) in rows:
        t = _num(t, n, "t_s")
        el, rng = _num(el, n, "elevation_deg"), _num(rng, n, "range_km")
        if not -90.0 <= el <= 90.0:
            raise EphemerisError(f"line {n}: elevation {el} deg outside [-90, 90]")
        if rng <= 0:
            raise EphemerisError(f"line {n}: range must be > 0")
        if groups and t == groups[-1][0]:
            if name in groups[-1][1]:
                raise EphemerisError(f"line {n}: duplicate station '{name}' at t={t}")
        elif groups and t < groups[-1][0]:
            raise EphemerisError(f"line {n}: timestamps must not decrease")
        else:
            groups.append((t, {}, {}, n))
        groups[-1][1][name] = el
        groups[-1][2][name] = rng
    out = []
    for t, els, rngs, n in groups:
        missing = [w for w in wanted if w not in els]
        if missing:
            raise EphemerisError(f"line {n}: no row for station(s) {missing} at t={t}")
        if wanted:
            els = {w: els[w] for w in wanted}
            rngs = {w: rngs[w] for w in wanted}
        out.append(EphemerisSample(t, els, rngs))
    return out


def write_ephemeris(path: str | Path, times, track, comment: str | None = None) -> None:
    """Write a geodetic ephemeris CSV (inverse of :func:`load_ephemeris`)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GEODETIC_HEADER)
        for t, (lat, lon, alt) in zip(times, track):
            w.writerow([f"{t:.3f}", f"{lat:.9f}", f"{lon:.9f}", f"{alt:.6f}"])


# -- pass windows -------------------------------------------------------------

def pass_windows(samples: Sequence[EphemerisSample], mask_deg: float = DEFAULT_MASK_DEG,
                 stations_required: Sequence[str] | None = None) -> list[PassWindow]:
    """Maximal runs of consecutive samples above ``mask_deg`` at every required station."""
    if not samples:
        return []
    required = list(stations_required) if stations_required else list(samples[0].elevation_deg)
    windows: list[PassWindow] = []
    run: list[EphemerisSample] = []
    for s in samples:
        try:
            visible = all(s.elevation_deg[name] >= mask_deg for name in required)
        except KeyError as exc:
            raise ValueError(f"sample at t={s.t_s} has no station {exc}") from None
        if visible:
            run.append(s)
        elif run:
            windows.append(PassWindow(run[0].t_s, run[-1].t_s, tuple(run)))
            run = []
    if run:
        windows.append(PassWindow(run[0].t_s, run[-1].t_s, tuple(run)))
    return windows
