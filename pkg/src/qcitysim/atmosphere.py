"""Atmospheric transmittance lookups.

The shipped table holds ground-to-altitude transmittance at 1550 nm for a
few aerosol models. Slant paths scale the zenith value by airmass,
``T(zeta) = T_zenith ** sec(zeta)``.
"""
from __future__ import annotations

import csv
import math
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path


class Aerosol(str, Enum):
    NONE = "none"
    RURAL5 = "rural5"
    RURAL23 = "rural23"
    URBAN5 = "urban5"
    NAVY = "navy"


class AtmosphereError(ValueError):
    pass


# Downlinks only cross the lowest slab of atmosphere.
SLANT_REFERENCE_ALTITUDE_KM = 10.0


class AtmosphereTable:
    """Immutable ``(altitude_km, aerosol) -> T_vertical`` map.

    Missing entries (``NA`` in the data file) raise on lookup unless an
    override was supplied with :meth:`with_value`.
    """

    def __init__(self, values: dict[tuple[float, Aerosol], float | None]):
        self._values = dict(values)

    @classmethod
    def from_csv(cls, path: str | Path | None = None) -> "AtmosphereTable":
        if path is None:
            text = resources.files("qcitysim").joinpath("data/atmosphere.csv").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        values: dict[tuple[float, Aerosol], float | None] = {}
        for rec in csv.DictReader(rows):
            key = (float(rec["altitude_km"]), Aerosol(rec["aerosol_model"].strip()))
            raw = rec["T_vertical"].strip()
            values[key] = None if raw.upper() == "NA" else float(raw)
        return cls(values)

    def with_value(self, altitude_km: float, aerosol: Aerosol | str, value: float) -> "AtmosphereTable":
        if not 0.0 <= value <= 1.0:
            raise AtmosphereError(f"transmittance {value} outside [0, 1]")
        values = dict(self._values)
        values[(float(altitude_km), Aerosol(aerosol))] = float(value)
        return AtmosphereTable(values)

    def altitudes(self) -> list[float]:
        return sorted({alt for alt, _ in self._values})

    def vertical(self, altitude_km: float, aerosol: Aerosol | str = Aerosol.NONE) -> float:
        key = (float(altitude_km), Aerosol(aerosol))
        if key not in self._values:
            raise AtmosphereError(
                f"altitude {altitude_km} km not in atmosphere table (have {self.altitudes()})")
        value = self._values[key]
        if value is None:
            raise AtmosphereError(
                f"no transmittance available for aerosol model '{key[1].value}' at "
                f"{altitude_km} km; supply one explicitly")
        return value


@lru_cache(maxsize=1)
def default_table() -> AtmosphereTable:
    return AtmosphereTable.from_csv()


def atmospheric_transmittance(
    kind: str,
    aerosol: Aerosol | str = Aerosol.NONE,
    altitude_km: float = SLANT_REFERENCE_ALTITUDE_KM,
    zenith_rad: float = 0.0,
    *,
    horizontal: float | None = None,
    table: AtmosphereTable | None = None,
) -> float:
    """Transmittance for a ``vertical``, ``slant`` or ``horizontal`` path.

    ``horizontal`` is the configured path transmittance for horizontal
    links; when omitted, the table value at ``altitude_km`` is used.
    """
    table = table or default_table()
    if kind == "vertical":
        return table.vertical(altitude_km, aerosol)
    if kind == "slant":
        if not 0.0 <= zenith_rad < math.pi / 2:
            raise AtmosphereError(f"zenith angle {zenith_rad} rad outside [0, pi/2)")
        t_zenith = table.vertical(altitude_km, aerosol)
        return t_zenith ** (1.0 / math.cos(zenith_rad))
    if kind == "horizontal":
        if horizontal is not None:
            if not 0.0 <= horizontal <= 1.0:
                raise AtmosphereError(f"transmittance {horizontal} outside [0, 1]")
            return float(horizontal)
        return table.vertical(altitude_km, aerosol)
    raise AtmosphereError(f"unknown path kind '{kind}'")
