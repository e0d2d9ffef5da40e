"""Generate the synthetic Micius-like pass shipped with the presets.

Circular 550 km orbit, 97.4 deg inclination, sub-satellite point over the
Paris Qonnector at t = 0, sampled every 10 s over +/- 600 s.

    python scripts/make_synthetic_ephemeris.py [OUT.csv]
"""
import sys
from pathlib import Path

from qcitysim.orbit import CircularOrbit, GroundStation, sample_times, write_ephemeris

PARIS = GroundStation("Paris", 48.8467, 2.3567, 35.0)
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "qcitysim" / "presets" / "micius_like_pass.csv"


def main(out: Path = DEFAULT_OUT) -> None:
    orbit = CircularOrbit.through_zenith(PARIS, alt_km=550.0, inclination_deg=97.4)
    times = sample_times(-600.0, 600.0, 10.0)
    write_ephemeris(out, times, [orbit.geodetic(t) for t in times],
                    comment="synthetic circular pass, 550 km, i=97.4 deg, zenith over Paris at t=0")
    print(f"wrote {len(times)} samples to {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_OUT)
