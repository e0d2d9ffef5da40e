"""Per-photon Monte Carlo simulation of satellite- and balloon-linked Quantum City networks."""
from .atmosphere import Aerosol, AtmosphereTable, atmospheric_transmittance
from .bessel import bessel_i
from .channels import (DetectorParams, FiberChannel, HorizontalChannel, Outcome, PdtcParams,
                       SlantChannel, beam_spot_horizontal, beam_spot_slant, dark_count_prob,
                       detect, fiber_transmittance, pdtc_params, sample_transmissivity,
                       wander_sigma, weibull_pdtc_params)
from .config import ConfigError, Scenario, parse_scenario
from .orbit import (CircularOrbit, EphemerisError, EphemerisSample, GroundStation, PassWindow,
                    circular_pass, elevation_range, horizon_distance, load_ephemeris,
                    pass_windows)
from .output import ResultRow, emit_plot, read_csv, write_csv
from .protocols import (BalloonScenario, Bbm92Arm, LinkRate, NodeParams, SourceParams,
                        balloon_chain, chain_rate, key_per_pass, qber_estimate, run_bb84_downlink,
                        run_bb84_fiber, run_bb84_horizontal, run_bbm92, throughput)
from .scenario import run_scenario
from .simcore import RateEstimate, RngStream, make_rng, run_trials

__version__ = "0.1.0"
