"""Command-line entry point: ``qcitysim <mode> --scenario FILE [options]``.

Exit codes: 0 success, 2 configuration error, 3 data/ephemeris error,
4 any other runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .atmosphere import AtmosphereError
from .config import ConfigError, parse_scenario, preset_names
from .orbit import EphemerisError
from .output import emit_plot, write_csv
from .scenario import MODES, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("qcitysim")

_PLOT_KIND = {"pass": "elevation_vs_time", "balloon": "rate_vs_param"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcitysim", description="Satellite/balloon QKD network simulator.")
    sub = p.add_subparsers(dest="mode", required=True)
    helps = {
        "pass": "pass geometry only (elevation and range per station)",
        "downlink": "BB84 downlink rate along the pass",
        "chain": "trusted-node BB84 chain between two Qlients",
        "bbm92": "entanglement-based BBM92 between two Qlients",
        "balloon": "trusted chain over two high-altitude balloons",
        "sweep": "downlink or balloon rates over parameter sweeps",
    }
    for mode in MODES:
        s = sub.add_parser(mode, help=helps[mode])
        s.add_argument("--scenario", required=True,
                       help=f"scenario JSON file or preset name ({', '.join(preset_names())})")
        s.add_argument("--seed", type=int, default=None, help="override scenario seed (u64)")
        s.add_argument("--trials", type=int, default=None, help="override number of trials")
        s.add_argument("--out", default="out", help="output directory (default: ./out)")
        s.add_argument("--plot", action="store_true", help="also write SVG plots")
        s.add_argument("--workers", type=int, default=None, help="worker processes")
    return p


def _run(args) -> int:
    scenario = parse_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials: must be >= 1")
        overrides["n_trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = max(1, args.workers)
    scenario = dataclasses.replace(scenario, **overrides)

    result = run_scenario(scenario, args.mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, rows in result.tables.items():
        write_csv(rows, out / f"{stem}.csv")
        if args.plot and rows:
            kind = _PLOT_KIND.get(args.mode, "rate_vs_time")
            if stem.startswith("sweep_") and rows[0].t_s is None:
                kind = "rate_vs_param"
            if kind == "rate_vs_param" and all(r.param is None for r in rows):
                continue  # single baseline point, nothing to draw
            emit_plot(rows, kind, out / f"{stem}.svg", title=f"{scenario.name}: {stem}")
    (out / f"{args.mode}_summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    status = result.summary.get("status", "ok")
    print(f"{args.mode}: {status}; wrote {', '.join(sorted(result.tables))} to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (EphemerisError, AtmosphereError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - mapped to the documented exit code
        log.error("runtime error: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
