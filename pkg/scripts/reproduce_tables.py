"""Print the headline rates of every shipped preset.

Usage: python scripts/reproduce_tables.py [--trials N] [--seed S]
"""
from __future__ import annotations

import argparse
import dataclasses

from qcitysim.config import parse_scenario
from qcitysim.scenario import qlient_rates, run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    def load(name):
        s = parse_scenario(name)
        patch = {k: v for k, v in (("n_trials", args.trials), ("seed", args.seed)) if v is not None}
        return dataclasses.replace(s, **patch)

    micius = load("paris-delft-micius")
    down = run_scenario(micius, "downlink").summary
    print(f"downlink max rate (Paris): {down['max_rate']:.4f} at t={down['t_at_max_s']:.0f} s")
    print(f"raw key per pass: {sum(down['key_per_pass_bits']):.0f} bits")

    print("\nQlient -> Qonnector BB84 rates")
    for name, lr in qlient_rates(micius).items():
        print(f"  {name:8s} {micius.qlients[name].fiber_km:7.3f} km  {lr.rate:.4f} +- {lr.estimate.sem:.4f}")

    chain = run_scenario(micius, "chain").summary
    print(f"\ntrusted chain {'-'.join(chain['endpoints'])}: {chain['chain_rate']:.4f} "
          f"limited by {chain['limiting_link']}, {chain['throughput_bps'] / 1e6:.2f} Mbit/s")

    bbm = run_scenario(load("paris-delft-bbm92"), "bbm92").summary["midpoint"]
    print(f"BBM92 midpoint pair rate: {bbm['rate']:.4f} +- {bbm['std']:.4f} (trial std), "
          f"{bbm['throughput_bps'] / 1e3:.0f} kbit/s")

    balloon = run_scenario(load("balloon-trusted"), "balloon").summary
    print("\nballoon-balloon rate vs Cn2")
    for d in balloon["sweep_cn2_balloons"]:
        rate = next(v for k, v in d["sublinks"].items() if k.count("balloon") == 2)
        print(f"  {d['param']:8.0e}  {rate:.3g}")
    print("balloon chain sublinks")
    for k, v in balloon["baseline"]["sublinks"].items():
        print(f"  {k:32s} {v:.4f}")


if __name__ == "__main__":
    main()
