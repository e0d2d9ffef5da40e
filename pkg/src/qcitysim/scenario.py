"""Scenario runner: turns a parsed :class:`~qcitysim.config.Scenario` into result rows.

Each orbit point is simulated independently (satellite frozen for the
10 s step). Rows are gathered and sorted by ``(time, sweep index)`` so the
output does not depend on worker scheduling.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import config as cfg
from .channels import DetectorParams, FiberChannel
from .config import ConfigError, Scenario
from .orbit import (CircularOrbit, EphemerisSample, GroundStation, horizon_distance,
                    load_ephemeris, pass_windows, sample_times, samples_from_track)
from .output import ResultRow
from .protocols import (BalloonScenario, Bbm92Arm, LinkRate, NodeParams, SourceParams,
                        apply_sifting, balloon_chain, chain_qber, chain_rate, flip_compose, key_per_pass,
                        midpoint_geometry, run_bb84_downlink, run_bb84_fiber, run_bbm92,
                        slant_channel_at, throughput)

MODES = ("pass", "downlink", "chain", "bbm92", "balloon", "sweep")


@dataclass
class RunResult:
    mode: str
    tables: dict[str, list[ResultRow]]
    summary: dict = field(default_factory=dict)

    @property
    def rows(self) -> list[ResultRow]:
        return [r for rows in self.tables.values() for r in rows]


# -- construction helpers ----------------------------------------------------------

def stations_of(s: Scenario) -> dict[str, GroundStation]:
    return {name: GroundStation(name, st.lat_deg, st.lon_deg, st.alt_m) for name, st in s.stations.items()}


def devices_of(s: Scenario) -> tuple[SourceParams, DetectorParams, NodeParams]:
    return (SourceParams(**dataclasses.asdict(s.source)),
            DetectorParams(**dataclasses.asdict(s.detector)),
            NodeParams(**dataclasses.asdict(s.node)))


def fiber_of(s: Scenario, length_km: float) -> FiberChannel:
    return FiberChannel(length_km, s.fiber.loss_db_per_km, s.fiber.p_coupling, s.fiber.p_dephase)


def load_samples(s: Scenario) -> list[EphemerisSample]:
    if s.orbit is None:
        raise ConfigError("scenario.orbit: required for this mode")
    stations = list(stations_of(s).values())
    o = s.orbit
    if o.source == "ephemeris":
        path = s.base_dir / o.path
        return load_ephemeris(path, stations)
    if o.zenith_station is not None:
        orbit = CircularOrbit.through_zenith(stations_of(s)[o.zenith_station], o.alt_km, o.inclination_deg)
    else:
        orbit = CircularOrbit(o.alt_km, o.inclination_deg, o.raan_deg, o.arg_lat0_deg)
    times = sample_times(o.t0_s, o.t1_s, o.step_s)
    return samples_from_track(times, (orbit.geodetic(t) for t in times), stations)


def orbit_altitude(s: Scenario) -> float | None:
    if s.endpoints is not None and s.endpoints.midpoint_alt_km is not None:
        return s.endpoints.midpoint_alt_km
    if s.orbit is not None and s.orbit.source == "circular":
        return s.orbit.alt_km
    return None


def _link_with(link: cfg.LinkConfig, param: str | None, value) -> cfg.LinkConfig:
    return link if param is None else dataclasses.replace(link, **{param: value})


def _channel(link: cfg.LinkConfig, elevation: float, range_km: float):
    return slant_channel_at(elevation, range_km, divergence_rad=link.divergence_rad,
                            pointing_error_rad=link.pointing_error_rad,
                            rx_aperture_m=link.rx_aperture_m, aerosol=link.aerosol,
                            wavelength_m=link.wavelength_m, t_atm_zenith=link.t_atm_zenith)


def _pmap(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# -- per-point tasks (top level so they pickle) ------------------------------------------

@dataclass(frozen=True)
class DownlinkTask:
    link: cfg.LinkConfig
    src: SourceParams
    det: DetectorParams
    elevation: float
    range_km: float
    n_photons: int
    n_trials: int
    seed: int
    key: tuple


def _downlink_task(task: DownlinkTask) -> LinkRate:
    ch = _channel(task.link, task.elevation, task.range_km)
    return run_bb84_downlink(ch, task.src, task.det, task.link.cal, task.n_photons,
                             n_trials=task.n_trials, seed=task.seed, link_id=repr(task.key))


@dataclass(frozen=True)
class Bbm92Task:
    left: Bbm92Arm
    right: Bbm92Arm
    node: NodeParams
    src: SourceParams
    n_pairs: int
    n_trials: int
    seed: int
    key: tuple


def _bbm92_task(task: Bbm92Task) -> LinkRate:
    return run_bbm92(task.left, task.right, task.node, task.n_pairs, src=task.src,
                     n_trials=task.n_trials, seed=task.seed, link_id=repr(task.key))


# -- row helpers -------------------------------------------------------------------

def _geometry(sample: EphemerisSample, a: str, b: str | None) -> dict:
    out = dict(t_s=sample.t_s, elev_A_deg=sample.elevation_deg[a], range_A_km=sample.range_km[a])
    if b is not None:
        out.update(elev_B_deg=sample.elevation_deg[b], range_B_km=sample.range_km[b])
    return out


def _row(geom: dict, param, rate: float, std: float, qber: float, sift: bool) -> ResultRow:
    return ResultRow(**geom, param=param, rate_mean=apply_sifting(rate, sift),
                     rate_std=apply_sifting(std, sift), qber=qber)


def _pair_stations(s: Scenario) -> tuple[str, str | None]:
    names = list(s.stations)
    if s.endpoints is not None:
        return s.qlients[s.endpoints.source].station, s.qlients[s.endpoints.target].station
    a = s.downlink_station or names[0]
    others = [n for n in names if n != a]
    return a, (others[0] if others else None)


def _windows_summary(windows) -> list[dict]:
    return [dict(start_s=w.start, end_s=w.end, n_points=len(w.samples)) for w in windows]


# -- modes -----------------------------------------------------------------------------

def run_pass(s: Scenario) -> RunResult:
    samples = load_samples(s)
    a, b = _pair_stations(s)
    rows = [ResultRow(**_geometry(x, a, b)) for x in samples]
    summary = {"windows_A": _windows_summary(pass_windows(samples, s.mask_deg, [a]))}
    if b is not None:
        summary["windows_AB"] = _windows_summary(pass_windows(samples, s.mask_deg, [a, b]))
    return RunResult("pass", {"pass": rows}, summary)


def _downlink_table(s: Scenario, samples, station: str, b: str | None,
                    param: str | None, values: Sequence) -> tuple[list[ResultRow], dict]:
    src, det, _ = devices_of(s)
    windows = pass_windows(samples, s.mask_deg, [station])
    points = [x for w in windows for x in w.samples]
    tasks, index = [], []
    for j, value in enumerate(values):
        link = _link_with(s.link, param, value)
        for x in points:
            tasks.append(DownlinkTask(link, src, det, x.elevation_deg[station], x.range_km[station],
                                      s.n_photons, s.n_trials, s.seed,
                                      ("downlink", station, param, j, x.t_s)))
            index.append((x, j, value))
    results = _pmap(_downlink_task, tasks, s.workers)
    rows = []
    per_value: dict[int, dict] = {}
    for (x, j, value), lr in sorted(zip(index, results), key=lambda it: (it[0][0].t_s, it[0][1])):
        rows.append(_row(_geometry(x, station, b), value, lr.rate, lr.estimate.std, lr.qber, s.sifting))
        per_value.setdefault(j, {})[x.t_s] = apply_sifting(lr.rate, s.sifting)
    stats = []
    for j, value in enumerate(values):
        rates = per_value.get(j, {})
        if not rates:
            continue
        t_best = max(rates, key=lambda t: (rates[t], -t))
        stats.append(dict(
            param=value, max_rate=rates[t_best], t_at_max_s=t_best,
            key_per_pass_bits=[key_per_pass(w, s.n_photons, lambda x: rates[x.t_s]) for w in windows],
        ))
    return rows, dict(station=station, mask_deg=s.mask_deg, windows=_windows_summary(windows), results=stats)


def _no_pass(summary: dict) -> dict:
    summary["status"] = "no usable pass"
    return summary


def run_downlink(s: Scenario) -> RunResult:
    samples = load_samples(s)
    a, b = _pair_stations(s)
    station = s.downlink_station or a
    b = None if b == station else b
    rows, summary = _downlink_table(s, samples, station, b, None, [None])
    if not rows:
        return RunResult("downlink", {"downlink": []}, _no_pass(summary))
    best = summary["results"][0]
    summary.update(status="ok", max_rate=best["max_rate"], t_at_max_s=best["t_at_max_s"],
                   key_per_pass_bits=best["key_per_pass_bits"])
    return RunResult("downlink", {"downlink": rows}, summary)


def _require_endpoints(s: Scenario, mode: str):
    if s.endpoints is None:
        raise ConfigError(f"scenario.endpoints: required for mode '{mode}'")
    q_from, q_to = s.qlients[s.endpoints.source], s.qlients[s.endpoints.target]
    return s.endpoints.source, q_from, s.endpoints.target, q_to


def qlient_rates(s: Scenario) -> dict[str, LinkRate]:
    """BB84 rate from every Qlient to its Qonnector."""
    src, det, _ = devices_of(s)
    return {name: run_bb84_fiber(fiber_of(s, q.fiber_km), src, det, s.fiber.cal, s.n_photons,
                                 n_trials=s.n_trials, seed=s.seed, link_id=f"fiber:{name}")
            for name, q in s.qlients.items()}


def run_chain(s: Scenario) -> RunResult:
    n_from, q_from, n_to, q_to = _require_endpoints(s, "chain")
    a, b = q_from.station, q_to.station
    samples = load_samples(s)
    fibers = qlient_rates(s)
    f_from, f_to = fibers[n_from], fibers[n_to]
    down_a, sum_a = _downlink_table(s, samples, a, None, None, [None])
    down_b, _ = _downlink_table(s, samples, b, None, None, [None])
    by_t_a = {r.t_s: r for r in down_a}
    by_t_b = {r.t_s: r for r in down_b}
    rows = []
    both = [x for w in pass_windows(samples, s.mask_deg, [a, b]) for x in w.samples]
    for x in both:
        ra, rb = by_t_a[x.t_s], by_t_b[x.t_s]
        subs = [(f_from.rate, f_from.estimate.std, f_from.qber), (ra.rate_mean, ra.rate_std, ra.qber),
                (rb.rate_mean, rb.rate_std, rb.qber), (f_to.rate, f_to.estimate.std, f_to.qber)]
        lim = min(subs, key=lambda t: t[0])
        qber = flip_compose(*(q for _, _, q in subs))
        rows.append(ResultRow(**_geometry(x, a, b), param=None, rate_mean=lim[0], rate_std=lim[1], qber=qber))
    summary: dict = dict(endpoints=[n_from, n_to], stations=[a, b], mask_deg=s.mask_deg,
                         qlient_rates={k: v.rate for k, v in sorted(fibers.items())})
    if not down_a or not down_b:
        return RunResult("chain", {"chain": rows}, _no_pass(summary))
    sat_a = max(r.rate_mean for r in down_a)
    sat_b = max(r.rate_mean for r in down_b)
    sublinks = {f"{n_from}->{a}": apply_sifting(f_from.rate, s.sifting), f"sat->{a}": sat_a,
                f"sat->{b}": sat_b, f"{n_to}->{b}": apply_sifting(f_to.rate, s.sifting)}
    best = chain_rate(list(sublinks.values()))
    summary.update(status="ok", sublinks=sublinks, chain_rate=best,
                   limiting_link=min(sublinks, key=sublinks.get),
                   key_per_pass_bits_A=sum_a["results"][0]["key_per_pass_bits"])
    if s.throughput is not None:
        summary["throughput_bps"] = throughput(best, s.throughput.f_source_hz, s.throughput.p_source)
    return RunResult("chain", {"chain": rows}, summary)


def _bbm92_arms(s: Scenario, q_from, q_to, geo_a, geo_b, det: DetectorParams):
    return (Bbm92Arm(_channel(s.link, *geo_a), fiber_of(s, q_from.fiber_km), det, s.link.cal),
            Bbm92Arm(_channel(s.link, *geo_b), fiber_of(s, q_to.fiber_km), det, s.link.cal))


def run_bbm92_mode(s: Scenario) -> RunResult:
    n_from, q_from, n_to, q_to = _require_endpoints(s, "bbm92")
    a, b = q_from.station, q_to.station
    samples = load_samples(s)
    src, det, node = devices_of(s)
    points = [x for w in pass_windows(samples, s.mask_deg, [a, b]) for x in w.samples]
    tasks = []
    for x in points:
        left, right = _bbm92_arms(s, q_from, q_to, (x.elevation_deg[a], x.range_km[a]),
                                  (x.elevation_deg[b], x.range_km[b]), det)
        tasks.append(Bbm92Task(left, right, node, src, s.n_pairs, s.n_trials, s.seed,
                               ("bbm92", n_from, n_to, x.t_s)))
    results = _pmap(_bbm92_task, tasks, s.workers)
    rows = [_row(_geometry(x, a, b), None, lr.rate, lr.estimate.std, lr.qber, s.sifting)
            for x, lr in zip(points, results)]
    summary: dict = dict(endpoints=[n_from, n_to], stations=[a, b], mask_deg=s.mask_deg)
    alt = orbit_altitude(s)
    if alt is not None:
        st = stations_of(s)
        geo = midpoint_geometry(st[a], st[b], alt)
        left, right = _bbm92_arms(s, q_from, q_to, geo[a], geo[b], det)
        mid = run_bbm92(left, right, node, s.n_pairs, src=src, n_trials=s.n_trials, seed=s.seed,
                        link_id=repr(("bbm92-midpoint", n_from, n_to)))
        summary["midpoint"] = dict(alt_km=alt, elevation_deg=[geo[a][0], geo[b][0]],
                                   range_km=[geo[a][1], geo[b][1]],
                                   rate=apply_sifting(mid.rate, s.sifting), std=mid.estimate.std,
                                   qber=mid.qber)
        if s.throughput is not None:
            summary["midpoint"]["throughput_bps"] = throughput(
                summary["midpoint"]["rate"], s.throughput.f_source_hz, s.throughput.p_source)
    if not rows:
        return RunResult("bbm92", {"bbm92": rows}, _no_pass(summary))
    summary.update(status="ok", max_rate=max(r.rate_mean for r in rows))
    return RunResult("bbm92", {"bbm92": rows}, summary)


def balloon_scenario_of(s: Scenario, param: str | None = None, value=None) -> BalloonScenario:
    if s.balloon is None:
        raise ConfigError("scenario.balloon: required for balloon runs")
    bc = s.balloon if param is None else dataclasses.replace(s.balloon, **{param: value})
    kw = dict(altitude_km=bc.altitude_km, separation_km=bc.separation_km,
              cn2_balloons=bc.cn2_balloons, cn2_vertical=bc.cn2_vertical,
              balloon_aperture_m=bc.balloon_aperture_m, qonnector_aperture_m=bc.qonnector_aperture_m,
              divergence_rad=s.link.divergence_rad, pointing_error_rad=s.link.pointing_error_rad,
              wavelength_m=s.link.wavelength_m, aerosol=s.link.aerosol,
              t_atm_horizontal=bc.t_atm_horizontal, t_atm_vertical=bc.t_atm_vertical,
              fiber_cal=s.fiber.cal, free_space_cal=bc.cal)
    if s.endpoints is not None:
        n_from, q_from, n_to, q_to = _require_endpoints(s, "balloon")
        kw.update(fiber_left_km=q_from.fiber_km, fiber_right_km=q_to.fiber_km,
                  names=(n_from, q_from.station, q_to.station, n_to))
    return BalloonScenario(**kw)


def _balloon_table(s: Scenario, param: str | None, values: Sequence) -> tuple[list[ResultRow], list[dict]]:
    src, det, _ = devices_of(s)
    rows, details = [], []
    for value in values:
        sc = balloon_scenario_of(s, param, value)
        try:
            links = balloon_chain(sc, src, det, fiber_of(s, 0.0), s.n_photons, n_trials=s.n_trials,
                                  seed=s.seed)
        except ValueError as exc:
            raise ConfigError(f"scenario.balloon: {exc}") from None
        lim = min(links, key=lambda lr: lr.rate)
        rows.append(ResultRow(param=value, rate_mean=apply_sifting(lim.rate, s.sifting),
                              rate_std=apply_sifting(lim.estimate.std, s.sifting), qber=chain_qber(links)))
        details.append(dict(param=value, sublinks={lr.link_id: apply_sifting(lr.rate, s.sifting) for lr in links},
                            chain_rate=apply_sifting(chain_rate(links), s.sifting), limiting_link=lim.link_id))
    return rows, details


def run_balloon(s: Scenario) -> RunResult:
    tables: dict[str, list[ResultRow]] = {}
    base_rows, base = _balloon_table(s, None, [None])
    tables["balloon"] = base_rows
    b = s.balloon
    summary: dict = dict(status="ok", baseline=base[0],
                         horizon_km=horizon_distance(b.altitude_km, b.altitude_km))
    for sw in s.sweeps:
        if sw.parameter not in cfg.BALLOON_SWEEP_PARAMETERS:
            raise ConfigError(f"scenario.sweeps: parameter '{sw.parameter}' does not apply to mode 'balloon'")
        rows, details = _balloon_table(s, sw.parameter, sw.values)
        tables[f"balloon_{sw.parameter}"] = rows
        summary[f"sweep_{sw.parameter}"] = details
    return RunResult("balloon", tables, summary)


def run_sweep(s: Scenario) -> RunResult:
    if not s.sweeps:
        raise ConfigError("scenario.sweeps: at least one sweep is required for mode 'sweep'")
    tables: dict[str, list[ResultRow]] = {}
    summary: dict = {"status": "ok"}
    samples = None
    for sw in s.sweeps:
        if sw.parameter in cfg.BALLOON_SWEEP_PARAMETERS:
            rows, details = _balloon_table(s, sw.parameter, sw.values)
        else:
            if samples is None:
                samples = load_samples(s)
            a, b = _pair_stations(s)
            station = s.downlink_station or a
            rows, info = _downlink_table(s, samples, station, None if b == station else b,
                                         sw.parameter, sw.values)
            details = info["results"]
            if not rows:
                summary["status"] = "no usable pass"
        tables[f"sweep_{sw.parameter}"] = rows
        summary[f"sweep_{sw.parameter}"] = details
    return RunResult("sweep", tables, summary)


_RUNNERS = {"pass": run_pass, "downlink": run_downlink, "chain": run_chain,
            "bbm92": run_bbm92_mode, "balloon": run_balloon, "sweep": run_sweep}


def run_scenario(s: Scenario, mode: str = "downlink") -> RunResult:
    if mode not in _RUNNERS:
        raise ValueError(f"unknown mode '{mode}'; expected one of {MODES}")
    result = _RUNNERS[mode](s)
    result.summary = dict(result.summary, mode=mode, scenario=s.name, seed=s.seed,
                          n_trials=s.n_trials)
    return result
