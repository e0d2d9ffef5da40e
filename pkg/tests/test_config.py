import json

import pytest

from qcitysim.config import (SWEEP_PARAMETERS, ConfigError, Scenario, parse_scenario, preset_names,
                             preset_path, scenario_from_dict)

MINIMAL = {"name": "t", "stations": {"A": {"lat_deg": 0.0, "lon_deg": 0.0}}}


def _with(**extra):
    return {**MINIMAL, **extra}


def test_presets_present():
    assert {"paris-delft-micius", "paris-delft-bbm92", "balloon-trusted", "param-sweeps"} <= set(preset_names())


@pytest.mark.parametrize("name", preset_names())
def test_every_preset_parses(name):
    s = parse_scenario(preset_path(name))
    assert isinstance(s, Scenario) and s.n_trials == 10


def test_micius_preset_fiber_lengths():
    s = parse_scenario("paris-delft-micius")
    paris = sorted(q.fiber_km for q in s.qlients.values() if q.station == "Paris")
    delft = sorted(q.fiber_km for q in s.qlients.values() if q.station == "Delft")
    assert paris == [0.001, 3.0, 7.0, 19.0, 31.0]
    assert delft == [9.0, 13.0, 54.0]


def test_empty_file_lists_missing(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(ConfigError, match=r"missing required key\(s\) \['name', 'stations'\]"):
        parse_scenario(p)


def test_unknown_sweep_parameter():
    with pytest.raises(ConfigError, match=r"scenario.sweeps\[0\].parameter: unknown sweep parameter 'foo'"):
        scenario_from_dict(_with(sweeps=[{"parameter": "foo", "values": [1]}]))


def test_unknown_key_is_path_qualified():
    with pytest.raises(ConfigError, match=r"scenario.link: unknown key\(s\) \['apperture'\]"):
        scenario_from_dict(_with(link={"apperture": 1.0}))


def test_malformed_number():
    with pytest.raises(ConfigError, match=r"scenario.link.rx_aperture_m: malformed number '1m'"):
        scenario_from_dict(_with(link={"rx_aperture_m": "1m"}))


def test_dangling_station_reference():
    with pytest.raises(ConfigError, match=r"scenario.qlients.Q.station: unknown station 'B'"):
        scenario_from_dict(_with(qlients={"Q": {"station": "B", "fiber_km": 1.0}}))


def test_dangling_endpoint():
    data = _with(qlients={"Q": {"station": "A", "fiber_km": 1.0}}, endpoints={"from": "Q", "to": "R"})
    with pytest.raises(ConfigError, match=r"scenario.endpoints.to: unknown qlient 'R'"):
        scenario_from_dict(data)


@pytest.mark.parametrize("patch,where", [
    ({"n_trials": 0}, "scenario.n_trials"),
    ({"seed": -1}, "scenario.seed"),
    ({"detector": {"p_det": 1.5}}, "scenario.detector.p_det"),
    ({"link": {"aerosol": "fog"}}, "scenario.link.aerosol"),
    ({"orbit": {"source": "tle"}}, "scenario.orbit.source"),
    ({"orbit": {"source": "circular"}}, "scenario.orbit.alt_km"),
    ({"sweeps": [{"parameter": "aerosol", "values": ["fog"]}]}, r"scenario.sweeps\[0\].values\[0\]"),
])
def test_validation_errors(patch, where):
    with pytest.raises(ConfigError, match=where):
        scenario_from_dict(_with(**patch))


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_scenario(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario(tmp_path / "nope.json")


def test_sweep_parameter_set_is_closed():
    assert "rx_aperture_m" in SWEEP_PARAMETERS and "cn2_balloons" in SWEEP_PARAMETERS
    assert "foo" not in SWEEP_PARAMETERS


def test_roundtrip_through_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(_with(seed=5, n_photons=100)))
    s = parse_scenario(p)
    assert s.seed == 5 and s.n_photons == 100 and s.base_dir == tmp_path
