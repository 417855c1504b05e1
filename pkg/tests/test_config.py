import json

import pytest

from netzero_isac.config import (
    ScenarioFileError,
    apply_overrides,
    bundled_scenarios,
    load_scenario,
    parse_quantity,
    resolve_path,
)

MINIMAL = {"geometry": {"mode": "distances", "d_f": "2 m", "d_b": ["2 m", "3 m", "4 m"]}}


def test_bundled_scenarios_all_load():
    names = set(bundled_scenarios())
    assert {"default", "figure4", "figure5", "figure6", "figure7", "rician_k50"} <= names
    for name in names:
        loaded = load_scenario(resolve_path(name))
        assert loaded.scenario.n_antennas >= 3


@pytest.mark.parametrize("text,kind,expected", [
    ("-75 dBm", "power", 10 ** -10.5),
    ("1 W", "power", 1.0),
    ("250 mW", "power", 0.25),
    ("3 dBi", "gain", 10 ** 0.3),
    ("2.5 m", "distance", 2.5),
    ("40 dB", "ratio", 1e4),
    ("50 ohm", "impedance", 50.0),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("text,kind", [("-75", "power"), ("2 m", "power"), ("3 dBm", "distance")])
def test_parse_quantity_rejects(text, kind):
    with pytest.raises(ValueError):
        parse_quantity(text, kind)


def test_missing_unit_names_the_key():
    doc = dict(MINIMAL, system={"p_th": "-75"})
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(doc)
    assert any(p.startswith("system.p_th") and "unit" in p for p in info.value.problems)


def test_bare_number_names_the_key():
    doc = dict(MINIMAL, system={"p_s": 1.0})
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(doc)
    assert any(p.startswith("system.p_s") for p in info.value.problems)


def test_every_offending_key_listed():
    doc = dict(MINIMAL, system={"p_th": "-75", "bogus": 1, "eta": -2},
               modulation={"gamma_sq": 3}, extra_section={})
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(doc)
    text = "\n".join(info.value.problems)
    for key in ("system.p_th", "system.bogus", "system.eta", "modulation.gamma_sq", "extra_section"):
        assert key in text


def test_distance_below_reference_rejected():
    doc = {"geometry": {"mode": "distances", "d_f": "0.5 m", "d_b": ["2 m", "3 m", "4 m"]}}
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(doc)
    assert "d_f" in str(info.value)


def test_defaults_follow_the_reference_table():
    sc = load_scenario(MINIMAL).scenario
    assert sc.params.chi == 0.5
    assert sc.params.eta == 1.8
    assert sc.params.p_th == pytest.approx(10 ** -10.5, rel=1e-14)
    assert sc.params.g_t == 1.0


def test_overrides_and_seed():
    doc = apply_overrides(MINIMAL, ["system.p_s=20 dBm", "modulation.gamma_sq=0.25"])
    assert doc["system"]["p_s"] == "20 dBm"
    assert doc["modulation"]["gamma_sq"] == 0.25
    loaded = load_scenario(MINIMAL, ["system.p_s=20 dBm"], seed=77)
    assert loaded.scenario.params.p_s == pytest.approx(0.1, rel=1e-14)
    assert loaded.mc.seed == 77
    with pytest.raises(ScenarioFileError):
        apply_overrides(MINIMAL, ["no_equals_sign"])


def test_grid_values_replace_default():
    doc = dict(MINIMAL, experiment={"variable": "gamma_sq", "grid": {"values": [0.1, 0.5]}})
    assert load_scenario(doc).grid.values == (0.1, 0.5)


def test_dbm_grid_is_even_in_dbm():
    doc = dict(MINIMAL, experiment={"grid": {"start": "0 dBm", "stop": "20 dBm", "num": 3}})
    vals = load_scenario(doc).grid.values
    assert vals == pytest.approx((1e-3, 1e-2, 1e-1), rel=1e-14)


def test_hash_uses_resolved_values():
    a = load_scenario(dict(MINIMAL, system={"p_s": "30 dBm"}))
    b = load_scenario(dict(MINIMAL, system={"p_s": "1 W"}))
    c = load_scenario(dict(MINIMAL, system={"p_s": "2 W"}))
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    seeded = load_scenario(MINIMAL, seed=2)
    assert seeded.config_hash() != load_scenario(MINIMAL, seed=3).config_hash()
    sharded = load_scenario(MINIMAL, ["experiment.monte_carlo.shards=4"])
    assert sharded.config_hash() == load_scenario(MINIMAL).config_hash()


def test_coordinates_mode():
    doc = {"geometry": {"mode": "coordinates", "tx": ["0 m", "0 m"], "tag": ["0 m", "4 m"],
                        "antennas": [["3 m", "4 m"], ["0 m", "7 m"], ["-2 m", "4 m"]]}}
    geo = load_scenario(doc).scenario.geometry
    assert geo.d_f == 4.0
    assert geo.d_b == (3.0, 3.0, 2.0)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioFileError):
        load_scenario(p)


def test_file_round_trip(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(MINIMAL))
    assert load_scenario(p).config_hash() == load_scenario(MINIMAL).config_hash()


def test_unknown_scenario_name():
    with pytest.raises(FileNotFoundError):
        resolve_path("no_such_scenario")
