import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from v2g_hho.errors import DuplicateSlot, GapError, LengthMismatch, ModelError, ParseError
from v2g_hho.fleet import ChargingStation, Location, haversine_km, remaining_cycles
from v2g_hho.grid import ConstraintConfig, EnergyProfile
from v2g_hho.scenario import (
    DESK_MIX,
    FleetSpec,
    OffPeakBias,
    Scenario,
    ScenarioConfig,
    UniformPreferences,
    assemble_scenario,
    curve_from_csv,
    curve_to_csv,
    desk_scenario,
    gen_fleet,
    gen_locations,
    gen_time_preferences,
    load_bundle,
    load_curve,
    save_bundle,
    save_curve,
    service_curves,
    service_window,
    substream,
    synthetic_fleet,
    terni_stations,
    within_radius,
)

STATION = ChargingStation("CS1", 400.0, 32.0, 3, 22.0, location=Location(42.5636, 12.6427))


def test_desk_mix_counts():
    fleet = gen_fleet(FleetSpec(), np.random.default_rng(0))
    assert len(fleet) == 100
    caps = [ev.capacity_max for ev in fleet]
    assert (caps.count(22.0), caps.count(41.0), caps.count(24.0)) == (35, 45, 20)
    assert [ev.id for ev in fleet[:2]] == ["EV001", "EV002"]


def test_zero_count_spec():
    spec = FleetSpec(model_mix=(("none", 22.0, 0),))
    assert gen_fleet(spec, np.random.default_rng(0)) == []


def test_fleet_draw_ranges():
    spec = FleetSpec(model_mix=(("m", 30.0, 5000),))
    fleet = gen_fleet(spec, np.random.default_rng(3))
    socs = np.array([ev.soc_current for ev in fleet])
    assert np.all((socs > 20.0) & (socs < 80.0))
    assert all(remaining_cycles(ev) >= 0 for ev in fleet)
    assert all(ev.location is None and ev.preferences.time_prefs == () for ev in fleet)


def test_fleet_spec_validation():
    with pytest.raises(ModelError):
        FleetSpec(soc_low=80.0, soc_high=20.0)
    with pytest.raises(ModelError):
        FleetSpec(model_mix=(("m", 22.0, -1),))
    with pytest.raises(ModelError):
        FleetSpec(soc_beta_alpha=0.0)


def test_generation_deterministic_per_seed():
    stations = terni_stations(5)
    a = synthetic_fleet(FleetSpec(), stations, 24, seed=11)
    b = synthetic_fleet(FleetSpec(), stations, 24, seed=11)
    c = synthetic_fleet(FleetSpec(), stations, 24, seed=12)
    assert a == b and a != c


def test_substreams_independent():
    assert substream(1, "fleet").random() != substream(1, "locations").random()
    assert substream(1, "fleet").random() == substream(1, "fleet").random()
    with pytest.raises(KeyError):
        substream(1, "nope")


# -- locations ---------------------------------------------------------------------


def test_zero_radius_at_station():
    locs = gen_locations([STATION], 0.0, np.random.default_rng(0), 3, max_attempts=2)
    assert locs[0] == STATION.location
    # later points are only jittered a few micro-degrees away
    assert all(haversine_km(loc, STATION.location) < 0.01 for loc in locs)
    assert len(set(locs)) == 3


def test_disc_uniformity():
    rng = np.random.default_rng(5)
    locs = gen_locations([STATION], 2.0, rng, 10_000)
    c = STATION.location
    d = np.array([haversine_km(c, loc) for loc in locs])
    assert d.max() <= 2.0 + 1e-9
    # uniform over the disc: (d/R)^2 is uniform on [0, 1] and so is the bearing
    radial = np.histogram((d / 2.0) ** 2, bins=10, range=(0, 1))[0]
    bearing = np.arctan2([l.lon - c.lon for l in locs], [(l.lat - c.lat) / math.cos(math.radians(c.lat))
                                                          for l in locs])
    angular = np.histogram(bearing, bins=12, range=(-math.pi, math.pi))[0]
    assert stats.chisquare(radial).pvalue > 0.01
    assert stats.chisquare(angular).pvalue > 0.01


def test_two_stations_within_radius():
    stations = [STATION, ChargingStation("CS2", 400.0, 32.0, 3, 22.0, location=Location(42.70, 12.80))]
    locs = gen_locations(stations, 1.5, np.random.default_rng(2), 500)
    assert all(within_radius(loc, stations, 1.5) for loc in locs)
    assert any(haversine_km(loc, stations[1].location) <= 1.5 for loc in locs)


def test_locations_errors():
    with pytest.raises(ModelError):
        gen_locations([], 1.0, np.random.default_rng(0), 1)
    with pytest.raises(ModelError):
        gen_locations([STATION], -1.0, np.random.default_rng(0), 1)


# -- time preferences --------------------------------------------------------------


def _bare(n):
    return gen_fleet(FleetSpec(model_mix=(("m", 22.0, n),)), np.random.default_rng(0))


def test_single_slot_preferences():
    out = gen_time_preferences(_bare(20), 1, rng=np.random.default_rng(0))
    assert {ev.preferences.time_prefs[0][0] for ev in out} == {0}


def test_uniform_preference_frequencies():
    out = gen_time_preferences(_bare(100_000), 24, UniformPreferences(), np.random.default_rng(1))
    freq = np.bincount([ev.preferences.time_prefs[0][0] for ev in out], minlength=24) / 100_000
    assert np.all(np.abs(freq - 1 / 24) <= 0.005)


def test_off_peak_full_reassignment():
    out = gen_time_preferences(_bare(300), 24, OffPeakBias(fraction=1.0, slots=tuple(range(6))),
                               np.random.default_rng(2))
    assert all(ev.preferences.time_prefs[0][0] in range(6) for ev in out)


def test_off_peak_partial_share():
    out = gen_time_preferences(_bare(20_000), 24, OffPeakBias(), np.random.default_rng(3))
    share = np.mean([ev.preferences.time_prefs[0][0] < 6 for ev in out])
    # 30% moved plus the uniform share of the remaining 70%
    assert share == pytest.approx(0.3 + 0.7 * 6 / 24, abs=0.01)


def test_preferences_errors():
    with pytest.raises(ModelError):
        gen_time_preferences(_bare(1), 0)
    with pytest.raises(ModelError):
        OffPeakBias(fraction=1.5)


# -- curves ------------------------------------------------------------------------


def test_curve_24_rows(tmp_path):
    path = tmp_path / "gen.csv"
    save_curve(EnergyProfile(np.arange(24.0)), path)
    assert len(load_curve(path)) == 24


def test_curve_gap_and_duplicate():
    with pytest.raises(GapError):
        curve_from_csv("slot,kwh\n0,1\n1,2\n3,4\n")
    with pytest.raises(DuplicateSlot):
        curve_from_csv("slot,kwh\n0,1\n0,2\n")
    with pytest.raises(ParseError):
        curve_from_csv("t,v\n0,1\n")
    with pytest.raises(ParseError):
        curve_from_csv("slot,kwh\n0,abc\n")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=48))
def test_curve_round_trip_exact(values):
    back = curve_from_csv(curve_to_csv(EnergyProfile(values)))
    assert np.array_equal(back.values, np.array(values, dtype=float))


# -- service window and assembly ---------------------------------------------------


def test_balanced_curves_give_empty_window():
    p = EnergyProfile(np.full(24, 10.0))
    sc = assemble_scenario([], [STATION], p, p)
    assert sc.window[0] == sc.window[1]


def test_renewable_midday_window():
    gen, cons = service_curves("renewable")
    sc = assemble_scenario([], [STATION], gen, cons)
    assert sc.window == (7, 15)
    assert sc.balance.values[7:15].tolist() == [8.0, 24.0, 39.0, 52.0, 59.0, 58.0, 50.0, 33.0]
    assert np.all(sc.balance.values[:7] == 0) and np.all(sc.balance.values[15:] == 0)


def test_congestion_evening_window():
    gen, cons = service_curves("congestion")
    sc = assemble_scenario([], [STATION], gen, cons)
    assert sc.window == (16, 23)
    assert np.all(sc.balance.values[16:23] < 0)


def test_daily_service_covers_whole_day():
    gen, cons = service_curves("daily")
    sc = assemble_scenario([], [STATION], gen, cons)
    assert sc.window == (0, 24)
    assert {c.sign for c in sc.slot_classes()} == {-1, 1}
    with pytest.raises(ModelError):
        service_curves("nope")


def test_window_bounds_and_ties():
    b = EnergyProfile([5.0, 5.0, 0.0, -5.0, -5.0, 0.0, 5.0])
    cfg = ConstraintConfig()
    assert service_window(b, cfg) == (0, 2)
    assert service_window(b, cfg, (2, 7)) == (3, 5)
    assert service_window(b, cfg, (5, 7)) == (6, 7)


def test_assemble_length_mismatch():
    with pytest.raises(LengthMismatch):
        assemble_scenario([], [STATION], EnergyProfile([1.0, 2.0]), EnergyProfile([1.0]))


def test_scenario_window_validated():
    p = EnergyProfile([1.0, 2.0])
    with pytest.raises(ModelError):
        Scenario((), (STATION,), p, p, p, (0, 3))


def test_bundle_round_trip(tmp_path):
    sc = desk_scenario(3, config=ScenarioConfig(window=(8, 12)))
    assert sc.window == (8, 12)
    save_bundle(sc, tmp_path / "s.json")
    back = load_bundle(tmp_path / "s.json")
    assert back == sc
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ParseError):
        load_bundle(tmp_path / "bad.json")


def test_desk_scenario_shape():
    sc = desk_scenario(0)
    assert len(sc.fleet) == sum(c for _, _, c in DESK_MIX) == 100
    assert len(sc.stations) == 5 and sc.window == (7, 15)
    assert all(within_radius(ev.location, sc.stations, 2.0) for ev in sc.fleet)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_socs_inside_band_for_any_seed(seed):
    fleet = gen_fleet(FleetSpec(model_mix=(("m", 22.0, 200),)), np.random.default_rng(seed))
    assert all(20.0 < ev.soc_current < 80.0 for ev in fleet)
