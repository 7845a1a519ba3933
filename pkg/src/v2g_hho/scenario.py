"""Synthetic fleets, curve ingestion and assembly of complete scenarios."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DuplicateSlot, GapError, LengthMismatch, ModelError, ParseError
from .fleet import (
    ChargingStation,
    ElectricVehicle,
    Location,
    OperationTimeConfig,
    PreferenceSet,
    Priority,
    StationType,
    destination,
    ev_from_dict,
    ev_to_dict,
    haversine_km,
    load_fleet,
    load_stations,
    station_from_dict,
    station_to_dict,
)
from .grid import (
    ConstraintConfig,
    EnergyProfile,
    SlotClass,
    UncertaintyModel,
    balance_profile,
    classify_profile,
)

# Terni desk fleet: model, capacity (kWh), simulated count
DESK_MIX = (("Renault ZOE", 22.0, 35), ("Renault ZOE", 41.0, 45), ("Nissan LEAF", 24.0, 20))

NOMINAL_CYCLES_MAX = 2000
PRIORITY_PROBS = ((Priority.HIGH, 0.5), (Priority.MEDIUM, 0.3), (Priority.LOW, 0.2))

_STREAMS = {"fleet": 0, "locations": 1, "preferences": 2, "optimizer": 3, "scenarios": 4}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named component of a seeded run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STREAMS[name],)))


@dataclass(frozen=True)
class FleetSpec:
    model_mix: tuple[tuple[str, float, int], ...] = DESK_MIX
    soc_beta_alpha: float = 2.0
    soc_beta_beta: float = 5.0
    soc_low: float = 20.0
    soc_high: float = 80.0
    cycles_weibull_shape: float = 2.0
    cycles_weibull_scale: float = 1000.0
    placement_radius: float = 2.0
    max_distance_km: float | None = None

    def __post_init__(self) -> None:
        if any(count < 0 for _, _, count in self.model_mix):
            raise ModelError("model counts must be non-negative")
        if not self.soc_low < self.soc_high:
            raise ModelError("soc_low must be below soc_high")
        if min(self.soc_beta_alpha, self.soc_beta_beta, self.cycles_weibull_shape, self.cycles_weibull_scale) <= 0:
            raise ModelError("distribution parameters must be positive")


@dataclass(frozen=True)
class Scenario:
    fleet: tuple[ElectricVehicle, ...]
    stations: tuple[ChargingStation, ...]
    generation: EnergyProfile
    consumption: EnergyProfile
    balance: EnergyProfile
    window: tuple[int, int]
    constraint_config: ConstraintConfig = field(default_factory=ConstraintConfig)
    operation_config: OperationTimeConfig = field(default_factory=OperationTimeConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fleet", tuple(self.fleet))
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "window", (int(self.window[0]), int(self.window[1])))
        n = len(self.balance)
        if not (len(self.generation) == len(self.consumption) == n):
            raise LengthMismatch("scenario profiles differ in length")
        if not 0 <= self.window[0] <= self.window[1] <= n:
            raise ModelError(f"window {self.window} outside the {n}-slot profile")

    @property
    def n_slots(self) -> int:
        return len(self.balance)

    @property
    def window_slots(self) -> range:
        return range(*self.window)

    def slot_classes(self) -> list[SlotClass]:
        return classify_profile(self.balance, self.constraint_config)


@dataclass(frozen=True)
class ScenarioConfig:
    constraint: ConstraintConfig = field(default_factory=ConstraintConfig)
    operation: OperationTimeConfig = field(default_factory=OperationTimeConfig)
    uncertainty: UncertaintyModel | None = None
    window: tuple[int, int] | None = None


# -- fleet synthesis -------------------------------------------------------------


def gen_fleet(spec: FleetSpec, rng: np.random.Generator) -> list[ElectricVehicle]:
    """Vehicles per model row with Beta-distributed SoC and Weibull remaining cycles.

    Vehicles come back unplaced (``location=None``) and without time
    preferences; see :func:`gen_locations` and :func:`gen_time_preferences`.
    """
    fleet = []
    span = spec.soc_high - spec.soc_low
    for model, capacity, count in spec.model_mix:
        socs = spec.soc_low + span * rng.beta(spec.soc_beta_alpha, spec.soc_beta_beta, size=count)
        left = np.rint(spec.cycles_weibull_scale * rng.weibull(spec.cycles_weibull_shape, size=count))
        for soc, remaining in zip(socs, left):
            remaining = int(min(remaining, NOMINAL_CYCLES_MAX))
            fleet.append(ElectricVehicle(
                id=f"EV{len(fleet) + 1:03d}",
                model_name=model,
                capacity_max=float(capacity),
                soc_current=float(soc),
                cycles_max=NOMINAL_CYCLES_MAX,
                cycles_used=NOMINAL_CYCLES_MAX - remaining,
                preferences=PreferenceSet(max_distance=spec.max_distance_km),
            ))
    return fleet


def gen_locations(
    stations: Sequence[ChargingStation],
    radius_km: float,
    rng: np.random.Generator,
    count: int,
    max_attempts: int = 100,
) -> list[Location]:
    """``count`` points, each uniform over the disc of ``radius_km`` around a random station.

    A draw landing within 1e-6 degrees of an earlier point is redrawn; after
    ``max_attempts`` failures the point is nudged north in 2e-6 degree steps.
    """
    if not stations:
        raise ModelError("need at least one station")
    if radius_km < 0:
        raise ModelError("radius must be non-negative")
    taken: set[tuple[int, int]] = set()
    out: list[Location] = []

    def key(loc: Location) -> tuple[int, int]:
        return (round(loc.lat * 1e6), round(loc.lon * 1e6))

    def clashes(loc: Location) -> bool:
        ki, kj = key(loc)
        return any((ki + di, kj + dj) in taken for di in (-1, 0, 1) for dj in (-1, 0, 1))

    for _ in range(count):
        for _attempt in range(max_attempts):
            centre = stations[int(rng.integers(len(stations)))].location
            dist = radius_km * math.sqrt(rng.random())
            loc = destination(centre, 2.0 * math.pi * rng.random(), dist)
            if not clashes(loc):
                break
        else:
            step = 1
            while clashes(loc):
                loc = Location(loc.lat + 2e-6 * step, loc.lon)
                step += 1
        taken.add(key(loc))
        out.append(loc)
    return out


def place_fleet(fleet, stations, radius_km, rng) -> list[ElectricVehicle]:
    locs = gen_locations(stations, radius_km, rng, len(fleet))
    return [replace(ev, location=loc) for ev, loc in zip(fleet, locs)]


@dataclass(frozen=True)
class UniformPreferences:
    pass


@dataclass(frozen=True)
class OffPeakBias:
    """Move ``fraction`` of drivers' preferred slots into ``slots``."""

    fraction: float = 0.3
    slots: tuple[int, ...] = (0, 1, 2, 3, 4, 5)

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ModelError("fraction must lie in [0, 1]")
        if not self.slots:
            raise ModelError("need at least one off-peak slot")


def gen_time_preferences(
    fleet: Sequence[ElectricVehicle],
    slot_count: int,
    strategy: UniformPreferences | OffPeakBias | None = None,
    rng: np.random.Generator | None = None,
) -> list[ElectricVehicle]:
    if slot_count < 1:
        raise ModelError("slot_count must be at least 1")
    rng = rng or np.random.default_rng()
    strategy = strategy or UniformPreferences()
    n = len(fleet)
    slots = rng.integers(slot_count, size=n)
    if isinstance(strategy, OffPeakBias) and n:
        off = np.array([s for s in strategy.slots if 0 <= s < slot_count])
        if off.size:
            moved = rng.choice(n, size=int(round(strategy.fraction * n)), replace=False)
            slots[moved] = off[rng.integers(off.size, size=moved.size)]
    levels = [p for p, _ in PRIORITY_PROBS]
    picks = rng.choice(len(levels), size=n, p=[w for _, w in PRIORITY_PROBS])
    return [
        replace(ev, preferences=PreferenceSet(((int(s), levels[k]),), ev.preferences.max_distance))
        for ev, s, k in zip(fleet, slots, picks)
    ]


# -- curves ----------------------------------------------------------------------

CURVE_HEADER = ["slot", "kwh"]


def curve_to_csv(profile: EnergyProfile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for t, v in enumerate(profile.values):
        writer.writerow([t, repr(float(v))])
    return buf.getvalue()


def curve_from_csv(text: str, slot_duration: float = 1.0) -> EnergyProfile:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CURVE_HEADER:
        raise ParseError("curve header must be 'slot,kwh'")
    values: dict[int, float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"line {lineno}: expected 2 fields")
        try:
            slot, kwh = int(row[0]), float(row[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if not math.isfinite(kwh):
            raise ParseError(f"line {lineno}: non-finite value")
        if slot in values:
            raise DuplicateSlot(f"line {lineno}: slot {slot} repeated")
        values[slot] = kwh
    if not values:
        raise ParseError("curve has no rows")
    missing = sorted(set(range(max(values) + 1)) - set(values))
    if missing or min(values) < 0:
        raise GapError(f"curve slots not contiguous from 0 (missing {missing[:5]})")
    return EnergyProfile([values[t] for t in range(len(values))], slot_duration)


def load_curve(path: str | Path, slot_duration: float = 1.0) -> EnergyProfile:
    return curve_from_csv(Path(path).read_text(encoding="utf-8"), slot_duration)


def save_curve(profile: EnergyProfile, path: str | Path) -> None:
    Path(path).write_text(curve_to_csv(profile), encoding="utf-8")


# -- assembly --------------------------------------------------------------------


def service_window(balance: EnergyProfile, cfg: ConstraintConfig,
                   bounds: tuple[int, int] | None = None) -> tuple[int, int]:
    """Longest run of non-Balanced slots inside ``bounds`` (earliest run on ties).

    Returns ``(start, stop)``; an all-Balanced profile yields an empty window.
    """
    lo, hi = bounds if bounds is not None else (0, len(balance))
    lo, hi = max(0, lo), min(len(balance), hi)
    classes = classify_profile(balance, cfg)
    best = (lo, lo)
    t = lo
    while t < hi:
        if classes[t] is SlotClass.BALANCED:
            t += 1
            continue
        start = t
        while t < hi and classes[t] is not SlotClass.BALANCED:
            t += 1
        if t - start > best[1] - best[0]:
            best = (start, t)
    return best


def assemble_scenario(fleet, stations, generation, consumption, config: ScenarioConfig | None = None) -> Scenario:
    config = config or ScenarioConfig()
    if generation.slot_duration != config.operation.slot_duration:
        generation = EnergyProfile(generation.values, config.operation.slot_duration, generation.window_start)
        consumption = EnergyProfile(consumption.values, config.operation.slot_duration, consumption.window_start)
    balance = balance_profile(generation, consumption, config.uncertainty)
    window = service_window(balance, config.constraint, config.window)
    return Scenario(tuple(fleet), tuple(stations), generation, consumption, balance, window,
                    config.constraint, config.operation)


def build_scenario(fleet_path, stations_path, gen_path, cons_path, config: ScenarioConfig | None = None) -> Scenario:
    config = config or ScenarioConfig()
    gen = load_curve(gen_path, config.operation.slot_duration)
    cons = load_curve(cons_path, config.operation.slot_duration)
    return assemble_scenario(load_fleet(fleet_path), load_stations(stations_path), gen, cons, config)


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "fleet": [ev_to_dict(ev) for ev in sc.fleet],
        "stations": [station_to_dict(st) for st in sc.stations],
        "slot_duration": sc.balance.slot_duration,
        "generation": [float(v) for v in sc.generation.values],
        "consumption": [float(v) for v in sc.consumption.values],
        "balance": [float(v) for v in sc.balance.values],
        "window": list(sc.window),
        "constraint_config": asdict(sc.constraint_config),
        "operation_config": asdict(sc.operation_config),
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        dt = float(d["slot_duration"])
        return Scenario(
            fleet=tuple(ev_from_dict(e) for e in d["fleet"]),
            stations=tuple(station_from_dict(s) for s in d["stations"]),
            generation=EnergyProfile(d["generation"], dt),
            consumption=EnergyProfile(d["consumption"], dt),
            balance=EnergyProfile(d["balance"], dt),
            window=tuple(d["window"]),
            constraint_config=ConstraintConfig(**d["constraint_config"]),
            operation_config=OperationTimeConfig(**d["operation_config"]),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed scenario bundle: {exc}") from exc


def save_bundle(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=1), encoding="utf-8")


def load_bundle(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(data)


# -- built-in Terni-like inputs --------------------------------------------------

TERNI = Location(42.5636, 12.6427)
_STATION_OFFSETS = ((0.0, 0.0), (0.010, 0.012), (-0.008, 0.015), (0.012, -0.010), (-0.011, -0.013))

# hourly kWh; PV after 15% system and 4% inverter losses on a 100 kW array
PV_SUMMER = (0, 0, 0, 0, 0, 2, 12, 30, 48, 63, 75, 81, 81, 75, 63, 48, 30, 12, 2, 0, 0, 0, 0, 0)
HOUSEHOLD_LOAD = (22, 20, 19, 18, 18, 19, 18, 22, 24, 24, 23, 22, 23, 25, 30, 50, 62, 70, 74, 70, 60, 45, 32, 25)


def terni_stations(count: int = 5) -> list[ChargingStation]:
    """SpotLink EVO-like 400 V / 32 A three-phase 22 kW stations around Terni."""
    out = []
    for k in range(count):
        dlat, dlon = _STATION_OFFSETS[k % len(_STATION_OFFSETS)]
        ring = k // len(_STATION_OFFSETS)
        loc = Location(TERNI.lat + dlat * (1 + ring), TERNI.lon + dlon * (1 + ring))
        out.append(ChargingStation(f"CS{k + 1}", 400.0, 32.0, 3, 22.0, StationType.LEVEL3_DC, loc))
    return out


def service_curves(service: str = "renewable", import_cap: float | None = None) -> tuple[EnergyProfile, EnergyProfile]:
    """(supply, consumption) curves for one balancing service.

    Supply is PV plus grid imports. For ``renewable`` imports cover every
    shortfall, leaving a midday surplus only; for ``congestion`` imports are
    capped (25 kWh by default), leaving an evening deficit. ``daily`` has no
    imports at all, so the whole day alternates between a night deficit, a
    midday surplus and an evening deficit.
    """
    pv = np.array(PV_SUMMER, dtype=float)
    load = np.array(HOUSEHOLD_LOAD, dtype=float)
    shortfall = np.maximum(load - pv, 0.0)
    if service == "renewable":
        imports = shortfall
    elif service == "congestion":
        cap = 25.0 if import_cap is None else import_cap
        imports = np.minimum(shortfall, cap)
        pv = np.minimum(pv, load)
    elif service == "daily":
        imports = np.zeros_like(pv)
    else:
        raise ModelError(f"unknown service {service!r}")
    return EnergyProfile(pv + imports), EnergyProfile(load)


def synthetic_fleet(spec: FleetSpec, stations, slot_count: int, seed: int,
                    strategy: UniformPreferences | OffPeakBias | None = None) -> list[ElectricVehicle]:
    fleet = gen_fleet(spec, substream(seed, "fleet"))
    fleet = place_fleet(fleet, stations, spec.placement_radius, substream(seed, "locations"))
    return gen_time_preferences(fleet, slot_count, strategy, substream(seed, "preferences"))


def desk_scenario(seed: int = 0, n_stations: int = 5, service: str = "renewable",
                  spec: FleetSpec | None = None, config: ScenarioConfig | None = None) -> Scenario:
    """Desk fleet mix around Terni stations with the built-in service curves."""
    stations = terni_stations(n_stations)
    gen, cons = service_curves(service)
    fleet = synthetic_fleet(spec or FleetSpec(), stations, len(gen), seed)
    return assemble_scenario(fleet, stations, gen, cons, config)


def within_radius(loc: Location, stations: Sequence[ChargingStation], radius_km: float) -> bool:
    return any(haversine_km(loc, st.location) <= radius_km + 1e-9 for st in stations)
