"""Stations, vehicles and the physical formulas that bound what they can do.

Energies are kWh, powers kW, times hours, SoC in percent of ``capacity_max``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    ModelError,
    TargetAboveCurrent,
    TargetBelowCurrent,
    ZeroPower,
)

EARTH_RADIUS_KM = 6371.0088


class StationType(str, Enum):
    LEVEL3_DC = "Level3DC"
    LEVEL2_AC = "Level2AC"


class Priority(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"

    @property
    def rank(self) -> int:
        """0 for high, 1 for medium, 2 for low."""
        return _PRIORITY_RANK[self]


_PRIORITY_RANK = {Priority.HIGH: 0, Priority.MEDIUM: 1, Priority.LOW: 2}


@dataclass(frozen=True)
class Location:
    lat: float
    lon: float


def haversine_km(a: Location, b: Location) -> float:
    """Great-circle distance between two points in kilometers."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def destination(origin: Location, bearing_rad: float, distance_km: float) -> Location:
    """Point reached travelling ``distance_km`` from ``origin`` along a great circle."""
    if distance_km == 0:
        return origin
    delta = distance_km / EARTH_RADIUS_KM
    phi1 = math.radians(origin.lat)
    lmb1 = math.radians(origin.lon)
    sin_phi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(bearing_rad)
    phi2 = math.asin(max(-1.0, min(1.0, sin_phi2)))
    lmb2 = lmb1 + math.atan2(
        math.sin(bearing_rad) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * sin_phi2,
    )
    return Location(math.degrees(phi2), (math.degrees(lmb2) + 540.0) % 360.0 - 180.0)


@dataclass(frozen=True)
class ChargingStation:
    id: str
    nominal_voltage: float
    nominal_current: float
    phase_count: int
    rated_power: float
    station_type: StationType = StationType.LEVEL3_DC
    location: Location = Location(0.0, 0.0)

    def __post_init__(self) -> None:
        # zero voltage/current is accepted so out-of-service plugs can be modelled
        if self.nominal_voltage < 0 or self.nominal_current < 0:
            raise ModelError(f"station {self.id}: voltage and current must be non-negative")
        if self.rated_power <= 0:
            raise ModelError(f"station {self.id}: rated_power must be positive")
        if self.phase_count not in (1, 3):
            raise ModelError(f"station {self.id}: phase_count must be 1 or 3")


@dataclass(frozen=True)
class PreferenceSet:
    """Driver preferences: preferred slots with priorities and a distance limit.

    ``max_distance`` of ``None`` defers to the constraint configuration.
    """

    time_prefs: tuple[tuple[int, Priority], ...] = ()
    max_distance: float | None = None

    def __post_init__(self) -> None:
        prefs = tuple((int(s), Priority(p)) for s, p in self.time_prefs)
        slots = [s for s, _ in prefs]
        if len(set(slots)) != len(slots):
            raise ModelError("at most one preference per slot")
        if self.max_distance is not None and self.max_distance < 0:
            raise ModelError("max_distance must be non-negative")
        object.__setattr__(self, "time_prefs", prefs)

    @property
    def ordering(self) -> list[int]:
        return preference_rank(self)

    def nearest_slot(self, slot: int) -> tuple[int, Priority] | None:
        """Preferred slot closest to ``slot`` (earlier slot wins ties), or None."""
        if not self.time_prefs:
            return None
        return min(self.time_prefs, key=lambda sp: (abs(sp[0] - slot), sp[0]))


@dataclass(frozen=True)
class ElectricVehicle:
    id: str
    capacity_max: float
    soc_current: float
    cycles_max: int = 2000
    cycles_used: int = 0
    cycle_margin: int = 0
    location: Location | None = None
    preferences: PreferenceSet = field(default_factory=PreferenceSet)
    model_name: str = ""

    def __post_init__(self) -> None:
        if self.capacity_max <= 0:
            raise ModelError(f"ev {self.id}: capacity_max must be positive")
        if not 0.0 <= self.soc_current <= 100.0:
            raise ModelError(f"ev {self.id}: soc_current must lie in [0, 100]")
        if self.cycles_used > self.cycles_max:
            raise ModelError(f"ev {self.id}: cycles_used exceeds cycles_max")
        if min(self.cycles_used, self.cycles_max, self.cycle_margin) < 0:
            raise ModelError(f"ev {self.id}: cycle counters must be non-negative")

    @property
    def stored_energy(self) -> float:
        return self.soc_current / 100.0 * self.capacity_max


@dataclass(frozen=True)
class OperationTimeConfig:
    power_factor: float = 0.95
    slow_condition_penalty: float = 0.1
    conversion_loss: float = 0.05
    slot_duration: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.power_factor <= 1.0:
            raise ModelError("power_factor must lie in (0, 1]")
        if self.slow_condition_penalty < 0:
            raise ModelError("slow_condition_penalty must be non-negative")
        if not 0.0 <= self.conversion_loss < 1.0:
            raise ModelError("conversion_loss must lie in [0, 1)")
        if self.slot_duration < 0:
            raise ModelError("slot_duration must be non-negative")


def station_power(station: ChargingStation) -> float:
    """Deliverable power in kW, capped at the station rating.

    Three-phase stations use the line-to-line factor sqrt(3).
    """
    phase_factor = math.sqrt(3.0) if station.phase_count == 3 else 1.0
    power = station.nominal_voltage * station.nominal_current * phase_factor / 1000.0
    return min(power, station.rated_power)


def station_energy_per_slot(station: ChargingStation, cfg: OperationTimeConfig) -> float:
    return station_power(station) * cfg.slot_duration


def charge_energy(ev: ElectricVehicle, soc_target: float) -> float:
    """Energy that moves the battery from its current SoC up to ``soc_target``."""
    if soc_target < ev.soc_current:
        raise TargetBelowCurrent(f"target {soc_target}% below current {ev.soc_current}%")
    return (soc_target - ev.soc_current) / 100.0 * ev.capacity_max


def discharge_energy(ev: ElectricVehicle, soc_target: float, cfg: OperationTimeConfig) -> float:
    """Energy delivered to the grid when the battery drops to ``soc_target``."""
    if soc_target > ev.soc_current:
        raise TargetAboveCurrent(f"target {soc_target}% above current {ev.soc_current}%")
    drop = (ev.soc_current - soc_target) / 100.0 * ev.capacity_max
    return (1.0 - cfg.conversion_loss) * drop


def remaining_cycles(ev: ElectricVehicle) -> int:
    left = ev.cycles_max - ev.cycles_used
    return max(0, min(left, ev.cycles_max - ev.cycle_margin))


def operation_time_bounds(
    ev: ElectricVehicle,
    station: ChargingStation,
    soc_target: float,
    cfg: OperationTimeConfig,
) -> tuple[float, float]:
    """(t_min, t_max) in hours to move between the current and target SoC."""
    power = station_power(station)
    if power <= 0:
        raise ZeroPower(f"station {station.id} delivers no power")
    t_min = ev.capacity_max / (power * cfg.power_factor) * abs(soc_target - ev.soc_current) / 100.0
    return t_min, t_min + cfg.slow_condition_penalty


def battery_energy(grid_energy: float, cfg: OperationTimeConfig) -> float:
    """Battery-side energy of a signed cell value (discharge pays the conversion loss)."""
    if grid_energy >= 0:
        return grid_energy
    return -grid_energy / (1.0 - cfg.conversion_loss)


def action_duration(grid_energy: float, station: ChargingStation, cfg: OperationTimeConfig) -> float:
    """Normal-condition duration of one signed cell action at ``station``."""
    power = station_power(station)
    if power <= 0:
        raise ZeroPower(f"station {station.id} delivers no power")
    return battery_energy(grid_energy, cfg) / (power * cfg.power_factor)


def waiting_time(ev: ElectricVehicle, station: ChargingStation, schedule, slot: int,
                 cfg: OperationTimeConfig) -> float:
    """Queue time ahead of ``ev`` at ``station`` when it starts in ``slot``.

    Sums the durations of actions by other vehicles in the uninterrupted run
    of occupied slots immediately before ``slot`` at the same station.
    """
    occupied = {}
    for action in schedule.actions:
        if action.station_id == station.id and action.ev_id != ev.id and action.slot < slot:
            occupied.setdefault(action.slot, []).append(action)
    total = 0.0
    k = slot - 1
    while k in occupied:
        total += sum(action_duration(a.energy, station, cfg) for a in occupied[k])
        k -= 1
    return total


def preference_rank(prefs: PreferenceSet) -> list[int]:
    """Preferred slots ordered high > medium > low, earlier slot first on ties."""
    return [s for s, _ in sorted(prefs.time_prefs, key=lambda sp: (sp[1].rank, sp[0]))]


def ev_station_distance(ev: ElectricVehicle, station: ChargingStation) -> float:
    if ev.location is None:
        return math.inf
    return haversine_km(ev.location, station.location)


# -- JSON interchange ------------------------------------------------------------


def ev_to_dict(ev: ElectricVehicle) -> dict:
    return {
        "id": ev.id,
        "model": ev.model_name,
        "capacity_kwh": ev.capacity_max,
        "soc_pct": ev.soc_current,
        "cycles_max": ev.cycles_max,
        "cycles_used": ev.cycles_used,
        "cycle_margin": ev.cycle_margin,
        "lat": None if ev.location is None else ev.location.lat,
        "lon": None if ev.location is None else ev.location.lon,
        "max_distance_km": ev.preferences.max_distance,
        "time_prefs": [{"slot": s, "priority": p.value} for s, p in ev.preferences.time_prefs],
    }


def ev_from_dict(d: dict) -> ElectricVehicle:
    try:
        location = None
        if d.get("lat") is not None and d.get("lon") is not None:
            location = Location(float(d["lat"]), float(d["lon"]))
        prefs = PreferenceSet(
            time_prefs=tuple((int(p["slot"]), Priority(p["priority"])) for p in d.get("time_prefs", [])),
            max_distance=None if d.get("max_distance_km") is None else float(d["max_distance_km"]),
        )
        return ElectricVehicle(
            id=str(d["id"]),
            model_name=str(d.get("model", "")),
            capacity_max=float(d["capacity_kwh"]),
            soc_current=float(d["soc_pct"]),
            cycles_max=int(d.get("cycles_max", 2000)),
            cycles_used=int(d.get("cycles_used", 0)),
            cycle_margin=int(d.get("cycle_margin", 0)),
            location=location,
            preferences=prefs,
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed fleet entry {d!r}: {exc}") from exc


def station_to_dict(st: ChargingStation) -> dict:
    return {
        "id": st.id,
        "voltage_v": st.nominal_voltage,
        "current_a": st.nominal_current,
        "phases": st.phase_count,
        "rated_power_kw": st.rated_power,
        "type": st.station_type.value,
        "lat": st.location.lat,
        "lon": st.location.lon,
    }


def station_from_dict(d: dict) -> ChargingStation:
    try:
        return ChargingStation(
            id=str(d["id"]),
            nominal_voltage=float(d["voltage_v"]),
            nominal_current=float(d["current_a"]),
            phase_count=int(d["phases"]),
            rated_power=float(d["rated_power_kw"]),
            station_type=StationType(d.get("type", StationType.LEVEL3_DC.value)),
            location=Location(float(d["lat"]), float(d["lon"])),
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed station entry {d!r}: {exc}") from exc


def _read_json_array(path: str | Path) -> list:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ModelError(f"{path}: expected a JSON array")
    return data


def load_fleet(path: str | Path) -> list[ElectricVehicle]:
    return [ev_from_dict(d) for d in _read_json_array(path)]


def load_stations(path: str | Path) -> list[ChargingStation]:
    return [station_from_dict(d) for d in _read_json_array(path)]


def dump_fleet(fleet: Iterable[ElectricVehicle]) -> str:
    return json.dumps([ev_to_dict(ev) for ev in fleet], indent=1)


def dump_stations(stations: Iterable[ChargingStation]) -> str:
    return json.dumps([station_to_dict(st) for st in stations], indent=1)


def with_soc(ev: ElectricVehicle, soc: float) -> ElectricVehicle:
    return replace(ev, soc_current=soc)


def index_by_id(items: Sequence) -> dict:
    return {item.id: item for item in items}
