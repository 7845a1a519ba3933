"""Feasibility checks for schedule matrices and a deterministic repair pass."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import UnknownEntity
from .fleet import (
    ChargingStation,
    ElectricVehicle,
    OperationTimeConfig,
    battery_energy,
    ev_station_distance,
    remaining_cycles,
    station_energy_per_slot,
    station_power,
)
from .grid import Action, ConstraintConfig, EnergyProfile, ScheduleMatrix

TOL = 1e-7


class ViolationKind(str, Enum):
    CELL_CONFLICT = "CellConflict"
    EV_DOUBLE_BOOKED = "EVDoubleBooked"
    CHARGE_DISCHARGE_SAME_SLOT = "ChargeDischargeSameSlot"
    CYCLE_EXHAUSTED = "CycleExhausted"
    DISTANCE_EXCEEDED = "DistanceExceeded"
    ENERGY_OVER_CELL_BOUND = "EnergyOverCellBound"
    TIME_OVER_SLOT = "TimeOverSlot"
    STORAGE_OVERSHOOT = "StorageOvershoot"
    SOC_OUT_OF_RANGE = "SoCOutOfRange"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    station_id: str | None
    slot: int | None
    ev_id: str | None
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def violations_to_json(violations: Sequence[Violation]) -> str:
    return json.dumps([v.to_dict() for v in violations], indent=1)


def max_distance_for(ev: ElectricVehicle, cfg: ConstraintConfig) -> float:
    md = ev.preferences.max_distance
    return cfg.default_max_distance if md is None else md


def time_bounded_energy(station: ChargingStation, op: OperationTimeConfig, discharge: bool) -> float:
    """Largest grid-side cell magnitude whose worst-case duration fits in a slot."""
    usable = max(0.0, op.slot_duration - op.slow_condition_penalty)
    battery = usable * station_power(station) * op.power_factor
    return battery * (1.0 - op.conversion_loss) if discharge else battery


def cell_bound(station: ChargingStation, op: OperationTimeConfig, discharge: bool) -> float:
    return min(station_energy_per_slot(station, op), time_bounded_energy(station, op, discharge))


def overshoot_quantum(stations: Sequence[ChargingStation], op: OperationTimeConfig) -> float:
    return max((station_energy_per_slot(s, op) for s in stations), default=0.0)


def _resolve(schedule, fleet, stations, balance):
    ev_by_id = {ev.id: ev for ev in fleet}
    st_by_id = {st.id: st for st in stations}
    for sid in schedule.station_ids:
        if sid not in st_by_id:
            raise UnknownEntity(f"unknown station {sid!r}")
    for a in schedule.actions:
        if a.station_id not in st_by_id or a.station_id not in schedule.station_ids:
            raise UnknownEntity(f"unknown station {a.station_id!r}")
        if a.ev_id not in ev_by_id:
            raise UnknownEntity(f"unknown ev {a.ev_id!r}")
        if not 0 <= a.slot < min(schedule.n_slots, len(balance)):
            raise UnknownEntity(f"slot {a.slot} outside the schedule window")
    return ev_by_id, st_by_id


def validate_schedule(
    schedule: ScheduleMatrix,
    fleet: Sequence[ElectricVehicle],
    stations: Sequence[ChargingStation],
    balance: EnergyProfile,
    cfg: ConstraintConfig,
    op: OperationTimeConfig | None = None,
) -> list[Violation]:
    """Every constraint violation in ``schedule``; an empty list means feasible."""
    op = op or OperationTimeConfig(slot_duration=balance.slot_duration)
    ev_by_id, st_by_id = _resolve(schedule, fleet, stations, balance)
    out: list[Violation] = []

    for (sid, slot), acts in sorted(schedule.cells().items(), key=lambda kv: (schedule.row(kv[0][0]), kv[0][1])):
        if len(acts) > 1:
            ids = ",".join(a.ev_id for a in acts)
            out.append(Violation(ViolationKind.CELL_CONFLICT, sid, slot, None, f"vehicles {ids} share one cell"))

    by_ev_slot: dict[tuple[str, int], list[Action]] = {}
    for a in schedule.actions:
        by_ev_slot.setdefault((a.ev_id, a.slot), []).append(a)
    for (eid, slot), acts in sorted(by_ev_slot.items()):
        if len({a.station_id for a in acts}) > 1 or len(acts) > 1:
            out.append(Violation(ViolationKind.EV_DOUBLE_BOOKED, None, slot, eid, f"{len(acts)} cells in one slot"))
        if any(a.energy > 0 for a in acts) and any(a.energy < 0 for a in acts):
            out.append(Violation(ViolationKind.CHARGE_DISCHARGE_SAME_SLOT, None, slot, eid, "charge and discharge"))

    for a in schedule.sorted().actions:
        ev, st = ev_by_id[a.ev_id], st_by_id[a.station_id]
        dist = ev_station_distance(ev, st)
        limit = max_distance_for(ev, cfg)
        if dist > limit + TOL:
            out.append(Violation(ViolationKind.DISTANCE_EXCEEDED, a.station_id, a.slot, a.ev_id,
                                 f"{dist:.3f} km > {limit:.3f} km"))
        if a.energy < 0 and remaining_cycles(ev) < cfg.min_cycles:
            out.append(Violation(ViolationKind.CYCLE_EXHAUSTED, a.station_id, a.slot, a.ev_id,
                                 f"{remaining_cycles(ev)} cycles left < {cfg.min_cycles}"))
        ub = station_energy_per_slot(st, op)
        if abs(a.energy) > ub + TOL:
            out.append(Violation(ViolationKind.ENERGY_OVER_CELL_BOUND, a.station_id, a.slot, a.ev_id,
                                 f"|{a.energy:.4f}| kWh > {ub:.4f} kWh"))
        if a.energy != 0:
            power = station_power(st)
            t_max = (battery_energy(a.energy, op) / (power * op.power_factor) if power > 0 else np.inf) \
                + op.slow_condition_penalty
            if t_max > op.slot_duration + TOL:
                out.append(Violation(ViolationKind.TIME_OVER_SLOT, a.station_id, a.slot, a.ev_id,
                                     f"t_max {t_max:.4f} h > {op.slot_duration} h"))

    storage = np.zeros(len(balance))
    for a in schedule.actions:
        storage[a.slot] += a.energy
    quantum = overshoot_quantum(stations, op)
    for t in range(len(balance)):
        s, b = storage[t], balance.values[t]
        if abs(s) <= TOL:
            continue
        if np.sign(s) != np.sign(b) or abs(s) > abs(b) + quantum + TOL:
            out.append(Violation(ViolationKind.STORAGE_OVERSHOOT, None, t, None,
                                 f"storage {s:.4f} kWh vs balance {b:.4f} kWh"))

    for eid, slots in _trajectories(schedule).items():
        ev = ev_by_id[eid]
        batt = ev.stored_energy
        for slot in sorted(slots):
            batt += sum(_battery_delta(a.energy, op) for a in slots[slot])
            soc = batt / ev.capacity_max * 100.0
            if soc < -TOL or soc > 100.0 + TOL:
                out.append(Violation(ViolationKind.SOC_OUT_OF_RANGE, slots[slot][0].station_id, slot, eid,
                                     f"SoC reaches {soc:.3f}%"))
    return out


def _battery_delta(grid_energy: float, op: OperationTimeConfig) -> float:
    return grid_energy if grid_energy >= 0 else -battery_energy(grid_energy, op)


def _trajectories(schedule: ScheduleMatrix) -> dict[str, dict[int, list[Action]]]:
    out: dict[str, dict[int, list[Action]]] = {}
    for a in schedule.actions:
        out.setdefault(a.ev_id, {}).setdefault(a.slot, []).append(a)
    return out


def repair_schedule(
    schedule: ScheduleMatrix,
    fleet: Sequence[ElectricVehicle],
    stations: Sequence[ChargingStation],
    balance: EnergyProfile,
    cfg: ConstraintConfig,
    op: OperationTimeConfig | None = None,
    rng: np.random.Generator | None = None,
    max_passes: int = 25,
) -> ScheduleMatrix:
    """Shrink or drop actions until ``schedule`` is feasible.

    Feasible inputs come back unchanged. Every rule is deterministic, so
    ``rng`` is accepted for interface symmetry but never drawn from.
    """
    op = op or OperationTimeConfig(slot_duration=balance.slot_duration)
    ev_by_id = {ev.id: ev for ev in fleet}
    st_by_id = {st.id: st for st in stations}
    ev_order = {ev.id: i for i, ev in enumerate(fleet)}
    n_slots = min(schedule.n_slots, len(balance))

    acts = [a for a in schedule.actions
            if a.ev_id in ev_by_id and a.station_id in st_by_id
            and a.station_id in schedule.station_ids and 0 <= a.slot < n_slots]
    station_ids = tuple(s for s in schedule.station_ids if s in st_by_id)
    current = ScheduleMatrix(station_ids, schedule.n_slots, tuple(acts))
    if len(acts) == len(schedule.actions) and station_ids == schedule.station_ids:
        if not validate_schedule(schedule, fleet, stations, balance, cfg, op):
            return schedule
    row = {sid: i for i, sid in enumerate(station_ids)}

    for _ in range(max_passes):
        if not validate_schedule(current, fleet, stations, balance, cfg, op):
            return current
        acts = list(current.actions)
        acts = _keep_one(acts, key=lambda a: (a.station_id, a.slot), tie=lambda a: ev_order[a.ev_id])
        acts = _keep_one(acts, key=lambda a: (a.ev_id, a.slot), tie=lambda a: row[a.station_id])
        acts = [_clip_action(a, ev_by_id[a.ev_id], st_by_id[a.station_id], cfg, op) for a in acts]
        acts = [a for a in acts if a is not None]
        acts = _repair_columns(acts, balance, overshoot_quantum(stations, op), row)
        acts = _repair_soc(acts, ev_by_id, op)
        current = ScheduleMatrix(station_ids, schedule.n_slots, tuple(acts))
    if not validate_schedule(current, fleet, stations, balance, cfg, op):
        return current
    return ScheduleMatrix.empty(station_ids, schedule.n_slots)


def _keep_one(acts, key, tie):
    """Keep the largest-|energy| action per group, ``tie`` breaking equal magnitudes."""
    best: dict = {}
    for i, a in enumerate(acts):
        k = key(a)
        cur = best.get(k)
        if cur is None or (abs(a.energy), -tie(a)) > (abs(acts[cur].energy), -tie(acts[cur])):
            best[k] = i
    keep = set(best.values())
    return [a for i, a in enumerate(acts) if i in keep]


def _clip_action(a, ev, st, cfg, op):
    if ev_station_distance(ev, st) > max_distance_for(ev, cfg) + TOL:
        return None
    if a.energy < 0 and remaining_cycles(ev) < cfg.min_cycles:
        return None
    bound = cell_bound(st, op, discharge=a.energy < 0)
    mag = min(abs(a.energy), bound)
    if mag <= TOL:
        return None
    return a if mag == abs(a.energy) else replace(a, energy=float(np.copysign(mag, a.energy)))


def _repair_columns(acts, balance, quantum, row):
    by_slot: dict[int, list[Action]] = {}
    for a in acts:
        by_slot.setdefault(a.slot, []).append(a)
    out = []
    for t, col in sorted(by_slot.items()):
        b = balance.values[t]
        s = sum(a.energy for a in col)
        if abs(s) > TOL and (np.sign(s) != np.sign(b) or abs(s) > abs(b) + quantum + TOL):
            col = [a for a in col if np.sign(a.energy) == np.sign(b)]
            allowance = abs(b) + quantum
            kept = []
            for a in sorted(col, key=lambda a: (-abs(a.energy), row[a.station_id])):
                mag = min(abs(a.energy), allowance)
                if mag <= TOL:
                    continue
                allowance -= mag
                kept.append(a if mag == abs(a.energy) else replace(a, energy=float(np.copysign(mag, a.energy))))
            col = kept
        out.extend(col)
    return out


def _repair_soc(acts, ev_by_id, op):
    by_ev: dict[str, list[Action]] = {}
    for a in acts:
        by_ev.setdefault(a.ev_id, []).append(a)
    out = []
    for eid, evacts in by_ev.items():
        ev = ev_by_id[eid]
        batt = ev.stored_energy
        for a in sorted(evacts, key=lambda a: a.slot):
            if a.energy >= 0:
                mag = min(a.energy, ev.capacity_max - batt)
            else:
                mag = min(-a.energy, (1.0 - op.conversion_loss) * batt)
            if mag <= TOL:
                continue
            new = a if mag == abs(a.energy) else replace(a, energy=float(np.copysign(mag, a.energy)))
            batt += _battery_delta(new.energy, op)
            out.append(new)
    return out
