"""Front-quality indicators and fleet KPIs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConstantInput,
    DimensionMismatch,
    EmptyFront,
    LengthMismatch,
    TooFewPoints,
    ZeroPeak,
)
from .feasibility import max_distance_for
from .fleet import ChargingStation, ElectricVehicle, ev_station_distance
from .grid import ConstraintConfig, EnergyProfile, ScheduleMatrix

ITALY_MIX_G_PER_KWH = 363.0
TIME_BUCKETS = ("fully_met", "1h", "2h", "more_than_2h")
DISTANCE_BUCKETS = ("fully_met", "minimum_deviation")


def _front(points, name: str = "front") -> np.ndarray:
    f = np.asarray(points, dtype=float)
    if f.size == 0:
        raise EmptyFront(f"{name} is empty")
    if f.ndim == 1:
        f = f[None, :]
    if f.ndim != 2:
        raise DimensionMismatch(f"{name} must be a list of equal-length vectors")
    return f


def _nearest(front, reference) -> np.ndarray:
    f = _front(front)
    r = _front(reference, "reference")
    if f.shape[1] != r.shape[1]:
        raise DimensionMismatch(f"{f.shape[1]} objectives vs {r.shape[1]} in reference")
    d = np.sqrt(((f[:, None, :] - r[None, :, :]) ** 2).sum(axis=2))
    return d.min(axis=1)


def generational_distance(front, reference) -> float:
    """Mean Euclidean distance from each front point to its nearest reference point."""
    return float(_nearest(front, reference).mean())


def max_pareto_front_error(front, reference) -> float:
    """Largest nearest-reference distance over the front."""
    return float(_nearest(front, reference).max())


def spacing(front) -> float:
    """Population standard deviation of nearest-neighbour Euclidean distances."""
    f = _front(front)
    if f.shape[0] < 2:
        raise TooFewPoints("spacing needs at least two points")
    d = np.sqrt(((f[:, None, :] - f[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    return float(np.std(d.min(axis=1)))


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def ratio_non_dominated(population) -> float:
    f = _front(population, "population")
    n = f.shape[0]
    kept = sum(1 for i in range(n) if not any(_dominates(f[j], f[i]) for j in range(n) if j != i))
    return 100.0 * kept / n


# -- hypervolume (WFG) -------------------------------------------------------------


def hypervolume(front, nadir) -> float:
    """Exact volume dominated by ``front`` and bounded by ``nadir`` (minimization)."""
    f = _front(front)
    ref = np.asarray(nadir, dtype=float).reshape(-1)
    if f.shape[1] != ref.size:
        raise DimensionMismatch(f"{f.shape[1]} objectives vs nadir of length {ref.size}")
    f = f[np.all(f < ref, axis=1)]
    if f.shape[0] == 0:
        return 0.0
    return float(_wfg(_nondominated(f), ref))


def _nondominated(pts: np.ndarray) -> np.ndarray:
    pts = np.unique(pts, axis=0)
    n = pts.shape[0]
    keep = [i for i in range(n) if not any(_dominates(pts[j], pts[i]) for j in range(n) if j != i)]
    return pts[keep]


def _wfg(pts: np.ndarray, ref: np.ndarray) -> float:
    if pts.shape[0] == 0:
        return 0.0
    if pts.shape[0] == 1:
        return float(np.prod(ref - pts[0]))
    if pts.shape[1] == 1:
        return float(ref[0] - pts[:, 0].min())
    if pts.shape[1] == 2:
        p = pts[np.argsort(pts[:, 0], kind="stable")]
        total, y = 0.0, ref[1]
        for x0, x1 in p:
            if x1 < y:
                total += (ref[0] - x0) * (y - x1)
                y = x1
        return total
    # order by last objective, worst first, so limit sets shrink quickly
    pts = pts[np.argsort(-pts[:, -1], kind="stable")]
    total = 0.0
    for k in range(pts.shape[0]):
        box = float(np.prod(ref - pts[k]))
        rest = pts[k + 1:]
        if rest.shape[0]:
            limited = np.maximum(rest, pts[k])
            box -= _wfg(_nondominated(limited), ref)
        total += box
    return total


def nadir_point(history, margin: float = 0.1) -> np.ndarray:
    """Componentwise worst value over every archived vector, inflated by ``margin``."""
    pts = _front([p for front in history for p in front], "archive history")
    return pts.max(axis=0) * (1.0 + margin)


def ideal_point(history) -> np.ndarray:
    return _front([p for front in history for p in front], "archive history").min(axis=0)


def normalized_hypervolume(front, nadir, ideal) -> float | None:
    """Hypervolume divided by the ideal-nadir box; None when the box is degenerate."""
    box = np.asarray(nadir, dtype=float) - np.asarray(ideal, dtype=float)
    if np.any(box <= 0):
        return None
    return hypervolume(front, nadir) / float(np.prod(box))


# -- domain KPIs -------------------------------------------------------------------


def pearson(a, b) -> float:
    x = np.asarray(a.values if isinstance(a, EnergyProfile) else a, dtype=float)
    y = np.asarray(b.values if isinstance(b, EnergyProfile) else b, dtype=float)
    if x.size != y.size:
        raise LengthMismatch("pearson inputs differ in length")
    if x.size < 2:
        raise LengthMismatch("pearson needs at least two values")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise ConstantInput("correlation undefined for a constant input")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def energy_flexibility(energy_ev: float, baseline: float, peak: float) -> float:
    """Added grid-serving energy as a percentage of peak demand."""
    if peak <= 0:
        raise ZeroPeak("peak energy must be positive")
    return 100.0 * (energy_ev - baseline) / peak


def co2_savings(energy: float, mix: float = ITALY_MIX_G_PER_KWH) -> float:
    """Kilograms of CO2 avoided by ``energy`` kWh at ``mix`` g/kWh."""
    if energy < 0:
        raise ValueError("energy must be non-negative")
    return energy * mix / 1000.0


@dataclass
class KPIReport:
    pearson: float | None
    total_charged: float
    total_discharged: float
    flexibility_pct: float | None
    co2_saved: float
    preference_table: dict = field(default_factory=dict)


def preference_deviation_report(
    schedule: ScheduleMatrix,
    fleet: Sequence[ElectricVehicle],
    stations: Sequence[ChargingStation] = (),
    cfg: ConstraintConfig | None = None,
    slot_duration: float = 1.0,
) -> dict:
    """Count scheduled vehicles per time-deviation and distance bucket.

    Each vehicle is judged on its earliest action. Vehicles without time
    preferences count as fully met; without ``stations`` every distance is
    taken as met.
    """
    cfg = cfg or ConstraintConfig()
    ev_by_id = {ev.id: ev for ev in fleet}
    st_by_id = {st.id: st for st in stations}
    first = {}
    for a in sorted(schedule.actions, key=lambda a: (a.slot, a.station_id)):
        first.setdefault(a.ev_id, a)
    time = dict.fromkeys(TIME_BUCKETS, 0)
    dist = dict.fromkeys(DISTANCE_BUCKETS, 0)
    for eid, a in first.items():
        ev = ev_by_id[eid]
        nearest = ev.preferences.nearest_slot(a.slot)
        hours = 0.0 if nearest is None else abs(a.slot - nearest[0]) * slot_duration
        if hours == 0:
            time["fully_met"] += 1
        elif hours <= 1:
            time["1h"] += 1
        elif hours <= 2:
            time["2h"] += 1
        else:
            time["more_than_2h"] += 1
        st = st_by_id.get(a.station_id)
        ok = st is None or ev_station_distance(ev, st) <= max_distance_for(ev, cfg) + 1e-7
        dist["fully_met" if ok else "minimum_deviation"] += 1
    return {"scheduled_evs": len(first), "time": time, "distance": dist}


def kpi_report(schedule: ScheduleMatrix, scenario, mix: float = ITALY_MIX_G_PER_KWH) -> KPIReport:
    """Tracking, energy and preference KPIs of ``schedule`` over the service window."""
    s, e = scenario.window
    storage = np.zeros(scenario.n_slots)
    for a in schedule.actions:
        storage[a.slot] += a.energy
    charged = float(sum(a.energy for a in schedule.actions if a.energy > 0))
    discharged = float(-sum(a.energy for a in schedule.actions if a.energy < 0))
    try:
        r = pearson(storage[s:e], scenario.balance.values[s:e])
    except (ConstantInput, LengthMismatch):
        r = None
    peak = float(scenario.consumption.values.sum())
    flex = energy_flexibility(charged + discharged, 0.0, peak) if peak > 0 else None
    prefs = preference_deviation_report(schedule, scenario.fleet, scenario.stations, scenario.constraint_config,
                                        scenario.balance.slot_duration)
    return KPIReport(r, charged, discharged, flex, co2_savings(charged + discharged, mix), prefs)


def metrics_dict(kpi: KPIReport, final_front, history, population, reference=None) -> dict:
    """Report in the documented key order; undefined indicators are None."""
    front = _front(final_front)
    nadir = nadir_point(history)
    ideal = ideal_point(history)
    gd = mpfe = None
    if reference is not None:
        gd = generational_distance(front, reference)
        mpfe = max_pareto_front_error(front, reference)
    return {
        "gd": gd,
        "mpfe": mpfe,
        "hypervolume_raw": hypervolume(front, nadir),
        "hypervolume_normalized": normalized_hypervolume(front, nadir, ideal),
        "spacing": spacing(front) if front.shape[0] >= 2 else None,
        "rni_pct": ratio_non_dominated(population),
        "pearson": kpi.pearson,
        "total_charged_kwh": kpi.total_charged,
        "total_discharged_kwh": kpi.total_discharged,
        "flexibility_pct": kpi.flexibility_pct,
        "co2_saved_kg": kpi.co2_saved,
        "preference_buckets": kpi.preference_table,
    }


def metrics_json(report: dict) -> str:
    return json.dumps(report, indent=1)


def kpi_to_dict(kpi: KPIReport) -> dict:
    return asdict(kpi)
