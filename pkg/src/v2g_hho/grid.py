"""Energy profiles, forecast uncertainty and the station-by-slot schedule matrix."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    LengthMismatch,
    ModelError,
    ParseError,
    TooShort,
    UnknownEntity,
    ZeroDenominator,
)


@dataclass(frozen=True, eq=False)
class EnergyProfile:
    """Per-slot energy series (kWh) starting at ``window_start``."""

    values: np.ndarray
    slot_duration: float = 1.0
    window_start: datetime | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ModelError("profile needs at least one slot")
        if self.slot_duration <= 0:
            raise ModelError("slot_duration must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnergyProfile):
            return NotImplemented
        return (
            self.slot_duration == other.slot_duration
            and self.window_start == other.window_start
            and np.array_equal(self.values, other.values)
        )

    def with_values(self, values) -> "EnergyProfile":
        return EnergyProfile(values, self.slot_duration, self.window_start)


@dataclass(frozen=True)
class UncertaintyModel:
    """History of daily balance aggregates and the VaR confidence level."""

    history: tuple[float, ...]
    confidence: float = 0.95

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", tuple(float(h) for h in self.history))
        if not 0.0 < self.confidence < 1.0:
            raise ModelError("confidence must lie in (0, 1)")

    def var(self) -> float:
        return value_at_risk(arithmetic_returns(self.history), self.confidence)


@dataclass(frozen=True)
class ConstraintConfig:
    """Tolerances and limits for schedule feasibility.

    ``soc_soft_low``/``soc_soft_high`` bound the SoC targets the decoder aims
    for; the validator only enforces the hard [0, 100] range.
    """

    epsilon_balance: float = 1.0
    min_cycles: int = 0
    default_max_distance: float = 5.0
    soc_soft_low: float = 20.0
    soc_soft_high: float = 80.0

    def __post_init__(self) -> None:
        if min(self.epsilon_balance, self.min_cycles, self.default_max_distance) < 0:
            raise ModelError("constraint parameters must be non-negative")
        if not 0.0 <= self.soc_soft_low <= self.soc_soft_high <= 100.0:
            raise ModelError("soft SoC band must satisfy 0 <= low <= high <= 100")


class SlotClass(str, Enum):
    SURPLUS = "Surplus"
    BALANCED = "Balanced"
    DEFICIT = "Deficit"

    @property
    def sign(self) -> int:
        return {SlotClass.SURPLUS: 1, SlotClass.BALANCED: 0, SlotClass.DEFICIT: -1}[self]


@dataclass(frozen=True)
class Action:
    """One cell entry: ``ev_id`` at ``station_id`` during ``slot``.

    Positive energy charges the vehicle, negative discharges it into the grid.
    """

    station_id: str
    slot: int
    ev_id: str
    energy: float


@dataclass(frozen=True)
class ScheduleMatrix:
    """Stations x slots grid of actions.

    Stored as a flat tuple of actions so that infeasible inputs (two vehicles
    in one cell) remain representable for validation and repair.
    """

    station_ids: tuple[str, ...]
    n_slots: int
    actions: tuple[Action, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "station_ids", tuple(self.station_ids))
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.n_slots < 0:
            raise ModelError("n_slots must be non-negative")

    @classmethod
    def empty(cls, station_ids: Sequence[str], n_slots: int) -> "ScheduleMatrix":
        return cls(tuple(station_ids), n_slots, ())

    def row(self, station_id: str) -> int:
        try:
            return self.station_ids.index(station_id)
        except ValueError:
            raise UnknownEntity(f"unknown station {station_id!r}") from None

    def cells(self) -> dict[tuple[str, int], list[Action]]:
        out: dict[tuple[str, int], list[Action]] = {}
        for a in self.actions:
            out.setdefault((a.station_id, a.slot), []).append(a)
        return out

    def energy_grid(self) -> np.ndarray:
        grid = np.zeros((len(self.station_ids), self.n_slots))
        for a in self.actions:
            grid[self.row(a.station_id), a.slot] += a.energy
        return grid

    def sorted(self) -> "ScheduleMatrix":
        """Same schedule with actions in canonical (row, slot, ev) order."""
        rows = {sid: i for i, sid in enumerate(self.station_ids)}
        key = lambda a: (rows.get(a.station_id, len(rows)), a.slot, a.ev_id, a.energy)
        return ScheduleMatrix(self.station_ids, self.n_slots, tuple(sorted(self.actions, key=key)))

    def __len__(self) -> int:
        return len(self.actions)


def balance_profile(
    generation: EnergyProfile,
    consumption: EnergyProfile,
    uncertainty: UncertaintyModel | None = None,
) -> EnergyProfile:
    """Forecast surplus (+) / deficit (-) per slot, shrunk by the VaR haircut."""
    if len(generation) != len(consumption) or generation.slot_duration != consumption.slot_duration:
        raise LengthMismatch("generation and consumption profiles differ in shape")
    diff = generation.values - consumption.values
    if uncertainty is not None:
        diff = diff - uncertainty.var() * np.abs(diff)
    return generation.with_values(diff)


def arithmetic_returns(history: Sequence[float]) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    if h.size < 2:
        raise TooShort("need at least two history values")
    if np.any(h[:-1] == 0):
        raise ZeroDenominator("history contains a zero denominator")
    return (h[1:] - h[:-1]) / h[:-1]


def value_at_risk(returns: Sequence[float], alpha: float) -> float:
    """Mean return minus the empirical lower-tail (1 - alpha) quantile.

    The quantile uses floor indexing into the ascending returns, so small
    samples at high confidence pick the worst return.
    """
    r = np.sort(np.asarray(returns, dtype=float))
    if r.size == 0:
        raise EmptyInput("no returns")
    if not 0.0 < alpha < 1.0:
        raise ModelError("alpha must lie in (0, 1)")
    idx = min(r.size - 1, int(math.floor((1.0 - alpha) * r.size)))
    return float(np.mean(r - r[idx]))


def classify_slot(balance_value: float, cfg: ConstraintConfig) -> SlotClass:
    if balance_value > cfg.epsilon_balance:
        return SlotClass.SURPLUS
    if balance_value < -cfg.epsilon_balance:
        return SlotClass.DEFICIT
    return SlotClass.BALANCED


def classify_profile(balance: EnergyProfile, cfg: ConstraintConfig) -> list[SlotClass]:
    return [classify_slot(v, cfg) for v in balance.values]


def storage_profile(schedule: ScheduleMatrix, slot_duration: float = 1.0) -> EnergyProfile:
    values = np.zeros(max(schedule.n_slots, 1))
    for a in schedule.actions:
        values[a.slot] += a.energy
    return EnergyProfile(values[: max(schedule.n_slots, 1)], slot_duration)


# -- CSV interchange -------------------------------------------------------------

SCHEDULE_HEADER = ["station_id", "slot", "ev_id", "energy_kwh"]


def schedule_to_csv(schedule: ScheduleMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCHEDULE_HEADER)
    for a in schedule.sorted().actions:
        writer.writerow([a.station_id, a.slot, a.ev_id, repr(float(a.energy))])
    return buf.getvalue()


def schedule_from_csv(text: str, station_ids: Sequence[str], n_slots: int) -> ScheduleMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != SCHEDULE_HEADER:
        raise ParseError(f"schedule header must be {','.join(SCHEDULE_HEADER)}")
    actions = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields")
        try:
            actions.append(Action(row[0], int(row[1]), row[2], float(row[3])))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return ScheduleMatrix(tuple(station_ids), n_slots, tuple(actions))


def load_schedule(path: str | Path, station_ids: Sequence[str], n_slots: int) -> ScheduleMatrix:
    return schedule_from_csv(Path(path).read_text(encoding="utf-8"), station_ids, n_slots)


def schedule_records(schedule: ScheduleMatrix) -> list[dict]:
    return [
        {"station_id": a.station_id, "slot": a.slot, "ev_id": a.ev_id, "energy_kwh": a.energy}
        for a in schedule.sorted().actions
    ]


def schedule_from_records(records: Iterable[dict], station_ids: Sequence[str], n_slots: int) -> ScheduleMatrix:
    actions = tuple(
        Action(str(r["station_id"]), int(r["slot"]), str(r["ev_id"]), float(r["energy_kwh"])) for r in records
    )
    return ScheduleMatrix(tuple(station_ids), n_slots, actions)
