"""Mapping continuous hawk positions onto feasible schedule matrices."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyFleet, EmptyStations
from ..feasibility import cell_bound, max_distance_for
from ..fleet import ev_station_distance, remaining_cycles, station_energy_per_slot
from ..grid import Action, ScheduleMatrix

MIN_ACTION_KWH = 1e-6


class Hawk:
    """One population member: a signed energy grid, its schedule and fitness.

    ``state`` stacks two stations x slots grids: the signed energies
    (``position``) and per-cell vehicle selection keys in [0, 1] (``keys``).
    Only cells in non-Balanced service-window columns can become actions.
    The decoded schedule is materialised on first access.
    """

    __slots__ = ("state", "fitness", "assignments", "_decoder", "_schedule")

    def __init__(self, state: np.ndarray, fitness: np.ndarray, assignments: tuple, decoder: "ScheduleDecoder"):
        self.state = state
        self.fitness = fitness
        self.assignments = assignments
        self._decoder = decoder
        self._schedule = None

    @property
    def position(self) -> np.ndarray:
        return self.state[0]

    @property
    def keys(self) -> np.ndarray:
        return self.state[1]

    @property
    def decoded(self) -> ScheduleMatrix:
        if self._schedule is None:
            self._schedule = self._decoder.to_schedule(self.assignments)
        return self._schedule

    @property
    def total(self) -> float:
        return float(self.fitness.sum())

    def copy(self) -> "Hawk":
        return Hawk(self.state.copy(), self.fitness.copy(), self.assignments, self._decoder)


class ScheduleDecoder:
    """Deterministic decoder bound to one scenario.

    Projection reflects each energy onto its slot class's sign, so every
    position is a valid request pattern. Cells are served in descending
    magnitude (station, then slot, on ties) and ask for min(|x|, cell bound,
    remaining column balance). Free eligible vehicles are ranked by
    preference for the slot (priority, then distance, then fleet order); the
    cell key picks by relative rank among those that can cover the request,
    so key 0 is the driver-preferred choice. When none can, the vehicle with
    the most headroom serves what it can. SoC is tracked along each
    vehicle's window trajectory, so slots already booked later in the window
    stay within the band.
    """

    def __init__(self, scenario):
        if not scenario.fleet:
            raise EmptyFleet("scenario has no vehicles")
        if not scenario.stations:
            raise EmptyStations("scenario has no stations")
        self.scenario = scenario
        fleet, stations = scenario.fleet, scenario.stations
        cfg, op = scenario.constraint_config, scenario.operation_config
        self.n_ev, self.m, self.p = len(fleet), len(stations), scenario.n_slots
        self.start, self.stop = scenario.window
        self.w = self.stop - self.start
        self.sigma = op.conversion_loss
        self.station_ids = tuple(st.id for st in stations)
        self.ev_ids = tuple(ev.id for ev in fleet)

        self.ub = np.array([station_energy_per_slot(st, op) for st in stations])
        self.lower = np.stack([np.broadcast_to(-self.ub[:, None], (self.m, self.p)), np.zeros((self.m, self.p))])
        self.upper = np.stack([np.broadcast_to(self.ub[:, None], (self.m, self.p)), np.ones((self.m, self.p))])
        self.cap_charge = np.array([cell_bound(st, op, discharge=False) for st in stations])
        self.cap_discharge = np.array([cell_bound(st, op, discharge=True) for st in stations])

        classes = scenario.slot_classes()
        sign = np.zeros(self.p)
        for t in range(self.start, self.stop):
            sign[t] = classes[t].sign
        self.slot_sign = sign
        self.column_mask = sign != 0
        self.wsign = sign[self.start:self.stop]
        self.wbalance = scenario.balance.values[self.start:self.stop].copy()
        self.allowance = np.abs(self.wbalance) * (self.wsign != 0)

        cap = np.array([ev.capacity_max for ev in fleet])
        stored = np.array([ev.stored_energy for ev in fleet])
        self.battery0 = stored
        self.ceiling = np.maximum(cfg.soc_soft_high / 100.0 * cap, stored)
        self.floor = np.minimum(cfg.soc_soft_low / 100.0 * cap, stored)

        dist = np.array([[ev_station_distance(ev, st) for ev in fleet] for st in stations])
        reach = dist <= np.array([max_distance_for(ev, cfg) for ev in fleet])[None, :] + 1e-7
        can_discharge = np.array([remaining_cycles(ev) >= cfg.min_cycles for ev in fleet])
        self.charge_order: list[list[np.ndarray]] = []
        self.discharge_order: list[list[np.ndarray]] = []
        for j in range(self.m):
            ch, dis = [], []
            for k in range(self.w):
                t = self.start + k
                score = [_slot_score(ev, t) for ev in fleet]
                idx = [i for i in range(self.n_ev) if reach[j, i]]
                idx.sort(key=lambda i: (score[i], dist[j, i], i))
                order = np.array(idx, dtype=np.intp)
                ch.append(order)
                dis.append(order[can_discharge[order]] if order.size else order)
            self.charge_order.append(ch)
            self.discharge_order.append(dis)

    # -- positions -----------------------------------------------------------

    def project(self, state: np.ndarray) -> np.ndarray:
        """Clamp to the bounds and reflect energies onto each column's sign.

        Columns that admit no action (Balanced or outside the window) become 0.
        """
        out = np.clip(state, self.lower, self.upper)
        out[0] = np.abs(out[0]) * self.slot_sign[None, :]
        return out

    def sign_filter(self, state: np.ndarray) -> np.ndarray:
        """Zero every energy whose sign disagrees with its slot class."""
        out = state.copy()
        out[0] = np.where(state[0] * self.slot_sign[None, :] > 0, state[0], 0.0)
        return out

    # -- decoding ------------------------------------------------------------

    def decode(self, state: np.ndarray) -> tuple[tuple, np.ndarray]:
        """Assignments ``(row, slot, ev_index, signed_kwh)`` and window storage."""
        w = self.w
        eff = state[0][:, self.start:self.stop] * self.wsign[None, :]
        flat = eff.ravel()
        keys = state[1][:, self.start:self.stop].ravel()
        idx = np.flatnonzero(flat > MIN_ACTION_KWH)
        colsum = np.zeros(w)
        if idx.size == 0:
            return (), colsum
        order = idx[np.argsort(-flat[idx], kind="stable")]
        traj = np.repeat(self.battery0[:, None], w + 1, axis=1)
        busy = np.zeros((self.n_ev, w), dtype=bool)
        keep = 1.0 - self.sigma
        out = []
        for f in order.tolist():
            j, k = divmod(f, w)
            charging = self.wsign[k] > 0
            cell_cap = self.cap_charge[j] if charging else self.cap_discharge[j]
            req = min(flat[f], cell_cap, self.allowance[k] - colsum[k])
            if req <= MIN_ACTION_KWH:
                continue
            cand = (self.charge_order if charging else self.discharge_order)[j][k]
            if cand.size == 0:
                continue
            cand = cand[~busy[cand, k]]
            if cand.size == 0:
                continue
            tail = traj[cand, k + 1:]
            if charging:
                caps = self.ceiling[cand] - tail.max(axis=1)
            else:
                caps = keep * (tail.min(axis=1) - self.floor[cand])
            full = np.flatnonzero(caps >= req)
            if full.size:
                pick = int(full[min(int(keys[f] * full.size), full.size - 1)])
            else:
                pick = int(np.argmax(caps))
                if caps[pick] <= MIN_ACTION_KWH:
                    continue
            energy = min(req, float(caps[pick]))
            i = int(cand[pick])
            if charging:
                traj[i, k + 1:] += energy
            else:
                traj[i, k + 1:] -= energy / keep
            busy[i, k] = True
            colsum[k] += energy
            out.append((j, self.start + k, i, energy if charging else -energy))
        return tuple(out), colsum * self.wsign

    def fitness(self, storage: np.ndarray) -> np.ndarray:
        return np.abs(self.wbalance - storage)

    def evaluate(self, state: np.ndarray) -> Hawk:
        assignments, storage = self.decode(state)
        return Hawk(state, self.fitness(storage), assignments, self)

    def to_schedule(self, assignments) -> ScheduleMatrix:
        acts = tuple(
            Action(self.station_ids[j], t, self.ev_ids[i], float(e)) for j, t, i, e in assignments
        )
        return ScheduleMatrix(self.station_ids, self.p, acts).sorted()


def _slot_score(ev, slot: int) -> float:
    """0/1/2 for an exact high/medium/low preference, 3 + hour gap otherwise."""
    for s, pr in ev.preferences.time_prefs:
        if s == slot:
            return float(pr.rank)
    nearest = ev.preferences.nearest_slot(slot)
    return 3.0 if nearest is None else 3.0 + abs(nearest[0] - slot)

