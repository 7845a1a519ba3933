"""Main multi-objective HHO loop over schedule matrices."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..feasibility import repair_schedule, validate_schedule
from ..grid import EnergyProfile, ScheduleMatrix, schedule_records, storage_profile
from .archive import ParetoArchive, select_prey
from .decode import Hawk, ScheduleDecoder
from .operators import (
    escape_energy,
    exploration_update,
    hard_besiege,
    hard_besiege_dives,
    mean_position,
    soft_besiege,
    soft_besiege_dives,
)

LOG_HEADER = ["iteration", "best_fitness_sum", "archive_size", "mean_fitness_sum"]


@dataclass(frozen=True)
class HHOParams:
    population_size: int = 20
    max_iterations: int = 100
    archive_capacity: int = 5
    rng_seed: int = 0
    service_window: tuple[int, int] | None = None
    levy_beta: float = 1.5

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.archive_capacity < 1:
            raise ValueError("archive_capacity must be at least 1")
        if not 0.0 < self.levy_beta <= 2.0:
            raise ValueError("levy_beta must lie in (0, 2]")


@dataclass
class OptimizationResult:
    best: Hawk
    archive: ParetoArchive
    log: list[tuple[int, float, int, float]]
    history: list[list[list[float]]] = field(default_factory=list)
    population: list[np.ndarray] = field(default_factory=list)

    @property
    def schedule(self) -> ScheduleMatrix:
        return self.best.decoded


def fitness_vector(schedule: ScheduleMatrix, balance: EnergyProfile, window: tuple[int, int]) -> np.ndarray:
    """Per-slot tracking error |balance - storage| over the service window."""
    storage = storage_profile(schedule, balance.slot_duration).values
    s, e = window
    full = np.zeros(len(balance))
    full[: min(len(storage), len(full))] = storage[: len(full)]
    return np.abs(balance.values[s:e] - full[s:e])


def _windowed(scenario, params: HHOParams):
    if params.service_window is None or tuple(params.service_window) == scenario.window:
        return scenario
    return replace(scenario, window=tuple(params.service_window))


def initialize_population(scenario, params: HHOParams, rng: np.random.Generator,
                          decoder: ScheduleDecoder | None = None) -> list[Hawk]:
    """Uniform positions in the station bounds, filtered to each slot class's sign."""
    decoder = decoder or ScheduleDecoder(_windowed(scenario, params))
    hawks = []
    for _ in range(params.population_size):
        raw = rng.uniform(decoder.lower, decoder.upper)
        hawks.append(decoder.evaluate(decoder.project(decoder.sign_filter(raw))))
    return hawks


def optimize(scenario, params: HHOParams, rng: np.random.Generator | None = None,
             record_history: bool = False) -> OptimizationResult:
    """Run the hawk population for ``params.max_iterations`` iterations.

    Returns the archive entry with the smallest fitness sum as ``best``, the
    final archive and one log row per iteration (row 0 is the initial
    population).
    """
    rng = rng if rng is not None else np.random.default_rng(params.rng_seed)
    scenario = _windowed(scenario, params)
    dec = ScheduleDecoder(scenario)
    lo, hi = dec.lower, dec.upper
    theta = params.max_iterations
    pop = initialize_population(scenario, params, rng, dec)
    archive: ParetoArchive = ParetoArchive(params.archive_capacity)
    for h in pop:
        archive.update(h, rng)

    def evaluate(pos: np.ndarray) -> Hawk:
        return dec.evaluate(dec.project(pos))

    log = [_log_row(0, archive, pop)]
    history = [_front(archive)] if record_history else []
    n = len(pop)
    for it in range(theta):
        prey = select_prey(archive, rng).state
        x_mean = mean_position([h.state for h in pop])
        positions = [h.state for h in pop]
        new_pop = []
        for hawk in pop:
            e = escape_energy(2.0 * rng.random() - 1.0, it, theta)
            r = rng.random()
            x = hawk.state
            if abs(e) >= 1.0:
                x_rand = positions[int(rng.integers(n))]
                new_pop.append(evaluate(exploration_update(x, x_rand, prey, x_mean, lo, hi, rng)))
            elif r >= 0.5 and abs(e) >= 0.5:
                new_pop.append(evaluate(soft_besiege(x, prey, e, lo, hi, rng)))
            elif r >= 0.5:
                new_pop.append(evaluate(hard_besiege(x, prey, e, lo, hi)))
            elif abs(e) >= 0.5:
                new_pop.append(soft_besiege_dives(hawk, prey, e, lo, hi, evaluate, rng, beta=params.levy_beta))
            else:
                new_pop.append(hard_besiege_dives(hawk, prey, x_mean, e, lo, hi, evaluate, rng,
                                                  beta=params.levy_beta))
        pop = new_pop
        for h in pop:
            archive.update(h, rng)
        log.append(_log_row(it + 1, archive, pop))
        if record_history:
            history.append(_front(archive))

    _ensure_feasible(archive, scenario)
    return OptimizationResult(archive.best(), archive, log, history, [h.fitness.copy() for h in pop])


def _log_row(it: int, archive: ParetoArchive, pop: list[Hawk]) -> tuple[int, float, int, float]:
    return (it, archive.best().total, len(archive), float(np.mean([h.total for h in pop])))


def _front(archive: ParetoArchive) -> list[list[float]]:
    return [[float(v) for v in h.fitness] for h in archive.entries]


def _ensure_feasible(archive: ParetoArchive, scenario) -> None:
    """Safety net: decoded schedules are feasible by construction, repair otherwise."""
    args = (scenario.fleet, scenario.stations, scenario.balance, scenario.constraint_config,
            scenario.operation_config)
    for h in archive.entries:
        if validate_schedule(h.decoded, *args):
            fixed = repair_schedule(h.decoded, *args)
            h._schedule = fixed
            h.fitness = fitness_vector(fixed, scenario.balance, scenario.window)


# -- artifacts ---------------------------------------------------------------------


def convergence_csv(log) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOG_HEADER)
    for it, best, size, mean in log:
        writer.writerow([it, repr(float(best)), size, repr(float(mean))])
    return buf.getvalue()


def archive_json(archive: ParetoArchive) -> str:
    return json.dumps(
        [{"fitness": [float(v) for v in h.fitness], "schedule": schedule_records(h.decoded)}
         for h in archive.entries],
        indent=1,
    )
