"""Multi-objective Harris Hawks Optimization over V2G schedule matrices."""

from .archive import (
    ParetoArchive,
    crowding_distances,
    dominates,
    non_dominated,
    roulette_index,
    roulette_weights,
    select_prey,
    update_archive,
)
from .decode import Hawk, ScheduleDecoder
from .operators import (
    escape_energy,
    exploration_update,
    hard_besiege,
    hard_besiege_dives,
    jump_strength,
    levy_step,
    mean_position,
    soft_besiege,
    soft_besiege_dives,
)
from .optimizer import (
    HHOParams,
    OptimizationResult,
    archive_json,
    convergence_csv,
    fitness_vector,
    initialize_population,
    optimize,
)

__all__ = [
    "Hawk", "HHOParams", "OptimizationResult", "ParetoArchive", "ScheduleDecoder",
    "archive_json", "convergence_csv", "crowding_distances", "dominates", "escape_energy",
    "exploration_update", "fitness_vector", "hard_besiege", "hard_besiege_dives",
    "initialize_population", "jump_strength", "levy_step", "mean_position", "non_dominated",
    "optimize", "roulette_index", "roulette_weights", "select_prey", "soft_besiege",
    "soft_besiege_dives", "update_archive",
]
