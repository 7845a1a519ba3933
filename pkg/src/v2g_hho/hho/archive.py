"""Bounded Pareto archive with crowding-distance truncation and roulette prey selection."""

from __future__ import annotations

from typing import Generic, Sequence, TypeVar

import numpy as np

from ..errors import EmptyArchive, LengthMismatch

T = TypeVar("T")


def dominates(a, b) -> bool:
    """True when ``a`` is no worse than ``b`` everywhere and better somewhere (minimization)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"fitness vectors of length {a.size} and {b.size}")
    return bool(np.all(a <= b) and np.any(a < b))


def crowding_distances(points) -> np.ndarray:
    """Crowding distance of each fitness vector in ``points``.

    Boundary points of every objective are infinite; an objective with zero
    spread adds nothing to interior points. Ties in an objective keep input
    order.
    """
    f = np.asarray(points, dtype=float)
    n = f.shape[0]
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for k in range(f.shape[1]):
        col = f[:, k]
        order = np.argsort(col, kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[order[-1]] - col[order[0]]
        if span == 0:
            continue
        gaps = (col[order[2:]] - col[order[:-2]]) / span
        dist[order[1:-1]] += gaps
    return dist


def roulette_weights(distances) -> np.ndarray:
    """Selection probabilities from crowding distances.

    Infinite distances count as twice the largest finite one; with no
    finite distance, or all weights zero, the draw is uniform.
    """
    d = np.asarray(distances, dtype=float)
    finite = np.isfinite(d)
    if not finite.any():
        return np.full(d.size, 1.0 / d.size)
    w = np.where(finite, d, 2.0 * d[finite].max())
    total = w.sum()
    if total <= 0:
        return np.full(d.size, 1.0 / d.size)
    return w / total


def roulette_index(distances, rng: np.random.Generator) -> int:
    p = roulette_weights(distances)
    cum = np.cumsum(p)
    return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), p.size - 1))


class ParetoArchive(Generic[T]):
    """Mutually non-dominated items of at most ``capacity`` entries.

    Items only need a ``fitness`` array attribute. An item whose fitness equals
    an archived one is rejected as redundant. On overflow a random entry among
    those with the lowest crowding distance is evicted, sparing the entry with
    the smallest fitness sum so the best scalarized solution is never lost.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("archive capacity must be at least 1")
        self.capacity = capacity
        self.entries: list[T] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def fitness_matrix(self) -> np.ndarray:
        return np.array([np.asarray(e.fitness, dtype=float) for e in self.entries])

    def distances(self) -> np.ndarray:
        if not self.entries:
            return np.zeros(0)
        return crowding_distances(self.fitness_matrix())

    def best_index(self) -> int:
        if not self.entries:
            raise EmptyArchive("archive is empty")
        return int(np.argmin([float(np.sum(e.fitness)) for e in self.entries]))

    def best(self) -> T:
        return self.entries[self.best_index()]

    def update(self, candidate: T, rng: np.random.Generator) -> bool:
        """Offer ``candidate``; returns True when it was inserted."""
        cf = np.asarray(candidate.fitness, dtype=float)
        survivors = []
        for e in self.entries:
            ef = np.asarray(e.fitness, dtype=float)
            if dominates(ef, cf) or np.array_equal(ef, cf):
                return False
            if not dominates(cf, ef):
                survivors.append(e)
        survivors.append(candidate)
        self.entries = survivors
        while len(self.entries) > self.capacity:
            self._evict(rng)
        return True

    def _evict(self, rng: np.random.Generator) -> None:
        dist = self.distances()
        protected = self.best_index()
        dist[protected] = np.inf
        finite = np.flatnonzero(np.isfinite(dist))
        if finite.size:
            low = finite[dist[finite] == dist[finite].min()]
        else:
            low = np.array([i for i in range(len(self.entries)) if i != protected])
        victim = int(low[rng.integers(low.size)])
        del self.entries[victim]


def update_archive(archive: ParetoArchive, candidate, rng: np.random.Generator) -> ParetoArchive:
    archive.update(candidate, rng)
    return archive


def select_prey(archive: ParetoArchive, rng: np.random.Generator):
    """Roulette draw weighted by crowding distance; returns a copy of the entry."""
    if not archive.entries:
        raise EmptyArchive("archive is empty")
    entry = archive.entries[roulette_index(archive.distances(), rng)]
    return entry.copy() if hasattr(entry, "copy") else entry


def non_dominated(points: Sequence) -> list[int]:
    """Indices of the points not dominated by any other point."""
    f = np.asarray(points, dtype=float)
    keep = []
    for i in range(len(f)):
        if not any(dominates(f[j], f[i]) for j in range(len(f)) if j != i):
            keep.append(i)
    return keep
