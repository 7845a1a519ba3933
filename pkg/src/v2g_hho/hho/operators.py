"""Position updates of the Harris hawks: exploration, besieges and rapid dives.

Every update works cell-wise on stations x slots grids and clamps the result
to ``[lower, upper]`` (per-row column vectors or full grids). Random scalars
can be passed explicitly; otherwise they are drawn from ``rng``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import EmptyPopulation, ShapeMismatch


def escape_energy(e0: float, i: int, theta: int) -> float:
    """Prey escape energy decaying linearly from ``2*e0`` to 0 over ``theta`` iterations."""
    return 2.0 * e0 * (1.0 - i / theta)


def jump_strength(r5: float) -> float:
    return 2.0 * (1.0 - r5)


def _check_shapes(*arrays: np.ndarray) -> None:
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays[1:]):
        raise ShapeMismatch(f"positions differ in shape: {[a.shape for a in arrays]}")


def mean_position(positions) -> np.ndarray:
    """Cell-wise mean over the hawks whose value in that cell is nonzero."""
    if len(positions) == 0:
        raise EmptyPopulation("no hawks to average")
    stack = np.stack([np.asarray(p, dtype=float) for p in positions])
    nonzero = stack != 0
    count = nonzero.sum(axis=0)
    total = stack.sum(axis=0)
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def exploration_update(x, x_rand, x_prey, x_mean, lower, upper, rng=None, *, q=None, r=None) -> np.ndarray:
    """Perch either relative to a random hawk or to the prey/mean offset.

    Args:
        x, x_rand, x_prey, x_mean: current, random-member, prey and mean grids.
        lower, upper: cell bounds; also the LB/UB of the random term.
        rng: source of ``q`` and ``r = (r1, r2, r3, r4)`` when not given.
    """
    _check_shapes(x, x_rand, x_prey, x_mean)
    if q is None:
        q = rng.random()
    if r is None:
        r = rng.random(4)
    r1, r2, r3, r4 = r
    if q >= 0.5:
        new = x_rand - r1 * np.abs(x_rand - 2.0 * r2 * x)
    else:
        new = (x_prey - x_mean) - r3 * (lower + r4 * (upper - lower))
    return np.clip(new, lower, upper)


def soft_besiege(x, x_prey, e, lower, upper, rng=None, *, j=None) -> np.ndarray:
    _check_shapes(x, x_prey)
    if j is None:
        j = jump_strength(rng.random())
    new = (x_prey - x) - e * np.abs(j * x_prey - x)
    return np.clip(new, lower, upper)


def hard_besiege(x, x_prey, e, lower, upper) -> np.ndarray:
    _check_shapes(x, x_prey)
    return np.clip(x_prey - e * np.abs(x_prey - x), lower, upper)


def levy_sigma(beta: float) -> float:
    """Mantegna's scale for the numerator of a Levy-stable step."""
    num = math.gamma(1.0 + beta) * math.sin(math.pi * beta / 2.0)
    den = math.gamma((1.0 + beta) / 2.0) * beta * 2.0 ** ((beta - 1.0) / 2.0)
    return (num / den) ** (1.0 / beta)


def levy_step(shape, scale, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Heavy-tailed step ``0.01 * scale * u / |v|**(1/beta)`` drawn cell-wise."""
    shape = np.broadcast_shapes(shape, np.shape(scale))
    u = rng.normal(0.0, levy_sigma(beta), size=shape)
    v = rng.normal(0.0, 1.0, size=shape)
    return 0.01 * scale * u / np.abs(v) ** (1.0 / beta)


def _dive(anchor, x_prey, e, current, lower, upper, evaluate: Callable, rng, j, levy, beta):
    """Two-stage rapid-dive acceptance shared by both dive besieges.

    ``current`` is the hawk being moved (its grid is ``current.state``);
    ``evaluate`` maps a grid to a hawk with a scalarized ``total``. Returns
    the accepted hawk.
    """
    _check_shapes(anchor, x_prey)
    if j is None:
        j = jump_strength(rng.random())
    y = np.clip(x_prey - e * np.abs(j * x_prey - anchor), lower, upper)
    hy = evaluate(y)
    if hy.total < current.total:
        return hy
    if levy is None:
        levy = levy_step(y.shape, upper, beta, rng)
    z = np.clip(y + levy, lower, upper)
    hz = evaluate(z)
    if hz.total < current.total:
        return hz
    return current


def soft_besiege_dives(current, x_prey, e, lower, upper, evaluate, rng=None, *, j=None, levy=None, beta=1.5):
    return _dive(current.state, x_prey, e, current, lower, upper, evaluate, rng, j, levy, beta)


def hard_besiege_dives(current, x_prey, x_mean, e, lower, upper, evaluate, rng=None, *, j=None, levy=None,
                       beta=1.5):
    return _dive(x_mean, x_prey, e, current, lower, upper, evaluate, rng, j, levy, beta)
