import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from v2g_hho.errors import EmptyPopulation, ShapeMismatch
from v2g_hho.hho import (
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
from v2g_hho.hho.operators import levy_sigma

LO, HI = np.array([-100.0]), np.array([100.0])


def a(*v):
    return np.array(v, dtype=float)


def test_escape_energy_examples():
    assert escape_energy(0.5, 0, 100) == pytest.approx(1.0)
    assert escape_energy(-1.0, 0, 100) == pytest.approx(-2.0)
    assert escape_energy(0.73, 100, 100) == 0.0


@given(st.floats(-1, 1), st.integers(1, 500), st.data())
def test_escape_energy_decays(e0, theta, data):
    i = data.draw(st.integers(0, theta - 1))
    assert abs(escape_energy(e0, i + 1, theta)) <= abs(escape_energy(e0, i, theta))
    assert escape_energy(e0, theta, theta) == 0.0


def test_jump_strength_boundary():
    assert jump_strength(1.0) == 0.0
    assert jump_strength(0.0) == 2.0


def test_mean_position_examples():
    assert np.array_equal(mean_position([a(3, -1)]), a(3, -1))
    assert mean_position([a(4), a(0), a(8)]) == pytest.approx([6.0])
    assert np.array_equal(mean_position([a(0, 1), a(0, 3)]), a(0, 2))
    with pytest.raises(EmptyPopulation):
        mean_position([])


def test_exploration_copy_when_r1_zero():
    x_rand = a(3.0, -7.0)
    out = exploration_update(a(1, 1), x_rand, a(0, 0), a(0, 0), -HI, HI, q=0.7, r=(0.0, 0.3, 0.5, 0.5))
    assert np.array_equal(out, x_rand)


def test_exploration_examples():
    first = exploration_update(a(4), a(10), a(0), a(0), LO, HI, q=0.5, r=(0.5, 0.5, 0.0, 0.0))
    assert first == pytest.approx([7.0])
    second = exploration_update(a(0), a(0), a(8), a(2), np.zeros(1), HI, q=0.2, r=(0.0, 0.0, 1.0, 0.0))
    assert second == pytest.approx([6.0])


def test_soft_besiege_examples():
    assert soft_besiege(a(5), a(5), 0.0, LO, HI, j=1.0) == pytest.approx([0.0])
    assert soft_besiege(a(6), a(10), 0.5, LO, HI, j=1.0) == pytest.approx([2.0])


def test_hard_besiege_examples():
    assert hard_besiege(a(-3, 9), a(10, 2), 0.0, LO, HI) == pytest.approx([10, 2])
    assert hard_besiege(a(6), a(10), 0.4, LO, HI) == pytest.approx([8.4])
    assert hard_besiege(a(7), a(7), 0.9, LO, HI) == pytest.approx([7.0])


def test_updates_clamp_to_bounds():
    lo, hi = a(-1, -1), a(1, 1)
    assert np.all(np.abs(hard_besiege(a(0, 0), a(50, -50), 0.1, lo, hi)) <= 1)
    assert np.all(np.abs(soft_besiege(a(0, 0), a(50, -50), 0.9, lo, hi, j=2.0)) <= 1)


@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.floats(-2, 2), st.floats(0, 1),
       st.integers(0, 2**32 - 1))
def test_every_update_stays_in_bounds(cells, e, q, seed):
    rng = np.random.default_rng(seed)
    lo, hi = a(-10, -10, 0, 0), a(10, 10, 1, 1)
    x, prey, rand_, mean = (np.roll(a(*cells), k) for k in range(4))
    for out in (exploration_update(x, rand_, prey, mean, lo, hi, rng, q=q),
                soft_besiege(x, prey, e, lo, hi, rng), hard_besiege(x, prey, e, lo, hi)):
        assert np.all(out >= lo) and np.all(out <= hi)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        hard_besiege(a(1, 2), a(1), 0.5, LO, HI)


def test_levy_step_statistics():
    assert levy_sigma(1.5) == pytest.approx(0.6965745, rel=1e-6)
    rng = np.random.default_rng(1)
    scale = a(10.0, 100.0)
    steps = levy_step((5000, 2), scale, 1.5, rng)
    assert steps.shape == (5000, 2)
    # heavy tails but centred; median magnitude scales with the bound
    med = np.median(np.abs(steps), axis=0)
    assert med[1] / med[0] == pytest.approx(10.0, rel=0.15)
    assert abs(np.median(steps[:, 1])) < 0.1 * med[1]


class Probe:
    """Minimal hawk: a position whose score is the distance to a target."""

    target = 0.0

    def __init__(self, state):
        self.state = np.asarray(state, dtype=float)
        self.total = float(np.abs(self.state - self.target).sum())


def test_soft_dive_accepts_y():
    current = Probe(a(6.0))
    out = soft_besiege_dives(current, a(1.0), 0.5, LO, HI, Probe, j=1.0, levy=a(0.0))
    # Y = 1 - 0.5 * |1 - 6| = -1.5, closer to 0 than 6
    assert out.state == pytest.approx([-1.5])


def test_soft_dive_falls_back_to_z():
    current = Probe(a(1.0))
    out = soft_besiege_dives(current, a(10.0), 0.4, LO, HI, Probe, j=1.0, levy=a(-9.0))
    # Y = 10 - 0.4 * 9 = 6.4 is worse; Z = 6.4 - 9 = -2.6 is still worse than 1
    assert out is current
    out = soft_besiege_dives(current, a(10.0), 0.4, LO, HI, Probe, j=1.0, levy=a(-6.0))
    assert out.state == pytest.approx([0.4])


def test_hard_dive_examples():
    current = Probe(a(-50.0))
    out = hard_besiege_dives(current, a(10.0), a(4.0), 0.4, LO, HI, Probe, j=1.0, levy=a(0.0))
    assert out.state == pytest.approx([7.6])
    same = hard_besiege_dives(Probe(a(3.0)), a(10.0), a(10.0), 0.7, LO, HI, Probe, j=1.0, levy=a(0.0))
    assert same.state == pytest.approx([3.0])


def test_hard_dive_keeps_current_when_both_worse():
    current = Probe(a(0.5))
    out = hard_besiege_dives(current, a(10.0), a(4.0), 0.4, LO, HI, Probe, j=1.0, levy=a(20.0))
    assert out is current


def test_dive_draws_levy_when_missing():
    rng = np.random.default_rng(0)
    current = Probe(a(0.0, 0.0))
    out = soft_besiege_dives(current, a(50.0, 50.0), 0.5, a(-100, -100), a(100, 100), Probe, rng)
    assert out is current or out.total < current.total
    assert math.isfinite(out.total)
