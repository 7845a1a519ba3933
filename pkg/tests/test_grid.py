import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from v2g_hho.errors import EmptyInput, LengthMismatch, ModelError, ParseError, TooShort, UnknownEntity, ZeroDenominator
from v2g_hho.grid import (
    Action,
    ConstraintConfig,
    EnergyProfile,
    ScheduleMatrix,
    SlotClass,
    UncertaintyModel,
    arithmetic_returns,
    balance_profile,
    classify_profile,
    classify_slot,
    schedule_from_csv,
    schedule_from_records,
    schedule_records,
    schedule_to_csv,
    storage_profile,
    value_at_risk,
)

finite = st.floats(-1e4, 1e4, allow_nan=False)


def test_balance_identical_curves_is_zero():
    gen = EnergyProfile([3.0, 4.0, 5.0])
    assert np.array_equal(balance_profile(gen, gen).values, np.zeros(3))


def test_balance_example():
    b = balance_profile(EnergyProfile([10.0, 20.0]), EnergyProfile([5.0, 25.0]))
    assert b.values.tolist() == [5.0, -5.0]


class _FixedVar(UncertaintyModel):
    def var(self):
        return 0.1


def test_balance_var_haircut_example():
    b = balance_profile(EnergyProfile([10.0, 20.0]), EnergyProfile([5.0, 25.0]), _FixedVar((1.0, 2.0)))
    assert b.values == pytest.approx([4.5, -5.5])


def test_balance_length_mismatch():
    with pytest.raises(LengthMismatch):
        balance_profile(EnergyProfile([1.0]), EnergyProfile([1.0, 2.0]))


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=24))
def test_balance_antisymmetric(pairs):
    gen = EnergyProfile([g for g, _ in pairs])
    cons = EnergyProfile([c for _, c in pairs])
    assert np.array_equal(balance_profile(gen, cons).values, -balance_profile(cons, gen).values)


def test_returns_examples():
    assert np.array_equal(arithmetic_returns([5.0, 5.0, 5.0]), [0.0, 0.0])
    assert arithmetic_returns([100.0, 110.0]) == pytest.approx([0.10])
    assert arithmetic_returns([100.0, 90.0, 99.0]) == pytest.approx([-0.10, 0.10])


def test_returns_errors():
    with pytest.raises(TooShort):
        arithmetic_returns([1.0])
    with pytest.raises(ZeroDenominator):
        arithmetic_returns([0.0, 1.0])


def test_var_examples():
    assert value_at_risk([0.2, 0.2, 0.2], 0.95) == 0.0
    assert value_at_risk([-0.1, 0.0, 0.1, 0.2], 0.95) == pytest.approx(0.15)
    assert value_at_risk([0.37], 0.95) == 0.0


def test_var_errors():
    with pytest.raises(EmptyInput):
        value_at_risk([], 0.95)
    with pytest.raises(ModelError):
        value_at_risk([0.1], 1.0)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.floats(-1, 1), st.floats(0.01, 0.99))
def test_var_translation_invariant(returns, c, alpha):
    shifted = [r + c for r in returns]
    assert value_at_risk(shifted, alpha) == pytest.approx(value_at_risk(returns, alpha), abs=1e-9)


def test_uncertainty_model_var():
    assert UncertaintyModel((100.0, 90.0, 99.0)).var() == pytest.approx(0.10)


def test_classify_examples():
    cfg = ConstraintConfig(epsilon_balance=1.0)
    assert classify_slot(0.0, cfg) is SlotClass.BALANCED
    assert classify_slot(5.0, cfg) is SlotClass.SURPLUS
    assert classify_slot(-5.0, cfg) is SlotClass.DEFICIT
    assert classify_slot(1.0, cfg) is SlotClass.BALANCED
    assert [c.sign for c in classify_profile(EnergyProfile([3.0, 0.5, -3.0]), cfg)] == [1, 0, -1]


def _sched(*acts, n=4):
    return ScheduleMatrix(("A", "B", "C"), n, acts)


def test_storage_profile_examples():
    assert np.array_equal(storage_profile(_sched()).values, np.zeros(4))
    mixed = _sched(Action("A", 1, "x", 10.0), Action("B", 1, "y", -4.0))
    assert storage_profile(mixed).values[1] == pytest.approx(6.0)
    charge = _sched(Action("A", 2, "x", 5.0), Action("B", 2, "y", 5.0), Action("C", 2, "z", 5.0))
    assert storage_profile(charge).values[2] == pytest.approx(15.0)


cells = st.lists(st.tuples(st.sampled_from("ABC"), st.integers(0, 3), st.floats(-22, 22)), max_size=12)


@given(cells, cells)
def test_storage_profile_linear(a, b):
    acts_a = tuple(Action(s, t, f"a{i}", e) for i, (s, t, e) in enumerate(a))
    acts_b = tuple(Action(s, t, f"b{i}", e) for i, (s, t, e) in enumerate(b))
    both = storage_profile(_sched(*acts_a, *acts_b)).values
    assert both == pytest.approx(storage_profile(_sched(*acts_a)).values + storage_profile(_sched(*acts_b)).values)


def test_schedule_matrix_helpers():
    s = _sched(Action("B", 3, "y", -2.0), Action("A", 1, "x", 4.0))
    assert s.row("B") == 1
    with pytest.raises(UnknownEntity):
        s.row("Z")
    assert [a.station_id for a in s.sorted().actions] == ["A", "B"]
    grid = s.energy_grid()
    assert grid[0, 1] == 4.0 and grid[1, 3] == -2.0
    assert len(s) == 2 and len(ScheduleMatrix.empty(("A",), 3)) == 0


def test_schedule_csv_round_trip():
    s = _sched(Action("B", 3, "y", -2.125), Action("A", 1, "x", 1 / 3))
    text = schedule_to_csv(s)
    assert text.splitlines()[0] == "station_id,slot,ev_id,energy_kwh"
    back = schedule_from_csv(text, ("A", "B", "C"), 4)
    assert back.sorted() == s.sorted()
    assert schedule_from_records(schedule_records(s), ("A", "B", "C"), 4) == s.sorted()


def test_schedule_csv_errors():
    with pytest.raises(ParseError):
        schedule_from_csv("a,b\n", ("A",), 2)
    with pytest.raises(ParseError):
        schedule_from_csv("station_id,slot,ev_id,energy_kwh\nA,one,x,1.0\n", ("A",), 2)
    with pytest.raises(ParseError):
        schedule_from_csv("station_id,slot,ev_id,energy_kwh\nA,1,x\n", ("A",), 2)


def test_profile_and_config_validation():
    with pytest.raises(ModelError):
        EnergyProfile([])
    with pytest.raises(ModelError):
        EnergyProfile([1.0], slot_duration=0.0)
    with pytest.raises(ModelError):
        ConstraintConfig(soc_soft_low=90.0, soc_soft_high=10.0)
    with pytest.raises(ModelError):
        ConstraintConfig(epsilon_balance=-1.0)
    p = EnergyProfile([1.0, 2.0])
    assert not p.values.flags.writeable
    assert p == EnergyProfile(np.array([1.0, 2.0])) and p != EnergyProfile([1.0, 3.0])
