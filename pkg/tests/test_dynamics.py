import math

import pytest
from hypothesis import given, strategies as st

from stcav.coordinator import CoordinatorRecord
from stcav.dynamics import CavState, StaleRecord, extrapolate, kinematics, propagate

finite = st.floats(-50, 50, allow_nan=False)
dts = st.floats(0, 5, allow_nan=False)


def test_kinematics_closed_form():
    assert kinematics(10.0, 20.0, 1.0, 2.0) == (52.0, 22.0)
    assert kinematics(0.0, 15.0, 0.0, 0.05) == (0.75, 15.0)


def test_propagate_keeps_control_and_identity():
    s = CavState(3, "ramp", 1.0, 2.0, -0.5)
    out = propagate(s, 1.0)
    assert (out.id, out.lane, out.u) == (3, "ramp", -0.5)
    assert out.x == pytest.approx(2.75)
    assert out.v == pytest.approx(1.5)


def test_negative_dt_rejected():
    with pytest.raises(ValueError):
        propagate(CavState(0, "main", 0.0, 1.0), -0.1)


@given(finite, finite, finite, dts, dts)
def test_semigroup(x, v, u, a, b):
    x1, v1 = kinematics(*kinematics(x, v, u, a), u, b)
    x2, v2 = kinematics(x, v, u, a + b)
    assert math.isclose(x1, x2, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(v1, v2, rel_tol=1e-9, abs_tol=1e-9)


def _rec(t_last=1.0, t_next=2.0):
    return CoordinatorRecord(7, "main", t_last, t_next, 50.0, 10.0, 1.0)


def test_extrapolate_inside_window():
    assert extrapolate(_rec(), 2.0) == (60.5, 11.0)


def test_extrapolate_stale_and_early():
    with pytest.raises(StaleRecord):
        extrapolate(_rec(), 2.05)
    with pytest.raises(ValueError):
        extrapolate(_rec(), 0.5)


def test_extrapolate_open_ended_record():
    x, v = extrapolate(_rec(t_next=math.inf), 11.0)
    assert (x, v) == (200.0, 20.0)
