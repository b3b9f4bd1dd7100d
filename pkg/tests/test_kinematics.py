import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from openscout_twin.kinematics import (
    arc_step,
    twist_from_wheel_speeds,
    wheel_speeds_from_twist,
    wrap_angle,
)


class TestWrapAngle:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            (0.0, 0.0),
            (math.pi, math.pi),  # pi itself stays (interval is half-open at -pi)
            (-math.pi, math.pi),
            (3 * math.pi, math.pi),
            (math.tau, 0.0),
            (-0.1, -0.1),
            (math.pi + 0.5, -math.pi + 0.5),
        ],
    )
    def test_cases(self, raw, expected):
        assert wrap_angle(raw) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(-1000.0, 1000.0))
    def test_range_and_equivalence(self, theta):
        wrapped = wrap_angle(theta)
        assert -math.pi < wrapped <= math.pi
        # same angle modulo 2*pi
        assert math.isclose(
            math.sin(wrapped), math.sin(theta), abs_tol=1e-9
        ) and math.isclose(math.cos(wrapped), math.cos(theta), abs_tol=1e-9)


class TestWheelTwistConversions:
    def test_inverse_of_each_other(self):
        left, right = wheel_speeds_from_twist(0.3, 0.2, 2.0)
        assert twist_from_wheel_speeds(left, right, 2.0) == pytest.approx((0.3, 0.2))

    @given(
        st.floats(-1, 1),
        st.floats(-1, 1),
        st.floats(0.1, 5.0),
    )
    def test_round_trip_property(self, v, omega, width):
        left, right = wheel_speeds_from_twist(v, omega, width)
        v2, w2 = twist_from_wheel_speeds(left, right, width)
        assert math.isclose(v, v2, abs_tol=1e-12)
        assert math.isclose(omega, w2, abs_tol=1e-9)


class TestArcStep:
    def test_straight_line(self):
        assert arc_step(0, 0, 0, 0.5, 0.0, 1.0) == pytest.approx((0.5, 0.0, 0.0))

    def test_pure_spin(self):
        x, y, theta = arc_step(0, 0, 0, 0.0, 0.35, 1.0)
        assert (x, y) == (0.0, 0.0)
        assert theta == pytest.approx(0.35)

    def test_arc_hand_value(self):
        x, y, theta = arc_step(0, 0, 0, 0.5, 0.35, 1.0)
        assert x == pytest.approx(0.48985, abs=1e-5)
        assert y == pytest.approx(0.08661, abs=1e-5)
        assert theta == pytest.approx(0.35)

    def test_tiny_omega_continuous_with_straight_branch(self):
        straight = arc_step(0, 0, 0.3, 0.5, 0.0, 0.01)
        below_eps = arc_step(0, 0, 0.3, 0.5, 1e-12, 0.01)
        above_eps = arc_step(0, 0, 0.3, 0.5, 1e-8, 0.01)
        assert below_eps[:2] == straight[:2]
        assert above_eps == pytest.approx(straight, abs=1e-8)
