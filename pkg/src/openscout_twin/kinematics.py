"""Planar differential-drive kinematics shared by firmware and plant.

Both sides must use the same effective track width, otherwise commanded
and achieved chassis twists diverge; keeping the conversions in one
place makes that impossible to get wrong.
"""

from __future__ import annotations

import math

# below this rate a turn is numerically a straight line
OMEGA_STRAIGHT_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


def wheel_speeds_from_twist(v: float, omega: float, track_width: float) -> tuple[float, float]:
    """Body twist -> (left, right) wheel speeds, m/s."""
    half = 0.5 * omega * track_width
    return v - half, v + half


def twist_from_wheel_speeds(v_left: float, v_right: float, track_width: float) -> tuple[float, float]:
    """(left, right) wheel speeds -> body (v, omega)."""
    return 0.5 * (v_left + v_right), (v_right - v_left) / track_width


def arc_step(
    x: float, y: float, theta: float, v: float, omega: float, dt: float
) -> tuple[float, float, float]:
    """Advance a planar pose along the exact constant-twist arc for ``dt``."""
    if abs(omega) < OMEGA_STRAIGHT_EPS:
        return (
            x + v * math.cos(theta) * dt,
            y + v * math.sin(theta) * dt,
            wrap_angle(theta + omega * dt),
        )
    radius = v / omega
    theta_next = theta + omega * dt
    return (
        x + radius * (math.sin(theta_next) - math.sin(theta)),
        y - radius * (math.cos(theta_next) - math.cos(theta)),
        wrap_angle(theta_next),
    )
