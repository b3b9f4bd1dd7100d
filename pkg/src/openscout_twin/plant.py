"""Ground-truth skid-steer vehicle model.

The plant tracks what the physical robot actually does: wheels respond
to PWM duty with a first-order lag toward a payload-dependent top speed,
the chassis follows the exact constant-twist arc, Hall encoders emit
integer ticks with an exact fractional-residual carry, and the battery
drains to empty in one hour of full drive.

Skid scrub is folded into a single effective track width (wheels drag
sideways during turns, so the kinematic width exceeds the geometric
one); that constant is shared with the firmware's inverse kinematics.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .config import CalibrationAnchors, RobotConfig
from .kinematics import arc_step, twist_from_wheel_speeds

__all__ = [
    "CalibrationAnchors",
    "ENCODER_CHANNELS",
    "IDLE_DRAIN_FRACTION",
    "PayloadError",
    "Plant",
    "PlantState",
    "battery_step",
    "chassis_step",
    "encoder_step",
    "motor_step",
    "omega_max_of_payload",
    "v_max_of_payload",
]

# encoder channel order: left-front, left-back, right-front, right-back
ENCODER_CHANNELS = ("LF", "LB", "RF", "RB")

# idle electronics draw as a fraction of the full-drive drain rate
IDLE_DRAIN_FRACTION = 0.1

_SPEED_EPS = 1e-9


class PayloadError(ValueError):
    """Payload outside the calibrated 0..6 kg envelope."""


@dataclass
class PlantState:
    """Continuous ground truth: pose, wheel speeds, encoder residuals, battery.

    The two encoders of a side start half a tick out of phase (magnets
    mount at arbitrary angles), which halves the quantization step of the
    side's mean-of-two speed estimate.
    """

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    wheel_left: float = 0.0
    wheel_right: float = 0.0
    enc_residual: list[float] = field(default_factory=lambda: [0.0, 0.5, 0.0, 0.5])
    battery_pct: float = 100.0
    clock: float = 0.0


def v_max_of_payload(payload_kg: float, anchors: CalibrationAnchors) -> float:
    """Top straight-line speed at a payload, piecewise-linear between anchors."""
    points = anchors.v_max_points
    if payload_kg < points[0][0] or payload_kg > points[-1][0]:
        raise PayloadError(
            f"payload {payload_kg} kg outside envelope "
            f"{points[0][0]}..{points[-1][0]} kg"
        )
    for (m0, v0), (m1, v1) in zip(points, points[1:]):
        if payload_kg <= m1:
            return v0 + (v1 - v0) * (payload_kg - m0) / (m1 - m0)
    return points[-1][1]


def omega_max_of_payload(
    payload_kg: float, anchors: CalibrationAnchors, track_width: float
) -> float:
    """Top spin rate implied by the speed envelope and the effective width."""
    return 2.0 * v_max_of_payload(payload_kg, anchors) / track_width


def motor_step(speed: float, duty: float, dt: float, v_max: float, tau: float) -> float:
    """First-order lag of one side's wheel speed toward duty * v_max."""
    return speed + (duty * v_max - speed) * (1.0 - math.exp(-dt / tau))


def chassis_step(
    pose: tuple[float, float, float],
    v_left: float,
    v_right: float,
    track_width: float,
    dt: float,
) -> tuple[float, float, float]:
    """Exact-arc pose update from per-side wheel speeds."""
    v, omega = twist_from_wheel_speeds(v_left, v_right, track_width)
    return arc_step(pose[0], pose[1], pose[2], v, omega, dt)


def encoder_step(
    residual: float, wheel_speed: float, dt: float, cfg: RobotConfig
) -> tuple[float, int]:
    """Accumulate rotation into integer ticks, carrying the fraction.

    Truncation is toward zero and the residual subtraction is exact in
    binary64, so no tick is ever lost or double-counted.
    """
    total = residual + wheel_speed / (math.tau * cfg.wheel_radius) * cfg.ticks_per_rev * dt
    ticks = math.trunc(total)
    return total - ticks, ticks


def battery_step(
    pct: float, duty_left: float, duty_right: float, dt: float, endurance_s: float = 3600.0
) -> float:
    """Drain charge: full drive empties in ``endurance_s``, idle at 10% of that rate."""
    mean_duty = 0.5 * (abs(duty_left) + abs(duty_right))
    rate = (100.0 / endurance_s) * (IDLE_DRAIN_FRACTION + (1.0 - IDLE_DRAIN_FRACTION) * mean_duty)
    return max(0.0, pct - rate * dt)


class Plant:
    """Stepped skid-steer plant; pure state-in/state-out, no internal timers."""

    def __init__(self, cfg: RobotConfig, *, seed: int | None = None):
        self.cfg = cfg
        self.state = PlantState()
        self._rng = random.Random(seed)
        self._v_max = v_max_of_payload(cfg.payload_kg, cfg.anchors)

    @property
    def v_max(self) -> float:
        return self._v_max

    def set_payload(self, payload_kg: float) -> None:
        """Change payload mid-run; wheel speeds are clamped into the new envelope."""
        self._v_max = v_max_of_payload(payload_kg, self.cfg.anchors)
        self.cfg.payload_kg = payload_kg
        s = self.state
        s.wheel_left = _clamp(s.wheel_left, self._v_max)
        s.wheel_right = _clamp(s.wheel_right, self._v_max)

    def step(self, duty_left: float, duty_right: float, dt: float) -> tuple[int, int, int, int]:
        """Advance ground truth by ``dt`` under held duties; returns encoder ticks."""
        s = self.state
        cfg = self.cfg
        dl = _clamp(duty_left, 1.0)
        dr = _clamp(duty_right, 1.0)
        if s.battery_pct <= 0.0:
            dl = dr = 0.0  # dead battery: motors unpowered, speeds decay

        s.wheel_left = _clamp(motor_step(s.wheel_left, dl, dt, self._v_max, cfg.motor_tau), self._v_max)
        s.wheel_right = _clamp(motor_step(s.wheel_right, dr, dt, self._v_max, cfg.motor_tau), self._v_max)

        s.x, s.y, s.theta = chassis_step(
            (s.x, s.y, s.theta), s.wheel_left, s.wheel_right, cfg.track_width_effective, dt
        )

        sigma = cfg.encoder_noise_sigma
        ticks = []
        for i, channel in enumerate(ENCODER_CHANNELS):
            speed = s.wheel_left if channel.startswith("L") else s.wheel_right
            if sigma > 0.0:
                speed += self._rng.gauss(0.0, sigma)
            s.enc_residual[i], emitted = encoder_step(s.enc_residual[i], speed, dt, cfg)
            ticks.append(emitted)

        s.battery_pct = battery_step(s.battery_pct, dl, dr, dt, cfg.anchors.battery_endurance_s)
        s.clock += dt
        return tuple(ticks)


def _clamp(value: float, bound: float) -> float:
    if value > bound:
        return bound
    if value < -bound:
        return -bound
    return value
