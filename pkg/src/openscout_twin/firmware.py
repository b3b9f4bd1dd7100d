"""Deterministic emulation of the v1.1 onboard MCU program.

The control loop mirrors the hardware's structure: the left and right
motor pairs share one PWM duty channel each (the drive pins fan out to
both motors of a side), per-side speed feedback is the mean of that
side's two Hall encoders, and a PI loop per side modulates duty to match
the target wheel velocity.  A command watchdog zeroes the targets when
cmd_vel goes silent, and odometry/status telemetry is published on a
fixed tick schedule.

Everything here is a pure state machine advanced by an external
scheduler tick; there are no timers or I/O.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .config import RobotConfig
from .kinematics import arc_step, twist_from_wheel_speeds, wheel_speeds_from_twist
from .messages import (
    MessageError,
    OdomSample,
    StatusSample,
    Twist,
    parse_twist,
    serialize_odom,
    serialize_status,
)
from .plant import v_max_of_payload

__all__ = [
    "DEFAULT_PIN_MAP",
    "FirmwareEmu",
    "FirmwareState",
    "PinMap",
    "RobotConfig",
    "TickOutput",
    "estimate_side_speed",
    "inverse_kinematics",
    "pi_step",
    "saturate_targets",
]


@dataclass(frozen=True)
class PinMap:
    """Logical channel to MCU pin assignment.

    One duty pin per side drives both of that side's motor wires; the
    four encoder channels are independent inputs.
    """

    duty_pins: dict[str, str]
    motor_wiring: dict[str, tuple[str, str]]
    encoder_pins: dict[str, str]

    def __post_init__(self):
        if set(self.duty_pins) != {"left", "right"} or set(self.motor_wiring) != {
            "left",
            "right",
        }:
            raise ValueError("need exactly a left and a right duty channel")
        for side, motors in self.motor_wiring.items():
            if len(motors) != 2 or any(not m.startswith(side[0].upper()) for m in motors):
                raise ValueError(f"duty channel {side!r} must fan out to both {side} motors")
        if set(self.encoder_pins) != {"LF", "LB", "RF", "RB"}:
            raise ValueError("need encoder pins for LF, LB, RF, RB")
        pins = list(self.duty_pins.values()) + list(self.encoder_pins.values())
        if len(set(pins)) != len(pins):
            raise ValueError("pin assignments collide")


DEFAULT_PIN_MAP = PinMap(
    duty_pins={"left": "GPIO25", "right": "GPIO26"},
    motor_wiring={"left": ("LF", "LB"), "right": ("RF", "RB")},
    encoder_pins={"LF": "GPIO34", "LB": "GPIO35", "RF": "GPIO32", "RB": "GPIO33"},
)


@dataclass
class FirmwareState:
    """Discrete controller state between ticks."""

    target_left: float = 0.0
    target_right: float = 0.0
    integ_left: float = 0.0
    integ_right: float = 0.0
    last_cmd_time: float = 0.0
    duty_left: float = 0.0
    duty_right: float = 0.0
    tick_counters: list[int] = field(default_factory=lambda: [0, 0, 0, 0])
    clock: float = 0.0
    malformed_cmd_count: int = 0
    watchdog_tripped: bool = False
    tick_index: int = 0
    odom_x: float = 0.0
    odom_y: float = 0.0
    odom_theta: float = 0.0


@dataclass(frozen=True)
class OutboundPublish:
    channel: str  # "odom" or "status"
    payload: bytes
    retain: bool = False


@dataclass(frozen=True)
class TickOutput:
    duty_left: float
    duty_right: float
    publishes: tuple[OutboundPublish, ...]


def inverse_kinematics(t: Twist, track_width: float) -> tuple[float, float]:
    """Commanded body twist -> per-side wheel speed targets."""
    return wheel_speeds_from_twist(t.linear_x, t.angular_z, track_width)


def saturate_targets(targets: tuple[float, float], v_max: float) -> tuple[float, float]:
    """Scale both targets into the speed envelope, preserving curvature."""
    left, right = targets
    peak = max(abs(left), abs(right))
    if peak <= v_max:
        return left, right
    scale = v_max / peak
    return left * scale, right * scale


def pi_step(
    integrator: float,
    target: float,
    measured: float,
    dt: float,
    kp: float,
    ki: float,
) -> tuple[float, float]:
    """One positional PI update: integrate, then act, with conditional
    anti-windup (the integrator only moves while the output is unsaturated
    or the error pulls it back toward the linear range)."""
    error = target - measured
    integ_next = integrator + error * dt
    duty_raw = kp * error + ki * integ_next
    if -1.0 <= duty_raw <= 1.0:
        return integ_next, duty_raw
    if (duty_raw > 1.0 and error < 0.0) or (duty_raw < -1.0 and error > 0.0):
        return integ_next, _clamp_duty(duty_raw)
    return integrator, _clamp_duty(kp * error + ki * integrator)


def estimate_side_speed(
    tick_deltas: tuple[int, int], dt: float, cfg: RobotConfig
) -> float:
    """Mean of one side's two encoder deltas, converted to m/s."""
    mean_ticks = 0.5 * (tick_deltas[0] + tick_deltas[1])
    return mean_ticks / cfg.ticks_per_rev * math.tau * cfg.wheel_radius / dt


class FirmwareEmu:
    """The MCU program: call :meth:`tick` once per control period."""

    def __init__(self, cfg: RobotConfig, pin_map: PinMap = DEFAULT_PIN_MAP):
        self.cfg = cfg
        self.pin_map = pin_map
        self.state = FirmwareState()
        # sliding tick-count window; shrinks the speed-estimate quantum
        # fed to the PI without touching pose integration
        self._delta_window: deque[tuple[int, int, int, int]] = deque(
            maxlen=cfg.speed_filter_ticks
        )

    def tick(
        self,
        inbox: list[bytes],
        tick_deltas: tuple[int, int, int, int],
        battery_pct: float,
    ) -> TickOutput:
        """Run one control period.

        ``inbox`` holds the raw cmd_vel payloads received since the last
        tick (oldest first); ``tick_deltas`` are the four encoder counts
        accumulated over the elapsed period; ``battery_pct`` is the
        battery sensor reading.
        """
        cfg = self.cfg
        s = self.state
        dt = cfg.control_period
        s.tick_index += 1
        now = s.clock + dt

        command = None
        for payload in inbox:
            try:
                command = parse_twist(payload)
            except MessageError:
                s.malformed_cmd_count += 1
        if command is not None:
            v_max = v_max_of_payload(cfg.payload_kg, cfg.anchors)
            targets = inverse_kinematics(command, cfg.track_width_effective)
            s.target_left, s.target_right = saturate_targets(targets, v_max)
            s.last_cmd_time = now
            s.watchdog_tripped = False

        if now - s.last_cmd_time > cfg.watchdog_timeout:
            s.target_left = s.target_right = 0.0
            s.watchdog_tripped = True

        self._delta_window.append(tuple(tick_deltas))
        window = len(self._delta_window)
        sums = [0, 0, 0, 0]
        for quad in self._delta_window:
            for i in range(4):
                sums[i] += quad[i]
        measured_left = estimate_side_speed((sums[0], sums[1]), window * dt, cfg)
        measured_right = estimate_side_speed((sums[2], sums[3]), window * dt, cfg)
        s.integ_left, s.duty_left = pi_step(
            s.integ_left, s.target_left, measured_left, dt, cfg.kp, cfg.ki
        )
        s.integ_right, s.duty_right = pi_step(
            s.integ_right, s.target_right, measured_right, dt, cfg.kp, cfg.ki
        )
        for i in range(4):
            s.tick_counters[i] += tick_deltas[i]

        # pose integrates the raw per-tick counts (exact tick bookkeeping);
        # the filtered estimate only feeds the controller and telemetry
        raw_left = estimate_side_speed(tick_deltas[0:2], dt, cfg)
        raw_right = estimate_side_speed(tick_deltas[2:4], dt, cfg)
        raw_v, raw_omega = twist_from_wheel_speeds(
            raw_left, raw_right, cfg.track_width_effective
        )
        s.odom_x, s.odom_y, s.odom_theta = arc_step(
            s.odom_x, s.odom_y, s.odom_theta, raw_v, raw_omega, dt
        )
        v, omega = twist_from_wheel_speeds(
            measured_left, measured_right, cfg.track_width_effective
        )

        publishes = []
        if s.tick_index % cfg.ticks_per_telemetry == 0:
            sample = OdomSample(now, s.odom_x, s.odom_y, s.odom_theta, Twist(v, omega))
            publishes.append(OutboundPublish("odom", serialize_odom(sample)))
        if (s.tick_index - 1) % cfg.ticks_per_status == 0:
            status = StatusSample(
                online=True,
                battery_pct=battery_pct,
                watchdog_tripped=s.watchdog_tripped,
                uptime_s=now,
                payload_kg=cfg.payload_kg,
            )
            publishes.append(OutboundPublish("status", serialize_status(status), retain=True))

        s.clock = now
        return TickOutput(s.duty_left, s.duty_right, tuple(publishes))


def _clamp_duty(duty: float) -> float:
    if duty > 1.0:
        return 1.0
    if duty < -1.0:
        return -1.0
    return duty
