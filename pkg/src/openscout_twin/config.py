"""Robot and stack configuration.

Config files are flat UTF-8 ``key = value`` lines mirroring the field
names below ('#' starts a comment); CLI flags override file values.
Speed anchors are written as comma-separated ``payload:value`` pairs,
e.g. ``v_max_anchors = 0:0.60, 3:0.50, 6:0.45``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid config file contents or field values."""


@dataclass(frozen=True)
class CalibrationAnchors:
    """Measured speed envelope and endurance of the physical platform.

    Straight-line speed drops with payload; the single spin-rate anchor
    pins the effective track width; the battery lasts one hour at full
    drive.
    """

    v_max_points: tuple[tuple[float, float], ...] = (
        (0.0, 0.60),
        (3.0, 0.50),
        (6.0, 0.45),
    )
    omega_max_point: tuple[float, float] = (3.0, 0.35)
    battery_endurance_s: float = 3600.0

    def __post_init__(self):
        if len(self.v_max_points) < 2:
            raise ConfigError("need at least two v-max anchor points")
        payloads = [m for m, _ in self.v_max_points]
        speeds = [v for _, v in self.v_max_points]
        if any(b <= a for a, b in zip(payloads, payloads[1:])):
            raise ConfigError("anchor payloads must be strictly increasing")
        if any(b >= a for a, b in zip(speeds, speeds[1:])):
            raise ConfigError("anchor speeds must be strictly decreasing")
        if min(speeds) <= 0 or self.battery_endurance_s <= 0:
            raise ConfigError("anchor speeds and endurance must be positive")


# Effective (skid-calibrated) track width: chosen so that fully saturated
# counter-rotating wheels at the 3 kg anchor spin at exactly the anchored
# 0.35 rad/s while 0.50 m/s stays the straight-line maximum.
DEFAULT_TRACK_WIDTH_EFFECTIVE = 2.0 * 0.50 / 0.35


@dataclass
class RobotConfig:
    """Geometry, encoder, controller and calibration constants."""

    track_width_effective: float = DEFAULT_TRACK_WIDTH_EFFECTIVE
    wheel_radius: float = 0.1
    ticks_per_rev: int = 900
    control_rate: float = 100.0
    telemetry_rate: float = 10.0
    status_rate: float = 1.0
    watchdog_timeout: float = 0.5
    # PI gains sized against the 0.15 s motor lag: the integral zero sits
    # near the plant pole so a saturated start still settles within ~0.8 s
    kp: float = 0.8  # duty per (m/s)
    ki: float = 16.0  # duty per m
    # sliding window (control ticks) for the PI's speed estimate; pose
    # integration always uses raw per-tick counts
    speed_filter_ticks: int = 5
    payload_kg: float = 3.0
    motor_tau: float = 0.15
    encoder_noise_sigma: float = 0.0
    anchors: CalibrationAnchors = field(default_factory=CalibrationAnchors)

    def __post_init__(self):
        positive = (
            "track_width_effective",
            "wheel_radius",
            "ticks_per_rev",
            "control_rate",
            "telemetry_rate",
            "status_rate",
            "watchdog_timeout",
            "kp",
            "ki",
            "motor_tau",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.encoder_noise_sigma < 0:
            raise ConfigError("encoder_noise_sigma must be non-negative")
        if self.speed_filter_ticks < 1:
            raise ConfigError("speed_filter_ticks must be >= 1")
        if self.watchdog_timeout <= 1.0 / self.control_rate:
            raise ConfigError("watchdog_timeout must exceed the control period")
        for rate, name in ((self.telemetry_rate, "telemetry_rate"), (self.status_rate, "status_rate")):
            ratio = self.control_rate / rate
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError(f"control_rate must be an integer multiple of {name}")
        lo, hi = self.anchors.v_max_points[0][0], self.anchors.v_max_points[-1][0]
        if not lo <= self.payload_kg <= hi:
            raise ConfigError(
                f"payload_kg {self.payload_kg} outside the calibrated envelope {lo}..{hi} kg"
            )

    @property
    def control_period(self) -> float:
        return 1.0 / self.control_rate

    @property
    def ticks_per_telemetry(self) -> int:
        return round(self.control_rate / self.telemetry_rate)

    @property
    def ticks_per_status(self) -> int:
        return round(self.control_rate / self.status_rate)


@dataclass
class StackSettings:
    """Harness-level settings: identity, listeners, simulation step."""

    robot_id: str = "alpha"
    bind_host: str = "127.0.0.1"
    tcp_port: int = 1883
    ws_port: int = 9001
    ws_path: str = "/mqtt"
    plant_dt: float = 0.001  # plant substeps at 1 kHz vs 100 Hz control
    seed: int = 0

    def __post_init__(self):
        if not self.robot_id or any(c in self.robot_id for c in "/+#"):
            raise ConfigError(f"invalid robot_id {self.robot_id!r}")
        if self.plant_dt <= 0:
            raise ConfigError("plant_dt must be positive")


_ANCHOR_KEYS = ("v_max_anchors", "omega_max_anchor", "battery_endurance_s")
_ROBOT_KEYS = {f.name for f in fields(RobotConfig)} - {"anchors"}
_STACK_KEYS = {f.name for f in fields(StackSettings)}
_INT_KEYS = {"ticks_per_rev", "speed_filter_ticks", "tcp_port", "ws_port", "seed"}
_STR_KEYS = {"robot_id", "bind_host", "ws_path"}


def parse_config_lines(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_anchor_points(value: str, key: str) -> tuple[tuple[float, float], ...]:
    points = []
    for chunk in value.split(","):
        chunk = chunk.strip()
        if ":" not in chunk:
            raise ConfigError(f"{key}: expected 'payload:value', got {chunk!r}")
        payload, speed = chunk.split(":", 1)
        try:
            points.append((float(payload), float(speed)))
        except ValueError:
            raise ConfigError(f"{key}: non-numeric pair {chunk!r}") from None
    return tuple(points)


def apply_config(
    values: dict[str, str],
    robot: RobotConfig | None = None,
    stack: StackSettings | None = None,
) -> tuple[RobotConfig, StackSettings]:
    """Overlay string config values on top of existing/default objects."""
    robot = robot if robot is not None else RobotConfig()
    stack = stack if stack is not None else StackSettings()
    robot_updates: dict = {}
    stack_updates: dict = {}
    anchors = robot.anchors
    for key, value in values.items():
        try:
            if key == "v_max_anchors":
                anchors = replace(anchors, v_max_points=_parse_anchor_points(value, key))
            elif key == "omega_max_anchor":
                (point,) = _parse_anchor_points(value, key)
                anchors = replace(anchors, omega_max_point=point)
            elif key == "battery_endurance_s":
                anchors = replace(anchors, battery_endurance_s=float(value))
            elif key in _ROBOT_KEYS:
                robot_updates[key] = int(value) if key in _INT_KEYS else float(value)
            elif key in _STACK_KEYS:
                if key in _STR_KEYS:
                    stack_updates[key] = value
                elif key in _INT_KEYS:
                    stack_updates[key] = int(value)
                else:
                    stack_updates[key] = float(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"invalid value for {key!r}: {value!r}") from None
    new_robot = replace(robot, anchors=anchors, **robot_updates)
    new_stack = replace(stack, **stack_updates)
    return new_robot, new_stack


def load_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_lines(text)
