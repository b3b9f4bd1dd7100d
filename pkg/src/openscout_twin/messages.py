"""ROS2-message-subset wire format carried over MQTT.

The robot does not run ROS2; it reads and writes a small JSON rendering
of the Twist/Odometry shapes plus a flat status record, under a fixed
topic scheme:

    openscout/<robot-id>/cmd_vel   Twist commands, PC -> robot
    openscout/<robot-id>/odom      odometry telemetry, robot -> PC
    openscout/<robot-id>/status    retained liveness/battery record

Pose is deliberately planar (x, y, theta) and only linear.x / angular.z
of Twist are honoured; the other components are accepted on the wire and
fixed at zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .kinematics import wrap_angle

TOPIC_ROOT = "openscout"
CHANNELS = ("cmd_vel", "odom", "status")


class MessageError(ValueError):
    """Payload or field violates the wire contract."""


def topic_for(robot_id: str, channel: str) -> str:
    """Topic name for one robot channel, e.g. ``openscout/alpha/odom``."""
    if channel not in CHANNELS:
        raise MessageError(f"unknown channel {channel!r}, expected one of {CHANNELS}")
    if not robot_id or any(c in robot_id for c in "/+#"):
        raise MessageError(f"invalid robot id {robot_id!r}")
    return f"{TOPIC_ROOT}/{robot_id}/{channel}"


@dataclass(frozen=True)
class Twist:
    """Commanded body velocity: linear m/s, angular rad/s."""

    linear_x: float = 0.0
    angular_z: float = 0.0


@dataclass(frozen=True)
class OdomSample:
    stamp: float
    x: float
    y: float
    theta: float
    twist: Twist


@dataclass(frozen=True)
class StatusSample:
    online: bool
    battery_pct: float = 0.0
    watchdog_tripped: bool = False
    uptime_s: float = 0.0
    payload_kg: float = 0.0


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MessageError(f"{name} is not a number: {value!r}")
    if not math.isfinite(value):
        raise MessageError(f"{name} is not finite: {value!r}")
    return float(value)


def _require_finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise MessageError(f"{name} is not finite: {value!r}")
    return float(value)


def _load_object(payload: bytes | bytearray | str, what: str) -> dict:
    try:
        doc = json.loads(payload)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MessageError(f"{what} payload is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MessageError(f"{what} payload is not a JSON object")
    return doc


def parse_twist(payload: bytes | bytearray | str) -> Twist:
    """Parse a cmd_vel payload; missing nested fields default to zero."""
    doc = _load_object(payload, "cmd_vel")
    out = []
    for group, axis in (("linear", "x"), ("angular", "z")):
        sub = doc.get(group, {})
        if not isinstance(sub, dict):
            raise MessageError(f"cmd_vel {group!r} is not an object")
        out.append(_number(sub.get(axis, 0.0), f"{group}.{axis}"))
    return Twist(out[0], out[1])


def serialize_twist(t: Twist) -> bytes:
    _require_finite(t.linear_x, "linear.x")
    _require_finite(t.angular_z, "angular.z")
    doc = {
        "linear": {"x": t.linear_x, "y": 0.0, "z": 0.0},
        "angular": {"x": 0.0, "y": 0.0, "z": t.angular_z},
    }
    return json.dumps(doc).encode()


def serialize_odom(o: OdomSample) -> bytes:
    doc = {
        "header": {"stamp": _require_finite(o.stamp, "stamp"), "frame_id": "odom"},
        "pose": {
            "x": _require_finite(o.x, "x"),
            "y": _require_finite(o.y, "y"),
            "theta": wrap_angle(_require_finite(o.theta, "theta")),
        },
        "twist": {
            "linear": _require_finite(o.twist.linear_x, "twist.linear"),
            "angular": _require_finite(o.twist.angular_z, "twist.angular"),
        },
    }
    return json.dumps(doc).encode()


def parse_odom(payload: bytes | bytearray | str) -> OdomSample:
    doc = _load_object(payload, "odom")
    try:
        header = doc["header"]
        pose = doc["pose"]
        twist = doc["twist"]
    except (KeyError, TypeError):
        raise MessageError("odom payload missing header/pose/twist") from None
    if not all(isinstance(part, dict) for part in (header, pose, twist)):
        raise MessageError("odom header/pose/twist must be objects")
    return OdomSample(
        stamp=_number(header.get("stamp"), "stamp"),
        x=_number(pose.get("x"), "x"),
        y=_number(pose.get("y"), "y"),
        theta=_number(pose.get("theta"), "theta"),
        twist=Twist(
            _number(twist.get("linear"), "twist.linear"),
            _number(twist.get("angular"), "twist.angular"),
        ),
    )


def serialize_status(s: StatusSample) -> bytes:
    battery = _require_finite(s.battery_pct, "battery_pct")
    if not 0.0 <= battery <= 100.0:
        raise MessageError(f"battery_pct {battery} outside 0..100")
    doc = {
        "online": bool(s.online),
        "battery_pct": battery,
        "watchdog_tripped": bool(s.watchdog_tripped),
        "uptime_s": _require_finite(s.uptime_s, "uptime_s"),
        "payload_kg": _require_finite(s.payload_kg, "payload_kg"),
    }
    return json.dumps(doc).encode()


def parse_status(payload: bytes | bytearray | str) -> StatusSample:
    """Parse a status payload; everything but ``online`` has a default."""
    doc = _load_object(payload, "status")
    if "online" not in doc or not isinstance(doc["online"], bool):
        raise MessageError("status payload needs a boolean 'online' field")
    battery = _number(doc.get("battery_pct", 0.0), "battery_pct")
    if not 0.0 <= battery <= 100.0:
        raise MessageError(f"battery_pct {battery} outside 0..100")
    tripped = doc.get("watchdog_tripped", False)
    if not isinstance(tripped, bool):
        raise MessageError("watchdog_tripped must be a boolean")
    return StatusSample(
        online=doc["online"],
        battery_pct=battery,
        watchdog_tripped=tripped,
        uptime_s=_number(doc.get("uptime_s", 0.0), "uptime_s"),
        payload_kg=_number(doc.get("payload_kg", 0.0), "payload_kg"),
    )


def offline_status_payload() -> bytes:
    """Will/offline marker retained on the status topic."""
    return json.dumps({"online": False}).encode()
