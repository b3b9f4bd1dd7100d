"""Scenario files: timed commands, payload changes and assertions.

Line-oriented format, '#' starts a comment:

    SEED 7                         # optional
    DURATION 6.0                   # optional, defaults to last event time
    AT 0.0 CMD 0.5 0.0             # publish a Twist (v m/s, omega rad/s)
    AT 2.0 PAYLOAD 6               # change payload mass
    AT 5.0 ASSERT speed 0.5 2%     # relative tolerance
    AT 5.5 ASSERT omega 0 0.01     # bare number = absolute tolerance

Event times must be non-decreasing.  Metrics sample ground truth
(``speed omega x y theta battery``) or the last received odometry
(``odom_speed odom_omega``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .messages import Twist

METRICS = ("speed", "omega", "x", "y", "theta", "battery", "odom_speed", "odom_omega")

PAYLOAD_ENVELOPE = (0.0, 6.0)


class ScenarioError(ValueError):
    """Unparseable scenario text."""


@dataclass(frozen=True)
class CmdEvent:
    time: float
    twist: Twist


@dataclass(frozen=True)
class PayloadEvent:
    time: float
    payload_kg: float


@dataclass(frozen=True)
class AssertEvent:
    time: float
    metric: str
    target: float
    tolerance: float
    relative: bool

    def bound(self) -> float:
        return self.tolerance * abs(self.target) if self.relative else self.tolerance


Event = CmdEvent | PayloadEvent | AssertEvent


@dataclass
class Scenario:
    events: list[Event] = field(default_factory=list)
    duration: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("event times must be non-decreasing")
        last = times[-1] if times else 0.0
        if self.duration <= 0.0:
            self.duration = last
        if self.duration < last:
            raise ScenarioError(
                f"duration {self.duration} is before the last event at {last}"
            )


def _parse_float(token: str, what: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ScenarioError(f"line {lineno}: {what} is not a number: {token!r}") from None
    if not math.isfinite(value):
        raise ScenarioError(f"line {lineno}: {what} must be finite")
    return value


def parse_scenario(text: str) -> Scenario:
    events: list[Event] = []
    duration = 0.0
    seed: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0].upper()
        if keyword == "SEED":
            if len(tokens) != 2 or not tokens[1].lstrip("-").isdigit():
                raise ScenarioError(f"line {lineno}: SEED takes one integer")
            seed = int(tokens[1])
            continue
        if keyword == "DURATION":
            if len(tokens) != 2:
                raise ScenarioError(f"line {lineno}: DURATION takes one number")
            duration = _parse_float(tokens[1], "duration", lineno)
            continue
        if keyword != "AT":
            raise ScenarioError(f"line {lineno}: expected AT/SEED/DURATION, got {tokens[0]!r}")
        if len(tokens) < 3:
            raise ScenarioError(f"line {lineno}: truncated event")
        time = _parse_float(tokens[1], "event time", lineno)
        if time < 0:
            raise ScenarioError(f"line {lineno}: event time must be >= 0")
        verb = tokens[2].upper()
        args = tokens[3:]
        if verb == "CMD":
            if len(args) != 2:
                raise ScenarioError(f"line {lineno}: CMD takes <v> <omega>")
            events.append(
                CmdEvent(
                    time,
                    Twist(
                        _parse_float(args[0], "v", lineno),
                        _parse_float(args[1], "omega", lineno),
                    ),
                )
            )
        elif verb == "PAYLOAD":
            if len(args) != 1:
                raise ScenarioError(f"line {lineno}: PAYLOAD takes <kg>")
            kg = _parse_float(args[0], "payload", lineno)
            lo, hi = PAYLOAD_ENVELOPE
            if not lo <= kg <= hi:
                raise ScenarioError(
                    f"line {lineno}: payload {kg} kg outside envelope {lo}..{hi} kg"
                )
            events.append(PayloadEvent(time, kg))
        elif verb == "ASSERT":
            if len(args) != 3:
                raise ScenarioError(f"line {lineno}: ASSERT takes <metric> <target> <tol>")
            metric = args[0].lower()
            if metric not in METRICS:
                raise ScenarioError(
                    f"line {lineno}: unknown metric {args[0]!r}, expected one of {METRICS}"
                )
            target = _parse_float(args[1], "target", lineno)
            tol_token = args[2]
            relative = tol_token.endswith("%")
            tol = _parse_float(tol_token.rstrip("%"), "tolerance", lineno)
            if relative:
                tol /= 100.0
            if tol < 0:
                raise ScenarioError(f"line {lineno}: tolerance must be >= 0")
            events.append(AssertEvent(time, metric, target, tol, relative))
        else:
            raise ScenarioError(f"line {lineno}: unknown event verb {tokens[2]!r}")
    return Scenario(events, duration, seed)


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text)
