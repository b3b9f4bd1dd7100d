"""Fast-mode stack: broker core, robot and operator under a virtual clock.

Strictly single-threaded.  The virtual clock only advances when
:meth:`SimStack.tick` runs one control period, and every MQTT hop is a
synchronous loopback call, so a run is a pure function of (config,
scenario, seed): the same inputs give bit-identical outputs.

The operator client stands in for the PC side of the pipeline: commands
injected through it traverse the real broker before the firmware sees
them, exactly like a networked client's would.
"""

from __future__ import annotations

from dataclasses import dataclass

from .broker.core import BrokerCore
from .client import LoopbackClient
from .config import RobotConfig, StackSettings
from .messages import OdomSample, Twist, parse_odom, serialize_twist, topic_for
from .robot import RobotAgent


@dataclass(frozen=True)
class TrajectoryRow:
    """One CSV row per telemetry tick."""

    time: float
    x: float
    y: float
    theta: float
    odom_x: float
    odom_y: float
    odom_theta: float
    wheel_left: float
    wheel_right: float
    duty_left: float
    duty_right: float
    battery_pct: float


CSV_HEADER = (
    "time,x,y,theta,odom_x,odom_y,odom_theta,"
    "wheel_left,wheel_right,duty_left,duty_right,battery_pct"
)


def format_csv_row(row: TrajectoryRow) -> str:
    values = (
        row.time,
        row.x,
        row.y,
        row.theta,
        row.odom_x,
        row.odom_y,
        row.odom_theta,
        row.wheel_left,
        row.wheel_right,
        row.duty_left,
        row.duty_right,
        row.battery_pct,
    )
    return ",".join(f"{v:.6g}" for v in values)


class SimStack:
    """Broker + robot + operator client advanced one control period at a time."""

    def __init__(self, cfg: RobotConfig, settings: StackSettings):
        self.settings = settings
        self._now = 0.0
        self._tick_count = 0
        self.core = BrokerCore(clock=lambda: self._now)
        self.robot = RobotAgent(self.core, cfg, settings)
        self.cfg = self.robot.cfg  # the robot's private copy (payload may change)
        self.operator = LoopbackClient(self.core, "operator")
        self._odom_topic = topic_for(settings.robot_id, "odom")
        self.rows: list[TrajectoryRow] = []
        self.last_odom: OdomSample | None = None
        self.robot.start()
        self.operator.connect()
        self.operator.subscribe(self._odom_topic)

    @property
    def now(self) -> float:
        return self._now

    def publish_cmd(self, twist: Twist) -> None:
        self.operator.publish(
            topic_for(self.settings.robot_id, "cmd_vel"), serialize_twist(twist)
        )

    def set_payload(self, payload_kg: float) -> None:
        self.robot.plant.set_payload(payload_kg)

    def tick(self) -> None:
        """Advance exactly one control period of virtual time."""
        self.robot.control_step()
        self._tick_count += 1
        self._now = self._tick_count * self.cfg.control_period
        self.core.sweep(self._now)
        for delivery in self.operator.drain_publishes():
            if delivery.topic != self._odom_topic:
                continue
            sample = parse_odom(delivery.payload)
            self.last_odom = sample
            plant = self.robot.plant.state
            self.rows.append(
                TrajectoryRow(
                    time=sample.stamp,
                    x=plant.x,
                    y=plant.y,
                    theta=plant.theta,
                    odom_x=sample.x,
                    odom_y=sample.y,
                    odom_theta=sample.theta,
                    wheel_left=plant.wheel_left,
                    wheel_right=plant.wheel_right,
                    duty_left=self.robot.duty_left,
                    duty_right=self.robot.duty_right,
                    battery_pct=plant.battery_pct,
                )
            )

    def run_for(self, seconds: float) -> None:
        for _ in range(round(seconds * self.cfg.control_rate)):
            self.tick()

    def metric(self, name: str) -> float:
        """Sample one scenario metric at the current instant."""
        plant = self.robot.plant.state
        if name == "speed":
            return 0.5 * (plant.wheel_left + plant.wheel_right)
        if name == "omega":
            return (plant.wheel_right - plant.wheel_left) / self.cfg.track_width_effective
        if name == "x":
            return plant.x
        if name == "y":
            return plant.y
        if name == "theta":
            return plant.theta
        if name == "battery":
            return plant.battery_pct
        if name == "odom_speed":
            return self.last_odom.twist.linear_x if self.last_odom else 0.0
        if name == "odom_omega":
            return self.last_odom.twist.angular_z if self.last_odom else 0.0
        raise ValueError(f"unknown metric {name!r}")

    def shutdown(self) -> None:
        self.robot.shutdown()
        self.operator.disconnect()
