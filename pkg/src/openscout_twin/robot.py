"""One simulated robot: plant + firmware wired to the broker as a client.

The agent owns the closed loop.  Each control period it advances the
plant through its 1 kHz substeps under the duties held from the last
tick, accumulates encoder counts, drains cmd_vel deliveries from its
MQTT subscription, runs one firmware tick, and publishes whatever
telemetry the firmware emitted.  Connecting through the in-process
loopback transport keeps the whole robot synchronous and deterministic;
the real-time service just paces calls to :meth:`control_step`.
"""

from __future__ import annotations

from dataclasses import replace

from .broker.core import BrokerCore
from .client import LoopbackClient
from .config import RobotConfig, StackSettings
from .firmware import FirmwareEmu
from .messages import StatusSample, offline_status_payload, serialize_status, topic_for
from .mqtt import Will
from .plant import Plant


class RobotAgent:
    def __init__(
        self,
        core: BrokerCore,
        cfg: RobotConfig,
        settings: StackSettings,
    ):
        # private copy: payload changes at run time must not leak into the
        # caller's config (anchors are frozen, shallow copy suffices)
        self.cfg = cfg = replace(cfg)
        self.robot_id = settings.robot_id
        self.plant = Plant(cfg, seed=settings.seed)
        self.firmware = FirmwareEmu(cfg)
        self._substeps = max(1, round(cfg.control_period / settings.plant_dt))
        self._plant_dt = cfg.control_period / self._substeps
        self._cmd_topic = topic_for(self.robot_id, "cmd_vel")
        self._odom_topic = topic_for(self.robot_id, "odom")
        self._status_topic = topic_for(self.robot_id, "status")
        self.client = LoopbackClient(
            core,
            f"robot-{self.robot_id}",
            will=Will(self._status_topic, offline_status_payload(), retain=True),
        )
        self.duty_left = 0.0
        self.duty_right = 0.0

    @property
    def plant_dt(self) -> float:
        return self._plant_dt

    @property
    def substeps_per_tick(self) -> int:
        return self._substeps

    def start(self) -> None:
        """Connect, subscribe to commands, mark the robot present.

        The initial retained status goes out synchronously so a client
        connecting at any point after start sees the robot online.
        """
        self.client.connect()
        codes = self.client.subscribe(self._cmd_topic)
        if codes != (0,):
            raise RuntimeError(f"broker refused cmd_vel subscription: {codes}")
        boot_status = StatusSample(
            online=True,
            battery_pct=self.plant.state.battery_pct,
            watchdog_tripped=False,
            uptime_s=0.0,
            payload_kg=self.cfg.payload_kg,
        )
        self.client.publish(
            self._status_topic, serialize_status(boot_status), retain=True
        )

    def control_step(self) -> None:
        """Advance one control period: plant substeps, then firmware tick."""
        deltas = [0, 0, 0, 0]
        for _ in range(self._substeps):
            ticks = self.plant.step(self.duty_left, self.duty_right, self._plant_dt)
            for i in range(4):
                deltas[i] += ticks[i]
        inbox = [
            p.payload
            for p in self.client.drain_publishes()
            if p.topic == self._cmd_topic
        ]
        out = self.firmware.tick(inbox, tuple(deltas), self.plant.state.battery_pct)
        self.duty_left, self.duty_right = out.duty_left, out.duty_right
        for publish in out.publishes:
            topic = self._odom_topic if publish.channel == "odom" else self._status_topic
            self.client.publish(topic, publish.payload, retain=publish.retain)

    def shutdown(self) -> None:
        """Graceful stop: retained offline status, then DISCONNECT (no will)."""
        if not self.client.connected:
            return
        offline = StatusSample(
            online=False,
            battery_pct=self.plant.state.battery_pct,
            watchdog_tripped=self.firmware.state.watchdog_tripped,
            uptime_s=self.firmware.state.clock,
            payload_kg=self.cfg.payload_kg,
        )
        self.client.publish(self._status_topic, serialize_status(offline), retain=True)
        self.client.disconnect()
