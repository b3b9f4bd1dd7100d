"""Real-time stack: broker listeners plus one paced robot.

The robot still talks to the broker core through the synchronous
loopback transport; only the *pacing* differs from fast mode.  A single
asyncio loop hosts the TCP/WebSocket listeners, the keep-alive sweep and
the control-rate scheduler, so session state never crosses tasks.
"""

from __future__ import annotations

import asyncio
import logging

from .broker.core import BrokerCore
from .broker.server import BrokerServer
from .config import RobotConfig, StackSettings
from .robot import RobotAgent

log = logging.getLogger(__name__)

DRIFT_LOG_PERIOD_S = 60.0


class StackError(RuntimeError):
    """Startup failure: port in use, bad bind address, broker refusal."""


class Stack:
    """Broker + robot service; start/stop from one event loop."""

    def __init__(self, cfg: RobotConfig, settings: StackSettings, *, realtime: bool = True):
        self.cfg = cfg
        self.settings = settings
        self.realtime = realtime
        self.core: BrokerCore | None = None
        self.server: BrokerServer | None = None
        self.agent: RobotAgent | None = None
        self._pacing_task: asyncio.Task | None = None

    async def start(self) -> None:
        loop = asyncio.get_running_loop()
        self.core = BrokerCore(clock=loop.time)
        self.server = BrokerServer(
            self.core,
            host=self.settings.bind_host,
            tcp_port=self.settings.tcp_port,
            ws_port=self.settings.ws_port,
            ws_path=self.settings.ws_path,
        )
        try:
            await self.server.start()
        except OSError as exc:
            raise StackError(f"cannot listen on requested ports: {exc}") from None
        self.agent = RobotAgent(self.core, self.cfg, self.settings)
        self.agent.start()
        self._pacing_task = asyncio.create_task(self._pacing_loop())
        log.info(
            "robot %r online (payload %.1f kg), broker tcp:%d ws:%d",
            self.settings.robot_id,
            self.cfg.payload_kg,
            self.server.tcp_port,
            self.server.ws_port,
        )

    async def _pacing_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = self.cfg.control_period
        start = loop.time()
        k = 0
        next_drift_log = DRIFT_LOG_PERIOD_S
        while True:
            k += 1
            target = start + k * period
            if self.realtime:
                delay = target - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
            elif k % 200 == 0:
                await asyncio.sleep(0)  # fast mode: stay cooperative
            self.agent.control_step()
            if self.realtime:
                elapsed = loop.time() - start
                if elapsed >= next_drift_log:
                    drift_ms = (loop.time() - target) * 1e3
                    log.info("virtual-clock drift after %.0fs: %.2f ms", elapsed, drift_ms)
                    next_drift_log += DRIFT_LOG_PERIOD_S

    async def stop(self) -> None:
        if self._pacing_task is not None:
            self._pacing_task.cancel()
            try:
                await self._pacing_task
            except asyncio.CancelledError:
                pass
            self._pacing_task = None
        if self.agent is not None:
            self.agent.shutdown()  # retained offline status + graceful DISCONNECT
            self.agent = None
        if self.server is not None:
            await self.server.stop()
            self.server = None

    @property
    def tcp_port(self) -> int:
        return self.server.tcp_port

    @property
    def ws_port(self) -> int:
        return self.server.ws_port


async def run_stack(
    cfg: RobotConfig,
    settings: StackSettings,
    *,
    realtime: bool = True,
    stop_event: asyncio.Event | None = None,
    ready_event: asyncio.Event | None = None,
) -> None:
    """Run until ``stop_event`` (or forever); clean shutdown on exit."""
    stack = Stack(cfg, settings, realtime=realtime)
    await stack.start()
    if ready_event is not None:
        ready_event.set()
    try:
        if stop_event is None:
            await asyncio.Event().wait()
        else:
            await stop_event.wait()
    finally:
        await stack.stop()
