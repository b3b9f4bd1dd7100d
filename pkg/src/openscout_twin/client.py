"""MQTT client machinery: a sans-io session plus two wrappers.

:class:`LoopbackClient` talks to an in-process :class:`BrokerCore`
synchronously (used by the emulated robot and the fast-mode harness, so
the whole stack runs deterministically under a virtual clock).
:class:`MqttClient` is the asyncio TCP client behind the ``pub`` and
``echo`` utilities and the integration tests.
"""

from __future__ import annotations

import asyncio
import itertools
from collections import deque

from .broker.core import BrokerCore, Connection
from .mqtt import (
    CONNACK_ACCEPTED,
    ConnAck,
    Connect,
    Disconnect,
    Packet,
    PingReq,
    PingResp,
    ProtocolError,
    Publish,
    StreamDecoder,
    SubAck,
    Subscribe,
    UnsubAck,
    Unsubscribe,
    Will,
    encode_packet,
)


class MqttClientError(Exception):
    """Connection refused, protocol violation, or broker rejection."""


class ClientSession:
    """Sans-io client-side protocol state: builds frames, decodes replies."""

    def __init__(
        self,
        client_id: str,
        *,
        keepalive: int = 0,
        clean_session: bool = True,
        will: Will | None = None,
    ):
        self.client_id = client_id
        self.keepalive = keepalive
        self.clean_session = clean_session
        self.will = will
        self._decoder = StreamDecoder()
        self._packet_ids = itertools.cycle(range(1, 0x10000))

    def next_packet_id(self) -> int:
        return next(self._packet_ids)

    def connect_frame(self) -> bytes:
        return encode_packet(
            Connect(
                self.client_id,
                clean_session=self.clean_session,
                keepalive=self.keepalive,
                will=self.will,
            )
        )

    def publish_frame(self, topic: str, payload: bytes, *, retain: bool = False) -> bytes:
        return encode_packet(Publish(topic, payload, retain=retain))

    def subscribe_frame(self, *filters: str) -> tuple[int, bytes]:
        packet_id = self.next_packet_id()
        frame = encode_packet(Subscribe(packet_id, tuple((f, 0) for f in filters)))
        return packet_id, frame

    def unsubscribe_frame(self, *filters: str) -> tuple[int, bytes]:
        packet_id = self.next_packet_id()
        return packet_id, encode_packet(Unsubscribe(packet_id, tuple(filters)))

    def pingreq_frame(self) -> bytes:
        return encode_packet(PingReq())

    def disconnect_frame(self) -> bytes:
        return encode_packet(Disconnect())

    def feed(self, data: bytes) -> list[Packet]:
        return self._decoder.feed(data)


class _LoopbackTransport:
    """Broker-side view of an in-memory connection."""

    def __init__(self, on_bytes, on_close):
        self._on_bytes = on_bytes
        self._on_close = on_close
        self.closed = False

    def send(self, data: bytes) -> None:
        if not self.closed:
            self._on_bytes(data)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._on_close()


class LoopbackClient:
    """Synchronous in-process MQTT client bound to a :class:`BrokerCore`.

    Every call runs to completion inside the broker core before
    returning, so behaviour is a pure function of the call order: ideal
    under the harness's virtual clock.
    """

    def __init__(
        self,
        core: BrokerCore,
        client_id: str,
        *,
        keepalive: int = 0,
        will: Will | None = None,
    ):
        self._core = core
        self._session = ClientSession(client_id, keepalive=keepalive, will=will)
        self._events: deque[Packet] = deque()
        self.connected = False
        self._transport = _LoopbackTransport(self._ingest, self._closed_by_broker)
        self._conn: Connection = core.connection_made(self._transport)

    def _ingest(self, data: bytes) -> None:
        self._events.extend(self._session.feed(data))

    def _closed_by_broker(self) -> None:
        self.connected = False

    def _write(self, frame: bytes) -> None:
        self._core.data_received(self._conn, frame)

    def connect(self) -> None:
        self._write(self._session.connect_frame())
        ack = self._take(ConnAck)
        if ack.return_code != CONNACK_ACCEPTED:
            raise MqttClientError(f"broker refused connection: code {ack.return_code}")
        self.connected = True

    def subscribe(self, *filters: str) -> tuple[int, ...]:
        packet_id, frame = self._session.subscribe_frame(*filters)
        self._write(frame)
        ack = self._take(SubAck)
        if ack.packet_id != packet_id:
            raise MqttClientError("SUBACK packet id mismatch")
        return ack.return_codes

    def unsubscribe(self, *filters: str) -> None:
        packet_id, frame = self._session.unsubscribe_frame(*filters)
        self._write(frame)
        ack = self._take(UnsubAck)
        if ack.packet_id != packet_id:
            raise MqttClientError("UNSUBACK packet id mismatch")

    def publish(self, topic: str, payload: bytes, *, retain: bool = False) -> None:
        self._write(self._session.publish_frame(topic, payload, retain=retain))

    def ping(self) -> None:
        self._write(self._session.pingreq_frame())

    def disconnect(self) -> None:
        if self.connected:
            self._write(self._session.disconnect_frame())
            self.connected = False

    def drop(self) -> None:
        """Simulate abrupt socket loss (the broker fires the will)."""
        self._core.connection_lost(self._conn)
        self.connected = False

    def drain_publishes(self) -> list[Publish]:
        """Remove and return all queued PUBLISH deliveries, oldest first."""
        out = [p for p in self._events if isinstance(p, Publish)]
        self._events = deque(p for p in self._events if not isinstance(p, Publish))
        return out

    def _take(self, kind: type) -> Packet:
        for i, packet in enumerate(self._events):
            if isinstance(packet, kind):
                del self._events[i]
                return packet
        raise MqttClientError(f"no {kind.__name__} received")


class MqttClient:
    """Asyncio TCP client for the pub/echo utilities and tests."""

    def __init__(
        self,
        session: ClientSession,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
    ):
        self._session = session
        self._reader = reader
        self._writer = writer
        self.inbox: asyncio.Queue[Publish] = asyncio.Queue()
        self._acks: asyncio.Queue[Packet] = asyncio.Queue()
        self._connack: asyncio.Future[ConnAck] = asyncio.get_running_loop().create_future()
        self._reader_task = asyncio.create_task(self._read_loop())
        self._ping_task: asyncio.Task | None = None
        self.closed = asyncio.Event()

    @classmethod
    async def connect(
        cls,
        host: str,
        port: int,
        client_id: str,
        *,
        keepalive: int = 30,
        will: Will | None = None,
        timeout: float = 5.0,
    ) -> "MqttClient":
        try:
            reader, writer = await asyncio.wait_for(
                asyncio.open_connection(host, port), timeout
            )
        except (OSError, asyncio.TimeoutError) as exc:
            raise MqttClientError(f"cannot connect to {host}:{port}: {exc}") from None
        session = ClientSession(client_id, keepalive=keepalive, will=will)
        client = cls(session, reader, writer)
        writer.write(session.connect_frame())
        try:
            ack = await asyncio.wait_for(client._connack, timeout)
        except asyncio.TimeoutError:
            await client.close()
            raise MqttClientError("timed out waiting for CONNACK") from None
        if ack.return_code != CONNACK_ACCEPTED:
            await client.close()
            raise MqttClientError(f"broker refused connection: code {ack.return_code}")
        if keepalive > 0:
            client._ping_task = asyncio.create_task(client._ping_loop(keepalive))
        return client

    async def _read_loop(self) -> None:
        try:
            while True:
                data = await self._reader.read(65536)
                if not data:
                    break
                for packet in self._session.feed(data):
                    if isinstance(packet, ConnAck):
                        if not self._connack.done():
                            self._connack.set_result(packet)
                    elif isinstance(packet, Publish):
                        self.inbox.put_nowait(packet)
                    elif isinstance(packet, (SubAck, UnsubAck)):
                        self._acks.put_nowait(packet)
                    # PingResp needs no action
        except (ProtocolError, OSError):
            pass
        finally:
            self.closed.set()
            if not self._connack.done():
                self._connack.set_exception(MqttClientError("connection closed"))
                self._connack.exception()  # consumed; avoid un-retrieved warnings

    async def _ping_loop(self, keepalive: int) -> None:
        interval = max(keepalive / 2.0, 0.5)
        while not self.closed.is_set():
            await asyncio.sleep(interval)
            if self.closed.is_set():
                return
            self._writer.write(self._session.pingreq_frame())

    async def subscribe(self, *filters: str, timeout: float = 5.0) -> tuple[int, ...]:
        packet_id, frame = self._session.subscribe_frame(*filters)
        self._writer.write(frame)
        ack = await asyncio.wait_for(self._acks.get(), timeout)
        if not isinstance(ack, SubAck) or ack.packet_id != packet_id:
            raise MqttClientError("unexpected acknowledgement to SUBSCRIBE")
        return ack.return_codes

    async def publish(self, topic: str, payload: bytes, *, retain: bool = False) -> None:
        self._writer.write(self._session.publish_frame(topic, payload, retain=retain))
        await self._writer.drain()

    async def disconnect(self) -> None:
        if not self.closed.is_set():
            self._writer.write(self._session.disconnect_frame())
            try:
                await self._writer.drain()
            except OSError:
                pass
        await self.close()

    async def close(self) -> None:
        if self._ping_task is not None:
            self._ping_task.cancel()
        self._reader_task.cancel()
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except OSError:
            pass
        self.closed.set()
