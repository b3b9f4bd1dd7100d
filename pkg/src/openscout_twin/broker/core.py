"""Transport-agnostic MQTT broker core.

One logical owner of all session state: transports (TCP, WebSocket,
in-memory loopback) push raw bytes in via :meth:`BrokerCore.data_received`
and receive encoded packets back through their ``send`` callable.  The
core never spawns tasks or touches sockets, which makes it equally at
home under asyncio with a monotonic clock or under the harness's virtual
clock where every interaction is synchronous and deterministic.

Scope: QoS 0 delivery, retained messages, last will, keep-alive expiry
at 1.5x, client-id takeover.  QoS 1/2 flows, persistence and auth are
out of scope; a QoS > 0 publish is a protocol violation that costs the
sender its connection.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from ..mqtt import (
    CONNACK_ACCEPTED,
    CONNACK_IDENTIFIER_REJECTED,
    CONNACK_UNACCEPTABLE_PROTOCOL,
    DEFAULT_MAX_PACKET_SIZE,
    PROTOCOL_LEVEL,
    PROTOCOL_NAME,
    SUBACK_FAILURE,
    ConnAck,
    Connect,
    Disconnect,
    InvalidFilterError,
    InvalidTopicError,
    Packet,
    PingReq,
    PingResp,
    ProtocolError,
    Publish,
    StreamDecoder,
    SubAck,
    Subscribe,
    TopicFilter,
    UnsubAck,
    Unsubscribe,
    Will,
    encode_packet,
    topic_matches,
    validate_filter,
    validate_topic,
)

log = logging.getLogger(__name__)

KEEPALIVE_GRACE = 1.5  # standard grace factor on the keep-alive interval


class Transport(Protocol):
    """What the core needs from a transport: ordered writes and a close."""

    def send(self, data: bytes) -> None: ...

    def close(self) -> None: ...


@dataclass
class Session:
    """Live client session; exists only between CONNECT and close."""

    client_id: str
    keepalive: int
    will: Will | None
    subscriptions: dict[str, TopicFilter] = field(default_factory=dict)
    last_activity: float = 0.0


class Connection:
    """Per-transport connection state; handle returned by connection_made."""

    __slots__ = ("transport", "decoder", "session", "closed")

    def __init__(self, transport: Transport, max_packet_size: int):
        self.transport = transport
        self.decoder = StreamDecoder(max_packet_size)
        self.session: Session | None = None
        self.closed = False


class BrokerCore:
    def __init__(
        self,
        *,
        clock: Callable[[], float] = time.monotonic,
        max_packet_size: int = DEFAULT_MAX_PACKET_SIZE,
    ):
        self._clock = clock
        self._max_packet_size = max_packet_size
        self._live: dict[str, Connection] = {}  # client-id -> connection
        self.retained: dict[str, bytes] = {}
        self._anon_counter = 0

    # -- transport lifecycle -------------------------------------------------

    def connection_made(self, transport: Transport) -> Connection:
        return Connection(transport, self._max_packet_size)

    def connection_lost(self, conn: Connection) -> None:
        """The transport saw the socket die (abrupt: the will fires)."""
        self._close(conn, abrupt=True)

    def data_received(self, conn: Connection, data: bytes) -> None:
        if conn.closed:
            return
        try:
            packets = conn.decoder.feed(data)
        except ProtocolError as exc:
            log.debug("protocol error from %s: %s", _conn_name(conn), exc)
            self._close(conn, abrupt=True)
            return
        for packet in packets:
            if conn.closed:
                break
            self._handle(conn, packet)

    def session_count(self) -> int:
        return len(self._live)

    def session_ids(self) -> list[str]:
        return list(self._live)

    # -- timers ---------------------------------------------------------------

    def sweep(self, now: float | None = None) -> list[str]:
        """Expire sessions silent for more than 1.5x their keep-alive.

        Call at least every 0.5 s of broker time.  Returns the client ids
        closed, mainly for tests and logging.
        """
        now = self._clock() if now is None else now
        expired = [
            conn
            for conn in list(self._live.values())
            if conn.session is not None
            and conn.session.keepalive > 0
            and now - conn.session.last_activity > KEEPALIVE_GRACE * conn.session.keepalive
        ]
        names = [conn.session.client_id for conn in expired]
        for conn in expired:
            log.debug("keepalive expiry for %s", _conn_name(conn))
            self._close(conn, abrupt=True)
        return names

    # -- packet handling -------------------------------------------------------

    def _handle(self, conn: Connection, packet: Packet) -> None:
        if conn.session is None:
            if isinstance(packet, Connect):
                self._handle_connect(conn, packet)
            else:
                # first packet must be CONNECT; close silently
                self._close(conn, abrupt=False)
            return
        conn.session.last_activity = self._clock()
        if isinstance(packet, Publish):
            self._handle_publish(conn, packet)
        elif isinstance(packet, Subscribe):
            self._handle_subscribe(conn, packet)
        elif isinstance(packet, Unsubscribe):
            self._handle_unsubscribe(conn, packet)
        elif isinstance(packet, PingReq):
            self._send(conn, encode_packet(PingResp()))
        elif isinstance(packet, Disconnect):
            conn.session.will = None  # graceful: will suppressed
            self._close(conn, abrupt=False)
        else:
            # second CONNECT, or a server-to-client packet from a client
            self._close(conn, abrupt=True)

    def _handle_connect(self, conn: Connection, packet: Connect) -> None:
        if packet.protocol_name != PROTOCOL_NAME or packet.protocol_level != PROTOCOL_LEVEL:
            self._send(conn, encode_packet(ConnAck(CONNACK_UNACCEPTABLE_PROTOCOL)))
            self._close(conn, abrupt=False)
            return
        client_id = packet.client_id
        if not client_id:
            if not packet.clean_session:
                self._send(conn, encode_packet(ConnAck(CONNACK_IDENTIFIER_REJECTED)))
                self._close(conn, abrupt=False)
                return
            self._anon_counter += 1
            client_id = f"anon-{self._anon_counter}"
        previous = self._live.get(client_id)
        if previous is not None:
            # takeover: the older session is treated as abruptly lost
            log.debug("session takeover for %r", client_id)
            self._close(previous, abrupt=True)
        conn.session = Session(
            client_id=client_id,
            keepalive=packet.keepalive,
            will=packet.will,
            last_activity=self._clock(),
        )
        self._live[client_id] = conn
        # CleanSession=0 is accepted but treated as clean: session-present 0
        self._send(conn, encode_packet(ConnAck(CONNACK_ACCEPTED, session_present=False)))

    def _handle_publish(self, conn: Connection, packet: Publish) -> None:
        if packet.qos != 0:
            log.debug("qos %d publish from %s refused", packet.qos, _conn_name(conn))
            self._close(conn, abrupt=True)
            return
        try:
            validate_topic(packet.topic)
        except InvalidTopicError:
            self._close(conn, abrupt=True)
            return
        if packet.retain:
            if len(packet.payload) == 0:
                self.retained.pop(packet.topic, None)
            else:
                self.retained[packet.topic] = packet.payload
        self._route(packet.topic, packet.payload)

    def _handle_subscribe(self, conn: Connection, packet: Subscribe) -> None:
        session = conn.session
        codes = []
        granted: list[TopicFilter] = []
        for filter_str, _requested_qos in packet.filters:
            try:
                parsed = validate_filter(filter_str)
            except InvalidFilterError:
                codes.append(SUBACK_FAILURE)
                continue
            session.subscriptions[str(parsed)] = parsed  # re-subscribe replaces
            granted.append(parsed)
            codes.append(0x00)
        self._send(conn, encode_packet(SubAck(packet.packet_id, tuple(codes))))
        # retained replay, deduplicated per topic across this packet's filters
        replayed: dict[str, bytes] = {}
        for parsed in granted:
            for topic, payload in self.retained.items():
                if topic not in replayed and topic_matches(parsed, topic):
                    replayed[topic] = payload
        for topic, payload in replayed.items():
            self._send(conn, encode_packet(Publish(topic, payload, retain=True)))

    def _handle_unsubscribe(self, conn: Connection, packet: Unsubscribe) -> None:
        for filter_str in packet.filters:
            conn.session.subscriptions.pop(filter_str, None)
        self._send(conn, encode_packet(UnsubAck(packet.packet_id)))

    # -- delivery ----------------------------------------------------------------

    def _route(self, topic: str, payload: bytes) -> None:
        """Deliver once per live session holding at least one matching filter."""
        frame = encode_packet(Publish(topic, payload, retain=False))
        for conn in list(self._live.values()):
            session = conn.session
            if session is None or conn.closed:
                continue
            if any(topic_matches(f, topic) for f in session.subscriptions.values()):
                self._send(conn, frame)

    def _send(self, conn: Connection, frame: bytes) -> None:
        if conn.closed:
            return
        try:
            conn.transport.send(frame)
        except Exception:
            log.debug("write to %s failed; dropping connection", _conn_name(conn))
            self._close(conn, abrupt=True)

    def _close(self, conn: Connection, *, abrupt: bool) -> None:
        if conn.closed:
            return
        conn.closed = True
        session, conn.session = conn.session, None
        if session is not None and self._live.get(session.client_id) is conn:
            del self._live[session.client_id]
        try:
            conn.transport.close()
        except Exception:
            pass
        if abrupt and session is not None and session.will is not None:
            will = session.will
            if will.retain:
                if len(will.payload) == 0:
                    self.retained.pop(will.topic, None)
                else:
                    self.retained[will.topic] = will.payload
            self._route(will.topic, will.payload)


def _conn_name(conn: Connection) -> str:
    return conn.session.client_id if conn.session else "<pre-connect>"
