"""Asyncio listeners feeding the sans-io broker core.

One event loop owns everything: per-connection reader tasks push bytes
into :class:`BrokerCore`, writes go straight to the stream writers, and
a periodic task runs the keep-alive sweep.  The WebSocket listener
performs the RFC 6455 upgrade, then forwards binary frame payloads into
the same core; MQTT packets may span frames freely.
"""

from __future__ import annotations

import asyncio
import logging

from .core import BrokerCore, Connection
from .websocket import (
    MAX_HEADER_BYTES,
    OP_BINARY,
    OP_CLOSE,
    OP_CONT,
    OP_PING,
    OP_PONG,
    OP_TEXT,
    FrameParser,
    WebSocketError,
    build_handshake_response,
    check_handshake_request,
    encode_frame,
    parse_http_headers,
)

log = logging.getLogger(__name__)

SWEEP_INTERVAL = 0.5


class _StreamTransport:
    """Plain TCP transport handle for the core."""

    def __init__(self, writer: asyncio.StreamWriter):
        self._writer = writer

    def send(self, data: bytes) -> None:
        self._writer.write(data)

    def close(self) -> None:
        if not self._writer.is_closing():
            self._writer.close()


class _WsTransport:
    """Wraps core writes into single binary WebSocket frames."""

    def __init__(self, writer: asyncio.StreamWriter):
        self._writer = writer

    def send(self, data: bytes) -> None:
        self._writer.write(encode_frame(OP_BINARY, data))

    def close(self) -> None:
        if not self._writer.is_closing():
            self._writer.write(encode_frame(OP_CLOSE, (1000).to_bytes(2, "big")))
            self._writer.close()


class BrokerServer:
    """TCP + WebSocket MQTT listeners around one :class:`BrokerCore`."""

    def __init__(
        self,
        core: BrokerCore | None = None,
        *,
        host: str = "127.0.0.1",
        tcp_port: int = 1883,
        ws_port: int = 9001,
        ws_path: str = "/mqtt",
    ):
        self.core = core if core is not None else BrokerCore(
            clock=lambda: asyncio.get_event_loop().time()
        )
        self.host = host
        self._tcp_port = tcp_port
        self._ws_port = ws_port
        self.ws_path = ws_path
        self._tcp_server: asyncio.base_events.Server | None = None
        self._ws_server: asyncio.base_events.Server | None = None
        self._sweep_task: asyncio.Task | None = None

    @property
    def tcp_port(self) -> int:
        if self._tcp_server is not None:
            return self._tcp_server.sockets[0].getsockname()[1]
        return self._tcp_port

    @property
    def ws_port(self) -> int:
        if self._ws_server is not None:
            return self._ws_server.sockets[0].getsockname()[1]
        return self._ws_port

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._serve_tcp, self.host, self._tcp_port
        )
        self._ws_server = await asyncio.start_server(
            self._serve_ws, self.host, self._ws_port
        )
        self._sweep_task = asyncio.create_task(self._sweep_loop())
        log.info(
            "broker listening on tcp://%s:%d and ws://%s:%d%s",
            self.host,
            self.tcp_port,
            self.host,
            self.ws_port,
            self.ws_path,
        )

    async def stop(self) -> None:
        if self._sweep_task is not None:
            self._sweep_task.cancel()
            self._sweep_task = None
        for server in (self._tcp_server, self._ws_server):
            if server is not None:
                server.close()
                await server.wait_closed()
        self._tcp_server = self._ws_server = None

    async def _sweep_loop(self) -> None:
        while True:
            await asyncio.sleep(SWEEP_INTERVAL)
            self.core.sweep()

    async def _serve_tcp(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn = self.core.connection_made(_StreamTransport(writer))
        try:
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                self.core.data_received(conn, data)
        except (ConnectionError, OSError):
            pass
        finally:
            self.core.connection_lost(conn)
            await _close_writer(writer)

    async def _serve_ws(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn: Connection | None = None
        try:
            head, leftover = await _read_http_head(reader)
            start_line, headers = parse_http_headers(head)
            client_key, subprotocol = check_handshake_request(
                start_line, headers, self.ws_path
            )
            writer.write(build_handshake_response(client_key, subprotocol))
            conn = self.core.connection_made(_WsTransport(writer))
            parser = FrameParser(require_mask=True)
            data = leftover
            while True:
                for frame in parser.feed(data):
                    if frame.opcode in (OP_BINARY, OP_CONT):
                        self.core.data_received(conn, frame.payload)
                    elif frame.opcode == OP_PING:
                        writer.write(encode_frame(OP_PONG, frame.payload))
                    elif frame.opcode == OP_CLOSE:
                        return
                    elif frame.opcode == OP_TEXT:
                        writer.write(encode_frame(OP_CLOSE, (1003).to_bytes(2, "big")))
                        return
                    if conn.closed:
                        return
                data = await reader.read(65536)
                if not data:
                    break
        except WebSocketError as exc:
            log.debug("websocket handshake/framing error: %s", exc)
            writer.write(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
        except (ConnectionError, OSError, asyncio.IncompleteReadError):
            pass
        finally:
            if conn is not None:
                self.core.connection_lost(conn)
            await _close_writer(writer)


async def _read_http_head(reader: asyncio.StreamReader) -> tuple[bytes, bytes]:
    """Read up to the blank line; returns (head, any bytes past it)."""
    buf = bytearray()
    while b"\r\n\r\n" not in buf:
        if len(buf) > MAX_HEADER_BYTES:
            raise WebSocketError("HTTP head too large")
        chunk = await reader.read(4096)
        if not chunk:
            raise WebSocketError("connection closed during handshake")
        buf += chunk
    head, leftover = bytes(buf).split(b"\r\n\r\n", 1)
    return head, leftover


async def _close_writer(writer: asyncio.StreamWriter) -> None:
    try:
        if not writer.is_closing():
            writer.close()
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass
