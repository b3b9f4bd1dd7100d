"""Minimal RFC 6455 WebSocket framing and handshake.

Just enough for MQTT-over-WebSocket under the ``mqtt`` subprotocol:
HTTP/1.1 upgrade, binary/continuation frames (client frames must be
masked), close and ping/pong control frames.  Extensions, compression
and text payloads are out of scope; a text frame is answered with close
code 1003.

Because MQTT packets are re-framed by the stream decoder, fragment
payloads are forwarded as they arrive; WebSocket frame boundaries never
need to align with MQTT packet boundaries.
"""

from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
SUBPROTOCOL = "mqtt"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

_CONTROL_OPCODES = (OP_CLOSE, OP_PING, OP_PONG)
MAX_HEADER_BYTES = 8192


class WebSocketError(Exception):
    """Handshake or framing violation; the connection must be dropped."""


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_frame(opcode: int, payload: bytes, *, fin: bool = True, mask: bool = False) -> bytes:
    head = bytearray([(0x80 if fin else 0) | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        head.append(mask_bit | length)
    elif length < 1 << 16:
        head.append(mask_bit | 126)
        head += length.to_bytes(2, "big")
    else:
        head.append(mask_bit | 127)
        head += length.to_bytes(8, "big")
    if mask:
        key = os.urandom(4)
        head += key
        return bytes(head) + _apply_mask(payload, key)
    return bytes(head) + payload


def _apply_mask(payload: bytes, key: bytes) -> bytes:
    if not payload:
        return b""
    repeated = (key * (len(payload) // 4 + 1))[: len(payload)]
    return (int.from_bytes(payload, "big") ^ int.from_bytes(repeated, "big")).to_bytes(
        len(payload), "big"
    )


@dataclass(frozen=True)
class Frame:
    fin: bool
    opcode: int
    payload: bytes
    masked: bool


class FrameParser:
    """Incremental frame parser; feed() returns complete frames."""

    def __init__(self, *, require_mask: bool, max_payload: int = 1 << 20):
        self._buf = bytearray()
        self._require_mask = require_mask
        self._max_payload = max_payload

    def feed(self, data: bytes) -> list[Frame]:
        self._buf += data
        frames = []
        while True:
            frame = self._parse_one()
            if frame is None:
                return frames
            frames.append(frame)

    def _parse_one(self) -> Frame | None:
        buf = self._buf
        if len(buf) < 2:
            return None
        b0, b1 = buf[0], buf[1]
        if b0 & 0x70:
            raise WebSocketError("reserved bits set (extensions not negotiated)")
        fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        pos = 2
        if length == 126:
            if len(buf) < pos + 2:
                return None
            length = int.from_bytes(buf[pos : pos + 2], "big")
            pos += 2
        elif length == 127:
            if len(buf) < pos + 8:
                return None
            length = int.from_bytes(buf[pos : pos + 8], "big")
            pos += 8
        if length > self._max_payload:
            raise WebSocketError(f"frame payload {length} exceeds limit")
        if opcode in _CONTROL_OPCODES and (not fin or length > 125):
            raise WebSocketError("fragmented or oversized control frame")
        if self._require_mask and not masked and length > 0:
            raise WebSocketError("client frames must be masked")
        key = b""
        if masked:
            if len(buf) < pos + 4:
                return None
            key = bytes(buf[pos : pos + 4])
            pos += 4
        if len(buf) < pos + length:
            return None
        payload = bytes(buf[pos : pos + length])
        del buf[: pos + length]
        if masked:
            payload = _apply_mask(payload, key)
        return Frame(fin, opcode, payload, masked)


def build_handshake_request(
    host: str, path: str, key_b64: str, subprotocol: str = SUBPROTOCOL
) -> bytes:
    return (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key_b64}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        f"Sec-WebSocket-Protocol: {subprotocol}\r\n"
        "\r\n"
    ).encode("ascii")


def parse_http_headers(raw: bytes) -> tuple[str, dict[str, str]]:
    """Split an HTTP request/response head into start line + header map."""
    try:
        text = raw.decode("latin-1")
    except UnicodeDecodeError as exc:
        raise WebSocketError(f"undecodable HTTP head: {exc}") from None
    lines = text.split("\r\n")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if not line:
            continue
        if ":" not in line:
            raise WebSocketError(f"malformed header line {line!r}")
        name, value = line.split(":", 1)
        headers[name.strip().lower()] = value.strip()
    return lines[0], headers


def check_handshake_request(start_line: str, headers: dict[str, str], path: str) -> tuple[str, str | None]:
    """Validate an upgrade request; returns (client key, agreed subprotocol)."""
    parts = start_line.split(" ")
    if len(parts) != 3 or parts[0] != "GET":
        raise WebSocketError(f"not a GET request: {start_line!r}")
    if parts[1] != path:
        raise WebSocketError(f"unknown path {parts[1]!r}")
    if headers.get("upgrade", "").lower() != "websocket":
        raise WebSocketError("missing Upgrade: websocket")
    if "upgrade" not in headers.get("connection", "").lower():
        raise WebSocketError("missing Connection: Upgrade")
    if headers.get("sec-websocket-version") != "13":
        raise WebSocketError("unsupported WebSocket version")
    key = headers.get("sec-websocket-key")
    if not key:
        raise WebSocketError("missing Sec-WebSocket-Key")
    offered = [
        p.strip() for p in headers.get("sec-websocket-protocol", "").split(",") if p.strip()
    ]
    agreed = SUBPROTOCOL if SUBPROTOCOL in offered else None
    return key, agreed


def build_handshake_response(client_key: str, subprotocol: str | None) -> bytes:
    lines = [
        "HTTP/1.1 101 Switching Protocols",
        "Upgrade: websocket",
        "Connection: Upgrade",
        f"Sec-WebSocket-Accept: {accept_key(client_key)}",
    ]
    if subprotocol:
        lines.append(f"Sec-WebSocket-Protocol: {subprotocol}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode("ascii")


def check_handshake_response(start_line: str, headers: dict[str, str], sent_key: str) -> None:
    if not start_line.startswith("HTTP/1.1 101"):
        raise WebSocketError(f"upgrade refused: {start_line!r}")
    if headers.get("sec-websocket-accept") != accept_key(sent_key):
        raise WebSocketError("Sec-WebSocket-Accept mismatch")


def make_client_key() -> str:
    return base64.b64encode(os.urandom(16)).decode("ascii")
