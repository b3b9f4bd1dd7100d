"""MQTT v3.1.1 packet codec.

Implements the protocol subset the twin speaks: CONNECT/CONNACK, QoS-0
centric PUBLISH (QoS 1/2 packet ids are representable on the wire, the
broker rejects them), SUBSCRIBE/SUBACK, UNSUBSCRIBE/UNSUBACK,
PINGREQ/PINGRESP and DISCONNECT.  All functions are pure; byte layout
follows the public v3.1.1 standard exactly, so frames interoperate with
stock clients.

Decoding is strict: reserved-flag violations, malformed varints, bad
UTF-8 and unknown packet types raise :class:`ProtocolError` (the broker
closes the connection on it).  Incomplete frames are signalled by
returning ``None`` so callers can wait for more bytes.

CONNECT packets carrying a username/password are accepted but the
credentials are discarded (the broker has no authentication), and a
CONNECT whose protocol name/level is not MQTT/4 is returned with only
those two fields populated so the broker can answer CONNACK code 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Union

MAX_REMAINING_LENGTH = 268_435_455
DEFAULT_MAX_PACKET_SIZE = 1 << 20  # telemetry frames are tiny; bounds memory

PROTOCOL_NAME = "MQTT"
PROTOCOL_LEVEL = 4

CONNACK_ACCEPTED = 0x00
CONNACK_UNACCEPTABLE_PROTOCOL = 0x01
CONNACK_IDENTIFIER_REJECTED = 0x02

SUBACK_FAILURE = 0x80


class PacketType(IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    SUBSCRIBE = 8
    SUBACK = 9
    UNSUBSCRIBE = 10
    UNSUBACK = 11
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


class CodecError(Exception):
    """Base class for packet encode/decode failures."""


class EncodeError(CodecError):
    """The packet violates an encoding invariant."""


class ProtocolError(CodecError):
    """Received bytes violate v3.1.1 framing; fatal for the connection."""


@dataclass(frozen=True)
class Will:
    topic: str
    payload: bytes = b""
    retain: bool = False
    qos: int = 0


@dataclass(frozen=True)
class Connect:
    client_id: str = ""
    clean_session: bool = True
    keepalive: int = 0
    will: Will | None = None
    protocol_name: str = PROTOCOL_NAME
    protocol_level: int = PROTOCOL_LEVEL


@dataclass(frozen=True)
class ConnAck:
    return_code: int = CONNACK_ACCEPTED
    session_present: bool = False


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    retain: bool = False
    dup: bool = False
    packet_id: int | None = None


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    filters: tuple[tuple[str, int], ...]  # (topic filter, requested qos)


@dataclass(frozen=True)
class SubAck:
    packet_id: int
    return_codes: tuple[int, ...]


@dataclass(frozen=True)
class Unsubscribe:
    packet_id: int
    filters: tuple[str, ...]


@dataclass(frozen=True)
class UnsubAck:
    packet_id: int


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Union[
    Connect,
    ConnAck,
    Publish,
    Subscribe,
    SubAck,
    Unsubscribe,
    UnsubAck,
    PingReq,
    PingResp,
    Disconnect,
]


def encode_remaining_length(n: int) -> bytes:
    """Encode the fixed-header remaining length as a 1-4 byte varint.

    Little-endian base 128 with a continuation high bit; always the
    minimal number of bytes for ``n``.
    """
    if n < 0 or n > MAX_REMAINING_LENGTH:
        raise EncodeError(f"remaining length {n} outside 0..{MAX_REMAINING_LENGTH}")
    out = bytearray()
    while True:
        digit = n % 128
        n //= 128
        if n > 0:
            digit |= 0x80
        out.append(digit)
        if n == 0:
            return bytes(out)


def decode_remaining_length(data: bytes) -> tuple[int, int] | None:
    """Decode a remaining-length varint.

    Returns ``(value, bytes_consumed)``, or ``None`` when the input is
    truncated mid-varint.  Raises :class:`ProtocolError` if a fourth
    byte still has its continuation bit set.
    """
    value = 0
    multiplier = 1
    for i, byte in enumerate(data[:4]):
        value += (byte & 0x7F) * multiplier
        if not byte & 0x80:
            return value, i + 1
        multiplier *= 128
    if len(data) >= 4:
        raise ProtocolError("malformed remaining length: continuation past 4 bytes")
    return None


def _encode_string(s: str) -> bytes:
    data = s.encode("utf-8")
    if len(data) > 0xFFFF:
        raise EncodeError("string exceeds 65535 bytes")
    return len(data).to_bytes(2, "big") + data


def _encode_binary(data: bytes) -> bytes:
    if len(data) > 0xFFFF:
        raise EncodeError("binary field exceeds 65535 bytes")
    return len(data).to_bytes(2, "big") + bytes(data)


class _Reader:
    """Cursor over a complete packet body; truncation inside it is malformed."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def read_bytes(self, n: int) -> bytes:
        if self.remaining() < n:
            raise ProtocolError("packet body shorter than its declared fields")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return bytes(chunk)

    def read_u8(self) -> int:
        return self.read_bytes(1)[0]

    def read_u16(self) -> int:
        raw = self.read_bytes(2)
        return (raw[0] << 8) | raw[1]

    def read_binary(self) -> bytes:
        return self.read_bytes(self.read_u16())

    def read_string(self) -> str:
        raw = self.read_binary()
        try:
            s = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"string is not valid UTF-8: {exc}") from None
        if "\x00" in s:
            raise ProtocolError("string contains U+0000")
        return s

    def read_rest(self) -> bytes:
        return self.read_bytes(self.remaining())

    def expect_end(self, what: str) -> None:
        if self.remaining():
            raise ProtocolError(f"{what} has {self.remaining()} trailing bytes")


def _frame(ptype: PacketType, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_remaining_length(len(body)) + body


def _check_packet_id(packet_id: int) -> int:
    if not 1 <= packet_id <= 0xFFFF:
        raise EncodeError(f"packet id {packet_id} outside 1..65535")
    return packet_id


def _encode_connect(p: Connect) -> bytes:
    if not 0 <= p.keepalive <= 0xFFFF:
        raise EncodeError(f"keepalive {p.keepalive} outside 0..65535")
    flags = 0
    if p.clean_session:
        flags |= 0x02
    body = bytearray()
    body += _encode_string(p.protocol_name)
    body.append(p.protocol_level)
    if p.will is not None:
        if not 0 <= p.will.qos <= 2:
            raise EncodeError(f"will qos {p.will.qos} outside 0..2")
        flags |= 0x04 | (p.will.qos << 3)
        if p.will.retain:
            flags |= 0x20
    body.append(flags)
    body += p.keepalive.to_bytes(2, "big")
    body += _encode_string(p.client_id)
    if p.will is not None:
        body += _encode_string(p.will.topic)
        body += _encode_binary(p.will.payload)
    return _frame(PacketType.CONNECT, 0, bytes(body))


def _decode_connect(flags: int, body: _Reader) -> Connect:
    if flags != 0:
        raise ProtocolError(f"CONNECT reserved flags must be 0, got {flags:#x}")
    name = body.read_string()
    level = body.read_u8()
    if name != PROTOCOL_NAME or level != PROTOCOL_LEVEL:
        # Not a 3.1.1 CONNECT; surface name/level so the broker can answer
        # CONNACK code 1 instead of dropping the connection silently.
        body.read_rest()
        return Connect(protocol_name=name, protocol_level=level)
    cflags = body.read_u8()
    if cflags & 0x01:
        raise ProtocolError("CONNECT flag bit 0 is reserved")
    clean = bool(cflags & 0x02)
    will_flag = bool(cflags & 0x04)
    will_qos = (cflags >> 3) & 0x03
    will_retain = bool(cflags & 0x20)
    password_flag = bool(cflags & 0x40)
    username_flag = bool(cflags & 0x80)
    if will_qos == 3:
        raise ProtocolError("will qos 3 is invalid")
    if not will_flag and (will_qos or will_retain):
        raise ProtocolError("will qos/retain set without will flag")
    if password_flag and not username_flag:
        raise ProtocolError("password flag set without username flag")
    keepalive = body.read_u16()
    client_id = body.read_string()
    will = None
    if will_flag:
        will_topic = body.read_string()
        will_payload = body.read_binary()
        will = Will(will_topic, will_payload, retain=will_retain, qos=will_qos)
    if username_flag:
        body.read_string()  # credentials are not modelled; skip
    if password_flag:
        body.read_binary()
    body.expect_end("CONNECT")
    return Connect(client_id, clean, keepalive, will)


def _encode_connack(p: ConnAck) -> bytes:
    if not 0 <= p.return_code <= 5:
        raise EncodeError(f"CONNACK return code {p.return_code} outside 0..5")
    return _frame(
        PacketType.CONNACK, 0, bytes([1 if p.session_present else 0, p.return_code])
    )


def _decode_connack(flags: int, body: _Reader) -> ConnAck:
    if flags != 0:
        raise ProtocolError("CONNACK reserved flags must be 0")
    ack_flags = body.read_u8()
    if ack_flags & ~0x01:
        raise ProtocolError("CONNACK acknowledge flags bits 1-7 are reserved")
    code = body.read_u8()
    if code > 5:
        raise ProtocolError(f"unknown CONNACK return code {code}")
    body.expect_end("CONNACK")
    return ConnAck(code, bool(ack_flags & 0x01))


def _validate_publish_topic(topic: str) -> None:
    if not topic:
        raise EncodeError("publish topic must not be empty")
    if "+" in topic or "#" in topic:
        raise EncodeError(f"publish topic {topic!r} contains wildcard characters")
    if "\x00" in topic:
        raise EncodeError("publish topic contains U+0000")


def _encode_publish(p: Publish) -> bytes:
    _validate_publish_topic(p.topic)
    if not 0 <= p.qos <= 2:
        raise EncodeError(f"qos {p.qos} outside 0..2")
    if p.qos == 0:
        if p.packet_id is not None:
            raise EncodeError("packet id requires qos > 0")
        if p.dup:
            raise EncodeError("dup flag requires qos > 0")
    elif p.packet_id is None:
        raise EncodeError("qos > 0 publish requires a packet id")
    flags = (p.qos << 1) | (0x08 if p.dup else 0) | (0x01 if p.retain else 0)
    body = bytearray(_encode_string(p.topic))
    if p.qos > 0:
        body += _check_packet_id(p.packet_id).to_bytes(2, "big")
    body += p.payload
    return _frame(PacketType.PUBLISH, flags, bytes(body))


def _decode_publish(flags: int, body: _Reader) -> Publish:
    qos = (flags >> 1) & 0x03
    if qos == 3:
        raise ProtocolError("publish qos 3 is invalid")
    dup = bool(flags & 0x08)
    if dup and qos == 0:
        raise ProtocolError("dup flag set on qos 0 publish")
    retain = bool(flags & 0x01)
    topic = body.read_string()
    packet_id = None
    if qos > 0:
        packet_id = body.read_u16()
        if packet_id == 0:
            raise ProtocolError("publish packet id 0 is invalid")
    return Publish(topic, body.read_rest(), qos, retain, dup, packet_id)


def _encode_subscribe(p: Subscribe) -> bytes:
    if not p.filters:
        raise EncodeError("SUBSCRIBE requires at least one filter")
    body = bytearray(_check_packet_id(p.packet_id).to_bytes(2, "big"))
    for topic_filter, qos in p.filters:
        if not 0 <= qos <= 2:
            raise EncodeError(f"requested qos {qos} outside 0..2")
        body += _encode_string(topic_filter)
        body.append(qos)
    return _frame(PacketType.SUBSCRIBE, 0x02, bytes(body))


def _decode_subscribe(flags: int, body: _Reader) -> Subscribe:
    if flags != 0x02:
        raise ProtocolError(f"SUBSCRIBE flags must be 0x2, got {flags:#x}")
    packet_id = body.read_u16()
    if packet_id == 0:
        raise ProtocolError("SUBSCRIBE packet id 0 is invalid")
    filters = []
    while body.remaining():
        topic_filter = body.read_string()
        qos = body.read_u8()
        if qos > 2:
            raise ProtocolError(f"requested qos {qos} outside 0..2")
        filters.append((topic_filter, qos))
    if not filters:
        raise ProtocolError("SUBSCRIBE with no filters")
    return Subscribe(packet_id, tuple(filters))


def _encode_suback(p: SubAck) -> bytes:
    if not p.return_codes:
        raise EncodeError("SUBACK requires at least one return code")
    for code in p.return_codes:
        if code not in (0x00, 0x01, 0x02, SUBACK_FAILURE):
            raise EncodeError(f"invalid SUBACK return code {code:#x}")
    body = _check_packet_id(p.packet_id).to_bytes(2, "big") + bytes(p.return_codes)
    return _frame(PacketType.SUBACK, 0, body)


def _decode_suback(flags: int, body: _Reader) -> SubAck:
    if flags != 0:
        raise ProtocolError("SUBACK reserved flags must be 0")
    packet_id = body.read_u16()
    codes = body.read_rest()
    if not codes:
        raise ProtocolError("SUBACK with no return codes")
    for code in codes:
        if code not in (0x00, 0x01, 0x02, SUBACK_FAILURE):
            raise ProtocolError(f"invalid SUBACK return code {code:#x}")
    return SubAck(packet_id, tuple(codes))


def _encode_unsubscribe(p: Unsubscribe) -> bytes:
    if not p.filters:
        raise EncodeError("UNSUBSCRIBE requires at least one filter")
    body = bytearray(_check_packet_id(p.packet_id).to_bytes(2, "big"))
    for topic_filter in p.filters:
        body += _encode_string(topic_filter)
    return _frame(PacketType.UNSUBSCRIBE, 0x02, bytes(body))


def _decode_unsubscribe(flags: int, body: _Reader) -> Unsubscribe:
    if flags != 0x02:
        raise ProtocolError(f"UNSUBSCRIBE flags must be 0x2, got {flags:#x}")
    packet_id = body.read_u16()
    if packet_id == 0:
        raise ProtocolError("UNSUBSCRIBE packet id 0 is invalid")
    filters = []
    while body.remaining():
        filters.append(body.read_string())
    if not filters:
        raise ProtocolError("UNSUBSCRIBE with no filters")
    return Unsubscribe(packet_id, tuple(filters))


def _encode_unsuback(p: UnsubAck) -> bytes:
    return _frame(PacketType.UNSUBACK, 0, _check_packet_id(p.packet_id).to_bytes(2, "big"))


def _decode_unsuback(flags: int, body: _Reader) -> UnsubAck:
    if flags != 0:
        raise ProtocolError("UNSUBACK reserved flags must be 0")
    packet_id = body.read_u16()
    body.expect_end("UNSUBACK")
    return UnsubAck(packet_id)


def _decode_empty(
    kind: type[PingReq] | type[PingResp] | type[Disconnect], name: str, flags: int, body: _Reader
) -> Packet:
    if flags != 0:
        raise ProtocolError(f"{name} reserved flags must be 0")
    body.expect_end(name)
    return kind()


def encode_packet(p: Packet) -> bytes:
    """Encode a packet into v3.1.1 wire bytes; inverse of :func:`decode_packet`."""
    if isinstance(p, Connect):
        return _encode_connect(p)
    if isinstance(p, ConnAck):
        return _encode_connack(p)
    if isinstance(p, Publish):
        return _encode_publish(p)
    if isinstance(p, Subscribe):
        return _encode_subscribe(p)
    if isinstance(p, SubAck):
        return _encode_suback(p)
    if isinstance(p, Unsubscribe):
        return _encode_unsubscribe(p)
    if isinstance(p, UnsubAck):
        return _encode_unsuback(p)
    if isinstance(p, PingReq):
        return _frame(PacketType.PINGREQ, 0, b"")
    if isinstance(p, PingResp):
        return _frame(PacketType.PINGRESP, 0, b"")
    if isinstance(p, Disconnect):
        return _frame(PacketType.DISCONNECT, 0, b"")
    raise EncodeError(f"not an MQTT packet: {p!r}")


def decode_packet(
    data: bytes, max_packet_size: int = DEFAULT_MAX_PACKET_SIZE
) -> tuple[Packet, int] | None:
    """Decode one packet from the head of ``data``.

    Returns ``(packet, bytes_consumed)``, or ``None`` when the frame is
    still incomplete (nothing is consumed).  Raises
    :class:`ProtocolError` on any framing offense.
    """
    if len(data) < 1:
        return None
    first = data[0]
    type_code = first >> 4
    flags = first & 0x0F
    try:
        ptype = PacketType(type_code)
    except ValueError:
        raise ProtocolError(f"unknown packet type {type_code}") from None
    varint = decode_remaining_length(bytes(data[1:5]))
    if varint is None:
        return None
    remaining, varint_len = varint
    if remaining > max_packet_size:
        raise ProtocolError(
            f"remaining length {remaining} exceeds limit {max_packet_size}"
        )
    total = 1 + varint_len + remaining
    if len(data) < total:
        return None
    body = _Reader(bytes(data[1 + varint_len : total]))
    if ptype is PacketType.CONNECT:
        packet: Packet = _decode_connect(flags, body)
    elif ptype is PacketType.CONNACK:
        packet = _decode_connack(flags, body)
    elif ptype is PacketType.PUBLISH:
        packet = _decode_publish(flags, body)
    elif ptype is PacketType.SUBSCRIBE:
        packet = _decode_subscribe(flags, body)
    elif ptype is PacketType.SUBACK:
        packet = _decode_suback(flags, body)
    elif ptype is PacketType.UNSUBSCRIBE:
        packet = _decode_unsubscribe(flags, body)
    elif ptype is PacketType.UNSUBACK:
        packet = _decode_unsuback(flags, body)
    elif ptype is PacketType.PINGREQ:
        packet = _decode_empty(PingReq, "PINGREQ", flags, body)
    elif ptype is PacketType.PINGRESP:
        packet = _decode_empty(PingResp, "PINGRESP", flags, body)
    else:
        packet = _decode_empty(Disconnect, "DISCONNECT", flags, body)
    return packet, total


class StreamDecoder:
    """Incremental decoder over an arbitrary byte stream.

    Feeding a stream one byte at a time yields exactly the same packet
    sequence as feeding it whole; partial frames stay buffered.
    """

    def __init__(self, max_packet_size: int = DEFAULT_MAX_PACKET_SIZE):
        self._buf = bytearray()
        self._max = max_packet_size

    def feed(self, data: bytes) -> list[Packet]:
        self._buf += data
        packets = []
        while True:
            result = decode_packet(self._buf, self._max)
            if result is None:
                return packets
            packet, consumed = result
            del self._buf[:consumed]
            packets.append(packet)
