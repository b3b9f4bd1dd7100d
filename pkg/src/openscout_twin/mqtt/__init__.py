"""MQTT v3.1.1 subset: packet codec, topic validation and filter matching."""

from .codec import (
    CONNACK_ACCEPTED,
    CONNACK_IDENTIFIER_REJECTED,
    CONNACK_UNACCEPTABLE_PROTOCOL,
    DEFAULT_MAX_PACKET_SIZE,
    MAX_REMAINING_LENGTH,
    PROTOCOL_LEVEL,
    PROTOCOL_NAME,
    SUBACK_FAILURE,
    CodecError,
    ConnAck,
    Connect,
    Disconnect,
    EncodeError,
    Packet,
    PacketType,
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
    decode_packet,
    decode_remaining_length,
    encode_packet,
    encode_remaining_length,
)
from .topics import (
    InvalidFilterError,
    InvalidTopicError,
    TopicFilter,
    topic_matches,
    validate_filter,
    validate_topic,
)

__all__ = [
    "CONNACK_ACCEPTED",
    "CONNACK_IDENTIFIER_REJECTED",
    "CONNACK_UNACCEPTABLE_PROTOCOL",
    "DEFAULT_MAX_PACKET_SIZE",
    "MAX_REMAINING_LENGTH",
    "PROTOCOL_LEVEL",
    "PROTOCOL_NAME",
    "SUBACK_FAILURE",
    "CodecError",
    "ConnAck",
    "Connect",
    "Disconnect",
    "EncodeError",
    "InvalidFilterError",
    "InvalidTopicError",
    "Packet",
    "PacketType",
    "PingReq",
    "PingResp",
    "ProtocolError",
    "Publish",
    "StreamDecoder",
    "SubAck",
    "Subscribe",
    "TopicFilter",
    "UnsubAck",
    "Unsubscribe",
    "Will",
    "decode_packet",
    "decode_remaining_length",
    "encode_packet",
    "encode_remaining_length",
    "topic_matches",
    "validate_filter",
    "validate_topic",
]
