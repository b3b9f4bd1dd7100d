"""In-process MQTT broker: sans-io core plus TCP/WebSocket listeners."""

from .core import KEEPALIVE_GRACE, BrokerCore, Connection, Session, Transport

__all__ = ["KEEPALIVE_GRACE", "BrokerCore", "Connection", "Session", "Transport"]
