"""Network-level broker tests: real TCP and WebSocket listeners."""

import asyncio

import pytest

from openscout_twin.broker import BrokerCore
from openscout_twin.broker.server import BrokerServer
from openscout_twin.client import MqttClient, MqttClientError
from openscout_twin.broker.websocket import WebSocketError
from openscout_twin.mqtt import Will

from wsclient import WsMqttClient


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, 30))


async def start_server(**kwargs):
    server = BrokerServer(host="127.0.0.1", tcp_port=0, ws_port=0, **kwargs)
    await server.start()
    return server


class TestTcpTransport:
    def test_connect_publish_subscribe(self):
        async def scenario():
            server = await start_server()
            try:
                sub = await MqttClient.connect("127.0.0.1", server.tcp_port, "sub")
                await sub.subscribe("openscout/+/odom")
                pub = await MqttClient.connect("127.0.0.1", server.tcp_port, "pub")
                await pub.publish("openscout/a/odom", b"sample")
                delivery = await asyncio.wait_for(sub.inbox.get(), 5)
                assert delivery.topic == "openscout/a/odom"
                assert delivery.payload == b"sample"
                await pub.disconnect()
                await sub.disconnect()
            finally:
                await server.stop()

        run(scenario())

    def test_connection_refused_raises(self):
        async def scenario():
            with pytest.raises(MqttClientError, match="cannot connect"):
                await MqttClient.connect("127.0.0.1", 1, "nope", timeout=2)

        run(scenario())

    def test_abrupt_tcp_close_fires_will(self):
        async def scenario():
            server = await start_server()
            try:
                watcher = await MqttClient.connect("127.0.0.1", server.tcp_port, "w")
                await watcher.subscribe("st/#")
                doomed = await MqttClient.connect(
                    "127.0.0.1",
                    server.tcp_port,
                    "doomed",
                    will=Will("st/doomed", b"offline", retain=True),
                )
                doomed._writer.close()  # abrupt: no DISCONNECT
                delivery = await asyncio.wait_for(watcher.inbox.get(), 5)
                assert (delivery.topic, delivery.payload) == ("st/doomed", b"offline")
                assert server.core.retained["st/doomed"] == b"offline"
                await watcher.disconnect()
            finally:
                await server.stop()

        run(scenario())

    def test_keepalive_expiry_over_tcp(self):
        async def scenario():
            server = await start_server()
            try:
                watcher = await MqttClient.connect("127.0.0.1", server.tcp_port, "w")
                await watcher.subscribe("st/#")
                # keepalive 1 s but the client never pings
                silent = await MqttClient.connect(
                    "127.0.0.1",
                    server.tcp_port,
                    "silent",
                    keepalive=1,
                    will=Will("st/silent", b"expired"),
                )
                silent._ping_task.cancel()
                delivery = await asyncio.wait_for(watcher.inbox.get(), 10)
                assert delivery.payload == b"expired"
                await watcher.disconnect()
                await silent.close()
            finally:
                await server.stop()

        run(scenario())


class TestWebSocketTransport:
    def test_ws_connect_and_retained_replay(self):
        async def scenario():
            server = await start_server()
            try:
                pub = await MqttClient.connect("127.0.0.1", server.tcp_port, "pub")
                await pub.publish("openscout/a/status", b'{"online": true}', retain=True)
                ws = await WsMqttClient.connect(
                    "127.0.0.1", server.ws_port, "dash", path=server.ws_path
                )
                await ws.subscribe("openscout/+/status")
                replay = await asyncio.wait_for(ws.inbox.get(), 5)
                assert replay.retain and replay.payload == b'{"online": true}'
                await ws.disconnect()
                await pub.disconnect()
            finally:
                await server.stop()

        run(scenario())

    def test_mqtt_packets_span_ws_frames(self):
        async def scenario():
            server = await start_server()
            try:
                ws = await WsMqttClient.connect(
                    "127.0.0.1",
                    server.ws_port,
                    "chopper",
                    path=server.ws_path,
                    frame_chunk=3,  # every MQTT packet split into 3-byte frames
                )
                await ws.subscribe("t/#")
                await ws.publish("t/x", b"payload-that-spans-frames")
                echo = await asyncio.wait_for(ws.inbox.get(), 5)
                assert echo.payload == b"payload-that-spans-frames"
                await ws.disconnect()
            finally:
                await server.stop()

        run(scenario())

    def test_wrong_path_rejected(self):
        async def scenario():
            server = await start_server()
            try:
                with pytest.raises((MqttClientError, WebSocketError, ConnectionError, OSError)):
                    await WsMqttClient.connect(
                        "127.0.0.1", server.ws_port, "x", path="/nope", timeout=3
                    )
            finally:
                await server.stop()

        run(scenario())

    def test_cross_transport_fanout(self):
        async def scenario():
            server = await start_server()
            try:
                tcp_sub = await MqttClient.connect("127.0.0.1", server.tcp_port, "t")
                await tcp_sub.subscribe("x")
                ws_sub = await WsMqttClient.connect(
                    "127.0.0.1", server.ws_port, "w", path=server.ws_path
                )
                await ws_sub.subscribe("x")
                pub = await MqttClient.connect("127.0.0.1", server.tcp_port, "p")
                await pub.publish("x", b"both")
                got_tcp = await asyncio.wait_for(tcp_sub.inbox.get(), 5)
                got_ws = await asyncio.wait_for(ws_sub.inbox.get(), 5)
                assert got_tcp == got_ws
                await pub.disconnect()
                await tcp_sub.disconnect()
                await ws_sub.disconnect()
            finally:
                await server.stop()

        run(scenario())


class TestTransportEquivalence:
    """The same packet schedule over TCP and WS yields identical state."""

    SCHEDULE = [
        ("subscribe", ("openscout/+/odom", "openscout/+/status")),
        ("publish", ("openscout/a/odom", b"o1", False)),
        ("publish", ("openscout/a/status", b"s1", True)),
        ("publish", ("other/topic", b"ignored", False)),
        ("publish", ("openscout/b/status", b"s2", True)),
        ("publish", ("openscout/a/status", b"", True)),  # delete retained
        ("publish", ("openscout/b/odom", b"o2", False)),
    ]

    async def _drive(self, client):
        received = []
        for action, args in self.SCHEDULE:
            if action == "subscribe":
                await client.subscribe(*args)
            else:
                topic, payload, retain = args
                await client.publish(topic, payload, retain=retain)
        await asyncio.sleep(0.3)
        while not client.inbox.empty():
            p = client.inbox.get_nowait()
            received.append((p.topic, p.payload, p.retain))
        return received

    def test_equivalence(self):
        async def run_tcp():
            server = await start_server()
            try:
                client = await MqttClient.connect("127.0.0.1", server.tcp_port, "same-id")
                received = await self._drive(client)
                retained = dict(server.core.retained)
                sessions = server.core.session_ids()
                await client.disconnect()
                return received, retained, sessions
            finally:
                await server.stop()

        async def run_ws():
            server = await start_server()
            try:
                client = await WsMqttClient.connect(
                    "127.0.0.1", server.ws_port, "same-id", path=server.ws_path
                )
                received = await self._drive(client)
                retained = dict(server.core.retained)
                sessions = server.core.session_ids()
                await client.disconnect()
                return received, retained, sessions
            finally:
                await server.stop()

        tcp_result = run(run_tcp())
        ws_result = run(run_ws())
        assert tcp_result == ws_result
        received, retained, sessions = tcp_result
        assert received == [
            ("openscout/a/odom", b"o1", False),
            ("openscout/a/status", b"s1", False),
            ("openscout/b/status", b"s2", False),
            # zero-byte retained publish deletes the stored copy but is
            # still delivered to current subscribers
            ("openscout/a/status", b"", False),
            ("openscout/b/odom", b"o2", False),
        ]
        assert retained == {"openscout/b/status": b"s2"}
        assert sessions == ["same-id"]
