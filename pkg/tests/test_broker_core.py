import itertools
import random

import pytest
from oracles import reference_matches

from openscout_twin.broker import BrokerCore
from openscout_twin.client import LoopbackClient, MqttClientError
from openscout_twin.mqtt import (
    ConnAck,
    Connect,
    PingReq,
    PingResp,
    Publish,
    StreamDecoder,
    SubAck,
    Will,
    encode_packet,
)


class VirtualClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now

    def advance(self, dt):
        self.now += dt


class WireTap:
    """Raw transport that records every frame the broker sends."""

    def __init__(self):
        self.decoder = StreamDecoder()
        self.packets = []
        self.closed = False

    def send(self, data):
        self.packets.extend(self.decoder.feed(data))

    def close(self):
        self.closed = True


@pytest.fixture
def clock():
    return VirtualClock()


@pytest.fixture
def core(clock):
    return BrokerCore(clock=clock)


def raw_conn(core):
    tap = WireTap()
    return core.connection_made(tap), tap


class TestConnect:
    def test_happy_path(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("ui-1", keepalive=60)))
        assert tap.packets == [ConnAck(0, False)]
        assert core.session_ids() == ["ui-1"]

    def test_takeover_closes_older_session(self, core):
        a = LoopbackClient(core, "ui-1")
        a.connect()
        b = LoopbackClient(core, "ui-1")
        b.connect()
        assert not a.connected and b.connected
        assert core.session_count() == 1

    def test_takeover_fires_old_will(self, core):
        watcher = LoopbackClient(core, "watcher")
        watcher.connect()
        watcher.subscribe("wills/#")
        a = LoopbackClient(core, "dup", will=Will("wills/dup", b"gone"))
        a.connect()
        b = LoopbackClient(core, "dup")
        b.connect()
        delivered = watcher.drain_publishes()
        assert [(p.topic, p.payload) for p in delivered] == [("wills/dup", b"gone")]

    def test_protocol_level_5_refused(self, core):
        conn, tap = raw_conn(core)
        frame = bytearray(encode_packet(Connect("v5")))
        frame[8] = 5
        core.data_received(conn, bytes(frame))
        assert tap.packets == [ConnAck(1, False)]
        assert tap.closed
        assert core.session_count() == 0

    def test_zero_id_with_clean_session_0_rejected(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("", clean_session=False)))
        assert tap.packets == [ConnAck(2, False)]
        assert tap.closed

    def test_zero_id_clean_gets_generated_identity(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("", clean_session=True)))
        assert tap.packets == [ConnAck(0, False)]
        assert core.session_count() == 1

    def test_first_packet_not_connect_closes_silently(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(PingReq()))
        assert tap.packets == []
        assert tap.closed

    def test_clean_session_0_treated_as_clean(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("keeper", clean_session=False)))
        assert tap.packets == [ConnAck(0, session_present=False)]

    def test_second_connect_is_violation(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("x")))
        core.data_received(conn, encode_packet(Connect("x")))
        assert tap.closed


class TestPublish:
    def test_fanout_to_matching_sessions(self, core):
        subs = []
        for name in ("s1", "s2"):
            c = LoopbackClient(core, name)
            c.connect()
            c.subscribe("openscout/+/odom")
            subs.append(c)
        outsider = LoopbackClient(core, "s3")
        outsider.connect()
        outsider.subscribe("other/topic")
        publisher = LoopbackClient(core, "pub")
        publisher.connect()
        publisher.publish("openscout/a/odom", b"x")
        assert [len(c.drain_publishes()) for c in subs] == [1, 1]
        assert outsider.drain_publishes() == []

    def test_overlapping_filters_single_delivery(self, core):
        c = LoopbackClient(core, "c")
        c.connect()
        c.subscribe("a/#", "a/+", "a/b")
        c.publish("a/b", b"1")
        assert len(c.drain_publishes()) == 1

    def test_sender_receives_own_message(self, core):
        c = LoopbackClient(core, "c")
        c.connect()
        c.subscribe("loop")
        c.publish("loop", b"me")
        assert [p.payload for p in c.drain_publishes()] == [b"me"]

    def test_qos1_publish_disconnects_sender(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("bad")))
        core.data_received(
            conn, encode_packet(Publish("t", b"x", qos=1, packet_id=7))
        )
        assert tap.closed
        assert core.session_count() == 0

    def test_wildcard_topic_disconnects_sender(self, core):
        conn, tap = raw_conn(core)
        core.data_received(conn, encode_packet(Connect("bad")))
        # craft a wildcard publish topic on the wire (encoder refuses it)
        frame = bytes([0x30, 0x05, 0x00, 0x03]) + b"a/+"
        core.data_received(conn, frame)
        assert tap.closed

    def test_delivered_retain_flag_cleared_for_live_subscribers(self, core):
        c = LoopbackClient(core, "c")
        c.connect()
        c.subscribe("t")
        c.publish("t", b"x", retain=True)
        (delivery,) = c.drain_publishes()
        assert delivery.retain is False
        assert core.retained["t"] == b"x"

    def test_empty_retained_payload_deletes(self, core):
        c = LoopbackClient(core, "c")
        c.connect()
        c.publish("t", b"x", retain=True)
        assert "t" in core.retained
        c.publish("t", b"", retain=True)
        assert "t" not in core.retained


class TestSubscribe:
    def test_retained_replay_on_subscribe(self, core):
        p = LoopbackClient(core, "p")
        p.connect()
        p.publish("openscout/a/status", b"up", retain=True)
        s = LoopbackClient(core, "s")
        s.connect()
        codes = s.subscribe("openscout/+/status")
        assert codes == (0,)
        (replay,) = s.drain_publishes()
        assert replay.retain is True
        assert replay.payload == b"up"

    def test_invalid_filter_gets_0x80(self, core):
        s = LoopbackClient(core, "s")
        s.connect()
        codes = s.subscribe("ok/t", "a/#/b")
        assert codes == (0x00, 0x80)
        # connection stays open and the valid filter works
        s.publish("ok/t", b"1")
        assert len(s.drain_publishes()) == 1

    def test_duplicate_subscribe_replaces_silently(self, core):
        s = LoopbackClient(core, "s")
        s.connect()
        s.subscribe("dup/t")
        s.subscribe("dup/t")
        s.publish("dup/t", b"x")
        assert len(s.drain_publishes()) == 1

    def test_replay_deduplicated_across_overlapping_filters(self, core):
        p = LoopbackClient(core, "p")
        p.connect()
        p.publish("a/b", b"kept", retain=True)
        s = LoopbackClient(core, "s")
        s.connect()
        s.subscribe("a/#", "a/+")
        replays = s.drain_publishes()
        assert [(r.topic, r.payload) for r in replays] == [("a/b", b"kept")]

    def test_unsubscribe_stops_delivery(self, core):
        s = LoopbackClient(core, "s")
        s.connect()
        s.subscribe("t")
        s.unsubscribe("t")
        s.publish("t", b"x")
        assert s.drain_publishes() == []


class TestKeepalive:
    def test_expiry_at_1_5x(self, core, clock):
        watcher = LoopbackClient(core, "w")
        watcher.connect()
        watcher.subscribe("wills/#")
        c = LoopbackClient(core, "ka", keepalive=2, will=Will("wills/ka", b"lost"))
        c.connect()
        clock.advance(3.1)  # > 1.5 * 2
        assert core.sweep() == ["ka"]
        assert not c.connected
        assert [p.topic for p in watcher.drain_publishes()] == ["wills/ka"]

    def test_activity_refreshes(self, core, clock):
        c = LoopbackClient(core, "ka", keepalive=2)
        c.connect()
        clock.advance(1.9)
        c.ping()
        assert isinstance(c._events[-1], PingResp)
        clock.advance(1.9)
        assert core.sweep() == []
        assert c.connected

    def test_exactly_at_threshold_stays(self, core, clock):
        c = LoopbackClient(core, "ka", keepalive=2)
        c.connect()
        clock.advance(3.0)  # exactly 1.5x: not yet over
        assert core.sweep() == []

    def test_keepalive_zero_never_expires(self, core, clock):
        c = LoopbackClient(core, "forever", keepalive=0)
        c.connect()
        clock.advance(1e6)
        assert core.sweep() == []
        assert c.connected


class TestWill:
    def test_graceful_disconnect_suppresses_will(self, core):
        w = LoopbackClient(core, "w")
        w.connect()
        w.subscribe("#")
        c = LoopbackClient(core, "c", will=Will("st", b"down"))
        c.connect()
        c.disconnect()
        assert w.drain_publishes() == []

    def test_abrupt_close_publishes_and_retains_will(self, core):
        w = LoopbackClient(core, "w")
        w.connect()
        w.subscribe("openscout/a/status")
        c = LoopbackClient(
            core, "c", will=Will("openscout/a/status", b'{"online": false}', retain=True)
        )
        c.connect()
        c.drop()
        (delivery,) = w.drain_publishes()
        assert delivery.payload == b'{"online": false}'
        assert core.retained["openscout/a/status"] == b'{"online": false}'

    def test_abrupt_close_without_will(self, core):
        w = LoopbackClient(core, "w")
        w.connect()
        w.subscribe("#")
        c = LoopbackClient(core, "c")
        c.connect()
        c.drop()
        assert w.drain_publishes() == []

    def test_no_delivery_after_close(self, core):
        c = LoopbackClient(core, "c")
        c.connect()
        c.subscribe("#")
        c.disconnect()
        p = LoopbackClient(core, "p")
        p.connect()
        p.publish("t", b"x")
        assert c.drain_publishes() == []


class TestRandomizedScheduleOracle:
    """Drive the broker with random schedules; check against brute force."""

    TOPICS = ["/".join(c) for d in (1, 2, 3) for c in itertools.product("ab", repeat=d)]
    FILTERS = [
        "/".join(c)
        for d in (1, 2, 3)
        for c in itertools.product(("a", "b", "+"), repeat=d)
    ] + ["#", "a/#", "b/#", "a/+/#", "+/#"]

    def test_qos0_delivery_count_matches_oracle(self):
        rng = random.Random(2025)
        for trial in range(30):
            core = BrokerCore(clock=lambda: 0.0)
            model_subs = {}  # client -> set of filters
            clients = {}
            for i in range(rng.randrange(2, 7)):
                name = f"c{i}"
                c = LoopbackClient(core, name)
                c.connect()
                chosen = rng.sample(self.FILTERS, rng.randrange(0, 4))
                if chosen:
                    c.subscribe(*chosen)
                    c.drain_publishes()  # discard any retained replay
                clients[name] = c
                model_subs[name] = set(chosen)
            for _ in range(60):
                action = rng.random()
                if action < 0.15 and clients:
                    # drop a random client
                    name = rng.choice(list(clients))
                    clients[name].drop()
                    del clients[name], model_subs[name]
                    continue
                topic = rng.choice(self.TOPICS)
                payload = rng.randbytes(rng.randrange(8))
                publisher = rng.choice(list(clients)) if clients else None
                if publisher is None:
                    break
                clients[publisher].publish(topic, payload)
                for name, c in clients.items():
                    expected = 1 if any(
                        reference_matches(f, topic) for f in model_subs[name]
                    ) else 0
                    got = len(c.drain_publishes())
                    assert got == expected, (
                        f"trial {trial}: {name} got {got} deliveries for {topic!r}, "
                        f"filters {model_subs[name]}"
                    )

    def test_retained_store_matches_oracle(self):
        rng = random.Random(77)
        for trial in range(20):
            core = BrokerCore(clock=lambda: 0.0)
            publisher = LoopbackClient(core, "p")
            publisher.connect()
            model = {}
            for _ in range(80):
                topic = rng.choice(self.TOPICS)
                if rng.random() < 0.25:
                    publisher.publish(topic, b"", retain=True)
                    model.pop(topic, None)
                else:
                    payload = rng.randbytes(rng.randrange(1, 6))
                    publisher.publish(topic, payload, retain=True)
                    model[topic] = payload
            # a fresh subscriber sees exactly the latest retained payload
            # per matching topic
            for filter_str in rng.sample(self.FILTERS, 6):
                fresh = LoopbackClient(core, f"fresh-{filter_str}")
                fresh.connect()
                fresh.subscribe(filter_str)
                got = {p.topic: p.payload for p in fresh.drain_publishes()}
                want = {
                    t: v for t, v in model.items() if reference_matches(filter_str, t)
                }
                assert got == want, f"trial {trial} filter {filter_str!r}"
                fresh.disconnect()
