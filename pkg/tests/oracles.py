"""Independent reference implementations shared by test modules.

These stay deliberately naive (recursion, brute force, fine-step Euler)
and never call into the code paths they check.
"""

from __future__ import annotations

import numpy as np


def reference_matches(filter_str: str, topic: str) -> bool:
    """Naive backtracking topic matcher."""

    def rec(segs, levels):
        if not segs:
            return not levels
        if segs[0] == "#":
            return True
        if not levels:
            return False
        return (segs[0] == "+" or segs[0] == levels[0]) and rec(segs[1:], levels[1:])

    return rec(filter_str.split("/"), topic.split("/"))


def euler_pose_trace(v_sub, w_sub, substep_dt, refine=100):
    """Explicit-Euler pose oracle on a ``substep_dt / refine`` grid.

    Inputs are held constant within each substep; returns pose arrays
    sampled at every substep boundary.
    """
    fine_dt = substep_dt / refine
    v = np.repeat(np.asarray(v_sub), refine)
    w = np.repeat(np.asarray(w_sub), refine)
    theta_starts = np.concatenate(([0.0], np.cumsum(w[:-1]) * fine_dt))
    x = np.cumsum(v * np.cos(theta_starts) * fine_dt)
    y = np.cumsum(v * np.sin(theta_starts) * fine_dt)
    theta = np.cumsum(w * fine_dt)
    return x[refine - 1 :: refine], y[refine - 1 :: refine], theta[refine - 1 :: refine]


def random_packet(rng):
    """One random valid packet; round-trip fodder."""
    from openscout_twin.mqtt import (
        ConnAck,
        Connect,
        Disconnect,
        PingReq,
        PingResp,
        Publish,
        SubAck,
        Subscribe,
        UnsubAck,
        Unsubscribe,
        Will,
    )

    topic_chars = "abz09/_-"
    choice = rng.randrange(10)
    if choice == 0:
        will = None
        if rng.random() < 0.5:
            will = Will(
                "".join(rng.choice(topic_chars) for _ in range(rng.randrange(1, 8))).strip("/")
                or "w",
                rng.randbytes(rng.randrange(6)),
                retain=rng.random() < 0.5,
                qos=rng.randrange(3),
            )
        return Connect(
            "".join(rng.choice("abc123-") for _ in range(rng.randrange(24))),
            clean_session=rng.random() < 0.5,
            keepalive=rng.randrange(0x10000),
            will=will,
        )
    if choice == 1:
        return ConnAck(rng.randrange(6), rng.random() < 0.5)
    if choice in (2, 3, 4):
        qos = rng.randrange(3)
        return Publish(
            "".join(rng.choice(topic_chars) for _ in range(rng.randrange(1, 16)))
            .replace("#", "a")
            .replace("+", "b")
            or "t",
            rng.randbytes(rng.randrange(32)),
            qos=qos,
            retain=rng.random() < 0.5,
            dup=qos > 0 and rng.random() < 0.3,
            packet_id=rng.randrange(1, 0x10000) if qos else None,
        )
    if choice == 5:
        return Subscribe(
            rng.randrange(1, 0x10000),
            tuple(
                (
                    "".join(rng.choice("ab+#/") for _ in range(rng.randrange(1, 8))) or "#",
                    rng.randrange(3),
                )
                for _ in range(rng.randrange(1, 4))
            ),
        )
    if choice == 6:
        return SubAck(
            rng.randrange(1, 0x10000),
            tuple(rng.choice((0, 1, 2, 0x80)) for _ in range(rng.randrange(1, 4))),
        )
    if choice == 7:
        return Unsubscribe(
            rng.randrange(1, 0x10000),
            tuple("".join(rng.choice("ab/")) for _ in range(rng.randrange(1, 4))),
        )
    if choice == 8:
        return UnsubAck(rng.randrange(1, 0x10000))
    return rng.choice((PingReq(), PingResp(), Disconnect()))
