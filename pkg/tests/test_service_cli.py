"""Real-time stack service and command-line surface."""

import asyncio
import json
import subprocess
import sys
import time

import pytest

from openscout_twin.client import MqttClient
from openscout_twin.config import RobotConfig, StackSettings
from openscout_twin.messages import Twist, parse_odom, parse_status, serialize_twist
from openscout_twin.service import Stack, StackError

CLI = [sys.executable, "-m", "openscout_twin"]


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, 30))


def make_settings():
    return StackSettings(tcp_port=0, ws_port=0)


class TestStack:
    def test_startup_contract_retained_status(self):
        async def scenario():
            stack = Stack(RobotConfig(), make_settings())
            await stack.start()
            try:
                client = await MqttClient.connect("127.0.0.1", stack.tcp_port, "probe")
                await client.subscribe("openscout/+/status")
                replay = await asyncio.wait_for(client.inbox.get(), 5)
                status = parse_status(replay.payload)
                assert replay.retain and status.online
                assert status.battery_pct == pytest.approx(100, abs=0.5)
                await client.disconnect()
            finally:
                await stack.stop()

        run(scenario())

    def test_clean_shutdown_publishes_offline_status(self):
        async def scenario():
            stack = Stack(RobotConfig(), make_settings())
            await stack.start()
            port = stack.tcp_port
            probe = await MqttClient.connect("127.0.0.1", port, "probe")
            await probe.subscribe("openscout/alpha/status")
            await asyncio.wait_for(probe.inbox.get(), 5)  # retained online
            await stack.stop()
            # offline status was published before the listeners closed
            delivery = await asyncio.wait_for(probe.inbox.get(), 5)
            assert parse_status(delivery.payload).online is False
            await probe.close()

        run(scenario())

    def test_port_in_use_raises_stack_error(self):
        async def scenario():
            first = Stack(RobotConfig(), make_settings())
            await first.start()
            taken = StackSettings(tcp_port=first.tcp_port, ws_port=0)
            second = Stack(RobotConfig(), taken)
            try:
                with pytest.raises(StackError, match="ports"):
                    await second.start()
            finally:
                await second.stop()
                await first.stop()

        run(scenario())

    def test_custom_robot_id(self):
        async def scenario():
            stack = Stack(RobotConfig(), StackSettings(robot_id="r2", tcp_port=0, ws_port=0))
            await stack.start()
            try:
                client = await MqttClient.connect("127.0.0.1", stack.tcp_port, "probe")
                await client.subscribe("openscout/r2/status")
                replay = await asyncio.wait_for(client.inbox.get(), 5)
                assert replay.topic == "openscout/r2/status"
                await client.disconnect()
            finally:
                await stack.stop()

        run(scenario())

    def test_drive_via_network_command(self):
        async def scenario():
            stack = Stack(RobotConfig(), make_settings())
            await stack.start()
            try:
                client = await MqttClient.connect("127.0.0.1", stack.tcp_port, "op")
                await client.subscribe("openscout/alpha/odom")
                payload = serialize_twist(Twist(0.3, 0.0))
                for _ in range(6):
                    await client.publish("openscout/alpha/cmd_vel", payload)
                    await asyncio.sleep(0.25)
                speeds = []
                while not client.inbox.empty():
                    speeds.append(parse_odom(client.inbox.get_nowait().payload).twist.linear_x)
                assert speeds, "no odometry received"
                assert max(speeds) > 0.28  # reached ~command speed
                await client.disconnect()
            finally:
                await stack.stop()

        run(scenario())


class TestCliSurface:
    def test_usage_error_exit_2(self):
        result = subprocess.run(CLI + ["frobnicate"], capture_output=True)
        assert result.returncode == 2

    def test_calibrate_text_and_json(self, tmp_path):
        result = subprocess.run(CLI + ["calibrate"], capture_output=True, text=True)
        assert result.returncode == 0
        assert result.stdout.count("pass") >= 6
        result = subprocess.run(
            CLI + ["calibrate", "--format", "json"], capture_output=True, text=True
        )
        doc = json.loads(result.stdout)
        assert doc["passed"] is True

    def test_scenario_exit_codes(self, tmp_path):
        good = tmp_path / "good.scn"
        good.write_text("AT 0 CMD 0.5 0\nAT 2 ASSERT speed 0 0.01\nDURATION 2\n")
        out = tmp_path / "good.csv"
        result = subprocess.run(
            CLI + ["scenario", str(good), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert out.exists()

        failing = tmp_path / "fail.scn"
        failing.write_text(
            "AT 0 CMD 0.6 0\nAT 2 ASSERT speed 0.6 2%\nDURATION 2\n"
        )
        result = subprocess.run(
            CLI + ["scenario", str(failing), "--payload-kg", "6", "--out", str(tmp_path / "f.csv")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert "FAIL" in result.stdout
        assert "expected" in result.stdout and "actual" in result.stdout

        broken = tmp_path / "broken.scn"
        broken.write_text("AT x CMD 1\n")
        result = subprocess.run(
            CLI + ["scenario", str(broken)], capture_output=True, text=True
        )
        assert result.returncode == 2

    def test_payload_out_of_envelope_refused(self):
        result = subprocess.run(
            CLI + ["run", "--payload-kg", "9"], capture_output=True, text=True
        )
        assert result.returncode == 2
        assert "envelope" in result.stderr

    def test_echo_invalid_filter_exit_2(self):
        result = subprocess.run(
            CLI + ["echo", "--broker-url", "127.0.0.1:1", "a/#/b"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 2

    def test_pub_connection_refused_exit_1(self):
        result = subprocess.run(
            CLI + ["pub", "--broker-url", "127.0.0.1:1", "t", "x"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1

    def test_config_file_applied_and_unknown_key_refused(self, tmp_path):
        config = tmp_path / "twin.conf"
        config.write_text("payload_kg = 6\nrobot_id = r9\n")
        scn = tmp_path / "s.scn"
        scn.write_text("AT 0 CMD 9 0\nAT 3 ASSERT speed 0.45 2%\nDURATION 3\n")
        # keep the watchdog fed long enough to settle
        scn.write_text(
            "AT 0 CMD 9 0\nAT 0.4 CMD 9 0\nAT 0.8 CMD 9 0\nAT 1.2 CMD 9 0\n"
            "AT 1.6 CMD 9 0\nAT 2.0 CMD 9 0\nAT 2.4 CMD 9 0\nAT 2.8 CMD 9 0\n"
            "AT 3 ASSERT speed 0.45 2%\nDURATION 3\n"
        )
        result = subprocess.run(
            CLI
            + ["scenario", str(scn), "--config", str(config), "--out", str(tmp_path / "o.csv")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stdout + result.stderr

        bad = tmp_path / "bad.conf"
        bad.write_text("wheel_diameter = 1\n")
        result = subprocess.run(
            CLI + ["calibrate", "--config", str(bad)], capture_output=True, text=True
        )
        assert result.returncode == 2
        assert "unknown config key" in result.stderr


class TestCliLiveStack:
    def test_run_pub_echo_pipeline(self, tmp_path):
        stack = subprocess.Popen(
            CLI + ["run", "--tcp-port", "0", "--ws-port", "0"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        # ephemeral ports are invisible from outside; use fixed high ports
        stack.terminate()
        stack.wait(timeout=10)

        port = 18991
        stack = subprocess.Popen(
            CLI + ["run", "--tcp-port", str(port), "--ws-port", str(port + 1)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        try:
            url = f"127.0.0.1:{port}"
            deadline = time.time() + 10
            status = None
            while time.time() < deadline:
                probe = subprocess.run(
                    CLI + ["echo", "--broker-url", url, "--count", "1", "--timeout", "2",
                           "openscout/+/status"],
                    capture_output=True,
                    text=True,
                )
                if probe.returncode == 0 and probe.stdout.strip():
                    status = probe.stdout
                    break
                time.sleep(0.3)
            assert status is not None and '"online": true' in status

            pub = subprocess.run(
                CLI + ["pub", "--broker-url", url, "openscout/alpha/cmd_vel",
                       '{"linear":{"x":0.2},"angular":{"z":0}}'],
                capture_output=True,
            )
            assert pub.returncode == 0
            echo = subprocess.run(
                CLI + ["echo", "--broker-url", url, "--count", "3", "--timeout", "5",
                       "openscout/alpha/odom"],
                capture_output=True,
                text=True,
            )
            assert echo.returncode == 0
            lines = [l for l in echo.stdout.splitlines() if l.startswith("openscout/")]
            assert len(lines) == 3
        finally:
            stack.terminate()
            stack.wait(timeout=10)
