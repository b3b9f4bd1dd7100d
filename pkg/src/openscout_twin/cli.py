"""Command-line entry point.

Subcommands:

    run        host broker + robot (real-time by default)
    scenario   execute a scenario file under fast virtual time
    calibrate  check steady-state speeds against the calibration anchors
    pub        publish one MQTT message
    echo       subscribe and print deliveries as "topic payload" lines

Exit codes: 0 ok, 1 assertion/connection failure, 2 usage/parse error.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import signal
import sys

from .client import MqttClient, MqttClientError
from .config import ConfigError, RobotConfig, StackSettings, apply_config, load_config_file
from .harness import calibrate, run_scenario
from .mqtt import InvalidFilterError, validate_filter
from .scenario import ScenarioError, load_scenario
from .service import StackError, run_stack

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="key = value config file")
    parser.add_argument("--robot-id", help="robot identity (topic segment)")
    parser.add_argument("--payload-kg", type=float, help="payload mass, 0-6 kg")
    parser.add_argument("--seed", type=int, help="RNG seed (encoder noise)")
    parser.add_argument(
        "--format", choices=("text", "json"), default="text", help="report format"
    )
    parser.add_argument("--out", metavar="PATH", help="output file (scenario CSV)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openscout-twin",
        description="Desk-scale digital twin of the OpenScout v1.1 mobile robot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run broker + robot until interrupted")
    _shared_flags(p_run)
    p_run.add_argument("--bind", help="listener bind address (default 127.0.0.1)")
    p_run.add_argument("--tcp-port", type=int, help="MQTT TCP port (default 1883)")
    p_run.add_argument("--ws-port", type=int, help="MQTT WebSocket port (default 9001)")
    mode = p_run.add_mutually_exclusive_group()
    mode.add_argument("--realtime", action="store_true", default=True)
    mode.add_argument(
        "--fast", dest="realtime", action="store_false", help="no pacing sleeps"
    )

    p_scn = sub.add_parser("scenario", help="run a scenario file in fast mode")
    _shared_flags(p_scn)
    p_scn.add_argument("file", help="scenario file")

    p_cal = sub.add_parser("calibrate", help="verify speed anchors at 0/3/6 kg")
    _shared_flags(p_cal)

    p_pub = sub.add_parser("pub", help="publish one message")
    _shared_flags(p_pub)
    p_pub.add_argument("--broker-url", default="127.0.0.1:1883", metavar="HOST:PORT")
    p_pub.add_argument("--retain", action="store_true")
    p_pub.add_argument("topic")
    p_pub.add_argument("payload")

    p_echo = sub.add_parser("echo", help="print deliveries for a filter")
    _shared_flags(p_echo)
    p_echo.add_argument("--broker-url", default="127.0.0.1:1883", metavar="HOST:PORT")
    p_echo.add_argument("--count", type=int, help="exit after N messages")
    p_echo.add_argument("--timeout", type=float, help="exit after S seconds")
    p_echo.add_argument("filter")
    return parser


def _load_configuration(args) -> tuple[RobotConfig, StackSettings]:
    values = load_config_file(args.config) if args.config else {}
    cfg, settings = apply_config(values)
    overrides: dict[str, str] = {}
    if args.robot_id is not None:
        overrides["robot_id"] = args.robot_id
    if getattr(args, "payload_kg", None) is not None:
        overrides["payload_kg"] = repr(args.payload_kg)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "bind", None) is not None:
        overrides["bind_host"] = args.bind
    if getattr(args, "tcp_port", None) is not None:
        overrides["tcp_port"] = str(args.tcp_port)
    if getattr(args, "ws_port", None) is not None:
        overrides["ws_port"] = str(args.ws_port)
    return apply_config(overrides, cfg, settings)


def _parse_broker_url(url: str) -> tuple[str, int]:
    url = url.removeprefix("mqtt://").removeprefix("tcp://")
    host, sep, port = url.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"broker url must be HOST:PORT, got {url!r}")
    return host, int(port)


def cmd_run(args) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s: %(message)s"
    )
    cfg, settings = _load_configuration(args)

    async def serve() -> None:
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        await run_stack(cfg, settings, realtime=args.realtime, stop_event=stop)

    try:
        asyncio.run(serve())
    except StackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg, settings = _load_configuration(args)
    try:
        scenario = load_scenario(args.file)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out if args.out else "trajectory.csv"
    report = run_scenario(scenario, cfg, settings, out_path=out)
    for result in report.assertions:
        print(result.describe())
    print(f"wrote {out} ({len(report.rows_csv.splitlines()) - 1} rows)")
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_calibrate(args) -> int:
    cfg, settings = _load_configuration(args)
    report = calibrate(cfg, settings)
    print(report.as_json() if args.format == "json" else report.as_text())
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_pub(args) -> int:
    host, port = _parse_broker_url(args.broker_url)

    async def publish_once() -> None:
        client = await MqttClient.connect(host, port, "pub-cli", keepalive=30)
        try:
            await client.publish(args.topic, args.payload.encode(), retain=args.retain)
        finally:
            await client.disconnect()

    try:
        asyncio.run(publish_once())
    except MqttClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_echo(args) -> int:
    try:
        validate_filter(args.filter)
    except InvalidFilterError as exc:
        print(f"invalid filter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    host, port = _parse_broker_url(args.broker_url)

    async def echo_loop() -> int:
        client = await MqttClient.connect(host, port, "echo-cli", keepalive=30)
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        try:
            loop.add_signal_handler(signal.SIGINT, stop.set)
        except (NotImplementedError, RuntimeError):
            pass
        codes = await client.subscribe(args.filter)
        if codes != (0,):
            print(f"error: broker refused filter ({codes})", file=sys.stderr)
            await client.disconnect()
            return EXIT_USAGE
        seen = 0
        deadline = loop.time() + args.timeout if args.timeout else None
        try:
            while not stop.is_set():
                timeout = None
                if deadline is not None:
                    timeout = max(0.0, deadline - loop.time())
                get = asyncio.create_task(client.inbox.get())
                waiter = asyncio.create_task(stop.wait())
                done, pending = await asyncio.wait(
                    {get, waiter}, timeout=timeout, return_when=asyncio.FIRST_COMPLETED
                )
                for task in pending:
                    task.cancel()
                if get in done:
                    delivery = get.result()
                    text = delivery.payload.decode("utf-8", errors="replace")
                    print(f"{delivery.topic} {text}", flush=True)
                    seen += 1
                    if args.count and seen >= args.count:
                        break
                elif not done:  # timeout expired
                    break
        finally:
            await client.disconnect()
        return EXIT_OK

    try:
        return asyncio.run(echo_loop())
    except MqttClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "scenario": cmd_scenario,
        "calibrate": cmd_calibrate,
        "pub": cmd_pub,
        "echo": cmd_echo,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
