"""Operator command line.

    solefultap simulate --script FILE [--pattern N] [--report F] [--log F]
    solefultap run --mode M [--role R] [--peer H:P]... [--listen H:P]
                   [--control PORT] [--ui-dir DIR]
    solefultap record start|stop [--file F] [--port P]
    solefultap play --file F [--speed S] [--port P]
    solefultap --show-config

Exit codes are a stable contract: 0 success, 1 invariant violation
(simulate found bad timing or missed/spurious detections), 2 usage or
parse errors. Defaults can be overridden with SOLEFULTAP_* environment
variables; --show-config prints the effective values.
"""

import argparse
import json
import os
import signal
import socket
import sys
import time

from .actuation import format_actuation_log
from .detection import DEFAULT_PARAMS
from .model import IMPACT_INTERVAL_US, ImpactPattern, Mode, SAMPLE_PERIOD_US
from .runtime import LiveConfig, LiveNode, StartupError
from .scenario import format_report, run_scenario
from .session import NodeRole
from .waveform import DEFAULT_SHAPE, ScriptError, load_script

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2

LATENCY_BUDGET_US = 30_000

ENV_PREFIX = "SOLEFULTAP_"


def _env_default(name: str, fallback, cast=int):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


DEFAULTS = {
    "control_port": _env_default("CONTROL_PORT", 7340),
    "host": _env_default("HOST", "127.0.0.1", cast=str),
    "pattern": _env_default("PATTERN", 1),
    "node_id": _env_default("NODE_ID", 0),
    "tile": _env_default("TILE", 0),
}


def show_config() -> None:
    print("defaults (override with SOLEFULTAP_<NAME>):")
    for key, value in sorted(DEFAULTS.items()):
        print(f"  {key} = {value}")
    print("detector:")
    p = DEFAULT_PARAMS
    print(f"  lag = {p.lag} samples ({p.lag * SAMPLE_PERIOD_US} us)")
    print(f"  threshold = {p.threshold} sigma")
    print(f"  influence = {p.influence}")
    print(f"  refractory_us = {p.refractory_us}")
    print(f"  min_delta = {p.min_delta}")
    print("pulse:")
    s = DEFAULT_SHAPE
    print(f"  baseline = {s.baseline}")
    print(f"  rise_us = {s.rise_us}")
    print(f"  hold_us = {s.hold_us}")
    print(f"  decay_us = {s.decay_us}")
    print("timing:")
    print(f"  sample_period_us = {SAMPLE_PERIOD_US}")
    print(f"  impact_interval_us = {IMPACT_INTERVAL_US}")
    print(f"  latency_budget_us = {LATENCY_BUDGET_US}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solefultap",
        description="Floor-tile step engine: simulate scenarios or run a live node.",
    )
    parser.add_argument("--show-config", action="store_true",
                        help="print effective defaults and exit")
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="run a scripted scenario in virtual time")
    sim.add_argument("--script", required=True, help="scenario script file")
    sim.add_argument("--pattern", type=int, default=DEFAULTS["pattern"],
                     choices=(1, 2, 3), help="impacts per step")
    sim.add_argument("--report", help="write the timeline report here")
    sim.add_argument("--log", help="write the actuation log here")
    sim.add_argument("--quiet", action="store_true", help="suppress the summary")

    run = sub.add_parser("run", help="run a live node on the wall clock")
    run.add_argument("--mode", default="solo",
                     choices=[m.label for m in Mode])
    run.add_argument("--role", default="standalone",
                     choices=[r.name.lower() for r in NodeRole])
    run.add_argument("--peer", action="append", default=[], metavar="HOST:PORT",
                     help="dial a peer link (repeatable)")
    run.add_argument("--listen", metavar="HOST:PORT",
                     help="accept peer links here")
    run.add_argument("--control", type=int, default=DEFAULTS["control_port"],
                     metavar="PORT", help="control channel port")
    run.add_argument("--node-id", type=int, default=DEFAULTS["node_id"])
    run.add_argument("--tile", type=int, default=DEFAULTS["tile"])
    run.add_argument("--pattern", type=int, default=DEFAULTS["pattern"],
                     choices=(1, 2, 3))
    run.add_argument("--local-echo", action="store_true",
                     help="also fire locally in group/theater")
    run.add_argument("--follow-along", action="store_true",
                     help="instruction mode also plays live steps")
    run.add_argument("--ui-dir", help="serve these static files on the control port")

    rec = sub.add_parser("record", help="drive recording on a running node")
    rec.add_argument("action", choices=("start", "stop"))
    rec.add_argument("--file", help="write the recording here on stop")
    rec.add_argument("--host", default=DEFAULTS["host"])
    rec.add_argument("--port", type=int, default=DEFAULTS["control_port"])

    play = sub.add_parser("play", help="play a recording on a running node")
    play.add_argument("--file", required=True,
                      help="recording path as seen by the node")
    play.add_argument("--speed", type=float, default=1.0)
    play.add_argument("--host", default=DEFAULTS["host"])
    play.add_argument("--port", type=int, default=DEFAULTS["control_port"])
    return parser


# -- simulate ----------------------------------------------------------------


def check_invariants(report, pattern_count: int) -> list[str]:
    problems = []
    for step in report.steps:
        where = f"step {step.index} (onset {step.onset_us} us)"
        if step.detect_us is None:
            problems.append(f"{where}: not detected")
            continue
        if step.latency_us is None:
            problems.append(f"{where}: no impact fired")
            continue
        if step.latency_us > LATENCY_BUDGET_US:
            problems.append(
                f"{where}: latency {step.latency_us} us over budget {LATENCY_BUDGET_US} us"
            )
        if len(step.intervals_us) != pattern_count - 1 or any(
            iv != IMPACT_INTERVAL_US for iv in step.intervals_us
        ):
            problems.append(
                f"{where}: intervals {list(step.intervals_us)} != "
                f"{[IMPACT_INTERVAL_US] * (pattern_count - 1)}"
            )
    for event in report.spurious:
        problems.append(
            f"spurious detection at {event.t_us} us on side {event.side.letter}"
        )
    return problems


def cmd_simulate(args) -> int:
    try:
        script = load_script(args.script)
    except OSError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScriptError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        result = run_scenario(script, pattern=ImpactPattern(args.pattern))
    except ScriptError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.log:
        with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_actuation_log(list(result.log)))
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_report(result.report))

    report = result.report
    if not args.quiet:
        print(
            f"steps {len(report.steps)}  detected {report.detected_count}  "
            f"spurious {len(report.spurious)}  firings {len(result.log)}"
        )
        if report.max_latency_us is not None:
            print(
                f"max latency {report.max_latency_us} us  "
                f"intervals [{report.interval_min_us}, {report.interval_max_us}] us"
            )
    problems = check_invariants(report, args.pattern)
    for problem in problems:
        print(f"invariant violation: {problem}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


# -- run -----------------------------------------------------------------------


def cmd_run(args) -> int:
    config = LiveConfig(
        node_id=args.node_id,
        tile=args.tile,
        mode=Mode.from_label(args.mode),
        role=NodeRole[args.role.upper()],
        pattern_count=args.pattern,
        control_port=args.control,
        listen_addr=args.listen,
        peer_addrs=list(args.peer),
        local_echo=args.local_echo,
        follow_along=args.follow_along,
        ui_dir=args.ui_dir,
    )
    stop = {"flag": False}

    def _sigint(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, _sigint)
    signal.signal(signal.SIGTERM, _sigint)
    try:
        live = LiveNode(config)
        live.start()
    except StartupError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"node {config.node_id} up: control port {live.control_port}", flush=True)
    if live.listen_port:
        print(f"peer listener on port {live.listen_port}", flush=True)
    try:
        while not stop["flag"]:
            time.sleep(0.2)
    finally:
        live.stop()
    return EXIT_OK


# -- record / play ---------------------------------------------------------------


def control_request(host: str, port: int, payload: dict,
                    expect: tuple[str, ...], timeout: float = 5.0) -> dict:
    """Send one control line and wait for its reply, skipping broadcasts."""
    with socket.create_connection((host, port), timeout=timeout) as conn:
        conn.sendall((json.dumps(payload) + "\n").encode("utf-8"))
        buf = bytearray()
        conn.settimeout(timeout)
        while True:
            nl = buf.find(b"\n")
            if nl >= 0:
                line = buf[:nl].decode("utf-8", errors="replace")
                del buf[: nl + 1]
                if not line.strip():
                    continue
                reply = json.loads(line)
                if reply.get("type") in expect or reply.get("type") == "error":
                    return reply
                continue
            data = conn.recv(4096)
            if not data:
                raise ConnectionError("node closed the control connection")
            buf.extend(data)


def cmd_record(args) -> int:
    payload = {"type": "record", "action": args.action}
    if args.action == "stop" and args.file:
        payload["file"] = args.file
    try:
        reply = control_request(args.host, args.port, payload, expect=("record_ack",))
    except (OSError, ConnectionError) as exc:
        print(f"control connection failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if reply.get("type") == "error":
        print(f"node error: {reply.get('msg')}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.action == "stop":
        count = reply.get("count", 0)
        print(f"recorded {count} steps" + (f" -> {args.file}" if args.file else ""))
        if args.file and not os.path.exists(args.file):
            # node may live elsewhere; write the embedded events locally
            from .model import Side, StepEvent
            from .session import Recording, save_recording

            events = tuple(
                StepEvent(e["tile"], Side.from_letter(e["side"]), e["t_us"], e["strength"])
                for e in reply.get("events", [])
            )
            save_recording(Recording(events), args.file)
    else:
        print("recording started")
    return EXIT_OK


def cmd_play(args) -> int:
    payload = {"type": "play", "speed": args.speed, "file": args.file}
    try:
        reply = control_request(args.host, args.port, payload, expect=("play_ack",))
    except (OSError, ConnectionError) as exc:
        print(f"control connection failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if reply.get("type") == "error":
        print(f"node error: {reply.get('msg')}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"playing {reply.get('events')} events from {args.file} at {args.speed}x")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        show_config()
        return EXIT_OK
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "record":
        return cmd_record(args)
    if args.command == "play":
        return cmd_play(args)
    parser.print_help()
    return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
