"""Operator control channel: newline-delimited JSON over a byte stream.

Request vocabulary (client to node), one object per line:

    {"type":"step","side":"L"|"R"[,"strength":N]}
    {"type":"mode","mode":"solo"|"group"|"instruction"|"theater"}
    {"type":"pattern","count":1|2|3}
    {"type":"record","action":"start"|"stop"[,"file":PATH]}
    {"type":"play","speed":NUMBER,"file":PATH}
    {"type":"seek","t_us":INT}
    {"type":"speed","speed":NUMBER}
    {"type":"state"}

Every line gets exactly one reply line: a typed ack, requested data, or
{"type":"error","msg":...}. Unknown fields are ignored; unknown types
and malformed lines get an error reply and the connection stays open.
Asynchronous node-to-client traffic ("impact", "step_detected") is
emitted by the owning loop, not by this dispatcher.
"""

import json

from .actuation import FiredImpact
from .model import Mode, Side, StepEvent
from .session import (
    DEFAULT_INJECT_STRENGTH,
    PlaybackError,
    RecordingError,
    RuleError,
    SpeedError,
    TapNode,
    TopologyError,
    load_recording,
    save_recording,
)


def impact_message(fired: FiredImpact) -> dict:
    cmd = fired.command
    return {
        "type": "impact",
        "tile": cmd.tile,
        "side": cmd.side.letter,
        "pos": cmd.pos.name.lower(),
        "t_us": fired.t_us,
    }


def step_message(event: StepEvent) -> dict:
    return {
        "type": "step_detected",
        "tile": event.tile,
        "side": event.side.letter,
        "t_us": event.t_us,
        "strength": event.strength,
    }


def error_message(msg: str) -> dict:
    return {"type": "error", "msg": msg}


def _event_dict(event: StepEvent) -> dict:
    return {
        "t_us": event.t_us,
        "tile": event.tile,
        "side": event.side.letter,
        "strength": event.strength,
    }


class ControlDispatcher:
    """Maps control lines onto one TapNode. Never raises: every problem
    turns into an error reply so the connection survives."""

    def __init__(self, node: TapNode):
        self.node = node

    def state_snapshot(self) -> dict:
        node = self.node
        return {
            "type": "state",
            "node_id": node.node_id,
            "tile": node.tile,
            "mode": node.mode.label,
            "role": node.role.name.lower(),
            "pattern": node.pattern.count,
            "recording": node.is_recording,
            "playing": node.is_playing,
            "peers": len(node.peers),
        }

    def handle_line(self, line: str, now_us: int) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            return error_message("malformed line: not valid JSON")
        if not isinstance(request, dict):
            return error_message("malformed line: expected a JSON object")
        rtype = request.get("type")
        if not isinstance(rtype, str):
            return error_message("missing or non-string 'type'")
        handler = getattr(self, f"_handle_{rtype}", None)
        if handler is None:
            return error_message(f"unknown type: {rtype}")
        try:
            return handler(request, now_us)
        except (RuleError, TopologyError, RecordingError, PlaybackError,
                SpeedError, ValueError) as exc:
            return error_message(str(exc))
        except OSError as exc:
            return error_message(str(exc))

    # -- handlers ---------------------------------------------------------

    def _handle_step(self, request: dict, now_us: int) -> dict:
        side = Side.from_letter(str(request.get("side")))
        strength = request.get("strength", DEFAULT_INJECT_STRENGTH)
        if not isinstance(strength, int) or strength <= 0:
            return error_message("strength must be a positive integer")
        event = self.node.inject_step(side, now_us, strength)
        return {
            "type": "step_ack",
            "side": side.letter,
            "t_us": event.t_us,
            "strength": event.strength,
        }

    def _handle_mode(self, request: dict, now_us: int) -> dict:
        mode = Mode.from_label(str(request.get("mode")))
        self.node.set_mode(mode)
        return {"type": "mode_ack", "mode": mode.label}

    def _handle_pattern(self, request: dict, now_us: int) -> dict:
        count = request.get("count")
        if not isinstance(count, int):
            return error_message("pattern count must be an integer")
        self.node.set_pattern(count)
        return {"type": "pattern_ack", "count": count}

    def _handle_record(self, request: dict, now_us: int) -> dict:
        action = request.get("action")
        if action == "start":
            self.node.start_recording(now_us)
            return {"type": "record_ack", "action": "start", "t_us": now_us}
        if action == "stop":
            rec = self.node.stop_recording()
            path = request.get("file")
            if path:
                save_recording(rec, path)
            return {
                "type": "record_ack",
                "action": "stop",
                "count": len(rec.events),
                "events": [_event_dict(e) for e in rec.events],
            }
        return error_message("record action must be 'start' or 'stop'")

    def _handle_play(self, request: dict, now_us: int) -> dict:
        speed = request.get("speed", 1.0)
        if not isinstance(speed, (int, float)) or isinstance(speed, bool):
            return error_message("speed must be a number")
        if speed <= 0:
            return error_message("speed must be > 0")
        path = request.get("file")
        if not isinstance(path, str) or not path:
            return error_message("play needs a 'file' path")
        try:
            rec = load_recording(path)
        except FileNotFoundError:
            return error_message(f"file not found: {path}")
        self.node.start_playback(rec, speed, now_us)
        return {
            "type": "play_ack",
            "file": path,
            "speed": speed,
            "events": len(rec.events),
        }

    def _handle_seek(self, request: dict, now_us: int) -> dict:
        t_us = request.get("t_us")
        if not isinstance(t_us, int) or isinstance(t_us, bool):
            return error_message("seek t_us must be an integer")
        self.node.seek(t_us, now_us)
        return {"type": "seek_ack", "t_us": t_us}

    def _handle_speed(self, request: dict, now_us: int) -> dict:
        speed = request.get("speed")
        if not isinstance(speed, (int, float)) or isinstance(speed, bool):
            return error_message("speed must be a number")
        if speed <= 0:
            return error_message("speed must be > 0")
        self.node.set_speed(speed)
        return {"type": "speed_ack", "speed": speed}

    def _handle_state(self, request: dict, now_us: int) -> dict:
        return self.state_snapshot()


def encode_line(message: dict) -> bytes:
    return (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")
