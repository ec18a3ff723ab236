"""Node session logic: modes, routing, recording and playback.

A node owns exactly one active mode and routes each detected step
according to it:

* Solo       - play every step locally, send nothing.
* Group      - send to the single peer; play locally only if echo is on.
* Instruction- suppress live steps; playback feeds the actuators.
* Theater    - a performer fans out to every audience node (echo
               optional, off by default); audience steps go nowhere.

Remote steps are scheduled on the receiver's clock at arrival (plus an
optional smoothing buffer); the originating timestamp travels for
logging only. Recordings rebase event times so the capture window
starts at zero, and playback emission times are computed in exact
rational microseconds: consecutive emissions are spaced
``round_half_up(gap / speed)`` apart, so time scaling is bit-exact and
reproducible across machines.
"""

import re
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .actuation import FiredImpact, ImpactScheduler
from .detection import DEFAULT_PARAMS, DetectorParams, StepDetector, delta
from .model import ImpactPattern, Mode, SensorSample, Side, StepEvent

DEFAULT_INJECT_STRENGTH = 400


class RuleError(ValueError):
    """A routing rule breaks its mode's invariant or is misapplied."""


class TopologyError(RuntimeError):
    """Requested mode needs peers/audience the node does not have."""


class RecordingError(RuntimeError):
    """Recording started twice or stopped while inactive."""


class PlaybackError(RuntimeError):
    """Playback operation without an active playback."""


class SpeedError(ValueError):
    """Playback speed must be strictly positive."""


class RecordingFormatError(ValueError):
    """Recording file failed to parse or has an unsupported version."""


class NodeRole(Enum):
    STANDALONE = 0
    PERFORMER = 1
    AUDIENCE = 2
    PEER = 3


@dataclass(frozen=True)
class RoutingRule:
    mode: Mode
    local_echo: bool
    destinations: frozenset[int]


@dataclass(frozen=True)
class RouteResult:
    local: tuple[StepEvent, ...]
    remote: tuple[tuple[int, StepEvent], ...]


def route(rule: RoutingRule, event: StepEvent) -> RouteResult:
    """Split one step into local playback and remote deliveries.

    Raises RuleError when the rule violates its mode invariant.
    """
    mode = rule.mode
    if mode is Mode.SOLO:
        if not rule.local_echo or rule.destinations:
            raise RuleError("solo requires local echo and no destinations")
        return RouteResult((event,), ())
    if mode is Mode.GROUP:
        if len(rule.destinations) != 1:
            raise RuleError(
                f"group requires exactly one peer, rule has {len(rule.destinations)}"
            )
        peer = next(iter(rule.destinations))
        local = (event,) if rule.local_echo else ()
        return RouteResult(local, ((peer, event),))
    if mode is Mode.INSTRUCTION:
        if rule.destinations:
            raise RuleError("instruction does not transmit")
        return RouteResult((), ())
    # Theater: performer rules carry every audience id; audience rules
    # carry none and transmit nothing.
    local = (event,) if rule.local_echo else ()
    remote = tuple((dest, event) for dest in sorted(rule.destinations))
    return RouteResult(local, remote)


# --- recordings -----------------------------------------------------------

RECORDING_HEADER_RE = re.compile(r"^SOLEFULTAP-REC v(\d+)$")
RECORDING_VERSION = 1


@dataclass(frozen=True)
class Recording:
    """Time-sorted captured steps, rebased to start at zero."""

    events: tuple[StepEvent, ...] = ()
    version: int = RECORDING_VERSION
    epoch_us: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        prev = None
        for e in self.events:
            if e.t_us < 0:
                raise ValueError("recording contains a negative timestamp")
            if prev is not None and e.t_us < prev:
                raise ValueError("recording events not sorted by time")
            prev = e.t_us


def format_recording(rec: Recording) -> str:
    lines = [f"SOLEFULTAP-REC v{rec.version}", f"epoch_us={rec.epoch_us}"]
    lines += [
        f"{e.t_us} {e.tile} {e.side.letter} {e.strength}" for e in rec.events
    ]
    return "\n".join(lines) + "\n"


def parse_recording(text: str) -> Recording:
    lines = text.splitlines()
    if not lines:
        raise RecordingFormatError("empty recording file")
    m = RECORDING_HEADER_RE.match(lines[0].strip())
    if not m:
        raise RecordingFormatError(f"line 1: bad header {lines[0]!r}")
    version = int(m.group(1))
    if version != RECORDING_VERSION:
        raise RecordingFormatError(f"unsupported recording version {version}")
    if len(lines) < 2 or not lines[1].startswith("epoch_us="):
        raise RecordingFormatError("line 2: expected epoch_us=<int>")
    try:
        epoch_us = int(lines[1].split("=", 1)[1])
    except ValueError:
        raise RecordingFormatError("line 2: bad epoch value") from None

    events = []
    for lineno, raw in enumerate(lines[2:], start=3):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise RecordingFormatError(f"line {lineno}: expected 4 fields")
        try:
            events.append(
                StepEvent(int(parts[1]), Side.from_letter(parts[2]),
                          int(parts[0]), int(parts[3]))
            )
        except ValueError as exc:
            raise RecordingFormatError(f"line {lineno}: {exc}") from None
    try:
        return Recording(tuple(events), version, epoch_us)
    except ValueError as exc:
        raise RecordingFormatError(str(exc)) from None


def load_recording(path) -> Recording:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_recording(fh.read())


def save_recording(rec: Recording, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_recording(rec))


# --- playback -------------------------------------------------------------

Speed = Union[int, float, Fraction]


def _as_speed(speed: Speed) -> Fraction:
    try:
        frac = Fraction(speed)
    except (TypeError, ValueError):
        raise SpeedError(f"speed must be a number, got {speed!r}") from None
    if frac <= 0:
        raise SpeedError("speed must be > 0")
    return frac


def _round_half_up(value: Fraction) -> int:
    # non-negative inputs only; int() truncation == floor here
    return int(value + Fraction(1, 2))


class PlaybackState:
    """Cursor over a recording being replayed at a fixed speed.

    ``anchor_emit_us``/``anchor_rec_us`` pin the last emission (or the
    seek origin) so every following gap is scaled independently:
    emission deltas are exactly round_half_up(recording delta / speed).
    """

    def __init__(self, rec: Recording, speed: Speed, now_us: int):
        self.recording = rec
        self.speed = _as_speed(speed)
        self.cursor = 0
        self.anchor_emit_us = now_us
        self.anchor_rec_us = 0
        self.next_emit_us: Optional[int] = None
        self._reschedule()

    def _reschedule(self) -> None:
        if self.cursor >= len(self.recording.events):
            self.next_emit_us = None
            return
        gap = self.recording.events[self.cursor].t_us - self.anchor_rec_us
        self.next_emit_us = self.anchor_emit_us + _round_half_up(
            Fraction(gap) / self.speed
        )

    @property
    def done(self) -> bool:
        return self.next_emit_us is None

    def seek(self, t_us: int, now_us: int) -> None:
        """Reposition to recording time ``t_us``; emissions restart from now."""
        if t_us < 0:
            raise ValueError("seek target must be >= 0")
        times = [e.t_us for e in self.recording.events]
        self.cursor = bisect_left(times, t_us)
        self.anchor_emit_us = now_us
        self.anchor_rec_us = t_us
        self._reschedule()

    def set_speed(self, speed: Speed) -> None:
        self.speed = _as_speed(speed)
        self._reschedule()

    def pop_due(self, now_us: int) -> list[StepEvent]:
        """Events whose emission time has arrived, stamped with it."""
        out = []
        while self.next_emit_us is not None and self.next_emit_us <= now_us:
            src = self.recording.events[self.cursor]
            out.append(StepEvent(src.tile, src.side, self.next_emit_us, src.strength))
            self.anchor_emit_us = self.next_emit_us
            self.anchor_rec_us = src.t_us
            self.cursor += 1
            self._reschedule()
        return out


# --- the node state machine ------------------------------------------------


class TapNode:
    """One tile node: detection in, routed impact schedules out.

    Strictly sequential; every input carries or implies a timestamp and
    the caller drives the clock through ``advance``. Remote deliveries
    are collected in ``outbox`` as (destination node id, event) pairs
    for whatever transport sits above.
    """

    def __init__(
        self,
        node_id: int = 0,
        tile: int = 0,
        *,
        params: DetectorParams = DEFAULT_PARAMS,
        pattern: ImpactPattern = ImpactPattern(1),
        mode: Mode = Mode.SOLO,
        role: NodeRole = NodeRole.STANDALONE,
        local_echo: bool = False,
        follow_along: bool = False,
        smoothing_us: int = 0,
        log_actual_fire_time: bool = False,
    ):
        self.node_id = node_id
        self.tile = tile
        self.params = params
        self.pattern = pattern
        self.mode = mode
        self.role = role
        self.local_echo = local_echo  # applies to Group and Theater-performer
        self.follow_along = follow_along
        self.smoothing_us = smoothing_us
        self.scheduler = ImpactScheduler(log_actual_time=log_actual_fire_time)
        self.peers: dict[int, NodeRole] = {}
        self.outbox: list[tuple[int, StepEvent]] = []
        self._streams: dict[tuple[int, Side], list] = {}
        self._recorder: Optional[tuple[int, list[StepEvent]]] = None
        self._playback: Optional[PlaybackState] = None

    # -- routing --------------------------------------------------------

    def _peer_ids(self, role: NodeRole) -> list[int]:
        return sorted(pid for pid, r in self.peers.items() if r is role)

    def routing_rule(self) -> RoutingRule:
        if self.mode is Mode.SOLO:
            return RoutingRule(Mode.SOLO, True, frozenset())
        if self.mode is Mode.GROUP:
            return RoutingRule(
                Mode.GROUP, self.local_echo, frozenset(self._peer_ids(NodeRole.PEER))
            )
        if self.mode is Mode.INSTRUCTION:
            return RoutingRule(Mode.INSTRUCTION, False, frozenset())
        if self.role is NodeRole.PERFORMER:
            return RoutingRule(
                Mode.THEATER,
                self.local_echo,
                frozenset(self._peer_ids(NodeRole.AUDIENCE)),
            )
        return RoutingRule(Mode.THEATER, False, frozenset())

    def check_topology(self, mode: Mode) -> None:
        if mode is Mode.GROUP and len(self._peer_ids(NodeRole.PEER)) != 1:
            raise TopologyError(
                f"group mode needs exactly one peer, have {len(self._peer_ids(NodeRole.PEER))}"
            )
        if (
            mode is Mode.THEATER
            and self.role is NodeRole.PERFORMER
            and not self._peer_ids(NodeRole.AUDIENCE)
        ):
            raise TopologyError("theater performer needs at least one audience node")

    def set_mode(self, mode: Mode) -> None:
        """Switch modes atomically; in-flight impacts keep their schedule."""
        self.check_topology(mode)
        self.mode = mode

    def set_pattern(self, count: int) -> None:
        self.pattern = ImpactPattern(count)

    # -- inputs ----------------------------------------------------------

    def handle_sample(self, sample: SensorSample) -> list[StepEvent]:
        """Feed one pressure sample; returns any steps it triggered."""
        key = (sample.tile, sample.side)
        st = self._streams.get(key)
        if st is None:
            self._streams[key] = [sample, StepDetector(self.params)]
            return []
        event = st[1].feed(delta(st[0], sample))
        st[0] = sample
        if event is None:
            return []
        self._on_local_step(event)
        return [event]

    def inject_step(
        self, side: Side, now_us: int, strength: int = DEFAULT_INJECT_STRENGTH
    ) -> StepEvent:
        """Manual step (operator UI / tests); routed exactly like a detection."""
        event = StepEvent(self.tile, side, now_us, strength)
        self._on_local_step(event)
        return event

    def receive_remote(self, event: StepEvent, now_us: int) -> StepEvent:
        """A step from another node: play here, on the local clock."""
        local = StepEvent(self.tile, event.side, now_us + self.smoothing_us, event.strength)
        self._schedule_local(local)
        return local

    def _on_local_step(self, event: StepEvent) -> None:
        if self._recorder is not None:
            start, events = self._recorder
            events.append(
                StepEvent(event.tile, event.side, event.t_us - start, event.strength)
            )
        result = route(self.routing_rule(), event)
        for ev in result.local:
            self._schedule_local(ev)
        if self.mode is Mode.INSTRUCTION and self.follow_along:
            self._schedule_local(event)
        self.outbox.extend(result.remote)

    def _schedule_local(self, event: StepEvent) -> None:
        self.scheduler.submit(event, self.pattern)

    # -- recording --------------------------------------------------------

    @property
    def is_recording(self) -> bool:
        return self._recorder is not None

    def start_recording(self, now_us: int) -> None:
        if self._recorder is not None:
            raise RecordingError("recording already active")
        self._recorder = (now_us, [])

    def stop_recording(self) -> Recording:
        if self._recorder is None:
            raise RecordingError("no recording active")
        _, events = self._recorder
        self._recorder = None
        return Recording(tuple(events))

    # -- playback ----------------------------------------------------------

    @property
    def is_playing(self) -> bool:
        return self._playback is not None

    def start_playback(self, rec: Recording, speed: Speed, now_us: int) -> None:
        if self.mode is not Mode.INSTRUCTION:
            raise RuleError("playback requires instruction mode")
        state = PlaybackState(rec, speed, now_us)
        self._playback = None if state.done else state

    def seek(self, t_us: int, now_us: int) -> None:
        if self._playback is None:
            raise PlaybackError("no active playback")
        self._playback.seek(t_us, now_us)
        if self._playback.done:
            self._playback = None

    def set_speed(self, speed: Speed) -> None:
        if self._playback is None:
            raise PlaybackError("no active playback")
        self._playback.set_speed(speed)

    def stop_playback(self) -> None:
        self._playback = None

    # -- clock --------------------------------------------------------------

    def advance(self, now_us: int) -> list[FiredImpact]:
        """Emit due playback events, then fire due impact commands."""
        if self._playback is not None:
            for event in self._playback.pop_due(now_us):
                self._schedule_local(event)
            if self._playback.done:
                self._playback = None
        return self.scheduler.tick(now_us)
