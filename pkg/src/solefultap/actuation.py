"""Impact scheduling: step events in, timed solenoid firings out.

A StepEvent expands into 1-3 ImpactCommands on the stepped side with a
fixed 90 ms spacing (front / front-back / front-back-front). Commands
sit in a min-queue keyed by fire time and are released by ``tick``. In
virtual time the log records the scheduled fire instant exactly; a live
node logs the actual release time instead.

A solenoid that has just struck cannot re-fire until its stroke and
re-arm windows pass. Commands that land inside that window are deferred
to the earliest legal instant, never dropped: a lost impact is audible,
a 30 ms slip at 90 ms spacing is not.
"""

import heapq
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    ImpactCommand,
    ImpactPattern,
    Side,
    SolenoidPos,
    StepEvent,
    solenoid_index,
)

DISPATCH_DELAY_US = 0      # step time -> first impact, exact in virtual time
ON_TIME_US = 20_000        # solenoid stroke duration
REARM_US = 10_000          # recovery after a stroke before the next fire

_POSITIONS = {
    1: (SolenoidPos.FRONT,),
    2: (SolenoidPos.FRONT, SolenoidPos.BACK),
    3: (SolenoidPos.FRONT, SolenoidPos.BACK, SolenoidPos.FRONT),
}


def expand(
    event: StepEvent, pattern: ImpactPattern, dispatch_delay_us: int = DISPATCH_DELAY_US
) -> list[ImpactCommand]:
    """Expand one step into its impact commands.

    All commands land on the event's tile and side; positions follow the
    fixed per-count ordering and fire times are spaced exactly
    ``pattern.interval_us`` apart starting at event time plus dispatch
    delay.
    """
    first = event.t_us + dispatch_delay_us
    return [
        ImpactCommand(event.tile, event.side, pos, first + i * pattern.interval_us)
        for i, pos in enumerate(_POSITIONS[pattern.count])
    ]


@dataclass(frozen=True)
class LogEntry:
    """One realized firing in the actuation log."""

    t_us: int
    tile: int
    side: Side
    pos: SolenoidPos

    @property
    def solenoid(self) -> int:
        return solenoid_index(self.side, self.pos)


@dataclass(frozen=True)
class FiredImpact:
    """A firing as returned from tick, with its originating step."""

    t_us: int
    command: ImpactCommand
    origin: Optional[StepEvent] = None


class SolenoidBank:
    """Re-fire bookkeeping for the 4 strikers of one tile."""

    def __init__(self, tile: int, on_time_us: int = ON_TIME_US, rearm_us: int = REARM_US):
        self.tile = tile
        self.on_time_us = on_time_us
        self.rearm_us = rearm_us
        self._last_fire: list[Optional[int]] = [None] * 4

    def earliest_fire_us(self, solenoid: int) -> int:
        last = self._last_fire[solenoid]
        if last is None:
            return 0
        return last + self.on_time_us + self.rearm_us

    def mark_fired(self, solenoid: int, t_us: int) -> None:
        self._last_fire[solenoid] = t_us


@dataclass(order=True)
class _QueuedCommand:
    # heap key: fire time, then (tile, solenoid) for deterministic ties,
    # then insertion sequence
    fire_at_us: int
    tile: int
    solenoid: int
    seq: int
    command: ImpactCommand = field(compare=False)
    origin: Optional[StepEvent] = field(compare=False, default=None)


class ImpactScheduler:
    """Per-node command queue plus one solenoid bank per tile.

    Strictly sequential; drive it with a monotone clock (virtual ticks
    in tests and simulation, the wall clock on a live node).
    """

    def __init__(
        self,
        *,
        dispatch_delay_us: int = DISPATCH_DELAY_US,
        on_time_us: int = ON_TIME_US,
        rearm_us: int = REARM_US,
        log_actual_time: bool = False,
    ):
        self.dispatch_delay_us = dispatch_delay_us
        self.on_time_us = on_time_us
        self.rearm_us = rearm_us
        self.log_actual_time = log_actual_time
        self.log: list[LogEntry] = []
        self._heap: list[_QueuedCommand] = []
        self._banks: dict[int, SolenoidBank] = {}
        self._seq = 0
        self._last_now: Optional[int] = None

    @property
    def pending(self) -> int:
        return len(self._heap)

    def bank(self, tile: int) -> SolenoidBank:
        b = self._banks.get(tile)
        if b is None:
            b = self._banks[tile] = SolenoidBank(tile, self.on_time_us, self.rearm_us)
        return b

    def enqueue(
        self, commands: list[ImpactCommand], origin: Optional[StepEvent] = None
    ) -> None:
        for cmd in commands:
            heapq.heappush(
                self._heap,
                _QueuedCommand(cmd.fire_at_us, cmd.tile, cmd.solenoid, self._seq, cmd, origin),
            )
            self._seq += 1

    def submit(self, event: StepEvent, pattern: ImpactPattern) -> list[ImpactCommand]:
        """Expand a step and enqueue its commands tagged with the event."""
        commands = expand(event, pattern, self.dispatch_delay_us)
        self.enqueue(commands, origin=event)
        return commands

    def tick(self, now_us: int) -> list[FiredImpact]:
        """Fire every command due at or before ``now_us``.

        Commands landing inside a solenoid's stroke+rearm window are
        re-queued for the earliest legal instant.
        """
        if self._last_now is not None and now_us < self._last_now:
            raise ValueError(f"clock moved backwards: {now_us} < {self._last_now}")
        self._last_now = now_us

        fired: list[FiredImpact] = []
        heap = self._heap
        while heap and heap[0].fire_at_us <= now_us:
            item = heapq.heappop(heap)
            at = now_us if self.log_actual_time else item.fire_at_us
            bank = self.bank(item.tile)
            legal = bank.earliest_fire_us(item.solenoid)
            if at < legal:
                heapq.heappush(
                    heap,
                    _QueuedCommand(legal, item.tile, item.solenoid, self._seq,
                                   item.command, item.origin),
                )
                self._seq += 1
                continue
            bank.mark_fired(item.solenoid, at)
            entry = LogEntry(at, item.tile, item.command.side, item.command.pos)
            self.log.append(entry)
            fired.append(FiredImpact(at, item.command, item.origin))
        return fired


def format_actuation_log(entries: list[LogEntry]) -> str:
    """Render the log in its line format: ``<t_us> <tile> <side> <pos>``."""
    ordered = sorted(entries, key=lambda e: (e.t_us, e.tile, e.solenoid))
    return "".join(
        f"{e.t_us} {e.tile} {e.side.letter} {e.pos.letter}\n" for e in ordered
    )


def parse_actuation_log(text: str) -> list[LogEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        t_us, tile = int(parts[0]), int(parts[1])
        entries.append(
            LogEntry(t_us, tile, Side.from_letter(parts[2]), SolenoidPos.from_letter(parts[3]))
        )
    return entries
