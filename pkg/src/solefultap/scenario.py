"""End-to-end virtual-time scenarios: synth -> detection -> actuation.

The whole pipeline runs on one explicitly advanced clock, so every
timing claim in the report is exact. The report matches detections back
to the scripted steps (a detection belongs to the most recent onset on
its stream) and reads each step's impact times from the firings tagged
with its detection, which keeps overlapping patterns apart.
"""

from dataclasses import dataclass
from typing import Optional

from .actuation import FiredImpact, LogEntry
from .detection import DEFAULT_PARAMS, DetectorParams
from .model import SAMPLE_PERIOD_US, ImpactPattern, Side, StepEvent
from .session import TapNode
from .waveform import DEFAULT_SHAPE, PulseShape, StepScript, synth

REPORT_HEADER = "SOLEFULTAP-REPORT v1"


@dataclass(frozen=True)
class StepTiming:
    """Measured timeline of one scripted step."""

    index: int
    onset_us: int
    tile: int
    side: Side
    detect_us: Optional[int]
    first_impact_us: Optional[int]
    intervals_us: tuple[int, ...]

    @property
    def latency_us(self) -> Optional[int]:
        if self.first_impact_us is None:
            return None
        return self.first_impact_us - self.onset_us


@dataclass(frozen=True)
class TimelineReport:
    pattern_count: int
    steps: tuple[StepTiming, ...]
    spurious: tuple[StepEvent, ...]

    @property
    def detected_count(self) -> int:
        return sum(1 for s in self.steps if s.detect_us is not None)

    @property
    def max_latency_us(self) -> Optional[int]:
        latencies = [s.latency_us for s in self.steps if s.latency_us is not None]
        return max(latencies) if latencies else None

    @property
    def interval_min_us(self) -> Optional[int]:
        intervals = [iv for s in self.steps for iv in s.intervals_us]
        return min(intervals) if intervals else None

    @property
    def interval_max_us(self) -> Optional[int]:
        intervals = [iv for s in self.steps for iv in s.intervals_us]
        return max(intervals) if intervals else None


@dataclass(frozen=True)
class ScenarioResult:
    events: tuple[StepEvent, ...]
    log: tuple[LogEntry, ...]
    fired: tuple[FiredImpact, ...]
    report: TimelineReport


def run_scenario(
    script: StepScript,
    shape: PulseShape = DEFAULT_SHAPE,
    params: DetectorParams = DEFAULT_PARAMS,
    pattern: ImpactPattern = ImpactPattern(1),
) -> ScenarioResult:
    """Run one node over a script in virtual time and report the timeline."""
    streams = synth(script, shape)
    node = TapNode(params=params, pattern=pattern)

    events: list[StepEvent] = []
    fired: list[FiredImpact] = []
    n_samples = script.duration_us // SAMPLE_PERIOD_US + 1
    ordered_streams = sorted(streams.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
    for i in range(n_samples):
        now = i * SAMPLE_PERIOD_US
        for _, samples in ordered_streams:
            events.extend(node.handle_sample(samples[i]))
        fired.extend(node.advance(now))
    now = script.duration_us
    while node.scheduler.pending:
        now += SAMPLE_PERIOD_US
        fired.extend(node.advance(now))

    report = build_report(script, events, fired, pattern)
    return ScenarioResult(tuple(events), tuple(node.scheduler.log), tuple(fired), report)


def build_report(
    script: StepScript,
    events: list[StepEvent],
    fired: list[FiredImpact],
    pattern: ImpactPattern,
) -> TimelineReport:
    # detection -> scripted step: latest onset at or before the event,
    # on the same stream; at most one detection per step
    by_stream_onsets: dict[tuple[int, Side], list[tuple[int, int]]] = {}
    for idx, step in enumerate(script.steps):
        by_stream_onsets.setdefault((step.tile, step.side), []).append(
            (step.onset_us, idx)
        )

    detection_of: dict[int, StepEvent] = {}
    spurious: list[StepEvent] = []
    for event in sorted(events, key=lambda e: e.t_us):
        onsets = by_stream_onsets.get((event.tile, event.side), [])
        candidate = None
        for onset_us, idx in onsets:
            if onset_us <= event.t_us:
                candidate = idx
            else:
                break
        if candidate is None or candidate in detection_of:
            spurious.append(event)
        else:
            detection_of[candidate] = event

    # impacts belonging to each detection, via the origin tag
    fired_for: dict[StepEvent, list[int]] = {}
    for f in fired:
        if f.origin is not None:
            fired_for.setdefault(f.origin, []).append(f.t_us)

    steps = []
    for idx, step in enumerate(script.steps):
        event = detection_of.get(idx)
        detect_us = event.t_us if event else None
        first_impact_us = None
        intervals: tuple[int, ...] = ()
        if event is not None:
            times = sorted(fired_for.get(event, []))
            if times:
                first_impact_us = times[0]
                intervals = tuple(b - a for a, b in zip(times, times[1:]))
        steps.append(
            StepTiming(idx, step.onset_us, step.tile, step.side,
                       detect_us, first_impact_us, intervals)
        )
    return TimelineReport(pattern.count, tuple(steps), tuple(spurious))


def format_report(report: TimelineReport) -> str:
    def opt(value) -> str:
        return "-" if value is None else str(value)

    lines = [
        REPORT_HEADER,
        f"pattern_count {report.pattern_count}",
        f"steps {len(report.steps)}",
        f"detected {report.detected_count}",
        f"spurious {len(report.spurious)}",
        f"max_latency_us {opt(report.max_latency_us)}",
        f"interval_min_us {opt(report.interval_min_us)}",
        f"interval_max_us {opt(report.interval_max_us)}",
    ]
    for s in report.steps:
        intervals = ",".join(str(iv) for iv in s.intervals_us) if s.intervals_us else "-"
        lines.append(
            f"step {s.index} onset_us {s.onset_us} tile {s.tile} side {s.side.letter} "
            f"detect_us {opt(s.detect_us)} first_impact_us {opt(s.first_impact_us)} "
            f"intervals_us {intervals}"
        )
    return "\n".join(lines) + "\n"
