"""Step detection over per-side pressure streams.

A step shows up as a sharp rise in the pressure signal. Each stream is
differenced sample-to-sample and the deltas run through a smoothed
z-score threshold: a delta signals when it sits more than ``threshold``
standard deviations above the mean of the last ``lag`` filtered deltas.
While a delta signals, the rolling window absorbs it damped by
``influence`` so a tall peak does not poison the baseline statistics.

Two guards shape the raw z-score into a usable step trigger:

* ``min_delta`` puts an absolute floor under the trigger, because a
  near-zero window variance would otherwise let microscopic deltas fire;
* ``refractory`` is the minimum gap between two emitted steps on one
  stream, suppressing double triggers inside a single physical step.

Only rising pressure (positive delta) can signal; release edges are
ignored. Exactly one event is emitted per contiguous signaling run, at
the rising edge. The first ``lag`` deltas of a stream only warm the
window up, so the start of every stream is a short dead zone.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import SAMPLE_PERIOD_US, DeltaSample, SensorSample, Side, StepEvent


class StreamMismatchError(ValueError):
    """Consecutive samples came from different (tile, side) streams."""


class GapError(ValueError):
    """Consecutive samples are not exactly one sample period apart."""


@dataclass(frozen=True)
class DetectorParams:
    """Tuning knobs for the streaming detector.

    Defaults are sized for the synthetic pulse in the simulation kit:
    the default step is caught within two samples while sigma=3 baseline
    noise stays below the trigger.
    """

    lag: int = 8                  # rolling window, samples (40 ms)
    threshold: float = 4.0        # standard deviations above window mean
    influence: float = 0.25       # weight of signaling deltas in the window
    refractory_us: int = 80_000   # min spacing between emitted steps
    min_delta: int = 15           # absolute trigger floor, ADC counts

    def __post_init__(self):
        if self.lag < 2:
            raise ValueError(f"lag must be >= 2, got {self.lag}")
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if not 0.0 <= self.influence <= 1.0:
            raise ValueError(f"influence must be in [0, 1], got {self.influence}")
        if self.refractory_us < 0:
            raise ValueError(f"refractory must be >= 0, got {self.refractory_us}")


DEFAULT_PARAMS = DetectorParams()


def delta(prev: SensorSample, cur: SensorSample) -> DeltaSample:
    """Difference two consecutive readings of one stream.

    Raises StreamMismatchError if the samples belong to different
    streams and GapError if they are not exactly one period apart.
    """
    if (prev.tile, prev.side) != (cur.tile, cur.side):
        raise StreamMismatchError(
            f"samples from different streams: "
            f"({prev.tile},{prev.side.letter}) vs ({cur.tile},{cur.side.letter})"
        )
    if cur.t_us - prev.t_us != SAMPLE_PERIOD_US:
        raise GapError(
            f"sample spacing {cur.t_us - prev.t_us} us, expected {SAMPLE_PERIOD_US} us"
        )
    return DeltaSample(cur.tile, cur.side, cur.t_us, cur.value - prev.value)


class StepDetector:
    """Streaming detector for a single (tile, side) stream.

    Stateful fold: feed deltas in time order, get at most one StepEvent
    back per call. Window statistics are recomputed from the ring on
    every step, so there is no incremental drift to diverge from the
    offline reference implementation.
    """

    def __init__(self, params: DetectorParams = DEFAULT_PARAMS):
        self.params = params
        self._ring: deque[float] = deque(maxlen=params.lag)
        self._in_peak = False
        self._last_fire: Optional[int] = None

    @property
    def warmed_up(self) -> bool:
        return len(self._ring) == self.params.lag

    def feed(self, d: DeltaSample) -> Optional[StepEvent]:
        p = self.params
        ring = self._ring
        if len(ring) < p.lag:
            # warm-up: absorb raw deltas, never emit
            ring.append(float(d.delta))
            return None

        mean = sum(ring) / p.lag
        std = math.sqrt(sum((x - mean) ** 2 for x in ring) / p.lag)
        signal = (
            d.delta > 0
            and (d.delta - mean) > p.threshold * std
            and d.delta >= p.min_delta
        )

        event = None
        if signal and not self._in_peak:
            if self._last_fire is None or d.t_us - self._last_fire >= p.refractory_us:
                event = StepEvent(d.tile, d.side, d.t_us, d.delta)
                self._last_fire = d.t_us

        if signal:
            ring.append(p.influence * d.delta + (1.0 - p.influence) * ring[-1])
        else:
            ring.append(float(d.delta))
        self._in_peak = signal
        return event


def detect_stream(
    samples: Iterable[SensorSample], params: DetectorParams = DEFAULT_PARAMS
) -> list[StepEvent]:
    """Run detection over a sample sequence, one detector per stream.

    Streams may be interleaved; each (tile, side) is folded
    independently, so merging or separating them never changes the
    output. Returns events sorted by time.
    """
    streams: dict[tuple[int, Side], list] = {}
    events: list[StepEvent] = []
    for s in samples:
        key = (s.tile, s.side)
        st = streams.get(key)
        if st is None:
            streams[key] = [s, StepDetector(params)]
            continue
        ev = st[1].feed(delta(st[0], s))
        st[0] = s
        if ev is not None:
            events.append(ev)
    events.sort(key=lambda e: (e.t_us, e.tile, e.side.value))
    return events
