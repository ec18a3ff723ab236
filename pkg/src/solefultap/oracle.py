"""Brute-force reference detector.

Recomputes the complete filtered history and the window statistics from
scratch at every index instead of carrying streaming state. O(n * lag)
on purpose: it exists to cross-check ``detect_stream`` and must not
share its ring/edge machinery. On any valid stream the two produce
identical event lists, bit for bit.
"""

import math

from .detection import DEFAULT_PARAMS, DetectorParams
from .model import SAMPLE_PERIOD_US, SensorSample, StepEvent


def oracle_detect(
    samples: list[SensorSample], params: DetectorParams = DEFAULT_PARAMS
) -> list[StepEvent]:
    """Offline detection over one fully materialized stream."""
    if not samples:
        return []
    tile, side = samples[0].tile, samples[0].side
    for prev, cur in zip(samples, samples[1:]):
        if (cur.tile, cur.side) != (tile, side):
            raise ValueError("oracle_detect expects a single (tile, side) stream")
        if cur.t_us - prev.t_us != SAMPLE_PERIOD_US:
            raise ValueError(f"stream gap at t={cur.t_us}")

    deltas = [
        (cur.t_us, cur.value - prev.value)
        for prev, cur in zip(samples, samples[1:])
    ]

    lag = params.lag
    filtered: list[float] = []
    signals: list[bool] = []
    events: list[StepEvent] = []
    last_fire = None
    for i, (t_us, dv) in enumerate(deltas):
        if i < lag:
            filtered.append(float(dv))
            signals.append(False)
            continue
        window = filtered[i - lag : i]
        mean = sum(window) / lag
        std = math.sqrt(sum((x - mean) ** 2 for x in window) / lag)
        signal = (
            dv > 0
            and (dv - mean) > params.threshold * std
            and dv >= params.min_delta
        )
        if signal and not signals[i - 1]:
            if last_fire is None or t_us - last_fire >= params.refractory_us:
                events.append(StepEvent(tile, side, t_us, dv))
                last_fire = t_us
        if signal:
            filtered.append(params.influence * dv + (1.0 - params.influence) * filtered[i - 1])
        else:
            filtered.append(float(dv))
        signals.append(signal)
    return events


def oracle_detect_streams(
    streams: dict, params: DetectorParams = DEFAULT_PARAMS
) -> list[StepEvent]:
    """Oracle over several streams, merged in time order."""
    events = [e for samples in streams.values() for e in oracle_detect(samples, params)]
    events.sort(key=lambda e: (e.t_us, e.tile, e.side.value))
    return events
