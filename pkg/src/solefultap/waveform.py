"""Synthetic pressure waveforms standing in for the physical sensors.

A scripted step contributes a trapezoid pulse to its stream: linear rise
from baseline to peak, flat hold, linear decay back. Overlapping pulses
saturate (pointwise max) rather than sum, mirroring a sensor whose
divider is sized to stay off the rail. Per-sample Gaussian noise is
seeded per stream, so adding a stream never perturbs another one, and
the whole synthesis is reproducible byte for byte.

Noise determinism contract: the generator for stream (tile, side) is
``random.Random(f"{seed}/{tile}/{side.letter}")`` and draws one
``gauss(0, sigma)`` per sample in time order. Samples are rounded to
the nearest integer and clamped to the ADC range.
"""

import random
from dataclasses import dataclass

from .model import ADC_MAX, SAMPLE_PERIOD_US, SensorSample, Side


class ScriptError(ValueError):
    """A step script breaks its invariants or fails to parse."""


@dataclass(frozen=True)
class PulseShape:
    """Trapezoid pulse profile of one footstep on the sensor."""

    baseline: int = 40
    rise_us: int = 15_000
    hold_us: int = 60_000
    decay_us: int = 40_000

    def __post_init__(self):
        if self.rise_us <= 0 or self.hold_us <= 0 or self.decay_us <= 0:
            raise ValueError("rise, hold and decay must all be positive")
        if not 0 <= self.baseline <= ADC_MAX:
            raise ValueError(f"baseline {self.baseline} outside ADC range")

    @property
    def length_us(self) -> int:
        return self.rise_us + self.hold_us + self.decay_us


DEFAULT_SHAPE = PulseShape()
DEFAULT_PEAK = 600


@dataclass(frozen=True)
class ScriptedStep:
    onset_us: int
    tile: int
    side: Side
    peak: int = DEFAULT_PEAK


@dataclass(frozen=True)
class StepScript:
    """A scripted scenario: steps, stream length, noise and seed."""

    steps: tuple[ScriptedStep, ...] = ()
    duration_us: int = 1_000_000
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def tiles(self) -> tuple[int, ...]:
        """Tiles whose streams get synthesized; tile 0 if the script is empty."""
        tiles = {s.tile for s in self.steps}
        return tuple(sorted(tiles)) if tiles else (0,)


def _validate(script: StepScript, shape: PulseShape) -> None:
    if script.noise_sigma < 0:
        raise ScriptError(f"noise sigma must be >= 0, got {script.noise_sigma}")
    if script.duration_us <= 0:
        raise ScriptError(f"duration must be positive, got {script.duration_us}")
    prev_onset = None
    for step in script.steps:
        if step.onset_us < 0:
            raise ScriptError(f"step onset {step.onset_us} is negative")
        if prev_onset is not None and step.onset_us < prev_onset:
            raise ScriptError(
                f"step onsets not sorted: {step.onset_us} after {prev_onset}"
            )
        prev_onset = step.onset_us
        if step.peak > ADC_MAX:
            raise ScriptError(f"step peak {step.peak} above ADC max {ADC_MAX}")
        if step.peak <= shape.baseline:
            raise ScriptError(
                f"step peak {step.peak} not above baseline {shape.baseline}"
            )
        if step.onset_us + shape.length_us > script.duration_us:
            raise ScriptError(
                f"step at {step.onset_us} us runs past duration {script.duration_us} us"
            )


def _pulse_value(dt_us: int, peak: int, shape: PulseShape) -> float | None:
    """Pulse contribution at dt microseconds past onset, None if inactive."""
    if dt_us < 0:
        return None
    if dt_us <= shape.rise_us:
        return shape.baseline + (peak - shape.baseline) * dt_us / shape.rise_us
    dt_us -= shape.rise_us
    if dt_us <= shape.hold_us:
        return float(peak)
    dt_us -= shape.hold_us
    if dt_us <= shape.decay_us:
        return peak - (peak - shape.baseline) * dt_us / shape.decay_us
    return None


def synth(
    script: StepScript, shape: PulseShape = DEFAULT_SHAPE
) -> dict[tuple[int, Side], list[SensorSample]]:
    """Generate per-stream sample sequences for a script.

    Every tile named by the script gets both its Left and Right streams,
    sampled every 5 ms over [0, duration]; sides without steps carry
    baseline plus noise.
    """
    _validate(script, shape)
    n_samples = script.duration_us // SAMPLE_PERIOD_US + 1

    streams: dict[tuple[int, Side], list[SensorSample]] = {}
    for tile in script.tiles():
        for side in (Side.LEFT, Side.RIGHT):
            steps = [s for s in script.steps if s.tile == tile and s.side == side]
            rng = random.Random(f"{script.seed}/{tile}/{side.letter}")
            samples = []
            for i in range(n_samples):
                t = i * SAMPLE_PERIOD_US
                value = float(shape.baseline)
                for s in steps:
                    contrib = _pulse_value(t - s.onset_us, s.peak, shape)
                    if contrib is not None and contrib > value:
                        value = contrib
                if script.noise_sigma > 0:
                    value += rng.gauss(0.0, script.noise_sigma)
                raw = min(ADC_MAX, max(0, round(value)))
                samples.append(SensorSample(tile, side, t, raw))
            streams[(tile, side)] = samples
    return streams


# --- script file format -------------------------------------------------
#
#   SOLEFULTAP-SCRIPT v1
#   sigma <real>
#   seed <uint>
#   duration_us <uint>
#   <onset_us> <tile> <side:L|R> <peak>

SCRIPT_HEADER = "SOLEFULTAP-SCRIPT v1"


def format_script(script: StepScript) -> str:
    lines = [
        SCRIPT_HEADER,
        f"sigma {script.noise_sigma!r}",
        f"seed {script.seed}",
        f"duration_us {script.duration_us}",
    ]
    lines += [
        f"{s.onset_us} {s.tile} {s.side.letter} {s.peak}" for s in script.steps
    ]
    return "\n".join(lines) + "\n"


def parse_script(text: str) -> StepScript:
    """Parse the script format; errors name the offending line."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCRIPT_HEADER:
        raise ScriptError(f"line 1: expected header {SCRIPT_HEADER!r}")

    sigma = 0.0
    seed = 0
    duration_us = None
    steps: list[ScriptedStep] = []
    in_steps = False
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] in ("sigma", "seed", "duration_us"):
                if in_steps:
                    raise ScriptError(
                        f"line {lineno}: directive {parts[0]!r} after step lines"
                    )
                if len(parts) != 2:
                    raise ScriptError(f"line {lineno}: directive takes one value")
                if parts[0] == "sigma":
                    sigma = float(parts[1])
                elif parts[0] == "seed":
                    seed = int(parts[1])
                else:
                    duration_us = int(parts[1])
            elif len(parts) == 4:
                in_steps = True
                steps.append(
                    ScriptedStep(int(parts[0]), int(parts[1]),
                                 Side.from_letter(parts[2]), int(parts[3]))
                )
            else:
                raise ScriptError(f"line {lineno}: unrecognized line {line!r}")
        except ScriptError:
            raise
        except ValueError as exc:
            raise ScriptError(f"line {lineno}: {exc}") from None

    if duration_us is None:
        # default: long enough for the last step's default pulse to finish
        last = max((s.onset_us for s in steps), default=0)
        pad = last + DEFAULT_SHAPE.length_us + SAMPLE_PERIOD_US
        duration_us = -(-pad // SAMPLE_PERIOD_US) * SAMPLE_PERIOD_US
    return StepScript(tuple(steps), duration_us, sigma, seed)


def load_script(path) -> StepScript:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_script(fh.read())


def save_script(script: StepScript, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_script(script))


def format_sample_dump(streams: dict[tuple[int, Side], list[SensorSample]]) -> str:
    """Optional dump: one ``<t_us> <tile> <side> <value>`` line per sample."""
    rows = [s for samples in streams.values() for s in samples]
    rows.sort(key=lambda s: (s.t_us, s.tile, s.side.value))
    return "".join(f"{s.t_us} {s.tile} {s.side.letter} {s.value}\n" for s in rows)
