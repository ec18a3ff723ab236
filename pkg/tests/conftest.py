"""Shared corpus builders for the test suite.

The randomized corpora are seeded and the acceptance numbers are frozen
against these exact generators; change them and the frozen expectations
must be recomputed.
"""

import random

import pytest

from solefultap.model import SAMPLE_PERIOD_US, SensorSample, Side
from solefultap.waveform import ScriptedStep, StepScript


def random_script(
    seed: int,
    n_steps: int,
    *,
    tile: int = 0,
    sigma: float = 3.0,
    start_us: int = 60_000,
    min_gap_us: int = 250_000,
    max_gap_us: int = 400_000,
    peaks: tuple[int, int] = (300, 900),
) -> StepScript:
    """Randomized but reproducible scenario: n steps with jittered
    onsets, sides and peaks, spaced widely enough to stay apart."""
    rng = random.Random(seed * 7919 + 17)
    steps = []
    t = start_us
    for _ in range(n_steps):
        side = rng.choice((Side.LEFT, Side.RIGHT))
        peak = rng.randrange(peaks[0], peaks[1] + 1)
        onset = (t // SAMPLE_PERIOD_US) * SAMPLE_PERIOD_US
        steps.append(ScriptedStep(onset, tile, side, peak))
        t = onset + rng.randrange(min_gap_us, max_gap_us + 1)
    duration = steps[-1].onset_us + 300_000 if steps else 300_000
    return StepScript(tuple(steps), duration, sigma, seed)


def flat_stream(
    n: int, value: int = 40, tile: int = 0, side: Side = Side.LEFT
) -> list[SensorSample]:
    return [SensorSample(tile, side, i * SAMPLE_PERIOD_US, value) for i in range(n)]


@pytest.fixture
def twenty_step_script() -> StepScript:
    return random_script(0, 20)
