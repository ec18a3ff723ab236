"""Shared value types for the floor-tile step engine.

All times are integer microseconds since the session epoch (0 at node
start). Integer time keeps the timing contracts exact: impact spacing is
asserted with ``==``, never with a float tolerance.
"""

from dataclasses import dataclass
from enum import Enum

SAMPLE_PERIOD_US = 5_000
"""Pressure sensors are polled on a fixed 5 ms grid."""

IMPACT_INTERVAL_US = 90_000
"""Spacing between successive impacts expanded from a single step."""

ADC_MAX = 1023
"""10-bit analog reads; raw sensor values live in [0, ADC_MAX]."""


class OutOfRangeError(ValueError):
    """Raw ADC reading outside [0, ADC_MAX]."""


class Side(Enum):
    """Which half of a tile a sensor or solenoid sits on."""

    LEFT = 0
    RIGHT = 1

    @property
    def letter(self) -> str:
        return "L" if self is Side.LEFT else "R"

    @classmethod
    def from_letter(cls, letter: str) -> "Side":
        if letter == "L":
            return cls.LEFT
        if letter == "R":
            return cls.RIGHT
        raise ValueError(f"bad side letter: {letter!r}")


class SolenoidPos(Enum):
    """Front or back striker within one side of a tile."""

    FRONT = 0
    BACK = 1

    @property
    def letter(self) -> str:
        return "F" if self is SolenoidPos.FRONT else "B"

    @classmethod
    def from_letter(cls, letter: str) -> "SolenoidPos":
        if letter == "F":
            return cls.FRONT
        if letter == "B":
            return cls.BACK
        raise ValueError(f"bad position letter: {letter!r}")


class Mode(Enum):
    """Interaction mode of a node; exactly one is active at a time."""

    SOLO = 0
    GROUP = 1
    INSTRUCTION = 2
    THEATER = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Mode":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown mode: {label!r}") from None


def validate_sample(raw: int) -> int:
    """Check a raw ADC reading and return it unchanged.

    Raises OutOfRangeError unless 0 <= raw <= ADC_MAX.
    """
    if not 0 <= raw <= ADC_MAX:
        raise OutOfRangeError(f"sample value {raw} outside [0, {ADC_MAX}]")
    return raw


def solenoid_index(side: Side, pos: SolenoidPos) -> int:
    """Fixed bijection (side, pos) -> [0, 3].

    Left/Front=0, Left/Back=1, Right/Front=2, Right/Back=3.
    """
    return side.value * 2 + pos.value


def solenoid_from_index(index: int) -> tuple[Side, SolenoidPos]:
    """Inverse of solenoid_index."""
    if not 0 <= index <= 3:
        raise ValueError(f"solenoid index {index} outside [0, 3]")
    return Side(index // 2), SolenoidPos(index % 2)


@dataclass(frozen=True)
class SensorSample:
    """One timestamped pressure reading from one side of one tile."""

    tile: int
    side: Side
    t_us: int
    value: int  # ADC counts

    def __post_init__(self):
        validate_sample(self.value)


@dataclass(frozen=True)
class DeltaSample:
    """Sample-to-sample pressure difference on one stream."""

    tile: int
    side: Side
    t_us: int
    delta: int  # cur.value - prev.value, so |delta| <= ADC_MAX

    def __post_init__(self):
        if abs(self.delta) > ADC_MAX:
            raise OutOfRangeError(f"delta {self.delta} outside [-{ADC_MAX}, {ADC_MAX}]")


@dataclass(frozen=True)
class StepEvent:
    """A detected step: the unit routed between nodes.

    ``strength`` is the peak pressure delta at onset. It is carried in
    recordings and over the wire but deliberately does not modulate the
    actuators, which are plain ON/OFF strikers.
    """

    tile: int
    side: Side
    t_us: int
    strength: int

    def __post_init__(self):
        if self.strength <= 0:
            raise ValueError(f"step strength must be positive, got {self.strength}")


@dataclass(frozen=True)
class ImpactPattern:
    """Step-to-impacts expansion rule: 1 to 3 impacts, fixed spacing.

    The orderings are a pure function of count (see actuation.expand);
    the interval is a fixed 90 ms and is not configurable.
    """

    count: int = 1
    interval_us: int = IMPACT_INTERVAL_US

    def __post_init__(self):
        if self.count not in (1, 2, 3):
            raise ValueError(f"pattern count must be 1, 2 or 3, got {self.count}")
        if self.interval_us != IMPACT_INTERVAL_US:
            raise ValueError(f"impact interval is fixed at {IMPACT_INTERVAL_US} us")


@dataclass(frozen=True)
class ImpactCommand:
    """One scheduled solenoid firing."""

    tile: int
    side: Side
    pos: SolenoidPos
    fire_at_us: int

    @property
    def solenoid(self) -> int:
        return solenoid_index(self.side, self.pos)
