"""Node-to-node wire protocol and the operator control channel.

Binary framing (node to node), all integers big-endian:

    length  u16   counts the type byte plus the payload
    type    u8
    payload       type-specific

    HELLO     0x01  proto_version u8, role u8, node_id u32
    STEP      0x02  tile u16, side u8 (0=L, 1=R), t_us u64, strength u16
    MODE      0x03  mode u8 (0=solo, 1=group, 2=instruction, 3=theater)
    HEARTBEAT 0x04  t_us u64
    PATTERN   0x05  count u8 (1..3)

A bad frame (unknown type, out-of-range enum, wrong payload size) is
consumed whole, so the stream stays aligned on the next length prefix.

The control channel is a separate, human-readable face: one JSON object
per line over any ordered byte stream. Its vocabulary lives in
``control``; this module only carries the binary codec.
"""

import struct
from dataclasses import dataclass
from typing import Optional, Union

from .model import Mode, Side, StepEvent
from .session import NodeRole

PROTO_VERSION = 1

TYPE_HELLO = 0x01
TYPE_STEP = 0x02
TYPE_MODE = 0x03
TYPE_HEARTBEAT = 0x04
TYPE_PATTERN = 0x05


class FrameError(ValueError):
    """Undecodable frame. ``consumed`` bytes skip it and realign."""

    def __init__(self, msg: str, consumed: int):
        super().__init__(msg)
        self.consumed = consumed


def _check_uint(value: int, bits: int, name: str) -> int:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{name} {value} does not fit in u{bits}")
    return value


@dataclass(frozen=True)
class Hello:
    role: NodeRole
    node_id: int
    proto_version: int = PROTO_VERSION

    def __post_init__(self):
        _check_uint(self.proto_version, 8, "proto_version")
        _check_uint(self.node_id, 32, "node_id")


@dataclass(frozen=True)
class Step:
    tile: int
    side: Side
    t_us: int
    strength: int

    def __post_init__(self):
        _check_uint(self.tile, 16, "tile")
        _check_uint(self.t_us, 64, "t_us")
        _check_uint(self.strength, 16, "strength")

    @classmethod
    def from_event(cls, event: StepEvent) -> "Step":
        return cls(event.tile, event.side, event.t_us, event.strength)

    def to_event(self) -> StepEvent:
        return StepEvent(self.tile, self.side, self.t_us, self.strength)


@dataclass(frozen=True)
class ModeChange:
    mode: Mode


@dataclass(frozen=True)
class Heartbeat:
    t_us: int

    def __post_init__(self):
        _check_uint(self.t_us, 64, "t_us")


@dataclass(frozen=True)
class PatternChange:
    count: int

    def __post_init__(self):
        if self.count not in (1, 2, 3):
            raise ValueError(f"pattern count must be 1..3, got {self.count}")


Message = Union[Hello, Step, ModeChange, Heartbeat, PatternChange]

_PAYLOAD_SIZE = {
    TYPE_HELLO: 6,
    TYPE_STEP: 13,
    TYPE_MODE: 1,
    TYPE_HEARTBEAT: 8,
    TYPE_PATTERN: 1,
}


def encode(msg: Message) -> bytes:
    """Deterministic byte layout; validity is enforced at construction."""
    if isinstance(msg, Hello):
        return struct.pack(">HBBBI", 7, TYPE_HELLO, msg.proto_version,
                           msg.role.value, msg.node_id)
    if isinstance(msg, Step):
        return struct.pack(">HBHBQH", 14, TYPE_STEP, msg.tile,
                           msg.side.value, msg.t_us, msg.strength)
    if isinstance(msg, ModeChange):
        return struct.pack(">HBB", 2, TYPE_MODE, msg.mode.value)
    if isinstance(msg, Heartbeat):
        return struct.pack(">HBQ", 9, TYPE_HEARTBEAT, msg.t_us)
    if isinstance(msg, PatternChange):
        return struct.pack(">HBB", 2, TYPE_PATTERN, msg.count)
    raise TypeError(f"not a protocol message: {msg!r}")


def decode(buf: Union[bytes, bytearray, memoryview]) -> Optional[tuple[Message, int]]:
    """Decode one frame from the head of ``buf``.

    Returns (message, bytes consumed), or None when more bytes are
    needed. Raises FrameError for a complete-but-invalid frame; its
    ``consumed`` covers the whole frame so the caller can resync.
    """
    if len(buf) < 2:
        return None
    (length,) = struct.unpack_from(">H", buf, 0)
    total = 2 + length
    if length == 0:
        raise FrameError("zero-length frame", consumed=2)
    if len(buf) < total:
        return None
    ftype = buf[2]
    payload = bytes(buf[3:total])
    expected = _PAYLOAD_SIZE.get(ftype)
    if expected is None:
        raise FrameError(f"unknown frame type 0x{ftype:02X}", consumed=total)
    if len(payload) != expected:
        raise FrameError(
            f"frame type 0x{ftype:02X} payload {len(payload)} bytes, expected {expected}",
            consumed=total,
        )
    try:
        if ftype == TYPE_HELLO:
            version, role, node_id = struct.unpack(">BBI", payload)
            return Hello(NodeRole(role), node_id, version), total
        if ftype == TYPE_STEP:
            tile, side, t_us, strength = struct.unpack(">HBQH", payload)
            return Step(tile, Side(side), t_us, strength), total
        if ftype == TYPE_MODE:
            return ModeChange(Mode(payload[0])), total
        if ftype == TYPE_HEARTBEAT:
            (t_us,) = struct.unpack(">Q", payload)
            return Heartbeat(t_us), total
        (count,) = struct.unpack(">B", payload)
        return PatternChange(count), total
    except ValueError as exc:
        raise FrameError(f"bad field in frame type 0x{ftype:02X}: {exc}",
                         consumed=total) from None


class StreamDecoder:
    """Incremental decoder over an ordered byte stream.

    ``feed`` returns decoded messages in order; invalid frames surface
    as FrameError values in the same list (already skipped, stream
    stays aligned). Partial frames wait in the buffer.
    """

    def __init__(self):
        self._buf = bytearray()

    @property
    def buffered(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[Union[Message, FrameError]]:
        self._buf.extend(data)
        out: list[Union[Message, FrameError]] = []
        while True:
            try:
                result = decode(self._buf)
            except FrameError as exc:
                del self._buf[: exc.consumed]
                out.append(exc)
                continue
            if result is None:
                return out
            msg, consumed = result
            del self._buf[:consumed]
            out.append(msg)
