import random

import pytest

from solefultap.model import Mode, Side
from solefultap.netproto import (
    FrameError,
    Heartbeat,
    Hello,
    ModeChange,
    PatternChange,
    Step,
    StreamDecoder,
    decode,
    encode,
)
from solefultap.session import NodeRole


def random_message(rng: random.Random):
    kind = rng.randrange(5)
    if kind == 0:
        return Hello(rng.choice(list(NodeRole)), rng.randrange(1 << 32),
                     rng.randrange(1 << 8))
    if kind == 1:
        return Step(rng.randrange(1 << 16), rng.choice((Side.LEFT, Side.RIGHT)),
                    rng.randrange(1 << 64), rng.randrange(1 << 16))
    if kind == 2:
        return ModeChange(rng.choice(list(Mode)))
    if kind == 3:
        return Heartbeat(rng.randrange(1 << 64))
    return PatternChange(rng.choice((1, 2, 3)))


class TestFixedLayouts:
    def test_step_frame_bytes(self):
        msg = Step(tile=1, side=Side.RIGHT, t_us=1_000_000, strength=600)
        assert encode(msg).hex() == "000e0200010100000000000f42400258"

    def test_heartbeat_frame_bytes(self):
        assert encode(Heartbeat(0)).hex() == "0009040000000000000000"

    def test_pattern_frame_bytes(self):
        assert encode(PatternChange(3)).hex() == "00020503"

    def test_hello_frame_bytes(self):
        msg = Hello(NodeRole.AUDIENCE, node_id=0x01020304, proto_version=1)
        assert encode(msg).hex() == "000701010201020304"

    def test_mode_frame_bytes(self):
        assert encode(ModeChange(Mode.THEATER)).hex() == "00020303"


class TestDecode:
    def test_round_trip_samples(self):
        rng = random.Random(1234)
        for _ in range(500):
            msg = random_message(rng)
            decoded, consumed = decode(encode(msg))
            assert decoded == msg
            assert consumed == len(encode(msg))

    def test_partial_input_needs_more(self):
        frame = encode(Step(1, Side.RIGHT, 1_000_000, 600))
        for cut in range(len(frame)):
            assert decode(frame[:cut]) is None

    def test_unknown_type_consumes_whole_frame(self):
        bad = bytes([0x00, 0x02, 0x7F, 0x00])
        with pytest.raises(FrameError) as info:
            decode(bad)
        assert info.value.consumed == 4

    def test_bad_enum_flagged(self):
        frame = bytearray(encode(ModeChange(Mode.SOLO)))
        frame[3] = 9  # out-of-range mode
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_bad_side_flagged(self):
        frame = bytearray(encode(Step(0, Side.LEFT, 0, 1)))
        frame[5] = 2
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_length_mismatch_flagged(self):
        # heartbeat frame relabeled as pattern: payload too long
        frame = bytearray(encode(Heartbeat(1)))
        frame[2] = 0x05
        with pytest.raises(FrameError):
            decode(bytes(frame))

    def test_zero_length_frame(self):
        with pytest.raises(FrameError) as info:
            decode(b"\x00\x00junk")
        assert info.value.consumed == 2

    def test_construction_rejects_out_of_range_fields(self):
        with pytest.raises(ValueError):
            Step(1 << 16, Side.LEFT, 0, 1)
        with pytest.raises(ValueError):
            Heartbeat(1 << 64)
        with pytest.raises(ValueError):
            PatternChange(4)
        with pytest.raises(ValueError):
            Hello(NodeRole.PEER, 1 << 32)


class TestStreamDecoder:
    def test_concatenated_frames_decode_exactly(self):
        rng = random.Random(77)
        messages = [random_message(rng) for _ in range(200)]
        blob = b"".join(encode(m) for m in messages)
        decoder = StreamDecoder()
        assert decoder.feed(blob) == messages
        assert decoder.buffered == 0

    def test_random_chunking_never_misaligns(self):
        rng = random.Random(88)
        for _ in range(30):
            messages = [random_message(rng) for _ in range(50)]
            blob = b"".join(encode(m) for m in messages)
            decoder = StreamDecoder()
            out = []
            i = 0
            while i < len(blob):
                j = min(len(blob), i + rng.randrange(1, 9))
                out.extend(decoder.feed(blob[i:j]))
                i = j
            assert out == messages
            assert decoder.buffered == 0

    def test_resync_after_unknown_frame(self):
        good = encode(PatternChange(2))
        bad = bytes([0x00, 0x03, 0x7F, 0xAA, 0xBB])
        decoder = StreamDecoder()
        out = decoder.feed(bad + good)
        assert len(out) == 2
        assert isinstance(out[0], FrameError)
        assert out[1] == PatternChange(2)

    def test_step_event_round_trip(self):
        from solefultap.model import StepEvent

        event = StepEvent(3, Side.LEFT, 123_456, 789)
        assert Step.from_event(event).to_event() == event
