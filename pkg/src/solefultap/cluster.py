"""Several nodes on one virtual clock, linked by in-process transports.

Links carry real encoded frames through the stream decoder, so a
clustered run exercises the same bytes as a networked one. Each tick is
two-phase: every node first consumes its inbox plus its stimulus and
routes the results, then deliveries are exchanged and every scheduler
fires. A step sent at tick T is therefore processed by its receiver at
tick T+1 regardless of node ordering, which keeps topologies symmetric.
"""

from dataclasses import dataclass, field

from .actuation import FiredImpact
from .model import SAMPLE_PERIOD_US, Side, StepEvent
from .netproto import FrameError, Message, Step, StreamDecoder, encode
from .session import TapNode


@dataclass
class _Member:
    node: TapNode
    streams: dict = field(default_factory=dict)     # (tile, side) -> [SensorSample]
    injections: list = field(default_factory=list)  # (at_us, side, strength), sorted
    inject_cursor: int = 0
    inbox: list = field(default_factory=list)       # decoded Messages
    fired: list = field(default_factory=list)       # FiredImpact, accumulated
    events: list = field(default_factory=list)      # detected/injected StepEvents


class VirtualCluster:
    """Deterministic multi-node harness."""

    def __init__(self):
        self._members: dict[int, _Member] = {}
        self._decoders: dict[tuple[int, int], StreamDecoder] = {}
        self._pending: list[tuple[int, Message]] = []
        self.now_us = 0

    def add(self, node: TapNode) -> TapNode:
        if node.node_id in self._members:
            raise ValueError(f"duplicate node id {node.node_id}")
        self._members[node.node_id] = _Member(node)
        return node

    def node(self, node_id: int) -> TapNode:
        return self._members[node_id].node

    def fired(self, node_id: int) -> list[FiredImpact]:
        return self._members[node_id].fired

    def events(self, node_id: int) -> list[StepEvent]:
        return self._members[node_id].events

    def connect(self, a: int, b: int) -> None:
        """Bidirectional link; each node learns the other's role."""
        ma, mb = self._members[a], self._members[b]
        ma.node.peers[b] = mb.node.role
        mb.node.peers[a] = ma.node.role
        self._decoders[(a, b)] = StreamDecoder()
        self._decoders[(b, a)] = StreamDecoder()

    def set_streams(self, node_id: int, streams: dict) -> None:
        """Attach synthesized sample streams as the node's stimulus."""
        self._members[node_id].streams = streams

    def inject(self, node_id: int, side: Side, at_us: int, strength: int = 400) -> None:
        """Schedule a manual step at a tick-aligned virtual time."""
        member = self._members[node_id]
        member.injections.append((at_us, side, strength))
        member.injections.sort(key=lambda item: item[0])

    def _deliver(self, src: int, dest: int, event: StepEvent) -> None:
        decoder = self._decoders.get((src, dest))
        if decoder is None:
            raise ValueError(f"no link {src}->{dest}")
        for msg in decoder.feed(encode(Step.from_event(event))):
            if isinstance(msg, FrameError):
                raise msg
            self._pending.append((dest, msg))

    def run(self, duration_us: int, step_us: int = SAMPLE_PERIOD_US) -> None:
        """Advance every node through [now, now + duration], then drain."""
        end = self.now_us + duration_us
        ids = sorted(self._members)
        while self.now_us <= end or not self.idle():
            now = self.now_us
            # phase 1: inputs and routing
            for nid in ids:
                member = self._members[nid]
                node = member.node
                for msg in member.inbox:
                    if isinstance(msg, Step):
                        node.receive_remote(msg.to_event(), now)
                member.inbox.clear()
                while (
                    member.inject_cursor < len(member.injections)
                    and member.injections[member.inject_cursor][0] <= now
                ):
                    _, side, strength = member.injections[member.inject_cursor]
                    member.inject_cursor += 1
                    member.events.append(node.inject_step(side, now, strength))
                for key in sorted(member.streams, key=lambda k: (k[0], k[1].value)):
                    samples = member.streams[key]
                    idx = now // step_us
                    if idx < len(samples) and samples[idx].t_us == now:
                        member.events.extend(node.handle_sample(samples[idx]))
            # phase 2: exchange deliveries produced this tick
            for nid in ids:
                node = self._members[nid].node
                for dest, event in node.outbox:
                    self._deliver(nid, dest, event)
                node.outbox.clear()
            for dest, msg in self._pending:
                self._members[dest].inbox.append(msg)
            self._pending.clear()
            # phase 3: fire schedulers
            for nid in ids:
                member = self._members[nid]
                member.fired.extend(member.node.advance(now))
            self.now_us += step_us

    def idle(self) -> bool:
        if self._pending:
            return False
        for member in self._members.values():
            if member.inbox or member.node.outbox:
                return False
            if member.node.scheduler.pending or member.node.is_playing:
                return False
            if member.inject_cursor < len(member.injections):
                return False
        return True
