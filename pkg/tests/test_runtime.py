"""Live-node loopback tests: real sockets, real wall clock, loose timing."""

import json
import socket
import time

import pytest

from solefultap.model import Mode
from solefultap.runtime import LiveConfig, LiveNode, StartupError, parse_addr
from solefultap.session import NodeRole


class ControlProbe:
    """Blocking line client against a node's control port."""

    def __init__(self, port, host="127.0.0.1", timeout=5.0):
        self.conn = socket.create_connection((host, port), timeout=timeout)
        self.file = self.conn.makefile("r", encoding="utf-8", newline="\n")

    def send(self, payload: dict) -> None:
        self.conn.sendall((json.dumps(payload) + "\n").encode())

    def next_message(self) -> dict:
        line = self.file.readline()
        if not line:
            raise ConnectionError("control connection closed")
        return json.loads(line)

    def request(self, payload: dict) -> dict:
        self.send(payload)
        while True:
            msg = self.next_message()
            if msg["type"] not in ("impact", "step_detected"):
                return msg

    def collect(self, predicate, count, timeout=10.0) -> list[dict]:
        out = []
        deadline = time.monotonic() + timeout
        self.conn.settimeout(1.0)
        while len(out) < count and time.monotonic() < deadline:
            try:
                msg = self.next_message()
            except (TimeoutError, socket.timeout):
                continue
            if predicate(msg):
                out.append(msg)
        return out

    def close(self):
        try:
            self.file.close()
            self.conn.close()
        except OSError:
            pass


@pytest.fixture
def live_node():
    node = LiveNode(LiveConfig(control_port=0))
    node.start()
    yield node
    node.stop()


@pytest.fixture
def live_node_with_listener():
    node = LiveNode(LiveConfig(control_port=0, listen_addr="127.0.0.1:0"))
    node.start()
    yield node
    node.stop()


def test_state_request(live_node):
    probe = ControlProbe(live_node.control_port)
    reply = probe.request({"type": "state"})
    assert reply["mode"] == "solo"
    assert reply["pattern"] == 1
    probe.close()


def test_step_round_trip_with_impacts(live_node):
    probe = ControlProbe(live_node.control_port)
    assert probe.request({"type": "pattern", "count": 2})["type"] == "pattern_ack"
    probe.send({"type": "step", "side": "R"})
    impacts = probe.collect(lambda m: m["type"] == "impact", 2, timeout=5.0)
    assert [m["pos"] for m in impacts] == ["front", "back"]
    gap = impacts[1]["t_us"] - impacts[0]["t_us"]
    assert 80_000 <= gap <= 100_000
    probe.close()


def test_error_reply_keeps_connection_open(live_node):
    probe = ControlProbe(live_node.control_port)
    assert probe.request({"type": "bogus"})["type"] == "error"
    assert probe.request({"type": "state"})["type"] == "state"
    probe.close()


def test_group_pair_over_tcp():
    server = LiveNode(
        LiveConfig(control_port=0, listen_addr="127.0.0.1:0",
                   mode=Mode.GROUP, role=NodeRole.PEER, node_id=1, tile=1)
    )
    server.start()
    client = LiveNode(
        LiveConfig(control_port=0, mode=Mode.GROUP, role=NodeRole.PEER,
                   node_id=2, tile=2,
                   peer_addrs=[f"127.0.0.1:{server.listen_port}"])
    )
    client.start()
    try:
        probe_b = ControlProbe(server.control_port)
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline:
            if probe_b.request({"type": "state"})["mode"] == "group":
                break
            time.sleep(0.05)
        assert probe_b.request({"type": "state"})["mode"] == "group"

        probe_a = ControlProbe(client.control_port)
        assert probe_a.request({"type": "state"})["mode"] == "group"
        probe_a.send({"type": "step", "side": "L"})
        impacts = probe_b.collect(lambda m: m["type"] == "impact", 1, timeout=5.0)
        assert impacts and impacts[0]["side"] == "L"
        assert impacts[0]["tile"] == 1  # fired on the receiver's tile
        probe_a.close()
        probe_b.close()
    finally:
        client.stop()
        server.stop()


def test_group_without_links_refuses_to_start():
    with pytest.raises(StartupError):
        LiveNode(LiveConfig(mode=Mode.GROUP, role=NodeRole.PEER))


def test_parse_addr():
    assert parse_addr("127.0.0.1:9000") == ("127.0.0.1", 9000)
    assert parse_addr(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_addr("nope")


def test_malformed_peer_frame_does_not_kill_the_node(live_node_with_listener):
    from solefultap.netproto import Hello, Step, encode
    from solefultap.model import Side
    from solefultap.session import NodeRole

    live = live_node_with_listener
    probe = ControlProbe(live.control_port)
    assert probe.request({"type": "state"})["type"] == "state"  # subscribed

    peer = socket.create_connection(("127.0.0.1", live.listen_port), timeout=5)
    # wire-valid frame whose payload is semantically impossible: a step
    # event cannot have strength 0, so handling it raises downstream
    bad_step = encode(Step(0, Side.LEFT, 0, 0))
    good_step = encode(Step(0, Side.RIGHT, 0, 300))
    peer.sendall(encode(Hello(NodeRole.PEER, 77)) + bad_step + good_step)

    impacts = probe.collect(lambda m: m["type"] == "impact", 1, timeout=5.0)
    assert impacts and impacts[0]["side"] == "R"  # the good step still fired
    assert probe.request({"type": "state"})["type"] == "state"  # loop alive
    probe.close()
    peer.close()


def test_websocket_frames_pipelined_with_handshake(live_node):
    key = "dGhlIHNhbXBsZSBub25jZQ=="
    request = (
        "GET / HTTP/1.1\r\n"
        f"Host: 127.0.0.1:{live_node.control_port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    ).encode()
    payload = bytearray(b'{"type":"state"}')
    mask = b"\xaa\xbb\xcc\xdd"
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    frame = bytes([0x81, 0x80 | len(payload)]) + mask + masked

    conn = socket.create_connection(("127.0.0.1", live_node.control_port), timeout=5)
    conn.sendall(request + frame)  # handshake and frame in one segment
    conn.settimeout(5.0)
    data = b""
    while b"\r\n\r\n" not in data:
        data += conn.recv(4096)
    body = data.split(b"\r\n\r\n", 1)[1]
    while b'"state"' not in body:
        body += conn.recv(4096)
    assert b"101" in data
    conn.close()


def test_websocket_client_handshake_and_lines(live_node):
    from solefultap import wsock

    conn = socket.create_connection(("127.0.0.1", live_node.control_port), timeout=5)
    key = "dGhlIHNhbXBsZSBub25jZQ=="
    request = (
        "GET / HTTP/1.1\r\n"
        f"Host: 127.0.0.1:{live_node.control_port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    conn.sendall(request.encode())
    head = b""
    while b"\r\n\r\n" not in head:
        head += conn.recv(1024)
    assert b"101 Switching Protocols" in head
    assert wsock.accept_key(key).encode() in head

    # masked client text frame carrying a state request
    payload = bytearray(b'{"type":"state"}')
    mask = b"\x01\x02\x03\x04"
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    frame = bytes([0x81, 0x80 | len(payload)]) + mask + masked
    conn.sendall(frame)

    reply = b""
    conn.settimeout(5.0)
    while len(reply) < 4:
        reply += conn.recv(4096)
    opcode = reply[0] & 0x0F
    assert opcode == 0x1  # text frame back
    length = reply[1] & 0x7F
    offset = 2
    if length == 126:
        length = int.from_bytes(reply[2:4], "big")
        offset = 4
    while len(reply) < offset + length:
        reply += conn.recv(4096)
    body = json.loads(reply[offset : offset + length])
    assert body["type"] == "state"
    conn.close()
