"""Live node: wall-clock ticker, peer links, control server.

Concurrency model: one sampling/scheduling loop (the ticker) owns the
TapNode; every connection gets a reader thread that only parses bytes
and pushes work items onto one ordered queue the ticker drains. Arrival
order on that queue defines processing order. Writers send short
frames/lines under a per-connection lock.

The control listener auto-detects its client: raw newline-JSON streams
and browser WebSocket upgrades share one port, and an ordinary HTTP GET
is served static UI files when a directory is configured.
"""

import json
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from . import wsock
from .control import ControlDispatcher, encode_line, impact_message
from .detection import DEFAULT_PARAMS, DetectorParams
from .model import SAMPLE_PERIOD_US, ImpactPattern, Mode
from .netproto import (
    FrameError,
    Heartbeat,
    Hello,
    ModeChange,
    PatternChange,
    Step,
    StreamDecoder,
    encode,
)
from .session import NodeRole, TapNode, TopologyError

HEARTBEAT_INTERVAL_US = 1_000_000

logger = logging.getLogger(__name__)


class StartupError(RuntimeError):
    """Topology cannot be satisfied or a socket failed to come up."""


@dataclass
class LiveConfig:
    node_id: int = 0
    tile: int = 0
    mode: Mode = Mode.SOLO
    role: NodeRole = NodeRole.STANDALONE
    pattern_count: int = 1
    params: DetectorParams = DEFAULT_PARAMS
    control_host: str = "127.0.0.1"
    control_port: int = 7340
    listen_addr: Optional[str] = None          # "host:port" for peer links
    peer_addrs: list[str] = field(default_factory=list)
    local_echo: bool = False
    follow_along: bool = False
    ui_dir: Optional[str] = None
    tick_us: int = SAMPLE_PERIOD_US

    def validate(self) -> None:
        if self.mode is Mode.GROUP and not (self.peer_addrs or self.listen_addr):
            raise StartupError("group mode needs --peer or --listen")
        if (
            self.mode is Mode.THEATER
            and self.role is NodeRole.PERFORMER
            and not (self.peer_addrs or self.listen_addr)
        ):
            raise StartupError("theater performer needs --peer or --listen")


def parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"bad address {text!r}, expected host:port")
    return host or "127.0.0.1", int(port)


class BinaryLink:
    """One peer connection carrying length-prefixed frames."""

    def __init__(self, conn: socket.socket, owner: "LiveNode"):
        self.conn = conn
        self.owner = owner
        self.peer_id: Optional[int] = None
        self.peer_role: Optional[NodeRole] = None
        self._send_lock = threading.Lock()
        self._decoder = StreamDecoder()
        self.alive = True

    def send(self, msg) -> None:
        try:
            with self._send_lock:
                self.conn.sendall(encode(msg))
        except OSError:
            self.alive = False

    def reader(self) -> None:
        try:
            while True:
                data = self.conn.recv(4096)
                if not data:
                    break
                for item in self._decoder.feed(data):
                    if isinstance(item, FrameError):
                        continue  # skipped; stream realigned by length
                    self.owner.inq.put(("frame", self, item))
        except OSError:
            pass
        self.alive = False
        self.owner.inq.put(("link_down", self, None))


class ControlClient:
    """One operator connection: raw JSON lines or a websocket."""

    def __init__(self, conn: socket.socket, owner: "LiveNode",
                 ws: Optional[wsock.WebSocketSession] = None,
                 initial: bytes = b""):
        self.conn = conn
        self.owner = owner
        self.ws = ws
        self._initial = initial
        self._send_lock = threading.Lock()
        self.alive = True

    def send(self, message: dict) -> None:
        if not self.alive:
            return
        try:
            with self._send_lock:
                if self.ws is not None:
                    self.ws.send_line(json.dumps(message, separators=(",", ":")))
                else:
                    self.conn.sendall(encode_line(message))
        except OSError:
            self.alive = False

    def reader(self) -> None:
        try:
            if self.ws is not None:
                while True:
                    line = self.ws.recv_line()
                    if line is None:
                        break
                    if line.strip():
                        self.owner.inq.put(("line", self, line))
            else:
                buf = bytearray(self._initial)
                while True:
                    nl = buf.find(b"\n")
                    if nl >= 0:
                        line = buf[:nl].decode("utf-8", errors="replace")
                        del buf[: nl + 1]
                        if line.strip():
                            self.owner.inq.put(("line", self, line))
                        continue
                    data = self.conn.recv(4096)
                    if not data:
                        break
                    buf.extend(data)
        except OSError:
            pass
        self.alive = False
        self.owner.inq.put(("client_gone", self, None))


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".ico": "image/x-icon",
    ".svg": "image/svg+xml",
}


class LiveNode:
    """Owns the TapNode and all sockets; see module docstring."""

    def __init__(self, config: LiveConfig):
        config.validate()
        self.config = config
        self.node = TapNode(
            config.node_id,
            config.tile,
            params=config.params,
            pattern=ImpactPattern(config.pattern_count),
            role=config.role,
            local_echo=config.local_echo,
            follow_along=config.follow_along,
            log_actual_fire_time=True,
        )
        self.wanted_mode = config.mode
        self.inq: "queue.Queue[tuple]" = queue.Queue()
        self.dispatcher = ControlDispatcher(self.node)
        self.clients: list[ControlClient] = []
        self.links: list[BinaryLink] = []
        self._net_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._control_sock: Optional[socket.socket] = None
        self._listen_sock: Optional[socket.socket] = None
        self._epoch_ns = 0
        self.control_port = 0
        self.listen_port = 0

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        self._epoch_ns = time.monotonic_ns()
        self._control_sock = self._serve(
            self.config.control_host, self.config.control_port, self._accept_control
        )
        self.control_port = self._control_sock.getsockname()[1]
        if self.config.listen_addr:
            host, port = parse_addr(self.config.listen_addr)
            self._listen_sock = self._serve(host, port, self._accept_link)
            self.listen_port = self._listen_sock.getsockname()[1]
        for addr in self.config.peer_addrs:
            self._dial(addr)
        self._apply_wanted_mode()
        ticker = threading.Thread(target=self._ticker, name="ticker", daemon=True)
        ticker.start()
        self._threads.append(ticker)

    def stop(self) -> None:
        self._stop.set()
        for sock in (self._control_sock, self._listen_sock):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        with self._net_lock:
            ends = [c.conn for c in self.clients] + [l.conn for l in self.links]
        for conn in ends:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._epoch_ns) // 1000

    # -- sockets ------------------------------------------------------------

    def _serve(self, host: str, port: int, handler) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            raise StartupError(f"cannot bind {host}:{port}: {exc}") from exc
        sock.listen(16)
        sock.settimeout(0.25)  # lets the accept loop notice shutdown
        thread = threading.Thread(
            target=self._accept_loop, args=(sock, handler), daemon=True
        )
        thread.start()
        self._threads.append(thread)
        return sock

    def _accept_loop(self, sock: socket.socket, handler) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)  # accepted sockets inherit the listener timeout
            threading.Thread(target=handler, args=(conn,), daemon=True).start()

    def _dial(self, addr: str) -> None:
        host, port = parse_addr(addr)
        try:
            conn = socket.create_connection((host, port), timeout=5.0)
        except OSError as exc:
            raise StartupError(f"cannot reach peer {addr}: {exc}") from exc
        self._attach_link(conn)

    def _attach_link(self, conn: socket.socket) -> BinaryLink:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        link = BinaryLink(conn, self)
        with self._net_lock:
            self.links.append(link)
        link.send(Hello(self.config.role, self.config.node_id))
        thread = threading.Thread(target=link.reader, daemon=True)
        thread.start()
        self._threads.append(thread)
        return link

    def _accept_link(self, conn: socket.socket) -> None:
        self._attach_link(conn)

    def _accept_control(self, conn: socket.socket) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        try:
            first = conn.recv(4096)
        except OSError:
            return
        if not first:
            conn.close()
            return
        if first.startswith(b"GET") or first.startswith(b"POST"):
            head = bytearray(first)
            while b"\r\n\r\n" not in head:
                try:
                    more = conn.recv(4096)
                except OSError:
                    conn.close()
                    return
                if not more:
                    conn.close()
                    return
                head.extend(more)
            split = head.index(b"\r\n\r\n") + 4
            leftover = bytes(head[split:])  # frames pipelined after the upgrade
            try:
                method, path, headers = wsock.parse_http_request(bytes(head[:split]))
            except wsock.HandshakeError:
                conn.close()
                return
            if wsock.is_upgrade(headers):
                try:
                    conn.sendall(wsock.handshake_response(headers))
                except OSError:
                    conn.close()
                    return
                session = wsock.WebSocketSession(conn, initial=leftover)
                client = ControlClient(conn, self, ws=session)
                self._register_client(client)
            else:
                self._serve_static(conn, method, path)
            return
        client = ControlClient(conn, self, initial=first)
        self._register_client(client)

    def _register_client(self, client: ControlClient) -> None:
        # no unsolicited traffic: clients ask for {"type":"state"} on connect
        with self._net_lock:
            self.clients.append(client)
        thread = threading.Thread(target=client.reader, daemon=True)
        thread.start()
        self._threads.append(thread)

    def _serve_static(self, conn: socket.socket, method: str, path: str) -> None:
        import pathlib

        try:
            if method != "GET" or not self.config.ui_dir:
                conn.sendall(b"HTTP/1.1 404 Not Found\r\nConnection: close\r\n\r\n")
                return
            root = pathlib.Path(self.config.ui_dir).resolve()
            rel = path.split("?", 1)[0].lstrip("/") or "index.html"
            target = (root / rel).resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                conn.sendall(b"HTTP/1.1 404 Not Found\r\nConnection: close\r\n\r\n")
                return
            body = target.read_bytes()
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            head = (
                "HTTP/1.1 200 OK\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {len(body)}\r\n"
                "Connection: close\r\n\r\n"
            ).encode("ascii")
            conn.sendall(head + body)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    # -- the loop ------------------------------------------------------------

    def _apply_wanted_mode(self) -> None:
        if self.node.mode is self.wanted_mode:
            return
        try:
            self.node.set_mode(self.wanted_mode)
            self._broadcast_wire(ModeChange(self.wanted_mode))
        except TopologyError:
            pass  # retried as peers join

    def _broadcast_wire(self, msg) -> None:
        with self._net_lock:
            links = list(self.links)
        for link in links:
            link.send(msg)

    def broadcast(self, message: dict) -> None:
        with self._net_lock:
            clients = [c for c in self.clients if c.alive]
        for client in clients:
            client.send(message)

    def _handle_item(self, kind: str, source, payload, now: int) -> None:
        if kind == "line":
            reply = self.dispatcher.handle_line(payload, now)
            source.send(reply)
            rtype = reply.get("type")
            if rtype == "step_ack":
                self.broadcast(
                    {
                        "type": "step_detected",
                        "tile": self.node.tile,
                        "side": reply["side"],
                        "t_us": reply["t_us"],
                        "strength": reply.get("strength", 0),
                    }
                )
            elif rtype == "mode_ack":
                self._broadcast_wire(ModeChange(Mode.from_label(reply["mode"])))
            elif rtype == "pattern_ack":
                self._broadcast_wire(PatternChange(reply["count"]))
        elif kind == "frame":
            self._handle_frame(source, payload, now)
        elif kind == "link_down":
            with self._net_lock:
                if source in self.links:
                    self.links.remove(source)
            if source.peer_id is not None:
                self.node.peers.pop(source.peer_id, None)
        elif kind == "client_gone":
            with self._net_lock:
                if source in self.clients:
                    self.clients.remove(source)

    def _handle_frame(self, link: BinaryLink, msg, now: int) -> None:
        if isinstance(msg, Hello):
            link.peer_id = msg.node_id
            link.peer_role = msg.role
            self.node.peers[msg.node_id] = msg.role
            self._apply_wanted_mode()
        elif isinstance(msg, Step):
            self.node.receive_remote(msg.to_event(), now)
        elif isinstance(msg, ModeChange):
            try:
                self.node.set_mode(msg.mode)
                self.wanted_mode = msg.mode
            except TopologyError:
                pass
        elif isinstance(msg, PatternChange):
            self.node.set_pattern(msg.count)
        # Heartbeat: nothing to do; receipt is the signal

    def _flush_outbox(self) -> None:
        if not self.node.outbox:
            return
        pending = self.node.outbox
        self.node.outbox = []
        with self._net_lock:
            by_id = {l.peer_id: l for l in self.links if l.peer_id is not None}
        for dest, event in pending:
            link = by_id.get(dest)
            if link is not None:
                link.send(Step.from_event(event))

    def _ticker(self) -> None:
        tick_s = self.config.tick_us / 1_000_000
        next_deadline = time.monotonic()
        last_heartbeat = 0
        while not self._stop.is_set():
            next_deadline += tick_s
            delay = next_deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            now = self.now_us()
            while True:
                try:
                    kind, source, payload = self.inq.get_nowait()
                except queue.Empty:
                    break
                try:
                    self._handle_item(kind, source, payload, now)
                except Exception:
                    # a malformed message must not take the loop down
                    logger.warning("dropped %s item", kind, exc_info=True)
            self._flush_outbox()
            for fired in self.node.advance(now):
                self.broadcast(impact_message(fired))
            if now - last_heartbeat >= HEARTBEAT_INTERVAL_US:
                self._broadcast_wire(Heartbeat(now))
                last_heartbeat = now
