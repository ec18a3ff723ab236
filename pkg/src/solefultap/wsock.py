"""Minimal server-side WebSocket support for the control port.

The control listener speaks newline-delimited JSON over a raw TCP
stream; a browser client cannot open one, so the same port also accepts
an HTTP Upgrade and then carries the identical lines as text frames.
Only what a browser needs is implemented: text frames with client
masking, fragmentation reassembly, ping/pong and close.
"""

import base64
import hashlib
import socket
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class HandshakeError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def parse_http_request(raw: bytes) -> tuple[str, str, dict[str, str]]:
    """(method, path, lowercase headers) from a complete request head."""
    head = raw.decode("latin-1", errors="replace")
    lines = head.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) < 3:
        raise HandshakeError(f"bad request line: {lines[0]!r}")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    return parts[0], parts[1], headers


def is_upgrade(headers: dict[str, str]) -> bool:
    return (
        "websocket" in headers.get("upgrade", "").lower()
        and "sec-websocket-key" in headers
    )


def handshake_response(headers: dict[str, str]) -> bytes:
    key = headers.get("sec-websocket-key")
    if not key:
        raise HandshakeError("missing Sec-WebSocket-Key")
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_text_frame(payload: bytes) -> bytes:
    """Server-to-client text frame (never masked)."""
    length = len(payload)
    if length < 126:
        header = struct.pack(">BB", 0x80 | OP_TEXT, length)
    elif length < (1 << 16):
        header = struct.pack(">BBH", 0x80 | OP_TEXT, 126, length)
    else:
        header = struct.pack(">BBQ", 0x80 | OP_TEXT, 127, length)
    return header + payload


def encode_control_frame(opcode: int, payload: bytes = b"") -> bytes:
    return struct.pack(">BB", 0x80 | opcode, len(payload)) + payload


class WebSocketSession:
    """Blocking line transport over one accepted websocket."""

    def __init__(self, conn: socket.socket, initial: bytes = b""):
        self._conn = conn
        self._buf = bytearray(initial)
        self._text = bytearray()
        self._fragments = bytearray()
        self.closed = False

    def _fill(self, n: int) -> bool:
        while len(self._buf) < n:
            try:
                chunk = self._conn.recv(4096)
            except OSError:
                return False
            if not chunk:
                return False
            self._buf.extend(chunk)
        return True

    def _take(self, n: int) -> bytes:
        data = bytes(self._buf[:n])
        del self._buf[:n]
        return data

    def _read_frame(self):
        if not self._fill(2):
            return None
        b0, b1 = self._buf[0], self._buf[1]
        opcode = b0 & 0x0F
        fin = bool(b0 & 0x80)
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        header = 2
        if length == 126:
            if not self._fill(4):
                return None
            length = struct.unpack_from(">H", self._buf, 2)[0]
            header = 4
        elif length == 127:
            if not self._fill(10):
                return None
            length = struct.unpack_from(">Q", self._buf, 2)[0]
            header = 10
        mask = b""
        if masked:
            if not self._fill(header + 4):
                return None
            mask = bytes(self._buf[header : header + 4])
            header += 4
        if not self._fill(header + length):
            return None
        self._take(header)
        payload = bytearray(self._take(length))
        if masked:
            for i in range(len(payload)):
                payload[i] ^= mask[i % 4]
        return fin, opcode, bytes(payload)

    def recv_line(self) -> str | None:
        """Next newline-terminated line, or None when the peer is gone."""
        while True:
            nl = self._text.find(b"\n")
            if nl >= 0:
                line = self._text[: nl + 1].decode("utf-8", errors="replace")
                del self._text[: nl + 1]
                return line
            frame = self._read_frame()
            if frame is None:
                self.closed = True
                return None
            fin, opcode, payload = frame
            if opcode == OP_CLOSE:
                try:
                    self._conn.sendall(encode_control_frame(OP_CLOSE))
                except OSError:
                    pass
                self.closed = True
                return None
            if opcode == OP_PING:
                try:
                    self._conn.sendall(encode_control_frame(OP_PONG, payload))
                except OSError:
                    pass
                continue
            if opcode == OP_PONG:
                continue
            if opcode in (OP_TEXT, OP_CONT):
                self._fragments.extend(payload)
                if fin:
                    self._text.extend(self._fragments)
                    # a frame may carry a line without the newline
                    if not self._text.endswith(b"\n"):
                        self._text.extend(b"\n")
                    self._fragments.clear()

    def send_line(self, line: str) -> None:
        payload = line.encode("utf-8")
        if payload.endswith(b"\n"):
            payload = payload[:-1]
        self._conn.sendall(encode_text_frame(payload))

    def close(self) -> None:
        if not self.closed:
            try:
                self._conn.sendall(encode_control_frame(OP_CLOSE))
            except OSError:
                pass
            self.closed = True
