"""Newline-delimited JSON wire protocol between plant and twin.

One JSON object per line over a TCP stream.  Message types: HELLO (handshake,
server answers with protocol version and control period), TELEMETRY (one
sample per control tick), SETPOINT (client command, applied at the next
tick), ERROR (reply to a malformed or rejected message; the connection stays
open).  Unknown fields are ignored.  Floats are serialized with Python repr,
which carries full round-trip precision (at least 9 significant digits
whenever that many are meaningful).
"""

from __future__ import annotations

import json
import math
import socket
from typing import Any

from .engine import TelemetrySample

PROTOCOL_VERSION = 1

MSG_HELLO = "HELLO"
MSG_TELEMETRY = "TELEMETRY"
MSG_SETPOINT = "SETPOINT"
MSG_ERROR = "ERROR"

MAX_LINE_BYTES = 1 << 20


class ProtocolError(ValueError):
    """Malformed or unexpected traffic on the wire."""


def encode(message: dict[str, Any]) -> bytes:
    return (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")


def decode(line: bytes | str) -> dict[str, Any]:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from None
    if not isinstance(message, dict):
        raise ProtocolError("message must be a JSON object")
    kind = message.get("type")
    if not isinstance(kind, str):
        raise ProtocolError("message must carry a string 'type' field")
    return message


def hello_message(dt: float, version: int = PROTOCOL_VERSION) -> dict[str, Any]:
    return {"type": MSG_HELLO, "version": version, "dt": dt}


def telemetry_message(sample: TelemetrySample) -> dict[str, Any]:
    return {
        "type": MSG_TELEMETRY,
        "t": sample.t,
        "setpoint": sample.setpoint,
        "u": sample.u,
        "y": sample.y,
        "t_env": sample.t_env,
        "i": sample.i,
        "v": sample.v,
    }


def setpoint_message(value_c: float) -> dict[str, Any]:
    return {"type": MSG_SETPOINT, "value": value_c}


def error_message(msg: str) -> dict[str, Any]:
    return {"type": MSG_ERROR, "msg": msg}


def parse_telemetry(message: dict[str, Any]) -> TelemetrySample:
    if message.get("type") != MSG_TELEMETRY:
        raise ProtocolError(f"expected TELEMETRY, got {message.get('type')!r}")
    try:
        fields = {
            name: float(message[name])
            for name in ("t", "setpoint", "u", "y", "t_env", "i", "v")
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad TELEMETRY fields: {exc}") from None
    if not all(math.isfinite(v) for v in fields.values()):
        raise ProtocolError("non-finite TELEMETRY value")
    return TelemetrySample(**fields)


def parse_setpoint(message: dict[str, Any]) -> float:
    value = message.get("value")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError("SETPOINT requires a numeric 'value'")
    value = float(value)
    if not math.isfinite(value):
        raise ProtocolError("SETPOINT value must be finite")
    return value


class LineReader:
    """Buffered line reader over a socket; honors the socket timeout."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buffer = bytearray()

    def read_line(self) -> bytes | None:
        """Next full line without the newline, or None on EOF."""
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = bytes(self._buffer[:newline])
                del self._buffer[: newline + 1]
                return line
            if len(self._buffer) > MAX_LINE_BYTES:
                raise ProtocolError("line exceeds maximum length")
            chunk = self._sock.recv(65536)
            if not chunk:
                return None
            self._buffer.extend(chunk)


def send_message(sock: socket.socket, message: dict[str, Any]) -> None:
    sock.sendall(encode(message))
