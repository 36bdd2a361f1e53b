"""Minimal wire-protocol client: length-prefixed JSON envelopes over TCP.

Deliberately self-contained: the bindings talk to the service only through
its documented protocol and never import the engine package.
"""

from __future__ import annotations

import atexit
import base64
import json
import os
import re
import socket
import struct
import subprocess
import sys

_SPAWNED: list[subprocess.Popen] = []


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


class WireClient:
    def __init__(self, host: str, port: int, timeout: float = 120.0) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.seq = 0
        self._buffer = b""

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def _read_envelope(self) -> dict:
        while len(self._buffer) < 4:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("service closed the connection")
            self._buffer += chunk
        (length,) = struct.unpack("<I", self._buffer[:4])
        while len(self._buffer) < 4 + length:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("service closed the connection")
            self._buffer += chunk
        frame = self._buffer[4:4 + length]
        self._buffer = self._buffer[4 + length:]
        return json.loads(frame)

    def request(self, type_: str, payload: dict | None = None,
                session: str | None = None) -> dict:
        self.seq += 1
        env = {"type": type_, "session": session, "seq": self.seq,
               "payload": payload or {}}
        blob = json.dumps(env, separators=(",", ":")).encode()
        self.sock.sendall(struct.pack("<I", len(blob)) + blob)
        while True:
            reply = self._read_envelope()
            if reply.get("type") == "event":
                continue
            if reply.get("seq") == self.seq:
                if reply["type"] == "error":
                    raise RuntimeError(
                        f"service error {reply['payload']['code']}: "
                        f"{reply['payload']['message']}")
                return reply


def connect_service() -> WireClient:
    """Connect to TERRA_SERVICE (host:port) or spawn a local service."""
    addr = os.environ.get("TERRA_SERVICE")
    if addr:
        host, _, port = addr.rpartition(":")
        return WireClient(host or "127.0.0.1", int(port))
    proc = subprocess.Popen(
        [sys.executable, "-m", "terranova.cli", "serve", "--listen", "127.0.0.1:0"],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    line = proc.stdout.readline().strip()
    match = re.match(r"TERRA_SERVICE_LISTENING (\S+):(\d+)", line)
    if not match:
        proc.terminate()
        raise RuntimeError(f"could not start the session service: {line!r}")
    _SPAWNED.append(proc)
    return WireClient(match.group(1), int(match.group(2)))


def shutdown_spawned() -> None:
    while _SPAWNED:
        proc = _SPAWNED.pop()
        proc.terminate()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()


atexit.register(shutdown_spawned)
