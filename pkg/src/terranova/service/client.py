"""Minimal synchronous client for the raw TCP framing; used by tests and
local tooling. Pushed `event` envelopes are collected on the side."""

from __future__ import annotations

import json
import socket
import struct

from . import protocol


class ServiceClient:
    def __init__(self, host: str, port: int, timeout: float = 30.0) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.seq = 0
        self.events: list[dict] = []
        self._buffer = b""

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _read_frame(self) -> dict:
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
        frame, self._buffer = self._buffer[4:4 + length], self._buffer[4 + length:]
        return json.loads(frame)

    def request(self, type_: str, payload: dict | None = None,
                session: str | None = None) -> dict:
        """Send one envelope and wait for its reply (same seq); pushed
        events arriving in between are buffered on `self.events`."""
        self.seq += 1
        env = {"type": type_, "session": session, "seq": self.seq,
               "payload": payload or {}}
        self.sock.sendall(protocol.encode_envelope(env))
        while True:
            reply = self._read_frame()
            if reply.get("type") == "event":
                self.events.append(reply)
                continue
            if reply.get("seq") == self.seq:
                return reply
            self.events.append(reply)

    def expect(self, type_: str, payload: dict | None = None,
               session: str | None = None) -> dict:
        """request() that raises on an `error` reply."""
        reply = self.request(type_, payload, session)
        if reply["type"] == "error":
            raise RuntimeError(f"service error {reply['payload']['code']}: "
                               f"{reply['payload']['message']}")
        return reply
