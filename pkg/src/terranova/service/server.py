"""Service front end: one listening port, two framings.

Raw connections speak length-prefixed JSON envelopes. Connections that
open with an HTTP request get either a WebSocket upgrade (same envelopes,
one per text frame — this is what the browser client uses) or static file
service for the client bundle. The first bytes of a connection decide.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import mimetypes
import os
import struct
import sys

from . import protocol
from .manager import SessionManager

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
HTTP_VERBS = (b"GET ", b"POST", b"HEAD", b"OPTI", b"PUT ")


class Connection:
    def __init__(self, manager: SessionManager, writer: asyncio.StreamWriter) -> None:
        self.manager = manager
        self.writer = writer
        self.queue: asyncio.Queue = asyncio.Queue()
        self.closed = False

    def push(self, env: dict) -> None:
        if not self.closed:
            self.queue.put_nowait(env)


async def _writer_loop(conn: Connection, frame_fn) -> None:
    while True:
        env = await conn.queue.get()
        if env is None:
            return
        try:
            conn.writer.write(frame_fn(env))
            await conn.writer.drain()
        except (ConnectionError, RuntimeError):
            return


async def _handle_raw(manager: SessionManager, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter, first: bytes) -> None:
    conn = Connection(manager, writer)
    writer_task = asyncio.create_task(_writer_loop(conn, protocol.encode_envelope))
    buffer = first
    try:
        while True:
            while len(buffer) < 4:
                chunk = await reader.read(65536)
                if not chunk:
                    return
                buffer += chunk
            (length,) = struct.unpack("<I", buffer[:4])
            if length > protocol.MAX_FRAME:
                return
            while len(buffer) < 4 + length:
                chunk = await reader.read(65536)
                if not chunk:
                    return
                buffer += chunk
            frame, buffer = buffer[4:4 + length], buffer[4 + length:]
            try:
                env = protocol.decode_frame(frame)
            except protocol.ProtocolError as err:
                conn.push(protocol.make_error({}, "ProtocolError", str(err)))
                continue
            reply = manager.handle(env, subscriber=conn.push)
            conn.push(reply)
    finally:
        conn.closed = True
        conn.queue.put_nowait(None)
        writer_task.cancel()
        writer.close()


def _ws_frame(env: dict) -> bytes:
    payload = json.dumps(env, separators=(",", ":"), sort_keys=True).encode()
    length = len(payload)
    head = b"\x81"      # FIN + text opcode
    if length < 126:
        head += bytes([length])
    elif length < 1 << 16:
        head += b"\x7e" + struct.pack(">H", length)
    else:
        head += b"\x7f" + struct.pack(">Q", length)
    return head + payload


async def _read_ws_message(reader: asyncio.StreamReader) -> bytes | None:
    data = bytearray()
    while True:
        head = await reader.readexactly(2)
        fin = head[0] & 0x80
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", await reader.readexactly(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", await reader.readexactly(8))
        mask = await reader.readexactly(4) if masked else b"\x00" * 4
        payload = bytearray(await reader.readexactly(length))
        if masked:
            for i in range(length):
                payload[i] ^= mask[i % 4]
        if opcode == 0x8:       # close
            return None
        if opcode == 0x9:       # ping; pong handled by caller via sentinel
            data_frame = bytes(payload)
            return b"\x00PING" + data_frame
        if opcode in (0x1, 0x2, 0x0):
            data += payload
            if fin:
                return bytes(data)


async def _handle_http(manager: SessionManager, reader: asyncio.StreamReader,
                       writer: asyncio.StreamWriter, first: bytes,
                       static_dir: str | None) -> None:
    data = first
    while b"\r\n\r\n" not in data:
        chunk = await reader.read(65536)
        if not chunk:
            writer.close()
            return
        data += chunk
    head_text = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head_text.split("\r\n")
    method, path, _ = lines[0].split(" ", 2)
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()

    if headers.get("upgrade", "").lower() == "websocket":
        key = headers.get("sec-websocket-key", "")
        accept = base64.b64encode(
            hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
        writer.write(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
            + f"Sec-WebSocket-Accept: {accept}\r\n\r\n".encode())
        await writer.drain()
        conn = Connection(manager, writer)
        writer_task = asyncio.create_task(_writer_loop(conn, _ws_frame))
        try:
            while True:
                msg = await _read_ws_message(reader)
                if msg is None:
                    return
                if msg.startswith(b"\x00PING"):
                    writer.write(b"\x8a" + bytes([len(msg) - 5]) + msg[5:])
                    await writer.drain()
                    continue
                try:
                    env = protocol.decode_frame(msg)
                except protocol.ProtocolError as err:
                    conn.push(protocol.make_error({}, "ProtocolError", str(err)))
                    continue
                reply = manager.handle(env, subscriber=conn.push)
                conn.push(reply)
        except (asyncio.IncompleteReadError, ConnectionError):
            return
        finally:
            conn.closed = True
            conn.queue.put_nowait(None)
            writer_task.cancel()
            writer.close()
        return

    # Plain HTTP: serve the client bundle.
    body = b"not found"
    status = "404 Not Found"
    ctype = "text/plain"
    if static_dir and method == "GET":
        rel = path.split("?", 1)[0].lstrip("/") or "index.html"
        target = os.path.normpath(os.path.join(static_dir, rel))
        if target.startswith(os.path.abspath(static_dir) if os.path.isabs(static_dir)
                             else os.path.normpath(static_dir)) and os.path.isfile(target):
            with open(target, "rb") as f:
                body = f.read()
            status = "200 OK"
            ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
    writer.write(f"HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\n"
                 f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
                 .encode() + body)
    await writer.drain()
    writer.close()


async def run_service(host: str, port: int, static_dir: str | None = None,
                      ready_callback=None) -> None:
    manager = SessionManager()

    async def on_connect(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        try:
            first = await reader.read(4)
            if not first:
                writer.close()
                return
            if first[:4] in HTTP_VERBS or first[:4].startswith(b"GET"):
                await _handle_http(manager, reader, writer, first, static_dir)
            else:
                await _handle_raw(manager, reader, writer, first)
        except (ConnectionError, asyncio.IncompleteReadError):
            writer.close()

    server = await asyncio.start_server(on_connect, host, port)
    bound = server.sockets[0].getsockname()
    print(f"TERRA_SERVICE_LISTENING {bound[0]}:{bound[1]}", flush=True)
    if ready_callback is not None:
        ready_callback(bound[0], bound[1])
    async with server:
        await server.serve_forever()


def serve_forever(listen: str, static_dir: str | None = None) -> int:
    host, _, port_text = listen.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        print(f"bad --listen address {listen!r}", file=sys.stderr)
        return 2
    try:
        asyncio.run(run_service(host, port, static_dir))
    except KeyboardInterrupt:
        pass
    return 0
