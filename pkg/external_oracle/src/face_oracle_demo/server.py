"""face-oracle/1 protocol server.

Line-delimited JSON over a byte stream, identical on stdio pipes and TCP
sockets. On connect the server sends one handshake line:

    {"proto": "face-oracle/1", "classes": C, "width": W, "height": H,
     "names": [...]}

then answers each request line {"id": n, "pixels": "<base64>"} with
{"id": n, "probs": [...]} or {"id": n, "error": "<message>"}. A bad
request never kills the connection; ids echo the request. One request is
in flight per connection; each TCP connection gets its own thread.
"""

from __future__ import annotations

import base64
import binascii
import json
import socketserver
import sys
import threading
from typing import BinaryIO

from .model import ServedModel

PROTOCOL = "face-oracle/1"


def handshake_line(model: ServedModel) -> dict:
    return {
        "proto": PROTOCOL,
        "classes": model.num_classes,
        "width": model.width,
        "height": model.height,
        "names": list(model.class_names),
    }


def answer_request(model: ServedModel, raw: bytes) -> dict:
    req_id = -1
    try:
        try:
            request = json.loads(raw)
        except ValueError:
            raise ValueError("request is not valid JSON")
        if not isinstance(request, dict):
            raise ValueError("request is not a JSON object")
        if isinstance(request.get("id"), int):
            req_id = request["id"]
        else:
            raise ValueError("id: missing or not an integer")
        encoded = request.get("pixels")
        if not isinstance(encoded, str):
            raise ValueError("pixels: missing or not a string")
        try:
            payload = base64.b64decode(encoded, validate=True)
        except binascii.Error:
            raise ValueError("pixels: invalid base64")
        expected = model.width * model.height
        if len(payload) != expected:
            raise ValueError(
                f"pixels: expected {expected} bytes, got {len(payload)}"
            )
        return {"id": req_id, "probs": model.predict(payload)}
    except Exception as err:
        return {"id": req_id, "error": str(err)}


def _send(wfile: BinaryIO, payload: dict) -> None:
    wfile.write(json.dumps(payload).encode("utf-8") + b"\n")
    wfile.flush()


def serve_connection(model: ServedModel, rfile: BinaryIO, wfile: BinaryIO) -> None:
    _send(wfile, handshake_line(model))
    for raw in rfile:
        if not raw.strip():
            continue
        _send(wfile, answer_request(model, raw))


def serve_stdio(model: ServedModel) -> None:
    serve_connection(model, sys.stdin.buffer, sys.stdout.buffer)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        try:
            serve_connection(self.server.model, self.rfile, self.wfile)
        except (BrokenPipeError, ConnectionResetError):
            pass


class DemoTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], model: ServedModel):
        super().__init__(address, _Handler)
        self.model = model


def serve_tcp(model: ServedModel, host: str, port: int,
              announce: BinaryIO | None = None) -> None:
    """Bind and serve until interrupted; prints the bound endpoint first."""
    with DemoTCPServer((host, port), model) as server:
        bound = server.server_address
        line = f"listening on {bound[0]}:{bound[1]}\n"
        (announce or sys.stdout.buffer).write(line.encode())
        (announce or sys.stdout.buffer).flush()
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def start_background_server(model: ServedModel, host: str = "127.0.0.1",
                            port: int = 0):
    """For tests: returns (server, thread); caller shuts the server down."""
    server = DemoTCPServer((host, port), model)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
