"""The oracle wire protocol: line-delimited JSON over a byte stream.

Works identically over a TCP socket or a child process's stdio pipes.

    server -> client   {"proto": "face-oracle/1", "classes": C,
                        "width": W, "height": H, "names": [...]}
    client -> server   {"id": n, "pixels": "<base64 raw row-major bytes>"}
    server -> client   {"id": n, "probs": [...]}            on success
                       {"id": n, "error": "<message>"}      on failure

One message per line, UTF-8, terminated by a single linefeed. Request ids
are echoed back. A request error leaves the connection usable.
"""

from __future__ import annotations

import base64
import binascii
import json
import shlex
import socket
import socketserver
import subprocess
import sys
import threading
from typing import BinaryIO

from .errors import OracleError, ProtocolError
from .image import GrayscaleImage
from .oracle import ClassProbabilities, Oracle

PROTOCOL = "face-oracle/1"


def _send_line(wfile: BinaryIO, obj: dict) -> None:
    wfile.write(json.dumps(obj).encode("utf-8") + b"\n")
    wfile.flush()


# ---------------------------------------------------------------------------
# Server side


def handshake_line(oracle: Oracle) -> dict:
    return {
        "proto": PROTOCOL,
        "classes": oracle.num_classes,
        "width": oracle.input_width,
        "height": oracle.input_height,
        "names": list(oracle.class_names),
    }


def handle_request_line(oracle: Oracle, raw: bytes) -> dict:
    """Answer one request line; malformed input yields an error response."""
    req_id = -1
    try:
        try:
            req = json.loads(raw)
        except ValueError:
            raise ValueError("request is not valid JSON")
        if not isinstance(req, dict):
            raise ValueError("request is not a JSON object")
        if isinstance(req.get("id"), int):
            req_id = req["id"]
        else:
            raise ValueError("id: missing or not an integer")
        pixels_b64 = req.get("pixels")
        if not isinstance(pixels_b64, str):
            raise ValueError("pixels: missing or not a string")
        try:
            payload = base64.b64decode(pixels_b64, validate=True)
        except binascii.Error:
            raise ValueError("pixels: invalid base64")
        expected = oracle.input_width * oracle.input_height
        if len(payload) != expected:
            raise ValueError(f"pixels: expected {expected} bytes, got {len(payload)}")
        image = GrayscaleImage(oracle.input_width, oracle.input_height, payload)
        probs = oracle.classify(image)
        return {"id": req_id, "probs": list(probs.values)}
    except Exception as err:  # any per-request failure keeps the connection alive
        return {"id": req_id, "error": str(err)}


def serve_connection(oracle: Oracle, rfile: BinaryIO, wfile: BinaryIO) -> None:
    """Serve one connection until the peer disconnects."""
    _send_line(wfile, handshake_line(oracle))
    for raw in rfile:
        if not raw.strip():
            continue
        _send_line(wfile, handle_request_line(oracle, raw))


def serve_stdio(oracle: Oracle) -> None:
    serve_connection(oracle, sys.stdin.buffer, sys.stdout.buffer)


class _ConnectionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        try:
            serve_connection(self.server.oracle, self.rfile, self.wfile)
        except (BrokenPipeError, ConnectionResetError):
            pass


class OracleTCPServer(socketserver.ThreadingTCPServer):
    """TCP front for any oracle; one protocol session per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], oracle: Oracle):
        super().__init__(address, _ConnectionHandler)
        self.oracle = oracle

    @property
    def bound_address(self) -> tuple[str, int]:
        return self.server_address[:2]


def start_tcp_server(oracle: Oracle, host: str = "127.0.0.1", port: int = 0):
    """Start a server thread; returns (server, thread). Caller shuts down."""
    server = OracleTCPServer((host, port), oracle)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


# ---------------------------------------------------------------------------
# Client side


def _require(payload: dict, field: str, kind: type) -> object:
    value = payload.get(field)
    if not isinstance(value, kind):
        raise ProtocolError(f"{field}: missing or not {kind.__name__}")
    return value


class ExternalOracle(Oracle):
    """Client handle for a remote oracle.

    Requests are serialized per connection (one in flight); open several
    connections for parallel querying.
    """

    def __init__(self, rfile: BinaryIO, wfile: BinaryIO, *,
                 closer=None, endpoint: str = "external"):
        super().__init__()
        self._rfile = rfile
        self._wfile = wfile
        self._closer = closer
        self._endpoint = endpoint
        self._io_lock = threading.Lock()
        self._next_id = 0

        line = rfile.readline()
        if not line:
            raise ProtocolError("connection closed before handshake")
        try:
            hs = json.loads(line)
        except ValueError as err:
            raise ProtocolError(f"handshake is not valid JSON: {err}") from err
        if not isinstance(hs, dict):
            raise ProtocolError("handshake is not a JSON object")
        proto = hs.get("proto")
        if proto != PROTOCOL:
            raise ProtocolError(f"proto: expected {PROTOCOL!r}, got {proto!r}")
        self.num_classes = _require(hs, "classes", int)
        self.input_width = _require(hs, "width", int)
        self.input_height = _require(hs, "height", int)
        names = _require(hs, "names", list)
        if len(names) != self.num_classes or not all(isinstance(n, str) for n in names):
            raise ProtocolError(f"names: expected {self.num_classes} strings")
        self.class_names = tuple(names)
        if self.num_classes < 1 or self.input_width < 1 or self.input_height < 1:
            raise ProtocolError("handshake advertises impossible dimensions")

    @property
    def descriptor(self) -> str:
        return f"external:{self._endpoint}"

    def _predict(self, image: GrayscaleImage) -> ClassProbabilities:
        with self._io_lock:
            req_id = self._next_id
            self._next_id += 1
            _send_line(self._wfile, {
                "id": req_id,
                "pixels": base64.b64encode(image.pixels).decode("ascii"),
            })
            line = self._rfile.readline()
        if not line:
            raise ProtocolError("connection closed mid-request")
        try:
            resp = json.loads(line)
        except ValueError as err:
            raise ProtocolError(f"response is not valid JSON: {err}") from err
        if not isinstance(resp, dict):
            raise ProtocolError("response is not a JSON object")
        if "error" in resp:
            raise OracleError(f"remote oracle error: {resp['error']}")
        if resp.get("id") != req_id:
            raise ProtocolError(f"id: expected {req_id}, got {resp.get('id')!r}")
        probs = resp.get("probs")
        if not isinstance(probs, list) or len(probs) != self.num_classes:
            raise ProtocolError(
                f"probs: expected a list of {self.num_classes} numbers"
            )
        try:
            return ClassProbabilities(tuple(float(v) for v in probs))
        except (TypeError, ValueError) as err:
            raise ProtocolError(f"probs: {err}") from err

    def close(self) -> None:
        for stream in (self._wfile, self._rfile):
            try:
                stream.close()
            except OSError:
                pass
        if self._closer is not None:
            self._closer()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def connect_external(endpoint: str, timeout: float = 30.0) -> ExternalOracle:
    """Open an oracle connection.

    Endpoint forms:
      "host:port" or "tcp://host:port"  TCP socket
      "exec:<command line>"             child process speaking on stdio
    """
    if endpoint.startswith("exec:"):
        argv = shlex.split(endpoint[len("exec:"):])
        if not argv:
            raise OracleError("exec endpoint names no command")
        try:
            proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as err:
            raise OracleError(f"cannot start {argv[0]!r}: {err}") from err

        def closer():
            proc.terminate()
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()

        return ExternalOracle(
            proc.stdout, proc.stdin, closer=closer, endpoint=endpoint
        )

    address = endpoint.removeprefix("tcp://")
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise OracleError(f"endpoint {endpoint!r} is not host:port or exec:...")
    try:
        sock = socket.create_connection((host, int(port)), timeout=timeout)
    except OSError as err:
        raise OracleError(f"cannot connect to {endpoint}: {err}") from err
    sock.settimeout(timeout)
    rfile = sock.makefile("rb")
    wfile = sock.makefile("wb")
    return ExternalOracle(rfile, wfile, closer=sock.close, endpoint=endpoint)
