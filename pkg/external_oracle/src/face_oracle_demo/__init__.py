"""Reference external classifier speaking the face-oracle/1 wire protocol."""

from .model import ServedModel, demo_model, load_model, save_model, train_model
from .server import (
    PROTOCOL,
    answer_request,
    handshake_line,
    serve_connection,
    serve_stdio,
    serve_tcp,
    start_background_server,
)

__version__ = "0.1.0"

__all__ = [
    "ServedModel", "demo_model", "load_model", "save_model", "train_model",
    "PROTOCOL", "answer_request", "handshake_line", "serve_connection",
    "serve_stdio", "serve_tcp", "start_background_server",
]
