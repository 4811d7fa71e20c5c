"""Bundled target web server with a fixed artificial latency per object."""

from __future__ import annotations

import errno
import json
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping

from .core import WebloadError

BODY_SIZE = 1024


class PortInUseError(WebloadError, OSError):
    pass


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    server: "_Server"

    def log_message(self, format, *args):  # noqa: A002 - silence per-request stderr logging
        pass

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        name = self.path.split("?", 1)[0].lstrip("/")
        if name == "metrics":
            with self.server.lock:
                body = json.dumps(dict(self.server.counts), sort_keys=True).encode()
            self._send(200, body, "application/json")
            return
        latency = self.server.latencies.get(name)
        if latency is None:
            self._send(404, b"not found", "text/plain")
            return
        time.sleep(latency / 1000.0)
        with self.server.lock:
            self.server.counts[name] += 1
        self._send(200, self.server.body, "application/octet-stream")


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 1024

    def __init__(self, addr, latencies: Mapping[str, float]):
        super().__init__(addr, _Handler)
        self.latencies = dict(latencies)
        self.counts: Counter[str] = Counter()
        self.lock = threading.Lock()
        self.body = b"x" * BODY_SIZE


class TargetServer:
    """Handle for a running target server. Use as a context manager or call :meth:`stop`."""

    def __init__(self, server: _Server):
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, name="target-server", daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def counts(self) -> dict[str, int]:
        with self._server.lock:
            return dict(self._server.counts)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "TargetServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_target(object_latencies: Mapping[str, float], port: int = 0, host: str = "127.0.0.1") -> TargetServer:
    """Serve ``/<object_name>`` after sleeping its configured milliseconds; ``/metrics`` reports counts.

    ``port=0`` picks a free port.
    """
    try:
        server = _Server((host, port), object_latencies)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUseError(f"port {port} is already in use") from exc
        raise
    return TargetServer(server)
