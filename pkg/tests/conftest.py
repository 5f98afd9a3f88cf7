"""Shared fixtures: scriptable fake HTTP servers for the wire contracts."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class FakeServer:
    """A local JSON-over-HTTP stub.

    `handler` maps the decoded request payload to (status, response_dict).
    `fail_first` injects that many 500s before the handler is consulted,
    which is how the retry paths get exercised. Every request payload is
    recorded in `requests`.
    """

    def __init__(self, handler, fail_first: int = 0):
        self.handler = handler
        self.failures_left = fail_first
        self.requests: list[dict] = []
        self.calls = 0
        self._lock = threading.Lock()
        outer = self

        class _Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.calls += 1
                    outer.requests.append(payload)
                    if outer.failures_left > 0:
                        outer.failures_left -= 1
                        status, response = 500, {"error": "scripted failure"}
                    else:
                        status, response = outer.handler(payload)
                if isinstance(response, (bytes, str)):
                    body = response if isinstance(response, bytes) else response.encode()
                else:
                    body = json.dumps(response).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/"

    def start(self) -> "FakeServer":
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def fake_server():
    """Factory fixture: make(handler, fail_first=0) -> running FakeServer."""
    servers: list[FakeServer] = []

    def make(handler, fail_first: int = 0) -> FakeServer:
        srv = FakeServer(handler, fail_first=fail_first).start()
        servers.append(srv)
        return srv

    yield make
    for srv in servers:
        srv.stop()
