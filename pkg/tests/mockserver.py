"""Tiny scripted HTTP server for backend/planner tests."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class ScriptedServer:
    """Serves queued responses; each entry is a callable(request_json) -> (status, body)."""

    def __init__(self):
        self.script = []
        self.requests = []
        self.default = None
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    payload = json.loads(raw) if raw else {}
                except json.JSONDecodeError:
                    payload = {}
                outer.requests.append({"path": self.path, "json": payload,
                                       "headers": dict(self.headers)})
                if outer.script:
                    fn = outer.script.pop(0)
                elif outer.default is not None:
                    fn = outer.default
                else:
                    fn = lambda req: (500, {"error": "no scripted response"})
                status, body = fn(payload)
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        return False
