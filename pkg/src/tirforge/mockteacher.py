"""Local replay server for offline, deterministic pipeline runs.

Speaks just enough of the chat-completions wire shape to stand in for a
real endpoint: fixtures are matched by the problem statement embedded in
the incoming prompt, so parallel clients with nondeterministic scheduling
still receive the right canned reply. A per-fixture fail script can force
429/5xx responses first, for retry testing, and the server tracks peak
concurrent requests so client-side concurrency bounds are observable.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .parsing import extract_json_payload, parse_teacher_record


@dataclass
class Fixture:
    """One canned reply: match_key is the statement text to look for."""

    match_key: str
    body: str
    fail_script: list[int] = field(default_factory=list)


def load_fixture_dir(path: str | Path) -> list[Fixture]:
    """Load *.json fixture files, validating that bodies parse as records."""
    fixtures = []
    for file in sorted(Path(path).glob("*.json")):
        with open(file, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        body = data["body"]
        parse_teacher_record(extract_json_payload(body), data.get("id", file.stem))
        fixtures.append(
            Fixture(
                match_key=data["match_key"],
                body=body,
                fail_script=list(data.get("fail_script", [])),
            )
        )
    return fixtures


class _Handler(BaseHTTPRequestHandler):
    server: "MockTeacherServer"

    def log_message(self, fmt, *args):  # quiet test output
        pass

    def do_POST(self):
        srv = self.server
        with srv.lock:
            srv.in_flight += 1
            srv.peak_in_flight = max(srv.peak_in_flight, srv.in_flight)
        try:
            self._handle()
        finally:
            with srv.lock:
                srv.in_flight -= 1

    def _handle(self):
        srv = self.server
        if not self.path.endswith("/chat/completions"):
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            request = json.loads(self.rfile.read(length))
            content = request["messages"][-1]["content"]
        except (ValueError, KeyError, IndexError):
            self._send(400, {"error": "malformed chat request"})
            return

        fixture = None
        for fx in srv.fixtures:
            if fx.match_key and fx.match_key in content:
                fixture = fx
                break
        if fixture is None:
            self._send(404, {"error": "no fixture matches the embedded problem statement"})
            return

        with srv.lock:
            srv.request_counts[fixture.match_key] = srv.request_counts.get(fixture.match_key, 0) + 1
            scripted = fixture.fail_script.pop(0) if fixture.fail_script else None
        if srv.response_delay_s > 0:
            time.sleep(srv.response_delay_s)
        if scripted is not None:
            self._send(scripted, {"error": {"message": f"scripted failure {scripted}"}})
            return
        self._send(
            200,
            {
                "id": "mock-0",
                "object": "chat.completion",
                "model": request.get("model", "mock"),
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": fixture.body},
                        "finish_reason": "stop",
                    }
                ],
            },
        )

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class MockTeacherServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, fixtures: list[Fixture], port: int = 0, response_delay_s: float = 0.0):
        super().__init__(("127.0.0.1", port), _Handler)
        self.fixtures = fixtures
        self.response_delay_s = response_delay_s
        self.lock = threading.Lock()
        self.in_flight = 0
        self.peak_in_flight = 0
        self.request_counts: dict[str, int] = {}
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockTeacherServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockTeacherServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(fixtures: list[Fixture], port: int = 0, response_delay_s: float = 0.0) -> MockTeacherServer:
    """Start a replay server on 127.0.0.1; returns the running handle."""
    return MockTeacherServer(fixtures, port, response_delay_s).start()


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Serve canned teacher replies for offline runs.")
    parser.add_argument("--fixtures", required=True, help="directory of fixture *.json files")
    parser.add_argument("--port", type=int, default=8808)
    args = parser.parse_args(argv)
    server = serve(load_fixture_dir(args.fixtures), port=args.port)
    print(f"mock teacher listening on {server.base_url} "
          f"({len(server.fixtures)} fixtures); Ctrl-C to stop")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
