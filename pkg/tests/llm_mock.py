"""A local chat-completions endpoint that replays recorded answers."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockLlm:
    """Serves ``answers[kind]`` (a list cycled per request) where kind is picked from the prompt text."""

    def __init__(self, answers: dict[str, list[str]], status: int = 200):
        self.answers = answers
        self.status = status
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self._counts: dict[str, int] = {}
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 - http.server naming
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                mock.requests.append(body)
                mock.headers.append(dict(self.headers))
                if mock.status != 200:
                    self.send_response(mock.status)
                    self.end_headers()
                    return
                user = body["messages"][-1]["content"]
                kind = "functions" if "functionalities" in user.lower() else "variables"
                i = mock._counts.get(kind, 0)
                mock._counts[kind] = i + 1
                seq = mock.answers[kind]
                payload = {"choices": [{"message": {"role": "assistant", "content": seq[i % len(seq)]}}]}
                data = json.dumps(payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self) -> MockLlm:
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()
