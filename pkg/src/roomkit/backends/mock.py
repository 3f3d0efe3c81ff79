"""Deterministic scripted mock server for the backend protocol.

A script is an ordered rule list; each incoming request is answered by the
first live rule whose endpoint matches and whose ``match`` pattern is a
(recursive) subset of the request payload. Identical request sequences
produce identical responses and an identical transcript, which tests can
assert against byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .protocol import ENDPOINTS, blob_ref


class UnmatchedRequestError(Exception):
    def __init__(self, fingerprint: str):
        super().__init__(f"no scripted response for request {fingerprint}")
        self.fingerprint = fingerprint


def _subset_match(pattern, value) -> bool:
    if isinstance(pattern, dict):
        if not isinstance(value, dict):
            return False
        return all(k in value and _subset_match(v, value[k]) for k, v in pattern.items())
    if isinstance(pattern, list):
        if not isinstance(value, list) or len(pattern) != len(value):
            return False
        return all(_subset_match(p, v) for p, v in zip(pattern, value))
    return pattern == value


def _fingerprint(endpoint: str, payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return f"{endpoint}:{hashlib.sha256(blob.encode()).hexdigest()[:12]}"


@dataclass
class MockRule:
    endpoint: str
    response: dict
    match: dict | None = None
    once: bool = False

    def as_dict(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "response": self.response,
            "match": self.match,
            "once": self.once,
        }


@dataclass
class MockScript:
    rules: list[MockRule] = field(default_factory=list)

    def __post_init__(self):
        for rule in self.rules:
            if rule.endpoint not in ENDPOINTS:
                raise ValueError(f"rule for unknown endpoint {rule.endpoint!r}")
            if not isinstance(rule.response, dict):
                raise ValueError(f"rule response for {rule.endpoint} must be an object")

    @classmethod
    def from_json(cls, text: str) -> "MockScript":
        doc = json.loads(text)
        return cls(
            [
                MockRule(
                    endpoint=entry["endpoint"],
                    response=entry["response"],
                    match=entry.get("match"),
                    once=entry.get("once", False),
                )
                for entry in doc["rules"]
            ]
        )

    def to_json(self) -> str:
        return json.dumps({"rules": [rule.as_dict() for rule in self.rules]}, indent=2)


class _MockState:
    def __init__(self, script: MockScript):
        self.rules = [(rule, [False]) for rule in script.rules]  # (rule, consumed cell)
        self.transcript: list[dict] = []
        self.unmatched: list[str] = []
        self.blobs: dict[str, bytes] = {}
        self.lock = threading.Lock()

    def answer(self, endpoint: str, payload) -> tuple[int, dict]:
        with self.lock:
            for rule, consumed in self.rules:
                if consumed[0] or rule.endpoint != endpoint:
                    continue
                if rule.match is not None and not _subset_match(rule.match, payload):
                    continue
                if rule.once:
                    consumed[0] = True
                self.transcript.append(
                    {"endpoint": endpoint, "request": payload, "response": rule.response}
                )
                return 200, rule.response
            fingerprint = _fingerprint(endpoint, payload)
            self.unmatched.append(fingerprint)
            self.transcript.append(
                {"endpoint": endpoint, "request": payload, "unmatched": fingerprint}
            )
            return 500, {"error": {"kind": "unmatched_request", "fingerprint": fingerprint}}


class _Handler(BaseHTTPRequestHandler):
    state: _MockState  # set on the subclass by serve_mock

    def log_message(self, *args):  # silence default stderr chatter
        pass

    def _reply(self, status: int, body: bytes, content_type: str = "application/json"):
        self.send_response(status)
        self.send_header("content-type", content_type)
        self.send_header("content-length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _reply_json(self, status: int, doc: dict):
        self._reply(status, json.dumps(doc).encode())

    def do_POST(self):
        length = int(self.headers.get("content-length", 0))
        raw = self.rfile.read(length)
        if self.path == "/v1/blobs":
            ref = blob_ref(raw)
            with self.state.lock:
                self.state.blobs[ref] = raw
            self._reply_json(200, {"ref": ref})
            return
        if not self.path.startswith("/v1/"):
            self._reply_json(404, {"error": {"kind": "not_found"}})
            return
        endpoint = self.path[len("/v1/") :]
        if endpoint not in ENDPOINTS:
            self._reply_json(404, {"error": {"kind": "unknown_endpoint", "endpoint": endpoint}})
            return
        try:
            payload = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            self._reply_json(400, {"error": {"kind": "bad_json"}})
            return
        status, body = self.state.answer(endpoint, payload)
        self._reply_json(status, body)

    def do_GET(self):
        if self.path.startswith("/v1/blobs/"):
            ref = self.path[len("/v1/blobs/") :]
            with self.state.lock:
                data = self.state.blobs.get(ref)
            if data is None:
                self._reply_json(404, {"error": {"kind": "unknown_blob"}})
            else:
                self._reply(200, data, "application/octet-stream")
            return
        self._reply_json(404, {"error": {"kind": "not_found"}})


class MockServerHandle:
    def __init__(self, server: ThreadingHTTPServer, state: _MockState):
        self._server = server
        self._state = state
        self._thread = threading.Thread(target=server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def transcript(self) -> list[dict]:
        with self._state.lock:
            return [dict(entry) for entry in self._state.transcript]

    def transcript_bytes(self) -> bytes:
        """Canonical transcript serialization for determinism assertions."""
        return json.dumps(self.transcript, sort_keys=True, separators=(",", ":")).encode()

    @property
    def unmatched(self) -> list[str]:
        with self._state.lock:
            return list(self._state.unmatched)

    def raise_for_unmatched(self):
        unmatched = self.unmatched
        if unmatched:
            raise UnmatchedRequestError(unmatched[0])

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_mock(script: MockScript, host: str = "127.0.0.1", port: int = 0) -> MockServerHandle:
    """Start a scripted mock backend; returns a handle with .url and .transcript."""
    state = _MockState(script)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    server = ThreadingHTTPServer((host, port), handler)
    return MockServerHandle(server, state)
