"""HTTP services: the retrieval engine endpoint and a backend bridge.

RetrievalServer exposes POST /v1/retrieve over a database/backend pair (plus
/v1/health and /v1/info for liveness and introspection). BackendServer
exposes any in-process EncoderBackend over the encoder wire protocol, which
is how the mock backends stand in for a remote model service in integration
tests. Both are thin stdlib servers; request handling is threaded and the
underlying engine objects are immutable snapshots, so concurrent requests
are safe.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import retrieval
from .backends import BackendError, EncoderBackend
from .db import SkillDatabase
from .protocol import ProtocolError, validate_message
from .retrieval import EmbeddingIndex, Method, Query, QueryKind, RetrievalError

log = logging.getLogger(__name__)

MAX_PAYLOAD_BYTES = 8 * 1024 * 1024


class _JsonHandler(BaseHTTPRequestHandler):
    server_version = "skillground"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length", 0))
        if length > MAX_PAYLOAD_BYTES:
            self._send_json(413, {"error": "payload too large"})
            return None
        raw = self.rfile.read(length)
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": f"invalid JSON: {exc}"})
            return None


class RetrievalServer(ThreadingHTTPServer):
    """Engine service: one database snapshot, one backend, many clients."""

    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        db: SkillDatabase,
        index: EmbeddingIndex,
        backend: EncoderBackend,
        default_k: int = retrieval.DEFAULT_K,
        default_method: Method = Method.MIXED,
    ):
        super().__init__(address, _RetrievalHandler)
        self.db = db
        self.index = index
        self.backend = backend
        self.default_k = default_k
        self.default_method = default_method


class _RetrievalHandler(_JsonHandler):
    server: RetrievalServer

    def do_GET(self):
        if self.path == "/v1/health":
            self._send_json(200, {"status": "ok"})
        elif self.path == "/v1/info":
            self._send_json(
                200,
                {
                    "name": "skillground-engine",
                    "dim": self.server.backend.dim,
                    "records": len(self.server.db),
                    "backend": self.server.backend.fingerprint(),
                },
            )
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        if self.path != "/v1/retrieve":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        doc = self._read_json()
        if doc is None:
            return
        try:
            validate_message("retrieve_request", doc)
            query = _parse_wire_query(doc["query"])
            k = int(doc.get("k", self.server.default_k))
            method = Method(doc.get("method", self.server.default_method.value))
            result = retrieval.retrieve(
                query,
                self.server.db,
                self.server.index,
                self.server.backend,
                k=k,
                method=method,
            )
        except (ProtocolError, ValueError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        except (RetrievalError, BackendError) as exc:
            self._send_json(500, {"error": str(exc)})
            return
        payload = result.to_dict()
        payload["record"] = self.server.db.get(result.chosen_id).to_dict()
        self._send_json(200, payload)


def _parse_wire_query(doc: dict) -> Query:
    kind = QueryKind(doc["kind"])
    payload = doc["payload"]
    if kind == QueryKind.IMAGE:
        try:
            return Query(kind, base64.b64decode(payload, validate=True))
        except (binascii.Error, ValueError) as exc:
            raise ProtocolError(f"image payload is not valid base64: {exc}") from exc
    return Query(kind, payload)


class BackendServer(ThreadingHTTPServer):
    """Bridges an in-process EncoderBackend onto the encoder wire protocol."""

    daemon_threads = True

    def __init__(self, address: tuple[str, int], backend: EncoderBackend):
        super().__init__(address, _BackendHandler)
        self.backend = backend


class _BackendHandler(_JsonHandler):
    server: BackendServer

    def do_GET(self):
        if self.path == "/v1/info":
            self._send_json(
                200, {"name": self.server.backend.name, "dim": self.server.backend.dim}
            )
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def _decode_payload(self, query: dict) -> str | bytes:
        if query["kind"] == "image":
            return base64.b64decode(query["payload"], validate=True)
        return query["payload"]

    def do_POST(self):
        doc = self._read_json()
        if doc is None:
            return
        backend = self.server.backend
        try:
            if self.path == "/v1/embed":
                validate_message("embed_request", doc)
                payload = self._decode_payload(doc)
                vec = (
                    backend.embed_text(payload)
                    if doc["kind"] == "text"
                    else backend.embed_image(payload)
                )
                self._send_json(
                    200, {"dim": len(vec), "vector": [float(v) for v in vec]}
                )
            elif self.path == "/v1/itm":
                validate_message("itm_request", doc)
                query = doc["query"]
                neg, pos = backend.itm_logits(
                    query["kind"], self._decode_payload(query), doc["candidate_text"]
                )
                self._send_json(200, {"logits": [float(neg), float(pos)]})
            else:
                self._send_json(404, {"error": f"unknown path {self.path}"})
        except (ProtocolError, ValueError, binascii.Error) as exc:
            self._send_json(400, {"error": str(exc)})
        except BackendError as exc:
            self._send_json(500, {"error": str(exc)})


def run_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    """Start serve_forever on a daemon thread (tests and embedding)."""
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
