"""HTTP service implementing the encoder wire protocol.

POST /v1/embed {"kind": "text"|"image", "payload": "<utf8 or base64-png>"}
    -> {"dim": D, "vector": [...]}           (vector L2-normalized)
POST /v1/itm {"query": {...}, "candidate_text": "..."}
    -> {"logits": [negative, positive]}
GET /v1/info -> {"name", "dim", "model"}

Errors: 400 malformed request, 413 payload over the limit, 503 model not
loaded. The model is loaded before the socket opens (fail fast); request
handling is threaded and inference is serialized with a lock, so callers
only ever see the protocol.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

log = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
DEFAULT_MAX_PAYLOAD = 8 * 1024 * 1024


class RequestError(ValueError):
    def __init__(self, message: str, status: int = 400):
        super().__init__(message)
        self.status = status


def parse_payload(doc: dict) -> tuple[str, str | bytes]:
    """Validate and decode one {"kind","payload"} query object."""
    if not isinstance(doc, dict):
        raise RequestError("query must be an object")
    kind = doc.get("kind")
    payload = doc.get("payload")
    if kind not in ("text", "image"):
        raise RequestError(f"kind must be 'text' or 'image', got {kind!r}")
    if not isinstance(payload, str) or not payload:
        raise RequestError("payload must be a nonempty string")
    if kind == "text":
        return kind, payload
    try:
        raw = base64.b64decode(payload, validate=True)
    except binascii.Error as exc:
        raise RequestError(f"image payload is not valid base64: {exc}") from exc
    if not raw.startswith(PNG_SIGNATURE):
        raise RequestError("image payload is not a PNG")
    return kind, raw


class SidecarServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        encoder,
        max_payload_bytes: int = DEFAULT_MAX_PAYLOAD,
    ):
        super().__init__(address, _Handler)
        self.encoder = encoder
        self.max_payload_bytes = max_payload_bytes
        self.inference_lock = threading.Lock()


class _Handler(BaseHTTPRequestHandler):
    server: SidecarServer
    server_version = "vlm-sidecar"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/v1/info":
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        encoder = self.server.encoder
        if encoder is None:
            self._send(503, {"error": "model not loaded"})
            return
        self._send(
            200,
            {"name": "vlm-sidecar", "dim": encoder.dim, "model": encoder.model_id},
        )

    def do_POST(self):
        encoder = self.server.encoder
        if encoder is None:
            self._send(503, {"error": "model not loaded"})
            return
        length = int(self.headers.get("Content-Length", 0))
        if length > self.server.max_payload_bytes:
            self._send(413, {"error": f"payload exceeds {self.server.max_payload_bytes} bytes"})
            return
        try:
            doc = json.loads(self.rfile.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"invalid JSON: {exc}"})
            return
        try:
            if self.path == "/v1/embed":
                kind, payload = parse_payload(doc)
                with self.server.inference_lock:
                    vec = (
                        encoder.embed_text(payload)
                        if kind == "text"
                        else encoder.embed_image(payload)
                    )
                vec = np.asarray(vec, dtype=float)
                norm = float(np.linalg.norm(vec))
                if norm <= 0 or not np.isfinite(norm):
                    raise RequestError("encoder produced a degenerate vector", 500)
                vec = vec / norm
                self._send(200, {"dim": len(vec), "vector": [float(v) for v in vec]})
            elif self.path == "/v1/itm":
                if not isinstance(doc, dict) or "query" not in doc:
                    raise RequestError("itm request needs 'query'")
                candidate = doc.get("candidate_text")
                if not isinstance(candidate, str) or not candidate:
                    raise RequestError("candidate_text must be a nonempty string")
                kind, payload = parse_payload(doc["query"])
                with self.server.inference_lock:
                    neg, pos = encoder.itm_logits(kind, payload, candidate)
                if not (np.isfinite(neg) and np.isfinite(pos)):
                    raise RequestError("encoder produced non-finite logits", 500)
                self._send(200, {"logits": [float(neg), float(pos)]})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})
        except RequestError as exc:
            self._send(exc.status, {"error": str(exc)})
        except Exception as exc:  # defensive: protocol errors only, never traces
            log.exception("inference failure")
            self._send(500, {"error": f"inference failure: {exc}"})


def run_in_thread(server: SidecarServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
