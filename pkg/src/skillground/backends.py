"""Encoder backends: the embedding/ITM interface plus offline mocks.

A backend supplies unit-norm text/image embeddings of a fixed dimension and
an image-text-matching head returning a (negative, positive) logit pair.
Real models sit behind the HTTP wire protocol (see HttpEncoderBackend and
the sidecar service); the mocks here make the whole retrieval surface
testable offline:

* PerfectOracleBackend embeds every database instruction to a distinct
  one-hot, so every retrieval method is exact.
* SeededHashBackend derives deterministic pseudo-random unit vectors from
  content digests.
* DegradedOracleBackend adds Gaussian noise to the oracle so stage-1
  retrieval errs at a controlled rate while ITM stays more reliable.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import urllib.error
import urllib.request
from abc import ABC, abstractmethod

import numpy as np

from . import textimage
from .db import SkillDatabase, normalize_instruction


class BackendError(RuntimeError):
    pass


class EncoderBackend(ABC):
    """Text/image encoder plus ITM head behind one interface."""

    name: str = "backend"
    dim: int = 0

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray: ...

    @abstractmethod
    def embed_image(self, png_bytes: bytes) -> np.ndarray: ...

    @abstractmethod
    def itm_logits(
        self, query_kind: str, query_payload: str | bytes, candidate_text: str
    ) -> tuple[float, float]:
        """(negative, positive) match logits for a query/candidate pair."""

    def fingerprint(self) -> str:
        return f"{self.name}:{self.dim}"


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise BackendError("embedding is zero or non-finite")
    return vec / norm


def _digest_to_rng(*parts: bytes) -> np.random.Generator:
    digest = hashlib.blake2b(b"\x1f".join(parts), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def _image_source_text(png_bytes: bytes) -> str | None:
    return textimage.extract_source_text(png_bytes)


class SeededHashBackend(EncoderBackend):
    """Deterministic pseudo-random unit embeddings keyed by content digest.

    Embeddings carry no semantics; the point is a fixed, reproducible
    geometry for exercising the retrieval math.
    """

    name = "hash"

    def __init__(self, seed: int = 0, dim: int = 64):
        self.seed = seed
        self.dim = dim
        self._cache: dict[bytes, np.ndarray] = {}

    def fingerprint(self) -> str:
        return f"{self.name}:{self.dim}:{self.seed}"

    def _vector(self, key: bytes) -> np.ndarray:
        cached = self._cache.get(key)
        if cached is None:
            rng = _digest_to_rng(str(self.seed).encode(), key)
            cached = _unit(rng.standard_normal(self.dim))
            self._cache[key] = cached
        return cached

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(b"text\x00" + text.encode("utf-8"))

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._vector(b"image\x00" + hashlib.sha256(png_bytes).digest())

    def itm_logits(self, query_kind, query_payload, candidate_text):
        if query_kind == "text":
            q = self.embed_text(query_payload)
        else:
            q = self.embed_image(query_payload)
        pos = 2.0 * float(np.dot(q, self.embed_text(candidate_text)))
        return (0.0, pos)


class PerfectOracleBackend(EncoderBackend):
    """Embeds each database instruction to a distinct one-hot vector.

    Rendered text images are resolved through their source-text metadata, so
    both query representations retrieve exactly. Unknown strings fall back
    to hash vectors, which are nearly orthogonal to every one-hot.
    """

    name = "oracle"

    def __init__(self, db: SkillDatabase):
        self._index_of = {
            normalize_instruction(rec.instruction): i for i, rec in enumerate(db)
        }
        self.dim = max(len(self._index_of), 1)
        self._fallback = SeededHashBackend(seed=1, dim=self.dim)

    def _text_vector(self, text: str) -> np.ndarray:
        idx = self._index_of.get(normalize_instruction(text))
        if idx is None:
            return self._fallback.embed_text(text)
        vec = np.zeros(self.dim)
        vec[idx] = 1.0
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        return self._text_vector(text)

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        source = _image_source_text(png_bytes)
        if source is not None:
            return self._text_vector(source)
        return self._fallback.embed_image(png_bytes)

    def _query_text(self, query_kind: str, query_payload) -> str | None:
        if query_kind == "text":
            return query_payload
        return _image_source_text(query_payload)

    def itm_logits(self, query_kind, query_payload, candidate_text):
        source = self._query_text(query_kind, query_payload)
        match = source is not None and normalize_instruction(
            source
        ) == normalize_instruction(candidate_text)
        return (0.0, 8.0) if match else (0.0, -8.0)


class DegradedOracleBackend(EncoderBackend):
    """Oracle with injected noise, for controlled accuracy experiments.

    Every embedding call adds a fresh Gaussian noise vector of expected
    norm ``sim_noise`` to the one-hot base (per-component sigma scales as
    1/sqrt(dim), so the degradation level is database-size independent);
    the ITM head scores a true match ``itm_gap`` plus noise of sigma
    ``itm_noise``. Defaults put stage-1 top-1 accuracy near 50% while
    keeping ITM re-ranking clearly better and the combined score better
    still. Deterministic for a fixed seed and call sequence (the noise
    stream advances per call, so build the index and run queries in a
    fixed order when comparing runs).
    """

    name = "degraded"

    def __init__(
        self,
        db: SkillDatabase,
        seed: int = 0,
        sim_noise: float = 2.3,
        itm_gap: float = 2.0,
        itm_noise: float = 1.1,
    ):
        self._oracle = PerfectOracleBackend(db)
        self.dim = self._oracle.dim
        self.seed = seed
        self.sim_noise = sim_noise
        self.itm_gap = itm_gap
        self.itm_noise = itm_noise
        self._rng = np.random.default_rng(seed)

    def fingerprint(self) -> str:
        return f"{self.name}:{self.dim}:{self.seed}:{self.sim_noise}:{self.itm_gap}:{self.itm_noise}"

    def _noisy(self, base: np.ndarray) -> np.ndarray:
        sigma = self.sim_noise / math.sqrt(self.dim)
        return _unit(base + sigma * self._rng.standard_normal(self.dim))

    def embed_text(self, text: str) -> np.ndarray:
        return self._noisy(self._oracle.embed_text(text))

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._noisy(self._oracle.embed_image(png_bytes))

    def itm_logits(self, query_kind, query_payload, candidate_text):
        source = self._oracle._query_text(query_kind, query_payload)
        match = source is not None and normalize_instruction(
            source
        ) == normalize_instruction(candidate_text)
        pos = self.itm_gap * float(match) + self.itm_noise * float(
            self._rng.standard_normal()
        )
        return (0.0, pos)


class ConstantItmBackend(EncoderBackend):
    """Wrapper pinning the ITM head to fixed logits (embeddings delegated)."""

    name = "constant-itm"

    def __init__(self, inner: EncoderBackend, logits: tuple[float, float] = (0.0, 0.0)):
        self._inner = inner
        self._logits = logits
        self.dim = inner.dim

    def fingerprint(self) -> str:
        return f"{self.name}({self._inner.fingerprint()})"

    def embed_text(self, text: str) -> np.ndarray:
        return self._inner.embed_text(text)

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._inner.embed_image(png_bytes)

    def itm_logits(self, query_kind, query_payload, candidate_text):
        return self._logits


class HttpEncoderBackend(EncoderBackend):
    """Client for remote encoders speaking the wire protocol.

    POST /v1/embed {"kind","payload"} -> {"dim","vector"}
    POST /v1/itm {"query","candidate_text"} -> {"logits":[neg,pos]}
    GET /v1/info -> {"name","dim"}
    """

    def __init__(self, base_url: str, timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        info = self._get("/v1/info")
        try:
            self.name = str(info["name"])
            self.dim = int(info["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"bad /v1/info payload: {info!r}") from exc

    def fingerprint(self) -> str:
        return f"http:{self.base_url}:{self.name}:{self.dim}"

    def _get(self, path: str) -> dict:
        try:
            with urllib.request.urlopen(
                self.base_url + path, timeout=self.timeout_s
            ) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"GET {path} failed: {exc}") from exc

    def _post(self, path: str, payload: dict) -> dict:
        req = urllib.request.Request(
            self.base_url + path,
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", errors="replace")[:200]
            raise BackendError(f"POST {path} -> {exc.code}: {detail}") from exc
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"POST {path} failed: {exc}") from exc

    @staticmethod
    def wire_query(kind: str, payload: str | bytes) -> dict:
        if isinstance(payload, bytes):
            return {"kind": kind, "payload": base64.b64encode(payload).decode("ascii")}
        return {"kind": kind, "payload": payload}

    def _embed(self, kind: str, payload: str | bytes) -> np.ndarray:
        doc = self._post("/v1/embed", self.wire_query(kind, payload))
        try:
            vec = np.asarray(doc["vector"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"bad /v1/embed payload: {doc!r}") from exc
        if vec.shape != (self.dim,):
            raise BackendError(f"embedding dim {vec.shape} != ({self.dim},)")
        return _unit(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed("text", text)

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._embed("image", png_bytes)

    def itm_logits(self, query_kind, query_payload, candidate_text):
        doc = self._post(
            "/v1/itm",
            {
                "query": self.wire_query(query_kind, query_payload),
                "candidate_text": candidate_text,
            },
        )
        try:
            neg, pos = doc["logits"]
            return (float(neg), float(pos))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"bad /v1/itm payload: {doc!r}") from exc
