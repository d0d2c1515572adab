"""Two-stage mixed-precision retrieval over the skill database.

Stage 1 ranks the whole database by cosine similarity between the query
embedding and the instruction embeddings, keeps the top K, and softmaxes
those K similarities into p1. Computing the softmax over the full database
would flatten into near-uniform, uninformative probabilities, hence the
restriction to the candidate set. Stage 2 runs the ITM head on each
candidate to get a positive-match probability p2. The final choice is
argmax(p1 + p2); cheaper methods (global cosine, stage-1 only, ITM-only
re-ranking) are selectable for comparison and never issue ITM calls they
don't need.

Ties anywhere resolve to the lowest record id so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import pngio
from .backends import BackendError, EncoderBackend
from .db import AnnotationSet, SkillDatabase
from .textimage import RenderConfig, render_text_image

DEFAULT_K = 5


class Method(Enum):
    COSINE = "cosine"
    TOPK = "topk"
    TOPK_ITM = "topk_itm"
    MIXED = "mixed"


class QueryKind(Enum):
    TEXT = "text"
    IMAGE = "image"
    TEXT_AS_IMAGE = "text_as_image"


@dataclass(frozen=True)
class Query:
    kind: QueryKind
    payload: str | bytes

    def __post_init__(self):
        if self.kind in (QueryKind.TEXT, QueryKind.TEXT_AS_IMAGE):
            if not isinstance(self.payload, str) or not self.payload.strip():
                raise ValueError(f"{self.kind.value} query needs nonempty text")
        else:
            if not isinstance(self.payload, (bytes, bytearray)):
                raise ValueError("image query needs PNG bytes")
            if not bytes(self.payload).startswith(pngio.PNG_SIGNATURE):
                raise ValueError("image query payload is not a PNG")

    @classmethod
    def text(cls, payload: str) -> "Query":
        return cls(QueryKind.TEXT, payload)

    @classmethod
    def image(cls, payload: bytes) -> "Query":
        return cls(QueryKind.IMAGE, payload)

    @classmethod
    def text_as_image(cls, payload: str) -> "Query":
        return cls(QueryKind.TEXT_AS_IMAGE, payload)


class RetrievalError(RuntimeError):
    pass


class StaleIndexError(RetrievalError):
    """The index was built against a different database state."""


@dataclass
class EmbeddingIndex:
    """Instruction embeddings aligned with record ids, pinned to a db state."""

    record_ids: tuple[int, ...]
    matrix: np.ndarray
    backend_fingerprint: str
    db_fingerprint: str

    def __len__(self) -> int:
        return len(self.record_ids)


@dataclass
class RetrievalResult:
    chosen_id: int
    candidate_ids: tuple[int, ...]
    similarities: tuple[float, ...]
    p1: tuple[float, ...]
    p2: tuple[float, ...] | None
    combined: tuple[float, ...] | None
    method: Method
    query_kind: QueryKind

    def to_dict(self) -> dict:
        return {
            "chosen_id": self.chosen_id,
            "candidate_ids": list(self.candidate_ids),
            "similarities": list(self.similarities),
            "p1": list(self.p1),
            "p2": None if self.p2 is None else list(self.p2),
            "combined": None if self.combined is None else list(self.combined),
            "method": self.method.value,
            "query_kind": self.query_kind.value,
        }


def softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - np.max(values))
    return shifted / shifted.sum()


def build_index(db: SkillDatabase, backend: EncoderBackend) -> EmbeddingIndex:
    """Embed every instruction; the index is pinned to the db fingerprint."""
    if len(db) == 0:
        raise RetrievalError("cannot index an empty database")
    rows = []
    for rec in db:
        try:
            vec = np.asarray(backend.embed_text(rec.instruction), dtype=float)
        except BackendError as exc:
            raise RetrievalError(f"embedding record {rec.id} failed: {exc}") from exc
        norm = float(np.linalg.norm(vec))
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise RetrievalError(
                f"backend returned non-unit embedding for record {rec.id} "
                f"(norm {norm})"
            )
        rows.append(vec)
    return EmbeddingIndex(
        record_ids=tuple(rec.id for rec in db),
        matrix=np.vstack(rows),
        backend_fingerprint=backend.fingerprint(),
        db_fingerprint=db.fingerprint(),
    )


def stage1(
    query_emb: np.ndarray, index: EmbeddingIndex, k: int
) -> tuple[tuple[int, ...], np.ndarray, np.ndarray]:
    """Top-K candidates by cosine similarity plus their softmax p1.

    Candidates come back sorted by descending similarity, boundary ties by
    lower record id.
    """
    n = len(index)
    if not 1 <= k <= n:
        raise RetrievalError(f"k must be in [1, {n}], got {k}")
    sims = index.matrix @ np.asarray(query_emb, dtype=float)
    order = sorted(range(n), key=lambda i: (-sims[i], index.record_ids[i]))[:k]
    candidate_ids = tuple(index.record_ids[i] for i in order)
    topk_sims = sims[order]
    return candidate_ids, topk_sims, softmax(topk_sims)


def stage2_p2(
    query_kind: str,
    query_payload: str | bytes,
    candidate_text: str,
    backend: EncoderBackend,
) -> float:
    """Positive-match probability: softmax over the (neg, pos) logit pair."""
    neg, pos = backend.itm_logits(query_kind, query_payload, candidate_text)
    pair = softmax(np.array([neg, pos], dtype=float))
    return float(pair[1])


def _argmax_lowest_id(scores, candidate_ids) -> int:
    best_score = max(scores)
    return min(cid for score, cid in zip(scores, candidate_ids) if score == best_score)


def resolve_query(
    query: Query, render_cfg: RenderConfig = RenderConfig()
) -> tuple[str, str | bytes]:
    """Reduce a query to the (kind, payload) pair backends understand.

    text_as_image renders once here so embedding and ITM share the raster.
    """
    if query.kind == QueryKind.TEXT:
        return "text", query.payload
    if query.kind == QueryKind.TEXT_AS_IMAGE:
        return "image", render_text_image(query.payload, render_cfg)
    return "image", bytes(query.payload)


def retrieve(
    query: Query,
    db: SkillDatabase,
    index: EmbeddingIndex,
    backend: EncoderBackend,
    k: int = DEFAULT_K,
    method: Method = Method.MIXED,
    render_cfg: RenderConfig = RenderConfig(),
) -> RetrievalResult:
    """Retrieve the best-matching record id for a query.

    cosine: global argmax of similarity. topk: argmax p1 over the top-K.
    topk_itm: argmax p2 over the top-K. mixed: argmax(p1 + p2). ITM calls
    are only issued for the methods that use them.
    """
    if len(db) == 0:
        raise RetrievalError("empty database")
    if index.db_fingerprint != db.fingerprint():
        raise StaleIndexError(
            "index was built for a different database state; rebuild it"
        )
    if index.backend_fingerprint != backend.fingerprint():
        raise StaleIndexError(
            f"index built with backend {index.backend_fingerprint!r}, "
            f"queried with {backend.fingerprint()!r}"
        )
    kind, payload = resolve_query(query, render_cfg)
    query_emb = backend.embed_text(payload) if kind == "text" else backend.embed_image(
        payload
    )
    candidate_ids, sims, p1 = stage1(query_emb, index, k)

    p2 = None
    combined = None
    if method in (Method.COSINE, Method.TOPK):
        # identical argmax by construction; kept separate to mirror the
        # method taxonomy and its accounting (no ITM calls either way)
        chosen = _argmax_lowest_id(p1, candidate_ids)
    else:
        texts = {rec.id: rec.instruction for rec in db}
        p2 = tuple(
            stage2_p2(kind, payload, texts[cid], backend) for cid in candidate_ids
        )
        if method == Method.TOPK_ITM:
            chosen = _argmax_lowest_id(p2, candidate_ids)
        elif method == Method.MIXED:
            combined = tuple(a + b for a, b in zip(p1, p2))
            chosen = _argmax_lowest_id(combined, candidate_ids)
        else:
            raise RetrievalError(f"unknown method {method}")
    return RetrievalResult(
        chosen_id=chosen,
        candidate_ids=candidate_ids,
        similarities=tuple(float(s) for s in sims),
        p1=tuple(float(p) for p in p1),
        p2=p2,
        combined=combined,
        method=method,
        query_kind=query.kind,
    )


@dataclass
class EvalCell:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def evaluate(
    annotations: AnnotationSet,
    db: SkillDatabase,
    backend: EncoderBackend,
    k: int = DEFAULT_K,
    methods: tuple[Method, ...] = tuple(Method),
    representations: tuple[QueryKind, ...] = (QueryKind.TEXT, QueryKind.TEXT_AS_IMAGE),
    index: EmbeddingIndex | None = None,
) -> dict[tuple[Method, QueryKind], EvalCell]:
    """Retrieval accuracy per method and query representation."""
    annotations.validate_against(db)
    if QueryKind.IMAGE in representations:
        raise ValueError("evaluate takes text-based representations only")
    if index is None:
        index = build_index(db, backend)
    texts = {rec.id: rec.instruction for rec in db}
    needs_itm = any(m in (Method.TOPK_ITM, Method.MIXED) for m in methods)
    correct = {(m, rep): 0 for m in methods for rep in representations}
    for representation in representations:
        for query_text, expected_id in annotations.entries:
            # one embedding and one ITM pass per query, shared across
            # methods, so method comparisons are paired even under
            # stochastic mock backends
            kind, payload = resolve_query(Query(representation, query_text))
            query_emb = (
                backend.embed_text(payload)
                if kind == "text"
                else backend.embed_image(payload)
            )
            candidate_ids, _, p1 = stage1(query_emb, index, k)
            p2 = (
                tuple(
                    stage2_p2(kind, payload, texts[cid], backend)
                    for cid in candidate_ids
                )
                if needs_itm
                else None
            )
            for method in methods:
                if method in (Method.COSINE, Method.TOPK):
                    chosen = _argmax_lowest_id(p1, candidate_ids)
                elif method == Method.TOPK_ITM:
                    chosen = _argmax_lowest_id(p2, candidate_ids)
                else:
                    combined = tuple(a + b for a, b in zip(p1, p2))
                    chosen = _argmax_lowest_id(combined, candidate_ids)
                correct[(method, representation)] += int(chosen == expected_id)
    return {
        key: EvalCell(correct=count, total=len(annotations.entries))
        for key, count in correct.items()
    }
