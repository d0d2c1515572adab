"""Persistent instruction-grounded skill database with stats and annotations.

The database is an ordered collection of (instruction, optional reasoning,
motion descriptor) records plus generation provenance. Files are canonical
JSON (UTF-8, pretty-printed, sorted keys) so that identical databases are
byte-identical on disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .descriptors import (
    DEFAULT_CLASSIFY_TOL,
    GaitClass,
    MotionDescriptor,
    classify_gait,
    validate,
)

DEFAULT_PERIOD_BINS = tuple(round(0.1 + 0.1 * i, 10) for i in range(11))  # 0.1 .. 1.1
DEFAULT_VEL_BINS = tuple(round(0.25 * i, 10) for i in range(13))  # 0 .. 3.0


class Category(Enum):
    MIMIC = "mimic"
    SCENE = "scene"
    DIRECT = "direct"


class DbError(ValueError):
    pass


class DuplicateInstructionError(DbError):
    """Insert rejected: an equivalent instruction already exists."""

    def __init__(self, instruction: str, existing_id: int):
        super().__init__(
            f"duplicate instruction {instruction!r} (existing id {existing_id})"
        )
        self.existing_id = existing_id


class DbParseError(DbError):
    """A database file violated the schema; message names record and field."""


class EmptyDatabaseError(DbError):
    pass


class OutOfRangeError(DbError):
    def __init__(self, record_id: int, fieldname: str, value: float, bins):
        super().__init__(
            f"record {record_id}: {fieldname}={value} outside histogram range "
            f"[{bins[0]}, {bins[-1]}]"
        )
        self.record_id = record_id


def normalize_instruction(text: str) -> str:
    """Dedup key: casefolded, whitespace-collapsed instruction text."""
    return " ".join(text.casefold().split())


@dataclass(frozen=True)
class SkillRecord:
    id: int
    instruction: str
    reasoning: str | None
    descriptor: MotionDescriptor
    category: Category

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "reasoning": self.reasoning,
            "category": self.category.value,
            "descriptor": self.descriptor.to_dict(),
        }


@dataclass
class Histogram:
    edges: tuple[float, ...]
    probs: tuple[float, ...]

    def total(self) -> float:
        return float(sum(self.probs))


@dataclass
class DbStats:
    gait_dist: dict[GaitClass, float]
    period_hist: Histogram
    vel_hist: Histogram


class SkillDatabase:
    """Ordered skill records plus generation provenance.

    Single-writer, many-reader: callers serialize mutation; reads can share
    the instance freely.
    """

    def __init__(self, records: Iterable[SkillRecord] = (), meta: dict | None = None):
        self.records: list[SkillRecord] = []
        self.meta: dict = dict(meta or {})
        self._by_norm: dict[str, int] = {}
        for rec in records:
            self._append_checked(rec)

    def _append_checked(self, rec: SkillRecord) -> None:
        key = normalize_instruction(rec.instruction)
        if key in self._by_norm:
            raise DuplicateInstructionError(rec.instruction, self._by_norm[key])
        self.records.append(rec)
        self._by_norm[key] = rec.id

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SkillRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SkillDatabase)
            and self.records == other.records
            and self.meta == other.meta
        )

    def get(self, record_id: int) -> SkillRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise KeyError(f"no record with id {record_id}")

    def find_id(self, instruction: str) -> int | None:
        return self._by_norm.get(normalize_instruction(instruction))

    def next_id(self) -> int:
        return max((r.id for r in self.records), default=-1) + 1

    def insert(self, record: SkillRecord) -> SkillRecord:
        """Append with a fresh id; reject invalid or duplicate records.

        The incoming record's id is ignored. On a duplicate the database is
        left unchanged and the raised error carries the existing id.
        """
        if not record.instruction.strip():
            raise DbError("instruction must be nonempty")
        violations = validate(record.descriptor)
        if violations:
            raise DbError(
                f"invalid descriptor for {record.instruction!r}: "
                + "; ".join(violations)
            )
        key = normalize_instruction(record.instruction)
        if key in self._by_norm:
            raise DuplicateInstructionError(record.instruction, self._by_norm[key])
        assigned = replace(record, id=self.next_id())
        self.records.append(assigned)
        self._by_norm[key] = assigned.id
        return assigned

    def fingerprint(self) -> str:
        """Content hash used to detect stale embedding indexes."""
        h = hashlib.sha256()
        for rec in self.records:
            h.update(f"{rec.id}\x1f{rec.instruction}\x1e".encode("utf-8"))
        return h.hexdigest()


def compute_stats(
    db: SkillDatabase,
    period_bins: tuple[float, ...] = DEFAULT_PERIOD_BINS,
    vel_bins: tuple[float, ...] = DEFAULT_VEL_BINS,
    tol: float = DEFAULT_CLASSIFY_TOL,
) -> DbStats:
    """Gait distribution and period/velocity histograms, each summing to 1."""
    if len(db) == 0:
        raise EmptyDatabaseError("cannot compute stats of an empty database")
    for name, bins in (("period_bins", period_bins), ("vel_bins", vel_bins)):
        if len(bins) < 2 or any(a >= b for a, b in zip(bins, bins[1:])):
            raise DbError(f"{name} edges must be strictly increasing")

    n = len(db)
    counts: dict[GaitClass, int] = {g: 0 for g in GaitClass}
    for rec in db:
        counts[classify_gait(rec.descriptor.offsets, tol)] += 1
    gait_dist = {g: counts[g] / n for g in GaitClass}

    def hist(values: list[float], bins: tuple[float, ...], fieldname: str) -> Histogram:
        for rec, v in zip(db, values):
            if not (bins[0] <= v <= bins[-1]):
                raise OutOfRangeError(rec.id, fieldname, v, bins)
        raw, _ = np.histogram(values, bins=np.asarray(bins))
        return Histogram(edges=tuple(bins), probs=tuple(raw / n))

    return DbStats(
        gait_dist=gait_dist,
        period_hist=hist([r.descriptor.period_s for r in db], period_bins, "period_s"),
        vel_hist=hist([r.descriptor.vel_limit for r in db], vel_bins, "vel_limit"),
    )


def _canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def db_to_json(db: SkillDatabase) -> str:
    return _canonical_json(
        {"meta": db.meta, "records": [rec.to_dict() for rec in db.records]}
    )


def save(db: SkillDatabase, path: str | Path) -> None:
    Path(path).write_text(db_to_json(db), encoding="utf-8")


def _parse_record(obj: dict, idx: int) -> SkillRecord:
    where = f"records[{idx}]"
    if not isinstance(obj, dict):
        raise DbParseError(f"{where}: expected object, got {type(obj).__name__}")
    for fieldname in ("id", "instruction", "category", "descriptor"):
        if fieldname not in obj:
            raise DbParseError(f"{where}: missing field {fieldname!r}")
    desc = obj["descriptor"]
    if not isinstance(desc, dict):
        raise DbParseError(f"{where}: descriptor must be an object")
    for fieldname in ("offsets", "period_s", "vel_limit"):
        if fieldname not in desc:
            raise DbParseError(f"{where}: descriptor missing field {fieldname!r}")
    try:
        descriptor = MotionDescriptor.from_dict(desc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DbParseError(f"{where}: malformed descriptor ({exc})") from exc
    try:
        category = Category(obj["category"])
    except ValueError as exc:
        raise DbParseError(f"{where}: unknown category {obj['category']!r}") from exc
    reasoning = obj.get("reasoning")
    if reasoning is not None and not isinstance(reasoning, str):
        raise DbParseError(f"{where}: reasoning must be string or null")
    if not isinstance(obj["id"], int) or isinstance(obj["id"], bool):
        raise DbParseError(f"{where}: id must be an integer")
    if not isinstance(obj["instruction"], str) or not obj["instruction"].strip():
        raise DbParseError(f"{where}: instruction must be a nonempty string")
    violations = validate(descriptor)
    if violations:
        raise DbParseError(f"{where}: invalid descriptor: " + "; ".join(violations))
    return SkillRecord(
        id=obj["id"],
        instruction=obj["instruction"],
        reasoning=reasoning,
        descriptor=descriptor,
        category=category,
    )


def load(path: str | Path) -> SkillDatabase:
    """Load a database file, raising DbParseError naming the offending record."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DbParseError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, list):  # bare record array is accepted
        doc = {"meta": {}, "records": doc}
    if not isinstance(doc, dict) or "records" not in doc:
        raise DbParseError(f"{path}: expected object with 'records'")
    records = [_parse_record(obj, i) for i, obj in enumerate(doc["records"])]
    try:
        return SkillDatabase(records=records, meta=doc.get("meta", {}))
    except DuplicateInstructionError as exc:
        raise DbParseError(f"{path}: {exc}") from exc


@dataclass
class AnnotationSet:
    """Ground-truth (query text, expected record id) pairs for evaluation."""

    entries: list[tuple[str, int]] = field(default_factory=list)

    def validate_against(self, db: SkillDatabase) -> None:
        ids = {rec.id for rec in db}
        for query, expected in self.entries:
            if expected not in ids:
                raise DbError(
                    f"annotation {query!r} references missing record id {expected}"
                )

    def to_json(self) -> str:
        return _canonical_json(
            {"entries": [{"query": q, "expected_id": i} for q, i in self.entries]}
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationSet":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DbParseError(f"{path}: invalid JSON ({exc})") from exc
        entries = []
        for i, obj in enumerate(doc.get("entries", [])):
            if "query" not in obj or "expected_id" not in obj:
                raise DbParseError(f"entries[{i}]: need 'query' and 'expected_id'")
            entries.append((obj["query"], int(obj["expected_id"])))
        return cls(entries=entries)
