"""LLM-driven batch generation of instructions and motion descriptors.

Descriptors are requested in batches rather than one call per instruction,
which cuts provider calls from n to ceil(n / batch_size) and gives the
model visibility of the whole batch (less repetition). Input order is
shuffled before prompting to keep the model from pattern-matching on
position, and restored afterwards so callers see their own order.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .db import Category, SkillDatabase, SkillRecord, normalize_instruction
from .descriptors import MotionDescriptor, validate
from .providers import LlmProvider, ProviderError

DEFAULT_BATCH_SIZE = 25
RETRY_CAP = 3

_PROMPT_FILES = {
    "instruction_template": "instruction_template.txt",
    "mimic": "mimic.txt",
    "scene": "scene.txt",
    "action": "action.txt",
    "skill_with_reasoning": "skill_with_reasoning.txt",
    "skill_plain": "skill_plain.txt",
}

_CATEGORY_PROMPT = {
    Category.MIMIC: "mimic",
    Category.SCENE: "scene",
    Category.DIRECT: "action",
}


def load_prompt(name: str) -> str:
    filename = _PROMPT_FILES[name]
    return (
        resources.files("skillground")
        .joinpath("prompts")
        .joinpath(filename)
        .read_text("utf-8")
    )


def prompt_hashes() -> dict[str, str]:
    return {
        name: hashlib.sha256(load_prompt(name).encode("utf-8")).hexdigest()[:16]
        for name in sorted(_PROMPT_FILES)
    }


@dataclass(frozen=True)
class GenConfig:
    batch_size: int = DEFAULT_BATCH_SIZE
    with_reasoning: bool = True
    shuffle_seed: int = 0
    category: Category = Category.MIMIC

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class RejectedItem:
    instruction: str
    reason: str


@dataclass
class GenResult:
    records: list[SkillRecord]
    rejected: list[RejectedItem] = field(default_factory=list)


class LlmOutputError(ValueError):
    """Provider output could not be parsed; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int | None = None, raw: str = ""):
        super().__init__(message)
        self.offset = offset
        self.raw = raw


class GenerationIncomplete(RuntimeError):
    """Retry cap exceeded; ``partial`` holds whatever was produced."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


def query_count(n: int, batch_size: int) -> int:
    """Provider calls needed for n items at the given batch size.

    batch_size=1 models the one-descriptor-per-call baseline.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    return -(-n // batch_size)


def _scan_json_value(text: str, start: int) -> str | None:
    """Return the balanced JSON array/object starting at ``start``, if any."""
    stack = []
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            stack.append(ch)
        elif ch in "]}":
            if not stack:
                return None
            opener = stack.pop()
            if (opener, ch) not in (("[", "]"), ("{", "}")):
                return None
            if not stack:
                return text[start : i + 1]
    return None


def extract_json(text: str):
    """Parse ``text`` as JSON, salvaging the outermost value from wrapper prose."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        first_error = exc
    for i, ch in enumerate(text):
        if ch in "[{":
            candidate = _scan_json_value(text, i)
            if candidate is not None:
                try:
                    return json.loads(candidate)
                except json.JSONDecodeError:
                    continue
    raise LlmOutputError(
        f"no parseable JSON in provider output: {first_error.msg} "
        f"at offset {first_error.pos}",
        offset=first_error.pos,
        raw=text,
    )


@dataclass
class ParsedItem:
    instruction: str
    reasoning: str | None
    descriptor: MotionDescriptor


def parse_llm_output(text: str) -> list[ParsedItem]:
    """Strict structural parse of a provider's skill output."""
    doc = extract_json(text)
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise LlmOutputError(f"expected JSON array, got {type(doc).__name__}", raw=text)
    items = []
    for i, obj in enumerate(doc):
        if not isinstance(obj, dict):
            raise LlmOutputError(f"item {i}: expected object", raw=text)
        if "instruction" not in obj or not isinstance(obj["instruction"], str):
            raise LlmOutputError(f"item {i}: missing 'instruction'", raw=text)
        if "descriptor" not in obj:
            raise LlmOutputError(f"item {i}: missing 'descriptor'", raw=text)
        try:
            descriptor = MotionDescriptor.from_dict(obj["descriptor"])
        except (KeyError, TypeError, ValueError) as exc:
            raise LlmOutputError(
                f"item {i}: malformed descriptor ({exc})", raw=text
            ) from exc
        reasoning = obj.get("reasoning")
        if reasoning is not None and not isinstance(reasoning, str):
            raise LlmOutputError(f"item {i}: reasoning must be a string", raw=text)
        items.append(ParsedItem(obj["instruction"], reasoning, descriptor))
    return items


def gen_instructions(
    provider: LlmProvider,
    category: Category,
    n: int,
    retry_cap: int = RETRY_CAP,
) -> list[str]:
    """Generate ``n`` unique instructions of one category.

    Duplicates (casefolded, whitespace-collapsed) are filtered and
    re-requested up to ``retry_cap`` extra calls; persistent shortfall
    raises GenerationIncomplete carrying the partial list.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    system = load_prompt("instruction_template").replace(
        "{category_prompt}", load_prompt(_CATEGORY_PROMPT[category]).strip()
    )
    accepted: list[str] = []
    seen: set[str] = set()
    for _ in range(1 + retry_cap):
        missing = n - len(accepted)
        if missing == 0:
            return accepted
        user = f"Generate {missing} instructions.\nAvoid: " + json.dumps(
            accepted, ensure_ascii=False
        )
        raw = provider.complete(system, user)
        try:
            batch = extract_json(raw)
        except LlmOutputError:
            continue
        if not isinstance(batch, list):
            continue
        for item in batch:
            if not isinstance(item, str) or not item.strip():
                continue
            key = normalize_instruction(item)
            if key in seen:
                continue
            seen.add(key)
            accepted.append(item)
            if len(accepted) == n:
                return accepted
    raise GenerationIncomplete(
        f"only {len(accepted)}/{n} unique instructions after {retry_cap} retries",
        partial=accepted,
    )


def gen_descriptors_batch(
    provider: LlmProvider,
    instructions: list[str],
    cfg: GenConfig,
    retry_cap: int = RETRY_CAP,
) -> GenResult:
    """Batch-translate instructions into validated skill records.

    Instructions are shuffled by ``cfg.shuffle_seed`` before prompting and
    results are restored to the callers' order. Items with malformed or
    invalid descriptors are reported in ``rejected`` instead of aborting the
    batch; record ids are provisional 0-based positions (database insertion
    reassigns them).
    """
    if not instructions:
        raise ValueError("instructions must be nonempty")
    system = load_prompt(
        "skill_with_reasoning" if cfg.with_reasoning else "skill_plain"
    )
    order = list(range(len(instructions)))
    random.Random(cfg.shuffle_seed).shuffle(order)
    shuffled = [instructions[i] for i in order]

    results: dict[str, ParsedItem] = {}
    rejected: list[RejectedItem] = []
    for at in range(0, len(shuffled), cfg.batch_size):
        batch = shuffled[at : at + cfg.batch_size]
        batch_keys = {normalize_instruction(b) for b in batch}
        items: list[ParsedItem] | None = None
        last_error = "provider failure"
        for _ in range(retry_cap):
            try:
                raw = provider.complete(system, "Translate these commands:\n"
                                        + json.dumps(batch, ensure_ascii=False))
                items = parse_llm_output(raw)
                break
            except (LlmOutputError, ProviderError) as exc:
                last_error = str(exc)
                items = None
        if items is None:
            rejected.extend(RejectedItem(b, last_error) for b in batch)
            continue
        handled: set[str] = set()
        for item in items:
            key = normalize_instruction(item.instruction)
            if key not in batch_keys:
                rejected.append(
                    RejectedItem(item.instruction, "not among prompted instructions")
                )
                continue
            handled.add(key)
            violations = validate(item.descriptor)
            if violations:
                rejected.append(RejectedItem(item.instruction, "; ".join(violations)))
                continue
            if cfg.with_reasoning and item.reasoning is None:
                rejected.append(RejectedItem(item.instruction, "missing reasoning"))
                continue
            results[key] = item
        for b in batch:
            if normalize_instruction(b) not in handled:
                rejected.append(RejectedItem(b, "missing from provider output"))

    records = []
    for instruction in instructions:  # restore original order
        item = results.get(normalize_instruction(instruction))
        if item is None:
            continue
        records.append(
            SkillRecord(
                id=len(records),
                instruction=instruction,
                reasoning=item.reasoning if cfg.with_reasoning else None,
                descriptor=item.descriptor,
                category=cfg.category,
            )
        )
    return GenResult(records=records, rejected=rejected)


def build_database(
    provider: LlmProvider,
    counts: dict[Category, int],
    cfg: GenConfig,
) -> tuple[SkillDatabase, list[RejectedItem]]:
    """Full pipeline: instructions per category, batch skills, assembled db.

    Provenance (provider, prompt hashes, seeds) lands in db.meta; a creation
    timestamp is recorded only for non-deterministic providers so that
    fixture runs stay byte-reproducible.
    """
    db = SkillDatabase(
        meta={
            "provider": provider.name,
            "prompt_hashes": prompt_hashes(),
            "shuffle_seed": cfg.shuffle_seed,
            "batch_size": cfg.batch_size,
            "with_reasoning": cfg.with_reasoning,
            "created_at": None
            if provider.deterministic
            else datetime.datetime.now().isoformat(timespec="seconds"),
        }
    )
    all_rejected: list[RejectedItem] = []
    for category in (Category.MIMIC, Category.SCENE, Category.DIRECT):
        n = counts.get(category, 0)
        if n == 0:
            continue
        instructions = gen_instructions(provider, category, n)
        result = gen_descriptors_batch(
            provider,
            instructions,
            GenConfig(
                batch_size=cfg.batch_size,
                with_reasoning=cfg.with_reasoning,
                shuffle_seed=cfg.shuffle_seed,
                category=category,
            ),
        )
        all_rejected.extend(result.rejected)
        for record in result.records:
            db.insert(record)
    return db, all_rejected
