"""Pluggable LLM providers for the generation pipeline.

The pipeline only needs synchronous text-in/text-out completion plus token
accounting. The fixture provider is a fully deterministic stand-in used for
offline runs and tests: it serves instruction pools and maps each
instruction to a descriptor by hashing its text, so identical inputs always
produce identical outputs, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .descriptors import CANONICAL_GAITS, GaitClass, classify_gait

ENV_ENDPOINT = "SKILLGROUND_PROVIDER_ENDPOINT"
ENV_API_KEY = "SKILLGROUND_PROVIDER_KEY"
ENV_MODEL = "SKILLGROUND_PROVIDER_MODEL"


class ProviderError(RuntimeError):
    """Provider call failed; callers may retry."""


class ProviderConfigError(ValueError):
    """Provider cannot be constructed from the given configuration."""


@dataclass
class QueryLedger:
    """Per-run accounting of provider calls and token volumes."""

    calls: int = 0
    prompt_tokens: int = 0
    response_tokens: int = 0

    def record(self, prompt_text: str, response_text: str) -> None:
        self.calls += 1
        self.prompt_tokens += len(prompt_text.split())
        self.response_tokens += len(response_text.split())

    def cost(self, prompt_price_per_1k: float, response_price_per_1k: float) -> float:
        """Estimated cost under a user-supplied price table (USD per 1k tokens)."""
        return (
            self.prompt_tokens / 1000.0 * prompt_price_per_1k
            + self.response_tokens / 1000.0 * response_price_per_1k
        )


class LlmProvider(ABC):
    """Synchronous completion interface with usage accounting."""

    name: str = "provider"
    deterministic: bool = False

    def __init__(self):
        self.usage = QueryLedger()

    @abstractmethod
    def _complete(self, system_prompt: str, user_prompt: str) -> str: ...

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        response = self._complete(system_prompt, user_prompt)
        self.usage.record(system_prompt + "\n" + user_prompt, response)
        return response


class ScriptedProvider(LlmProvider):
    """Replays canned responses in order; used to exercise failure paths."""

    name = "scripted"
    deterministic = True

    def __init__(self, responses: list[str]):
        super().__init__()
        self._responses = list(responses)
        self.prompts: list[tuple[str, str]] = []

    def _complete(self, system_prompt: str, user_prompt: str) -> str:
        self.prompts.append((system_prompt, user_prompt))
        if not self._responses:
            raise ProviderError("scripted provider ran out of responses")
        return self._responses.pop(0)


# --- fixture provider -------------------------------------------------------

_MIMIC_CANNED = [
    "trundle along like a hippo",
    "run beautifully like a horse",
    "jumping like a frog",
    "let's jump like a rabbit",
    "prowl like a hunting cat",
    "strut like a proud rooster",
    "lumber around like a bear",
    "scurry like a startled mouse",
    "stalk forward like a heron",
    "gallop like a racehorse",
    "waddle like a duck",
    "slither smoothly like a snake",
]
_MIMIC_VERBS = ["move", "walk", "run", "hop", "creep",
                "trot", "prance", "stomp", "drift", "bounce"]
_MIMIC_ANIMALS = ["cat", "wolf", "deer", "fox", "crane",
                  "lizard", "camel", "moose", "otter", "goat"]

_SCENE_CANNED = [
    "the sound of a human voice, stay hidden.",
    "a busy marketplace, navigate through the crowd.",
    "shh! someone is sleeping, move quietly",
    "the floor is wet, walk cautiously",
    "a narrow cluttered corridor ahead, squeeze through carefully",
    "a wide open field, feel free to stretch your legs",
    "broken glass everywhere, watch your step",
    "a steep rocky slope rises ahead",
    "children are playing nearby, be gentle",
    "thunder rumbles overhead, hurry home",
]
_SCENE_SETTINGS = ["a dark warehouse", "a crowded subway platform",
                   "an icy parking lot", "a muddy construction site",
                   "a silent library hall", "a sunlit meadow",
                   "a cramped storage room", "a busy hospital ward",
                   "a gravel courtyard", "a flooded basement"]
_SCENE_BEHAVIORS = ["move with care", "keep a steady rhythm", "stay alert",
                    "pass through slowly", "find your way",
                    "keep your footing", "press onward", "take it easy",
                    "watch for obstacles", "make your way across"]

_DIRECT_CANNED = [
    "show me some pronk",
    "oh no! catch that thief running!",
    "walk as fast as you can",
    "march in place with high energy",
    "sprint to the door right now",
    "ease into a gentle stroll",
    "keep a brisk working trot",
    "bound forward with big leaps",
    "switch to a lazy amble",
    "hold a parade march",
]
_DIRECT_VERBS = ["walk", "trot", "pace", "bound", "gallop",
                 "jog", "march", "advance", "cruise", "patrol"]
_DIRECT_ADVERBS = ["slowly", "quickly", "carefully", "smoothly",
                   "with urgency", "at half speed", "with confidence",
                   "without rushing", "at full tilt", "in a relaxed way"]


def _dedup(items: list[str]) -> list[str]:
    seen: dict[str, None] = {}
    for it in items:
        seen.setdefault(" ".join(it.casefold().split()), None)
    keys = list(seen)
    # keep original casing of first occurrence
    by_norm = {}
    for it in items:
        by_norm.setdefault(" ".join(it.casefold().split()), it)
    return [by_norm[k] for k in keys]


INSTRUCTION_POOLS = {
    "mimic": _dedup(
        _MIMIC_CANNED
        + [f"{v} like a {a}" for v in _MIMIC_VERBS for a in _MIMIC_ANIMALS]
    ),
    "scene": _dedup(
        _SCENE_CANNED
        + [f"{s}, {b}" for s in _SCENE_SETTINGS for b in _SCENE_BEHAVIORS]
    ),
    "direct": _dedup(
        _DIRECT_CANNED
        + [f"{v} {a}" for v in _DIRECT_VERBS for a in _DIRECT_ADVERBS]
    ),
}

# Hand-written exemplars: instruction -> (reasoning, gait, period_s, vel_limit).
_SPECIAL_SKILLS: dict[str, tuple[str, GaitClass, float, float]] = {
    "trundle along like a hippo": (
        "slow and heavy trot, lower vel_lim and increase T",
        GaitClass.TROT, 0.7, 0.5,
    ),
    "oh no! catch that thief running!": (
        "fast and aggressive gait, low T and high vel_lim",
        GaitClass.ROTARY_GALLOP, 0.25, 2.5,
    ),
    "the sound of a human voice, stay hidden.": (
        "use a trot with high T for stealthy movement, low vel lim for quietness",
        GaitClass.TROT, 0.65, 0.4,
    ),
    "a busy marketplace, navigate through the crowd.": (
        "slow pace with moderate T for careful navigation",
        GaitClass.PACE, 0.5, 0.6,
    ),
    "shh! someone is sleeping, move quietly": (
        "quiet trot with long cycle period and very low vel_lim",
        GaitClass.TROT, 0.7, 0.3,
    ),
    "a narrow cluttered corridor ahead, squeeze through carefully": (
        "careful trot with reduced vel_lim to squeeze through clutter",
        GaitClass.TROT, 0.6, 0.5,
    ),
    "a wide open field, feel free to stretch your legs": (
        "open space allows a fast gallop with high vel_lim",
        GaitClass.ROTARY_GALLOP, 0.3, 2.2,
    ),
}

_GAIT_WORDS = {
    GaitClass.PRONK: "pronk",
    GaitClass.TROT: "trot",
    GaitClass.PACE: "pace",
    GaitClass.BOUND: "bound",
    GaitClass.ROTARY_GALLOP: "rotary gallop",
}
_PACE_ADJ = ["steady", "brisk", "calm", "energetic", "measured", "loose"]
_GOAL_ADJ = ["balance", "agility", "comfort", "stability", "momentum", "control"]


def _hash_rng(*parts: str) -> random.Random:
    digest = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return random.Random(int.from_bytes(digest.digest(), "big"))


def _noncanonical_offsets(rng: random.Random) -> tuple[float, float, float, float]:
    for _ in range(32):
        offsets = (0.0, rng.randint(0, 19) / 20.0,
                   rng.randint(0, 19) / 20.0, rng.randint(0, 19) / 20.0)
        if classify_gait(offsets) == GaitClass.OTHERS:
            return offsets
    return (0.0, 0.1, 0.35, 0.8)


def synthesize_skill(instruction: str, with_reasoning: bool) -> dict:
    """Deterministic (reasoning, descriptor) for an instruction.

    Emulates the quality gap the pipeline is designed around: reasoning-mode
    output spreads evenly over the five standard gaits with periods in
    0.2-0.7 s, while plain mode clusters on trot around 0.5 s with more
    unstructured gaits and slow outliers up to 1.0 s.
    """
    norm = " ".join(instruction.casefold().split())
    special = _SPECIAL_SKILLS.get(norm)
    if special is not None:
        reasoning, gait, period, vel = special
        offsets = CANONICAL_GAITS[gait]
    else:
        rng = _hash_rng("skill", "r1" if with_reasoning else "r0", norm)
        if with_reasoning:
            gait = rng.choices(
                list(GaitClass),
                weights=[0.18, 0.18, 0.18, 0.18, 0.18, 0.10],
            )[0]
            period = round(0.2 + 0.05 * rng.randint(0, 10), 2)
        else:
            gait = rng.choices(
                list(GaitClass),
                weights=[0.08, 0.42, 0.10, 0.08, 0.07, 0.25],
            )[0]
            period = round(min(max(rng.gauss(0.5, 0.15), 0.2), 1.0), 2)
        vel = round(0.3 + 0.1 * rng.randint(0, 23), 2)
        if gait == GaitClass.OTHERS:
            offsets = _noncanonical_offsets(rng)
            reasoning = (
                f"{rng.choice(_PACE_ADJ)} custom footfall pattern, "
                f"T {period} and vel_lim {vel} for {rng.choice(_GOAL_ADJ)}"
            )
        else:
            offsets = CANONICAL_GAITS[gait]
            reasoning = (
                f"{rng.choice(_PACE_ADJ)} {_GAIT_WORDS[gait]} with T {period} "
                f"and vel_lim {vel} for {rng.choice(_GOAL_ADJ)}"
            )
    item: dict = {"instruction": instruction}
    if with_reasoning:
        item["reasoning"] = reasoning
    item["descriptor"] = {
        "offsets": [float(o) for o in offsets],
        "period_s": period,
        "vel_limit": vel,
    }
    return item


class FixtureProvider(LlmProvider):
    """Deterministic offline provider emulating the LLM's two roles.

    Instruction requests are answered from fixed per-category pools;
    skill requests map each instruction to a descriptor via a content hash.
    Identical prompts always yield identical responses.
    """

    name = "fixture"
    deterministic = True

    def _complete(self, system_prompt: str, user_prompt: str) -> str:
        flat = " ".join(system_prompt.split())
        if "one object per input command" in flat:
            return self._complete_skills(flat, user_prompt)
        return self._complete_instructions(flat, user_prompt)

    def _complete_instructions(self, system_prompt: str, user_prompt: str) -> str:
        if "mimic the behavior" in system_prompt:
            pool = INSTRUCTION_POOLS["mimic"]
        elif "descriptions of a scene" in system_prompt:
            pool = INSTRUCTION_POOLS["scene"]
        elif "direct movement instructions" in system_prompt:
            pool = INSTRUCTION_POOLS["direct"]
        else:
            raise ProviderError("fixture provider: unrecognized instruction prompt")
        m = re.search(r"Generate (\d+) instructions", user_prompt)
        if not m:
            raise ProviderError("fixture provider: missing instruction count")
        n = int(m.group(1))
        avoid: set[str] = set()
        am = re.search(r"Avoid: (\[.*\])", user_prompt, re.DOTALL)
        if am:
            avoid = {" ".join(s.casefold().split()) for s in json.loads(am.group(1))}
        fresh = [s for s in pool
                 if " ".join(s.casefold().split()) not in avoid][:n]
        return json.dumps(fresh, ensure_ascii=False)

    def _complete_skills(self, system_prompt: str, user_prompt: str) -> str:
        with_reasoning = '"reasoning"' in system_prompt
        start = user_prompt.find("[")
        if start < 0:
            raise ProviderError("fixture provider: no instruction array in prompt")
        instructions = json.loads(user_prompt[start:])
        items = [synthesize_skill(ins, with_reasoning) for ins in instructions]
        return json.dumps(items, ensure_ascii=False)


class OpenAiChatProvider(LlmProvider):
    """Adapter for OpenAI-compatible chat completion endpoints.

    Configured from arguments or the SKILLGROUND_PROVIDER_* environment
    variables; network failures surface as retryable ProviderError.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout_s: float = 60.0,
    ):
        super().__init__()
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT)
        self.api_key = api_key or os.environ.get(ENV_API_KEY)
        self.model = model or os.environ.get(ENV_MODEL)
        self.timeout_s = timeout_s
        missing = [
            name
            for name, val in (
                (ENV_ENDPOINT, self.endpoint),
                (ENV_API_KEY, self.api_key),
                (ENV_MODEL, self.model),
            )
            if not val
        ]
        if missing:
            raise ProviderConfigError(
                "missing provider configuration: " + ", ".join(missing)
            )

    def _complete(self, system_prompt: str, user_prompt: str) -> str:
        body = json.dumps(
            {
                "model": self.model,
                "messages": [
                    {"role": "system", "content": system_prompt},
                    {"role": "user", "content": user_prompt},
                ],
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint.rstrip("/") + "/chat/completions",
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise ProviderError(f"provider call failed: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected provider payload: {payload!r}") from exc
