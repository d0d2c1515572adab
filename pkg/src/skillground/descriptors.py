"""Motion descriptors, the canonical gait table, and gait classification.

A motion descriptor is the unit of executable skill: four per-foot phase
offsets (FL, FR, RL, RR, as fractions of the gait cycle), a gait cycle
period in seconds, and a velocity limit in m/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

FOOT_ORDER = ("FL", "FR", "RL", "RR")

# Engine-level sanity bounds. Wide enough to bracket anything a sane
# generator emits; configurable at the validation call site.
MAX_PERIOD_S = 2.0
MAX_VEL_LIMIT = 5.0

DEFAULT_CLASSIFY_TOL = 0.05


class GaitClass(Enum):
    PRONK = "pronk"
    TROT = "trot"
    PACE = "pace"
    BOUND = "bound"
    ROTARY_GALLOP = "rotary_gallop"
    OTHERS = "others"


# Canonical per-foot phase offsets (FL, FR, RL, RR) for the five standard
# gait styles. Table order doubles as the tie-break order in classification.
CANONICAL_GAITS: dict[GaitClass, tuple[float, float, float, float]] = {
    GaitClass.PRONK: (0.0, 0.0, 0.0, 0.0),
    GaitClass.TROT: (0.0, 0.5, 0.5, 0.0),
    GaitClass.PACE: (0.0, 0.5, 0.0, 0.5),
    GaitClass.BOUND: (0.0, 0.0, 0.5, 0.5),
    GaitClass.ROTARY_GALLOP: (0.0, 0.2, 0.7, 0.5),
}


class DescriptorError(ValueError):
    """A descriptor failed validation where a valid one is required."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class MotionDescriptor:
    """Executable skill unit: gait offsets, cycle period, velocity limit."""

    offsets: tuple[float, float, float, float]
    period_s: float
    vel_limit: float

    def to_dict(self) -> dict:
        return {
            "offsets": [float(o) for o in self.offsets],
            "period_s": float(self.period_s),
            "vel_limit": float(self.vel_limit),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionDescriptor":
        offsets = d["offsets"]
        if not isinstance(offsets, (list, tuple)) or len(offsets) != 4:
            raise KeyError("offsets")
        return cls(
            offsets=tuple(float(o) for o in offsets),
            period_s=float(d["period_s"]),
            vel_limit=float(d["vel_limit"]),
        )


@dataclass(frozen=True)
class BipedDescriptor:
    """Two-legged remap of a quadruped descriptor (left, right offsets)."""

    offsets: tuple[float, float]
    period_s: float
    vel_limit: float


def validate(
    d: MotionDescriptor,
    max_period_s: float = MAX_PERIOD_S,
    max_vel_limit: float = MAX_VEL_LIMIT,
) -> list[str]:
    """Return every violated invariant; an empty list means the descriptor is valid."""
    violations = []
    if len(d.offsets) != 4:
        violations.append(f"expected 4 offsets, got {len(d.offsets)}")
    for name, off in zip(FOOT_ORDER, d.offsets):
        if not (math.isfinite(off) and 0.0 <= off < 1.0):
            violations.append(f"offset {name}={off} not in [0, 1)")
    if not (math.isfinite(d.period_s) and 0.0 < d.period_s <= max_period_s):
        violations.append(f"period_s={d.period_s} not in (0, {max_period_s}]")
    if not (math.isfinite(d.vel_limit) and 0.0 < d.vel_limit <= max_vel_limit):
        violations.append(f"vel_limit={d.vel_limit} not in (0, {max_vel_limit}]")
    return violations


def require_valid(d: MotionDescriptor) -> MotionDescriptor:
    """Raise DescriptorError unless ``d`` passes validate()."""
    violations = validate(d)
    if violations:
        raise DescriptorError(violations)
    return d


def cyclic_distance(a: float, b: float) -> float:
    """Distance between two phases on the unit circle (phases wrap at 1)."""
    diff = abs(a - b) % 1.0
    return min(diff, 1.0 - diff)


def canonical_offsets(gait: GaitClass) -> tuple[float, float, float, float]:
    """Return the canonical offset row for one of the five standard gaits."""
    if gait == GaitClass.OTHERS:
        raise ValueError("no canonical offsets for the catch-all gait class")
    return CANONICAL_GAITS[gait]


def classify_gait(
    offsets: tuple[float, float, float, float],
    tol: float = DEFAULT_CLASSIFY_TOL,
) -> GaitClass:
    """Classify an offset quadruple against the canonical gait table.

    Offsets are relative timings, so the quadruple is first normalized by
    subtracting the FL offset (mod 1); the canonical table has FL = 0. A row
    matches when every foot is within ``tol`` cyclic distance; ties go to
    table order.
    """
    if len(offsets) != 4 or any(not (0.0 <= o < 1.0) for o in offsets):
        raise ValueError(f"offsets must be 4 values in [0, 1), got {offsets!r}")
    if not (0.0 < tol < 0.25):
        raise ValueError(f"tol must be in (0, 0.25), got {tol}")
    normalized = [(o - offsets[0]) % 1.0 for o in offsets]
    for gait, row in CANONICAL_GAITS.items():
        if max(cyclic_distance(n, r) for n, r in zip(normalized, row)) <= tol:
            return gait
    return GaitClass.OTHERS


def remap_to_biped(d: MotionDescriptor) -> BipedDescriptor:
    """Project a quadruped descriptor onto a biped using the two front offsets."""
    require_valid(d)
    return BipedDescriptor(
        offsets=(d.offsets[0], d.offsets[1]),
        period_s=d.period_s,
        vel_limit=d.vel_limit,
    )
