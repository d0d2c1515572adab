"""Gait phase oscillator, contact schedule, and compliant contact tracking.

Phases live in [0, 1) everywhere. A foot is in stance for the first
``stance_fraction`` of its cycle, so each cycle has two contact transitions:
touchdown at phase 0 and liftoff at ``stance_fraction``.

The tracking error model is compliant: a mismatched contact only counts
against the policy by how far the foot's phase sits from the nearest
transition, minus a free band of half-width delta/4 around each transition.
With two transitions per cycle the unpenalized fraction of the cycle is
exactly delta. The error is summed over the four feet, in cycle-fraction
units, before the exponential reward kernel is applied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .descriptors import MotionDescriptor, cyclic_distance, require_valid

DEFAULT_DELTA = 0.5
DEFAULT_SIGMA = 0.25
DEFAULT_STANCE_FRACTION = 0.5


@dataclass(frozen=True)
class ComplianceConfig:
    """Compliance threshold, reward smoothing factor, and stance duty cycle."""

    delta: float = DEFAULT_DELTA
    sigma: float = DEFAULT_SIGMA
    stance_fraction: float = DEFAULT_STANCE_FRACTION

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 < self.stance_fraction < 1.0:
            raise ValueError(
                f"stance_fraction must be in (0, 1), got {self.stance_fraction}"
            )


@dataclass(frozen=True)
class GaitState:
    """Per-foot gait state at one time instant."""

    t: float
    phases: tuple[float, float, float, float]
    desired_contacts: tuple[bool, bool, bool, bool]
    actual_contacts: tuple[bool, bool, bool, bool]
    phi_error: float
    reward: float


def phase(t: float, period_s: float, offset: float) -> float:
    """Foot phase at time ``t``: frac(t / T + offset), in [0, 1)."""
    if period_s <= 0.0:
        raise ValueError(f"period_s must be > 0, got {period_s}")
    return (t / period_s + offset) % 1.0


def encode(phases: Sequence[float]) -> np.ndarray:
    """Continuous periodic embedding: (sin 2*pi*phi, cos 2*pi*phi) per foot.

    Returns an 8-vector in FL, FR, RL, RR order, suitable for concatenation
    onto a policy observation.
    """
    out = np.empty(2 * len(phases))
    for i, p in enumerate(phases):
        angle = 2.0 * math.pi * p
        out[2 * i] = math.sin(angle)
        out[2 * i + 1] = math.cos(angle)
    return out


def desired_contact(phi: float, stance_fraction: float = DEFAULT_STANCE_FRACTION) -> bool:
    """True (stance) during the first ``stance_fraction`` of the cycle."""
    return phi < stance_fraction


def tracking_error(
    phases: Sequence[float],
    actual_contacts: Sequence[bool],
    cfg: ComplianceConfig = ComplianceConfig(),
) -> float:
    """Compliant contact tracking error, summed over feet.

    A foot whose actual contact matches the schedule contributes zero. A
    mismatched foot contributes max(0, d_boundary - delta/4), where
    d_boundary is the cyclic distance from its phase to the nearest contact
    transition (phase 0 or ``stance_fraction``).
    """
    quarter = cfg.delta / 4.0
    total = 0.0
    for phi, actual in zip(phases, actual_contacts):
        if bool(actual) == desired_contact(phi, cfg.stance_fraction):
            continue
        d_boundary = min(
            cyclic_distance(phi, 0.0), cyclic_distance(phi, cfg.stance_fraction)
        )
        total += max(0.0, d_boundary - quarter)
    return total


def contact_reward(phi_error: float, sigma: float = DEFAULT_SIGMA) -> float:
    """Exponential kernel over the tracking error: exp(-phi_error / sigma)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if phi_error < 0.0:
        raise ValueError(f"phi_error must be >= 0, got {phi_error}")
    return math.exp(-phi_error / sigma)


def gait_state_at(
    d: MotionDescriptor,
    t: float,
    cfg: ComplianceConfig = ComplianceConfig(),
    contact_flips: Sequence[bool] | None = None,
) -> GaitState:
    """Gait state of a descriptor at time ``t``.

    ``contact_flips`` inverts the actual contact of the flagged feet,
    modelling tracking mismatches; by default tracking is ideal.
    """
    phases = tuple(phase(t, d.period_s, off) for off in d.offsets)
    desired = tuple(desired_contact(p, cfg.stance_fraction) for p in phases)
    if contact_flips is None:
        actual = desired
    else:
        actual = tuple(des ^ bool(flip) for des, flip in zip(desired, contact_flips))
    err = tracking_error(phases, actual, cfg)
    return GaitState(
        t=t,
        phases=phases,
        desired_contacts=desired,
        actual_contacts=actual,
        phi_error=err,
        reward=contact_reward(err, cfg.sigma),
    )


def rollout_schedule(
    d: MotionDescriptor,
    duration: float,
    dt: float,
    cfg: ComplianceConfig = ComplianceConfig(),
    contact_flips: np.ndarray | None = None,
) -> list[GaitState]:
    """Time-sampled gait states over [0, duration] at step ``dt``.

    ``contact_flips`` is an optional (n_samples, 4) boolean mask that inverts
    the actual contact of individual feet at individual samples; without it
    the rollout is ideal and reward is 1 everywhere.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if duration < dt:
        raise ValueError(f"duration must be >= dt, got {duration} < {dt}")
    require_valid(d)
    n_samples = int(math.floor(duration / dt + 1e-9)) + 1
    if contact_flips is not None and contact_flips.shape != (n_samples, 4):
        raise ValueError(
            f"contact_flips shape {contact_flips.shape} != ({n_samples}, 4)"
        )
    states = []
    for i in range(n_samples):
        flips = contact_flips[i] if contact_flips is not None else None
        states.append(gait_state_at(d, i * dt, cfg, flips))
    return states


ROLLOUT_CSV_COLUMNS = (
    ["t"]
    + [f"phase_{f}" for f in ("FL", "FR", "RL", "RR")]
    + [f"des_{f}" for f in ("FL", "FR", "RL", "RR")]
    + [f"act_{f}" for f in ("FL", "FR", "RL", "RR")]
    + ["phi_error", "reward"]
)


def write_rollout_csv(states: Sequence[GaitState], fp: IO[str]) -> None:
    """Export a rollout as CSV (contacts as 0/1)."""
    writer = csv.writer(fp)
    writer.writerow(ROLLOUT_CSV_COLUMNS)
    for s in states:
        writer.writerow(
            [f"{s.t:.6f}"]
            + [f"{p:.6f}" for p in s.phases]
            + [int(c) for c in s.desired_contacts]
            + [int(c) for c in s.actual_contacts]
            + [f"{s.phi_error:.6f}", f"{s.reward:.6f}"]
        )
