"""Velocity-limit governor: retrieval-advised clamping of planner commands.

The governor periodically grounds a robot-centric observation in the skill
database and adopts the retrieved descriptor's velocity limit; between
inferences the limit is held, which is what suppresses jitter from frequent
limit changes. The clamp itself is on the command's speed with heading
preserved, applied instantaneously (no deceleration shaping), and the
control path never fails: any retrieval problem keeps the previous limit in
force.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .backends import BackendError, EncoderBackend
from .db import SkillDatabase
from .descriptors import validate
from .retrieval import (
    DEFAULT_K,
    EmbeddingIndex,
    Method,
    Query,
    RetrievalError,
    RetrievalResult,
    retrieve,
)

log = logging.getLogger(__name__)

DEFAULT_INFERENCE_PERIOD_S = 5.0


@dataclass(frozen=True)
class GovernorConfig:
    inference_period_s: float = DEFAULT_INFERENCE_PERIOD_S
    k: int = DEFAULT_K
    method: Method = Method.MIXED
    fallback_vel_limit: float = 0.5

    def __post_init__(self):
        if self.inference_period_s <= 0.0:
            raise ValueError(
                f"inference_period_s must be > 0, got {self.inference_period_s}"
            )
        if self.fallback_vel_limit <= 0.0:
            raise ValueError(
                f"fallback_vel_limit must be > 0, got {self.fallback_vel_limit}"
            )


@dataclass(frozen=True)
class GovernorState:
    active_vel_limit: float
    last_inference_t: float | None = None
    last_result: RetrievalResult | None = None


def clamp_command(cmd_xy: tuple[float, float], vel_limit: float) -> tuple[float, float]:
    """Scale the command down to the limit, preserving direction."""
    speed = math.hypot(cmd_xy[0], cmd_xy[1])
    if speed <= vel_limit or speed == 0.0:
        return cmd_xy
    scale = vel_limit / speed
    return (cmd_xy[0] * scale, cmd_xy[1] * scale)


class Governor:
    """Stateless-step governor over a database/backend/index triple."""

    def __init__(
        self,
        db: SkillDatabase,
        index: EmbeddingIndex,
        backend: EncoderBackend,
        cfg: GovernorConfig = GovernorConfig(),
    ):
        self.db = db
        self.index = index
        self.backend = backend
        self.cfg = cfg

    def initial_state(self) -> GovernorState:
        return GovernorState(active_vel_limit=self.cfg.fallback_vel_limit)

    def step(
        self,
        state: GovernorState,
        t: float,
        observation: Query | None,
        cmd_xy: tuple[float, float],
    ) -> tuple[tuple[float, float], GovernorState]:
        """Clamp one command; run inference when the period gate is open.

        Observations arriving before the period has elapsed are ignored. A
        failed retrieval logs a warning and keeps the previous limit; the
        clamp path never raises.
        """
        gate_open = (
            state.last_inference_t is None
            or t - state.last_inference_t >= self.cfg.inference_period_s
        )
        if observation is not None and gate_open:
            state = self._infer(state, t, observation)
        return clamp_command(cmd_xy, state.active_vel_limit), state

    def _infer(self, state: GovernorState, t: float, observation: Query) -> GovernorState:
        try:
            result = retrieve(
                observation,
                self.db,
                self.index,
                self.backend,
                k=self.cfg.k,
                method=self.cfg.method,
            )
            record = self.db.get(result.chosen_id)
            violations = validate(record.descriptor)
            if violations:
                raise RetrievalError(
                    f"retrieved descriptor invalid: {'; '.join(violations)}"
                )
        except (RetrievalError, BackendError, KeyError) as exc:
            log.warning("velocity-limit inference failed at t=%.3f: %s", t, exc)
            return replace(state, last_inference_t=t)
        return GovernorState(
            active_vel_limit=record.descriptor.vel_limit,
            last_inference_t=t,
            last_result=result,
        )


def min_clearance(trajectory: np.ndarray, obstacles: np.ndarray) -> float:
    """Minimum Euclidean distance between trajectory samples and obstacles."""
    trajectory = np.atleast_2d(np.asarray(trajectory, dtype=float))
    obstacles = np.atleast_2d(np.asarray(obstacles, dtype=float))
    if trajectory.size == 0 or obstacles.size == 0:
        raise ValueError("trajectory and obstacles must be nonempty")
    if trajectory.shape[1] != 2 or obstacles.shape[1] != 2:
        raise ValueError("points must be 2D")
    diffs = trajectory[:, None, :] - obstacles[None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=2)).min())
