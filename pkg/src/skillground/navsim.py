"""Desk-scale 2D corridor simulation for clearance comparisons.

Deliberately minimal: a point robot follows waypoints with a pure-pursuit
heading controller whose turn rate is capped, so the turning radius grows
with speed. That is the one dynamic that matters here: a governor that
slows the robot down in narrow passages tightens its cornering and buys
distance from obstacles. Scenario files declare the geometry and a schedule
of robot-centric observations fed to the governor.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from .governor import Governor, GovernorState, min_clearance
from .protocol import ProtocolError, validate_message
from .retrieval import Query, QueryKind

RUN_LOG_COLUMNS = ("t", "cmd", "clamped", "active_limit", "clearance")


@dataclass
class Observation:
    t: float
    query: Query


@dataclass
class Scenario:
    start: tuple[float, float]
    waypoints: list[tuple[float, float]]
    obstacles: list[tuple[float, float]]
    duration_s: float
    dt: float
    cruise_speed: float
    start_heading: float = 0.0
    turn_rate: float = 1.6  # rad/s cap; turning radius = speed / turn_rate
    waypoint_radius: float = 0.4
    observations: list[Observation] = field(default_factory=list)


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"{path}: invalid JSON ({exc})") from exc
    validate_message("scenario", doc)
    observations = [
        Observation(
            t=float(o["t"]),
            query=Query(QueryKind(o["query"]["kind"]), o["query"]["payload"]),
        )
        for o in doc.get("observations", [])
    ]
    observations.sort(key=lambda o: o.t)
    return Scenario(
        start=tuple(doc["start"]),
        waypoints=[tuple(w) for w in doc["waypoints"]],
        obstacles=[tuple(o) for o in doc["obstacles"]],
        duration_s=float(doc["duration_s"]),
        dt=float(doc["dt"]),
        cruise_speed=float(doc["cruise_speed"]),
        start_heading=float(doc.get("start_heading", 0.0)),
        turn_rate=float(doc.get("turn_rate", 1.6)),
        waypoint_radius=float(doc.get("waypoint_radius", 0.4)),
        observations=observations,
    )


@dataclass
class LogRow:
    t: float
    cmd_speed: float
    clamped_speed: float
    active_limit: float
    clearance: float


@dataclass
class SimResult:
    trajectory: np.ndarray
    rows: list[LogRow]
    min_clearance: float
    final_governor_state: GovernorState | None


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def simulate(scenario: Scenario, governor: Governor | None = None) -> SimResult:
    """Run the waypoint follower, optionally under governor clamping."""
    x, y = scenario.start
    heading = scenario.start_heading
    state = governor.initial_state() if governor is not None else None
    obstacles = np.asarray(scenario.obstacles, dtype=float)
    pending = list(scenario.observations)
    waypoint_i = 0
    rows: list[LogRow] = []
    points = [(x, y)]
    n_steps = int(round(scenario.duration_s / scenario.dt))
    for step in range(n_steps):
        t = step * scenario.dt
        while waypoint_i < len(scenario.waypoints) - 1 and (
            math.hypot(
                scenario.waypoints[waypoint_i][0] - x,
                scenario.waypoints[waypoint_i][1] - y,
            )
            < scenario.waypoint_radius
        ):
            waypoint_i += 1
        tx, ty = scenario.waypoints[waypoint_i]
        desired_heading = math.atan2(ty - y, tx - x)
        at_goal = (
            waypoint_i == len(scenario.waypoints) - 1
            and math.hypot(tx - x, ty - y) < scenario.waypoint_radius
        )
        cmd_speed = 0.0 if at_goal else scenario.cruise_speed
        cmd = (cmd_speed * math.cos(desired_heading),
               cmd_speed * math.sin(desired_heading))

        observation = None
        if pending and pending[0].t <= t:
            observation = pending.pop(0).query
        if governor is not None:
            clamped, state = governor.step(state, t, observation, cmd)
            active_limit = state.active_vel_limit
        else:
            clamped = cmd
            active_limit = math.inf
        speed = math.hypot(*clamped)

        # turn toward the target at a bounded rate, then advance along the
        # actual heading: the faster the robot, the wider its corners
        err = _wrap_angle(desired_heading - heading)
        max_turn = scenario.turn_rate * scenario.dt
        heading = _wrap_angle(heading + max(-max_turn, min(max_turn, err)))
        x += speed * math.cos(heading) * scenario.dt
        y += speed * math.sin(heading) * scenario.dt
        points.append((x, y))

        clearance = (
            min_clearance(np.array([[x, y]]), obstacles)
            if obstacles.size
            else math.inf
        )
        rows.append(
            LogRow(
                t=t,
                cmd_speed=cmd_speed,
                clamped_speed=speed,
                active_limit=active_limit,
                clearance=clearance,
            )
        )
    trajectory = np.asarray(points)
    overall = (
        min_clearance(trajectory, obstacles) if obstacles.size else math.inf
    )
    return SimResult(
        trajectory=trajectory,
        rows=rows,
        min_clearance=overall,
        final_governor_state=state,
    )


def write_run_log(result: SimResult, fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(RUN_LOG_COLUMNS)
    for row in result.rows:
        writer.writerow(
            [
                f"{row.t:.3f}",
                f"{row.cmd_speed:.4f}",
                f"{row.clamped_speed:.4f}",
                "inf" if math.isinf(row.active_limit) else f"{row.active_limit:.4f}",
                "inf" if math.isinf(row.clearance) else f"{row.clearance:.4f}",
            ]
        )
