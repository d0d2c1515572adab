import io
import json

import numpy as np
import pytest

from skillground.backends import PerfectOracleBackend
from skillground.governor import Governor, GovernorConfig
from skillground.navsim import (
    RUN_LOG_COLUMNS,
    load_scenario,
    simulate,
    write_run_log,
)
from skillground.protocol import ProtocolError
from skillground.retrieval import build_index


@pytest.fixture(scope="module")
def corridor(scenario_path):
    return load_scenario(scenario_path)


@pytest.fixture(scope="module")
def corridor_governor(fixture_db):
    backend = PerfectOracleBackend(fixture_db)
    index = build_index(fixture_db, backend)
    return Governor(
        fixture_db, index, backend, GovernorConfig(fallback_vel_limit=1.5)
    )


class TestScenarioLoading:
    def test_fixture_scenario_parses(self, corridor):
        assert corridor.cruise_speed == 1.5
        assert len(corridor.observations) == 2
        assert corridor.observations[0].t <= corridor.observations[1].t

    def test_malformed_scenario_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"start": [0, 0], "waypoints": []}))
        with pytest.raises(ProtocolError):
            load_scenario(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ProtocolError, match="invalid JSON"):
            load_scenario(path)


class TestSimulation:
    def test_governed_run_has_bigger_clearance(self, corridor, corridor_governor):
        with_gov = simulate(corridor, corridor_governor)
        without = simulate(corridor, None)
        assert with_gov.min_clearance >= without.min_clearance
        assert with_gov.min_clearance - without.min_clearance > 0.2

    def test_both_runs_reach_goal(self, corridor, corridor_governor):
        goal = np.array(corridor.waypoints[-1])
        for result in (simulate(corridor, corridor_governor), simulate(corridor, None)):
            assert np.linalg.norm(result.trajectory[-1] - goal) < corridor.waypoint_radius + 0.1

    def test_deterministic(self, corridor, fixture_db):
        def run():
            backend = PerfectOracleBackend(fixture_db)
            index = build_index(fixture_db, backend)
            gov = Governor(fixture_db, index, backend, GovernorConfig(fallback_vel_limit=1.5))
            return simulate(corridor, gov)

        a, b = run(), run()
        assert np.array_equal(a.trajectory, b.trajectory)
        assert a.min_clearance == b.min_clearance

    def test_clamped_speed_respects_limit(self, corridor, corridor_governor):
        result = simulate(corridor, corridor_governor)
        for row in result.rows:
            assert row.clamped_speed <= row.active_limit + 1e-12

    def test_limit_drops_after_narrow_observation(self, corridor, corridor_governor):
        result = simulate(corridor, corridor_governor)
        limits = [row.active_limit for row in result.rows]
        assert limits[0] == pytest.approx(2.2)  # wide-field retrieval at t=0
        assert limits[-1] == pytest.approx(0.5)  # narrow corridor limit

    def test_run_log_columns(self, corridor, corridor_governor):
        result = simulate(corridor, corridor_governor)
        buf = io.StringIO()
        write_run_log(result, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].split(",") == list(RUN_LOG_COLUMNS)
        assert len(lines) == 1 + len(result.rows)

    def test_ungoverned_log_has_inf_limit(self, corridor):
        result = simulate(corridor, None)
        buf = io.StringIO()
        write_run_log(result, buf)
        assert ",inf," in buf.getvalue().splitlines()[1]
