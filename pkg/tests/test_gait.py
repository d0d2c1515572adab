import io
import math
import random

import numpy as np
import pytest

from skillground.descriptors import MotionDescriptor, cyclic_distance
from skillground.gait import (
    ComplianceConfig,
    contact_reward,
    desired_contact,
    encode,
    gait_state_at,
    phase,
    rollout_schedule,
    tracking_error,
    write_rollout_csv,
    ROLLOUT_CSV_COLUMNS,
)

TROT = MotionDescriptor(offsets=(0.0, 0.5, 0.5, 0.0), period_s=0.4, vel_limit=1.2)
PRONK = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 0.0), period_s=0.4, vel_limit=1.2)


class TestPhase:
    def test_zero(self):
        assert phase(0.0, 0.4, 0.0) == 0.0

    def test_half_cycle(self):
        assert phase(0.2, 0.4, 0.0) == pytest.approx(0.5)

    def test_offset_wraps(self):
        assert phase(0.2, 0.4, 0.5) == pytest.approx(0.0)

    def test_nonpositive_period_rejected(self):
        with pytest.raises(ValueError, match="period_s"):
            phase(1.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="period_s"):
            phase(1.0, -0.4, 0.0)

    def test_periodicity_over_long_horizon(self):
        rng = random.Random(5)
        for _ in range(200):
            T = rng.uniform(0.1, 1.0)
            offset = rng.random()
            t = rng.uniform(0.0, 1e4) * T
            assert (
                cyclic_distance(phase(t + T, T, offset), phase(t, T, offset)) < 1e-9
            )


class TestEncode:
    def test_zero_phase_pair(self):
        vec = encode([0.0])
        assert vec == pytest.approx([0.0, 1.0])

    def test_quarter_turn_pair(self):
        vec = encode([0.25])
        assert vec == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_unit_norm_per_foot(self):
        rng = random.Random(2)
        phases = [rng.random() for _ in range(4)]
        vec = encode(phases)
        assert vec.shape == (8,)
        for i in range(4):
            assert math.hypot(vec[2 * i], vec[2 * i + 1]) == pytest.approx(1.0)

    def test_injective_on_grid(self):
        phases = np.linspace(0.0, 1.0, 256, endpoint=False)
        pairs = {tuple(np.round(encode([p]), 12)) for p in phases}
        assert len(pairs) == 256


class TestDesiredContact:
    def test_cycle_start_is_stance(self):
        assert desired_contact(0.0, 0.5) is True

    def test_boundary_exits_stance(self):
        assert desired_contact(0.5, 0.5) is False

    def test_just_inside_stance(self):
        assert desired_contact(0.49, 0.5) is True


class TestTrackingError:
    def test_all_matching_is_zero(self):
        phases = (0.1, 0.6, 0.7, 0.2)
        actual = tuple(desired_contact(p, 0.5) for p in phases)
        assert tracking_error(phases, actual) == 0.0

    def test_mismatch_inside_compliant_band(self):
        # phi=0.10 sits 0.10 from touchdown; with delta=0.5 the free band
        # half-width is 0.125, so no penalty
        phases = (0.10, 0.6, 0.7, 0.2)
        actual = (False, False, False, True)
        assert tracking_error(phases, actual) == 0.0

    def test_mismatch_outside_band_pays_distance(self):
        phases = (0.25, 0.6, 0.7, 0.2)
        actual = (False, False, False, True)
        assert tracking_error(phases, actual) == pytest.approx(0.125)

    def test_errors_sum_over_feet(self):
        phases = (0.25, 0.75, 0.7, 0.2)
        actual = (False, True, False, True)
        assert tracking_error(phases, actual) == pytest.approx(0.25)

    @pytest.mark.parametrize("delta", [0.0, 0.25, 0.5, 0.75])
    def test_compliant_fraction_equals_delta(self, delta):
        cfg = ComplianceConfig(delta=delta)
        n = 10_000
        free = 0
        for i in range(n):
            phi = (i + 0.5) / n
            actual = (not desired_contact(phi, cfg.stance_fraction),)
            if tracking_error((phi,), actual, cfg) == 0.0:
                free += 1
        assert free / n == pytest.approx(delta, abs=0.01)

    def test_zero_delta_is_strict(self):
        cfg = ComplianceConfig(delta=0.0)
        rng = random.Random(17)
        for _ in range(500):
            phi = rng.random()
            actual = (not desired_contact(phi, cfg.stance_fraction),)
            assert tracking_error((phi,), actual, cfg) > 0.0


class TestContactReward:
    def test_zero_error_is_one(self):
        assert contact_reward(0.0, 0.25) == 1.0

    def test_quarter_cycle_error_is_inverse_e(self):
        assert contact_reward(0.25, 0.25) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_strictly_decreasing(self):
        grid = np.linspace(0.0, 2.0, 1000)
        rewards = [contact_reward(x, 0.25) for x in grid]
        assert all(a > b for a, b in zip(rewards, rewards[1:]))

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            contact_reward(0.1, 0.0)

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError, match="phi_error"):
            contact_reward(-0.1, 0.25)


class TestRollout:
    def test_trot_diagonal_pairs(self):
        states = rollout_schedule(TROT, duration=2.0, dt=0.01)
        for s in states:
            fl, fr, rl, rr = s.desired_contacts
            assert fl == rr and fr == rl
            assert fl != fr  # diagonal pairs are anti-phase at 50% duty

    def test_pronk_all_feet_identical(self):
        states = rollout_schedule(PRONK, duration=2.0, dt=0.01)
        for s in states:
            assert len(set(s.actual_contacts)) == 1

    def test_ideal_rollout_has_unit_reward(self):
        states = rollout_schedule(TROT, duration=1.0, dt=0.02)
        assert all(s.reward == 1.0 for s in states)
        assert all(s.phi_error == 0.0 for s in states)

    def test_mismatch_mask_injects_errors(self):
        n = int(1.0 / 0.02) + 1
        flips = np.zeros((n, 4), dtype=bool)
        flips[10, 0] = True
        states = rollout_schedule(TROT, duration=1.0, dt=0.02, contact_flips=flips)
        flipped = states[10]
        assert flipped.actual_contacts[0] != flipped.desired_contacts[0]
        assert states[9].reward == 1.0

    def test_invalid_descriptor_rejected(self):
        bad = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 0.0), period_s=-1.0, vel_limit=1.0)
        with pytest.raises(Exception, match="period_s"):
            rollout_schedule(bad, duration=1.0, dt=0.1)

    def test_bad_sampling_args_rejected(self):
        with pytest.raises(ValueError, match="dt"):
            rollout_schedule(TROT, duration=1.0, dt=0.0)
        with pytest.raises(ValueError, match="duration"):
            rollout_schedule(TROT, duration=0.05, dt=0.1)

    def test_csv_export_columns(self):
        states = rollout_schedule(TROT, duration=0.2, dt=0.1)
        buf = io.StringIO()
        write_rollout_csv(states, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].split(",") == ROLLOUT_CSV_COLUMNS
        assert len(lines) == 1 + len(states)

    def test_state_invariants(self):
        cfg = ComplianceConfig()
        state = gait_state_at(TROT, 0.13, cfg, contact_flips=(True, False, False, False))
        assert state.reward == pytest.approx(math.exp(-state.phi_error / cfg.sigma))
        for phi, off in zip(state.phases, TROT.offsets):
            assert phi == pytest.approx(phase(0.13, TROT.period_s, off))


class TestComplianceConfig:
    def test_defaults(self):
        cfg = ComplianceConfig()
        assert (cfg.delta, cfg.sigma, cfg.stance_fraction) == (0.5, 0.25, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            ComplianceConfig(delta=1.0)
        with pytest.raises(ValueError):
            ComplianceConfig(sigma=0.0)
        with pytest.raises(ValueError):
            ComplianceConfig(stance_fraction=1.0)
