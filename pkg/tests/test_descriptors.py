import random

import pytest

from skillground.descriptors import (
    CANONICAL_GAITS,
    BipedDescriptor,
    DescriptorError,
    GaitClass,
    MotionDescriptor,
    canonical_offsets,
    classify_gait,
    cyclic_distance,
    remap_to_biped,
    validate,
)

TROT = MotionDescriptor(offsets=(0.0, 0.5, 0.5, 0.0), period_s=0.4, vel_limit=1.2)


def brute_force_classify(offsets, tol):
    """Independent oracle: min over rows of max per-foot cyclic distance."""
    norm = [(o - offsets[0]) % 1.0 for o in offsets]
    for gait, row in CANONICAL_GAITS.items():
        if max(cyclic_distance(a, b) for a, b in zip(norm, row)) <= tol:
            return gait
    return GaitClass.OTHERS


class TestValidate:
    def test_trot_reference_descriptor_is_valid(self):
        assert validate(TROT) == []

    def test_offset_at_one_is_out_of_range(self):
        bad = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 1.0), period_s=0.4, vel_limit=1.2)
        violations = validate(bad)
        assert len(violations) == 1
        assert "RR=1.0" in violations[0]

    def test_negative_period_is_violation(self):
        bad = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 0.0), period_s=-0.1, vel_limit=1.2)
        assert any("period_s" in v for v in validate(bad))

    def test_all_violations_reported(self):
        bad = MotionDescriptor(offsets=(2.0, -0.5, 0.0, 0.0), period_s=0.0, vel_limit=9.0)
        assert len(validate(bad)) == 4

    def test_bounds_are_inclusive_at_top(self):
        edge = MotionDescriptor(offsets=(0.0,) * 4, period_s=2.0, vel_limit=5.0)
        assert validate(edge) == []


class TestCanonicalTable:
    def test_table_rows(self):
        assert canonical_offsets(GaitClass.PRONK) == (0.0, 0.0, 0.0, 0.0)
        assert canonical_offsets(GaitClass.TROT) == (0.0, 0.5, 0.5, 0.0)
        assert canonical_offsets(GaitClass.PACE) == (0.0, 0.5, 0.0, 0.5)
        assert canonical_offsets(GaitClass.BOUND) == (0.0, 0.0, 0.5, 0.5)
        assert canonical_offsets(GaitClass.ROTARY_GALLOP) == (0.0, 0.2, 0.7, 0.5)

    def test_others_has_no_row(self):
        with pytest.raises(ValueError, match="no canonical offsets"):
            canonical_offsets(GaitClass.OTHERS)


class TestClassify:
    def test_exact_trot(self):
        assert classify_gait((0.0, 0.5, 0.5, 0.0), tol=0.05) == GaitClass.TROT

    def test_phase_shifted_trot(self):
        # (0.3, 0.8, 0.8, 0.3) is trot shifted by 0.3
        assert classify_gait((0.3, 0.8, 0.8, 0.3), tol=0.05) == GaitClass.TROT

    def test_unstructured_offsets_are_others(self):
        offsets = (0.1, 0.9, 0.4, 0.6)
        assert brute_force_classify(offsets, 0.05) == GaitClass.OTHERS
        assert classify_gait(offsets, tol=0.05) == GaitClass.OTHERS

    def test_round_trip_all_gaits(self):
        for gait in GaitClass:
            if gait == GaitClass.OTHERS:
                continue
            assert classify_gait(canonical_offsets(gait), tol=0.05) == gait

    def test_global_phase_shift_invariance(self):
        rng = random.Random(7)
        for _ in range(200):
            gait = rng.choice(list(CANONICAL_GAITS))
            shift = rng.random()
            shifted = tuple((o + shift) % 1.0 for o in canonical_offsets(gait))
            assert classify_gait(shifted, tol=0.05) == gait

    def test_small_perturbation_keeps_class(self):
        rng = random.Random(11)
        for _ in range(200):
            gait = rng.choice(list(CANONICAL_GAITS))
            row = canonical_offsets(gait)
            perturbed = tuple((o + rng.uniform(-0.015, 0.015)) % 1.0 for o in row)
            assert classify_gait(perturbed, tol=0.05) == gait

    def test_agrees_with_brute_force_on_random_offsets(self):
        rng = random.Random(13)
        for _ in range(500):
            offsets = tuple(rng.random() for _ in range(4))
            assert classify_gait(offsets, tol=0.05) == brute_force_classify(
                offsets, 0.05
            )

    def test_bad_tol_rejected(self):
        with pytest.raises(ValueError, match="tol"):
            classify_gait((0.0, 0.5, 0.5, 0.0), tol=0.3)
        with pytest.raises(ValueError, match="tol"):
            classify_gait((0.0, 0.5, 0.5, 0.0), tol=0.0)

    def test_invalid_offsets_rejected(self):
        with pytest.raises(ValueError, match="offsets"):
            classify_gait((0.0, 0.5, 1.2, 0.0))


class TestBipedRemap:
    def test_trot_takes_front_offsets(self):
        assert remap_to_biped(TROT) == BipedDescriptor(
            offsets=(0.0, 0.5), period_s=0.4, vel_limit=1.2
        )

    def test_pronk_identity_offsets(self):
        pronk = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 0.0), period_s=0.5, vel_limit=1.0)
        assert remap_to_biped(pronk).offsets == (0.0, 0.0)

    def test_gallop_front_pair(self):
        gallop = MotionDescriptor(
            offsets=(0.0, 0.2, 0.7, 0.5), period_s=0.3, vel_limit=2.0
        )
        assert remap_to_biped(gallop).offsets == (0.0, 0.2)

    def test_period_and_velocity_carried_exactly(self):
        rng = random.Random(3)
        for _ in range(100):
            d = MotionDescriptor(
                offsets=tuple(rng.random() for _ in range(4)),
                period_s=rng.uniform(0.01, 2.0),
                vel_limit=rng.uniform(0.01, 5.0),
            )
            b = remap_to_biped(d)
            assert b.period_s == d.period_s
            assert b.vel_limit == d.vel_limit

    def test_invalid_descriptor_rejected(self):
        bad = MotionDescriptor(offsets=(0.0, 0.0, 0.0, 1.5), period_s=0.4, vel_limit=1.0)
        with pytest.raises(DescriptorError):
            remap_to_biped(bad)


class TestJsonShape:
    def test_round_trip(self):
        assert MotionDescriptor.from_dict(TROT.to_dict()) == TROT

    def test_field_names_fixed(self):
        assert set(TROT.to_dict()) == {"offsets", "period_s", "vel_limit"}
