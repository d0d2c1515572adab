"""Instruction-grounded locomotion skills for legged robots.

Distills an LLM-generated (instruction -> motion descriptor) database,
retrieves the best-matching descriptor for text or image queries through
two-stage mixed-precision retrieval, and provides the gait-phase and
velocity-limit machinery needed to execute what was retrieved.
"""

from .db import AnnotationSet, Category, SkillDatabase, SkillRecord
from .descriptors import (
    BipedDescriptor,
    GaitClass,
    MotionDescriptor,
    canonical_offsets,
    classify_gait,
    remap_to_biped,
    validate,
)
from .gait import ComplianceConfig, GaitState, contact_reward, phase, rollout_schedule
from .retrieval import Method, Query, QueryKind, RetrievalResult, build_index, retrieve

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "BipedDescriptor",
    "Category",
    "ComplianceConfig",
    "GaitClass",
    "GaitState",
    "Method",
    "MotionDescriptor",
    "Query",
    "QueryKind",
    "RetrievalResult",
    "SkillDatabase",
    "SkillRecord",
    "build_index",
    "canonical_offsets",
    "classify_gait",
    "contact_reward",
    "phase",
    "remap_to_biped",
    "retrieve",
    "rollout_schedule",
    "validate",
    "__version__",
]
