"""Exact-arithmetic destackification of stacky fans."""

from .algorithms import (
    AggregateInvariant,
    AlgorithmError,
    BlowupSequence,
    BlowupStep,
    CertReport,
    EmptyType,
    FormalRaySum,
    NonSmoothLocus,
    NotASubfan,
    PostconditionError,
    RunLimits,
    StepLimitExceeded,
    algorithm_a,
    algorithm_b,
    certify,
    destackify,
    divisorialify,
    divisorialify_along,
    max_locus,
    recipe_fan,
    resolve_ray_sum,
    restrict_and_compare,
    restrict_steps,
    split_components,
)
from .conormal import (
    Component,
    ConormalData,
    DivisorialType,
    NotDivisorial,
    conormal_at,
    divisorial_index,
    divisorial_index_along,
    divisorial_type,
    dominates,
    independency_index,
    is_divisorial,
    relative_generic_order,
    toroidal_index,
)
from .fans import Ray, StackyFan, cone_key

__version__ = "0.1.0"

__all__ = [
    "AggregateInvariant",
    "AlgorithmError",
    "BlowupSequence",
    "BlowupStep",
    "CertReport",
    "Component",
    "ConormalData",
    "DivisorialType",
    "EmptyType",
    "FormalRaySum",
    "NonSmoothLocus",
    "NotASubfan",
    "NotDivisorial",
    "PostconditionError",
    "Ray",
    "RunLimits",
    "StackyFan",
    "StepLimitExceeded",
    "algorithm_a",
    "algorithm_b",
    "certify",
    "cone_key",
    "conormal_at",
    "destackify",
    "divisorial_index",
    "divisorial_index_along",
    "divisorial_type",
    "divisorialify",
    "divisorialify_along",
    "dominates",
    "independency_index",
    "is_divisorial",
    "max_locus",
    "recipe_fan",
    "relative_generic_order",
    "resolve_ray_sum",
    "restrict_and_compare",
    "restrict_steps",
    "split_components",
    "toroidal_index",
]
