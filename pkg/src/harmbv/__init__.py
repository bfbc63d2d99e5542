"""Boundary values of harmonic functions for quasianalytic functionals: weight calculus,
almost-harmonic extension, Poisson transform, boundary-value pairing and support estimation."""

from .boundary import (BvResult, HarmonicPolynomial, bv_pair, bv_pair_many, green_identity_check,
                       reflection_zero_test, roundtrip, support_estimate)
from .errors import DomainError, PreconditionError, TruncationError
from .extension import ExtensionParams, compactify, extend, weighted_defect_norm
from .harmonic import Functional, poisson_transform, transform_field
from .testbed import TestFunction, class_norm_certificate
from .weights import WeightFunction, WeightSequence, assoc_omega, weight_function

__all__ = [
    "BvResult", "HarmonicPolynomial", "bv_pair", "bv_pair_many", "green_identity_check",
    "reflection_zero_test", "roundtrip", "support_estimate", "DomainError", "PreconditionError",
    "TruncationError", "ExtensionParams", "compactify", "extend", "weighted_defect_norm", "Functional",
    "poisson_transform", "transform_field", "TestFunction", "class_norm_certificate", "WeightFunction",
    "WeightSequence", "assoc_omega", "weight_function",
]
