"""Singular matrix Bochner weights: construction, operators and verification."""

from .diffops import PolyDiffOp, RatDiffOp, build_bochner_operator, eigenvalue_sequence
from .errors import InvalidSpec, MBPError, NumericalError, SpecError
from .orthopoly import MonicSequence, monic_sequence
from .polyops import MatrixPolynomial, RationalFunction
from .verify import SuiteOptions, VerificationReport, run_suite
from .weights import Family, MatrixWeightSpec, MomentTable, ScalarWeightSpec, matrix_moments, validate_spec

__all__ = [
    "Family",
    "InvalidSpec",
    "MBPError",
    "MatrixPolynomial",
    "MatrixWeightSpec",
    "MomentTable",
    "MonicSequence",
    "NumericalError",
    "PolyDiffOp",
    "RatDiffOp",
    "RationalFunction",
    "ScalarWeightSpec",
    "SpecError",
    "SuiteOptions",
    "VerificationReport",
    "build_bochner_operator",
    "eigenvalue_sequence",
    "matrix_moments",
    "monic_sequence",
    "run_suite",
    "validate_spec",
]
