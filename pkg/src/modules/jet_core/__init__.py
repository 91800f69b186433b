"""jet_core モジュール"""

from .jet import (
    INTRINSICS,
    JET_ATOL,
    Jet,
    apply_function,
    basis_size,
    degree_norms,
    insert_variable,
    jet_add,
    jet_compose,
    jet_diff,
    jet_eval,
    jet_mul,
    jet_neg,
    jet_power,
    jet_reciprocal,
    jet_scale,
    jet_sub,
    jet_substitute,
    monomial_basis,
    slice_variable,
    substitution_matrix,
)

__all__ = [
    "INTRINSICS",
    "JET_ATOL",
    "Jet",
    "apply_function",
    "basis_size",
    "degree_norms",
    "insert_variable",
    "jet_add",
    "jet_compose",
    "jet_diff",
    "jet_eval",
    "jet_mul",
    "jet_neg",
    "jet_power",
    "jet_reciprocal",
    "jet_scale",
    "jet_sub",
    "jet_substitute",
    "monomial_basis",
    "slice_variable",
    "substitution_matrix",
]
