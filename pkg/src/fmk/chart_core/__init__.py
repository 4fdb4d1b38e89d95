"""Expressions, jets, lazily evaluated tensor fields and chart sampling."""

from .domain import ChartDomain, Exclusion, sample_points
from .expr import Expr, diff, parse_expr, to_string
from .fields import (
    JetValue,
    TensorField,
    constant_field,
    coordinate_field,
    eval_jet,
    expr_field,
    field_einsum,
    lie_bracket,
    partial,
    scalar_field,
    vector_field,
    zero_field,
)
from .jets import Jet, jeinsum, jinv

__all__ = [
    "ChartDomain",
    "Exclusion",
    "Expr",
    "Jet",
    "JetValue",
    "TensorField",
    "constant_field",
    "coordinate_field",
    "diff",
    "eval_jet",
    "expr_field",
    "field_einsum",
    "jeinsum",
    "jinv",
    "lie_bracket",
    "parse_expr",
    "partial",
    "sample_points",
    "scalar_field",
    "to_string",
    "vector_field",
    "zero_field",
]
