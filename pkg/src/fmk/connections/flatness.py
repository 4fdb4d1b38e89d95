"""Flatness inside a special family and across the duality."""

from __future__ import annotations

from dataclasses import dataclass

from ..algebra import mul_operator, multiply
from ..chart_core.fields import TensorField, as_points, field_einsum, linear_combination
from .core import SpecialFamily, cov_endo, curvature, hessian_field, shift, sup
from .duality import dual_connection


def flat_shift_tensor(fam: SpecialFamily, V: TensorField) -> TensorField:
    """``F[m, x, y, z]`` = nabla_X(C_V)(Y) o Z - nabla_Z(C_V)(Y) o X on frame fields."""
    c = fam.mult
    DC = cov_endo(fam.conn, mul_operator(c, V))  # [k, y, x]
    return linear_combination(
        [
            (1.0, field_einsum("mkz,kyx->mxyz", c.c, DC)),
            (-1.0, field_einsum("mkx,kyz->mxyz", c.c, DC)),
        ],
        name="flat-shift",
    )


@dataclass(frozen=True)
class FlatShiftReport:
    condition: float  # sup of the flat-shift tensor
    shifted_curvature: float  # sup of the curvature of the shifted connection
    curvature_relation: float  # residual of R^V = R + (condition tensor) identity


def flat_shift_defect(fam: SpecialFamily, V: TensorField, pts) -> FlatShiftReport:
    pts = as_points(pts)
    F = flat_shift_tensor(fam, V).values(pts)  # [p, m, x, y, z]
    R = curvature(fam.conn).values(pts)  # [p, m, y, x, z] = R_{X,Z} Y
    RV = curvature(shift(fam, V).conn).values(pts)
    # R^V_{X,Z} Y - R_{X,Z} Y - F(X, Y, Z)
    relation = RV - R - F.transpose(0, 1, 3, 2, 4)
    return FlatShiftReport(sup(F), sup(RV), sup(relation))


def higgs_derivative(fam: SpecialFamily, W: TensorField) -> TensorField:
    """``[k, y, x]`` = nabla_X(C_W)(Y)."""
    return cov_endo(fam.conn, mul_operator(fam.mult, W))


def dual_flat_tensor(fam: SpecialFamily, E: TensorField, Wt: TensorField) -> TensorField:
    """``T[m, x, y, z]`` = G(X, Y) o Z - G(Z, Y) o X with G = nabla^2 E - nabla(C_W~)."""
    c = fam.mult
    H = hessian_field(fam.conn, E)  # [k, x, y]
    DC = higgs_derivative(fam, Wt)  # [k, y, x]
    Gxy = linear_combination([(1.0, H), (-1.0, field_einsum("kyx->kxy", DC))])
    return linear_combination(
        [
            (1.0, field_einsum("mkz,kxy->mxyz", c.c, Gxy)),
            (-1.0, field_einsum("mkx,kzy->mxyz", c.c, Gxy)),
        ],
        name="x-c",
    )


@dataclass(frozen=True)
class DualFlatReport:
    condition: float
    dual_curvature: float
    curvature_formula: float  # residual of R^W_{Z,X}(E o Y) against the closed formula
    connection: SpecialFamily


def dual_flat_defect(fam: SpecialFamily, E: TensorField, Wt: TensorField, pts) -> DualFlatReport:
    """Flat-dual criterion for a candidate W~, plus the curvature of the resulting dual member.

    The dual member uses W = W~ o E.  The closed curvature formula is only
    asserted for flat representatives; its residual is reported either way.
    """
    pts = as_points(pts)
    c = fam.mult
    T = dual_flat_tensor(fam, E, Wt)
    W = multiply(c, Wt, E)
    dual = dual_connection(fam, E, W)
    R = curvature(dual.conn)  # [l, k, i, j] = R_{d_i, d_j} d_k
    # R^W_{Z,X}(E o Y) as [m, x, y, z]
    lhs = field_einsum("mkzx,kay,a->mxyz", R, c.c, E)
    formula = linear_combination([(1.0, lhs), (-1.0, T)])
    return DualFlatReport(
        condition=sup(T.values(pts)),
        dual_curvature=sup(R.values(pts)),
        curvature_formula=sup(formula.values(pts)),
        connection=dual,
    )
