"""Legendre fields, Legendre transformations, and their interplay with duality."""

from __future__ import annotations

from dataclasses import dataclass

from ..algebra import check_invertible, dual_mul, invert_field, mul_operator, multiply, vf_power
from ..chart_core.fields import TensorField, as_points, field_einsum, lie_bracket, linear_combination
from ..errors import NotLegendre
from .core import (
    FamilyComparison,
    SpecialFamily,
    cov_columns,
    cov_vector,
    curvature,
    family_equal,
    sup,
)
from .duality import admissible_endomorphism, connection_a


def legendre_tensor(fam: SpecialFamily, u: TensorField) -> TensorField:
    """``[k, x, y]`` = nabla_X(u) o Y - nabla_Y(u) o X on frame fields."""
    c = fam.mult
    Du = cov_vector(fam.conn, u)  # [s, x]
    return linear_combination(
        [(1.0, field_einsum("ksy,sx->kxy", c.c, Du)), (-1.0, field_einsum("ksx,sy->kxy", c.c, Du))],
        name="lege",
    )


def legendre_defect(fam: SpecialFamily, u: TensorField, pts) -> float:
    pts = as_points(pts)
    check_invertible(fam.mult, u, pts)
    return sup(legendre_tensor(fam, u).values(pts))


def legendre_connection(fam: SpecialFamily, u: TensorField) -> TensorField:
    """u^{-1} o nabla_X(u o Y) in Christoffel form."""
    c = fam.mult
    Cu = mul_operator(c, u)
    Cuinv = mul_operator(c, invert_field(c, u))
    return field_einsum("ks,sji->kij", Cuinv, cov_columns(fam.conn, Cu), name="L_u")


def legendre_transform(fam: SpecialFamily, u: TensorField, pts=None, tol: float = 1e-9) -> SpecialFamily:
    """Transformed family on the same multiplication; gated on the Legendre condition when ``pts`` given."""
    if pts is not None:
        d = legendre_defect(fam, u, pts)
        if d > tol:
            raise NotLegendre(d, tol)
    return SpecialFamily(legendre_connection(fam, u), fam.mult, name="legendre")


def legendre_curvature_defect(fam: SpecialFamily, u: TensorField, pts) -> float:
    """Residual of R'(X, Y) Z = u^{-1} o R(X, Y)(u o Z)."""
    pts = as_points(pts)
    c = fam.mult
    R = curvature(fam.conn)
    Rp = curvature(legendre_connection(fam, u))
    Cu = mul_operator(c, u)
    Cuinv = mul_operator(c, invert_field(c, u))
    rhs = field_einsum("ls,srij,rz->lzij", Cuinv, R, Cu)
    return sup(Rp.values(pts) - rhs.values(pts))


def con_na(fam: SpecialFamily, E: TensorField) -> SpecialFamily:
    """Dual-family member E o nabla_X(E^{-1} o Y) + E o nabla_Y(E^{-1}) o X on (M, *, E)."""
    star = dual_mul(fam.mult, E).mult
    return SpecialFamily(connection_a(fam, E, admissible_endomorphism(fam, E)), star, name="con-na")


def commuting_shift(fam: SpecialFamily, E: TensorField, u: TensorField) -> TensorField:
    """U = [E^{-1}, u] + [e, E^{-1}] o u."""
    c = fam.mult
    Einv = invert_field(c, E)
    return linear_combination(
        [(1.0, lie_bracket(Einv, u)), (1.0, multiply(c, lie_bracket(c.unit, Einv), u))], name="U"
    )


@dataclass(frozen=True)
class CommuteReport:
    comparison: FamilyComparison
    shift_residual: float  # recovered *-shift against E^3 o u^{-1} o U
    dual_legendre: float  # Legendre defect of E o u on the dual family


def legendre_duality_commute(fam: SpecialFamily, E: TensorField, u: TensorField, pts, tol: float = 1e-9) -> CommuteReport:
    """Compare L_{E o u}(D_E(fam)) with D_E(L_u(fam)) as special families on (M, *, E)."""
    pts = as_points(pts)
    c = fam.mult
    dual = con_na(fam, E)
    Eu = multiply(c, E, u)
    left = legendre_connection(dual, Eu)
    right = con_na(SpecialFamily(legendre_connection(fam, u), c), E).conn
    cmp = family_equal(left, right, dual.mult, pts, tol)
    U = commuting_shift(fam, E, u)
    expected = multiply(c, multiply(c, vf_power(c, E, 3), invert_field(c, u)), U)
    shift_res = sup(cmp.shift - expected.values(pts))
    return CommuteReport(cmp, shift_res, sup(legendre_tensor(dual, Eu).values(pts)))
