"""Dual special families, second structure connections and related identities."""

from __future__ import annotations

from ..algebra import (
    EVENTUAL_IDENTITY_GATE,
    MultField,
    dual_mul,
    invert_field,
    lie_bracket,
    mul_operator,
    multiply,
)
from ..chart_core.fields import TensorField, as_points, field_einsum, linear_combination, scale
from .core import (
    SpecialFamily,
    cov_columns,
    cov_vector,
    curvature,
    shift,
    sup,
    triple_product_tensor,
    unit_shift,
)


def conjugated_part(fam: SpecialFamily, E: TensorField) -> TensorField:
    """``[k, i, j]`` = (E o nabla_{d_i}(E^{-1} o d_j))^k."""
    c = fam.mult
    B = mul_operator(c, invert_field(c, E))  # columns E^{-1} o d_j
    return field_einsum("ks,sji->kij", mul_operator(c, E), cov_columns(fam.conn, B), name="E o nabla(E^-1 o .)")


def _second_structure_tensor(fam: SpecialFamily, E: TensorField) -> TensorField:
    c = fam.mult
    B = mul_operator(c, invert_field(c, E))
    DE = cov_vector(fam.conn, E)  # [s, r] = nabla_r E^s
    term2 = field_einsum("ksi,sr,rj->kij", c.c, DE, B)
    return linear_combination([(1.0, conjugated_part(fam, E)), (-1.0, term2)], name="second structure")


def _checked_dual_mult(fam: SpecialFamily, E: TensorField, pts, gate: float) -> MultField:
    return dual_mul(fam.mult, E, pts=pts, gate=gate).mult


def dual_connection(
    fam: SpecialFamily,
    E: TensorField,
    W: TensorField | None = None,
    pts=None,
    gate: float = EVENTUAL_IDENTITY_GATE,
) -> SpecialFamily:
    """E o nabla_X(E^{-1} o Y) - nabla_{E^{-1} o Y}(E) o X + W * X * Y, on (M, *, E).

    With ``pts`` given, the eventual-identity gate is enforced there first.
    """
    star = _checked_dual_mult(fam, E, pts, gate)
    G = _second_structure_tensor(fam, E)
    if W is not None:
        G = linear_combination([(1.0, G), (1.0, triple_product_tensor(star, W))], name="dual")
    return SpecialFamily(G, star, name="dual")


def second_structure(fam: SpecialFamily, E: TensorField, pts=None, gate: float = EVENTUAL_IDENTITY_GATE) -> SpecialFamily:
    return dual_connection(fam, E, None, pts=pts, gate=gate)


def connection_a(fam: SpecialFamily, E: TensorField, A: TensorField) -> TensorField:
    """nabla^A_X Y = E o nabla_X(E^{-1} o Y) + A(Y) o X for an endomorphism field A."""
    c = fam.mult
    extra = field_einsum("ksi,sj->kij", c.c, A)
    return linear_combination([(1.0, conjugated_part(fam, E)), (1.0, extra)], name="nabla^A")


def admissible_endomorphism(fam: SpecialFamily, E: TensorField, V: TensorField | None = None) -> TensorField:
    """A(Y) = E o nabla_Y(E^{-1}) + V o Y, the form that makes nabla^A special on (M, *, E)."""
    c = fam.mult
    DEinv = cov_vector(fam.conn, invert_field(c, E))  # [s, j]
    A = field_einsum("ks,sj->kj", mul_operator(c, E), DEinv)
    if V is not None:
        A = linear_combination([(1.0, A), (1.0, mul_operator(c, V))])
    return A


def aux_shift(fam: SpecialFamily, E: TensorField) -> TensorField:
    """S = (nabla_{E^{-1}} E + nabla_E E^{-1}) / 2 + nabla_e e."""
    c = fam.mult
    Einv = invert_field(c, E)
    G = fam.conn
    a = field_einsum("kr,r->k", cov_vector(G, E), Einv)
    b = field_einsum("kr,r->k", cov_vector(G, Einv), E)
    return linear_combination([(0.5, a), (0.5, b), (1.0, fam.unit_derivative())], name="S")


def aux_identity_tensor(fam: SpecialFamily, E: TensorField) -> TensorField:
    """``[k, j]`` of nabla_{E^{-1} o X}E + E o nabla_X(E^{-1}) - S o X at X = d_j."""
    c = fam.mult
    Einv = invert_field(c, E)
    B = mul_operator(c, Einv)
    t1 = field_einsum("kr,rj->kj", cov_vector(fam.conn, E), B)
    t2 = field_einsum("ks,sj->kj", mul_operator(c, E), cov_vector(fam.conn, Einv))
    t3 = mul_operator(c, aux_shift(fam, E))
    return linear_combination([(1.0, t1), (1.0, t2), (-1.0, t3)], name="aux")


def aux_identity_defect(fam: SpecialFamily, E: TensorField, pts) -> float:
    return sup(aux_identity_tensor(fam, E).values(as_points(pts)))


def involution_shift(fam: SpecialFamily, E: TensorField) -> TensorField:
    """V = [E, E^{-1}] / 2 + nabla_e e, the shift picked up by a double duality."""
    c = fam.mult
    return linear_combination(
        [(0.5, lie_bracket(E, invert_field(c, E))), (1.0, fam.unit_derivative())], name="V"
    )


def double_dual(fam: SpecialFamily, E: TensorField, W: TensorField | None = None) -> SpecialFamily:
    """Dualize by E (with W), then dualize back by the old unit (with W = 0)."""
    once = dual_connection(fam, E, W)
    return dual_connection(once, fam.mult.unit, None)


def duality_involution_defect(fam: SpecialFamily, E: TensorField, W: TensorField | None, pts) -> float:
    """Residual of the double dual against ``nabla~ - V o X o Y`` with V = involution_shift."""
    pts = as_points(pts)
    back = double_dual(fam, E, W)
    expected = shift(fam, scale(involution_shift(fam, E), -1.0))
    return sup(back.conn.values(pts) - expected.conn.values(pts))


def fixed_unit_dual(fam: SpecialFamily, E: TensorField, U: TensorField) -> SpecialFamily:
    """Dual connection with W = [E^{-1}, E] o E^2 / 2 + U (preserves nabla_X(unit) = U * X)."""
    c = fam.mult
    half = scale(lie_bracket(invert_field(c, E), E), 0.5)
    W = linear_combination([(1.0, multiply(c, half, multiply(c, E, E))), (1.0, U)], name="W")
    return dual_connection(fam, E, W)


def unit_normalized(fam: SpecialFamily, U: TensorField) -> SpecialFamily:
    """The member of the family with nabla_X e = U o X."""
    return shift(fam, unit_shift(fam, U))


def fixed_unit_involution_defect(fam: SpecialFamily, E: TensorField, U: TensorField, pts) -> float:
    """Apply the fixed-U duality twice starting from the U-normalized member."""
    pts = as_points(pts)
    start = unit_normalized(fam, U)
    once = fixed_unit_dual(start, E, U)
    back = fixed_unit_dual(once, fam.mult.unit, U)
    return sup(back.conn.values(pts) - start.conn.values(pts))


def second_structure_normalized(fam: SpecialFamily, E: TensorField) -> SpecialFamily:
    """Member with nabla_X e = [E^{-1}, E] o X / 2."""
    U = scale(lie_bracket(invert_field(fam.mult, E), E), 0.5)
    return unit_normalized(fam, U)


def second_structure_involution_defect(fam: SpecialFamily, E: TensorField, pts) -> float:
    pts = as_points(pts)
    start = second_structure_normalized(fam, E)
    back = second_structure(second_structure(start, E), fam.mult.unit)
    return sup(back.conn.values(pts) - start.conn.values(pts))


def second_structure_euler_tensor(fam: SpecialFamily, E: TensorField) -> TensorField:
    """``[k, i]`` of nabla^F_{d_i}(E) - ([E, e] o E) * d_i."""
    sec = second_structure(fam, E)
    lhs = cov_vector(sec.conn, E)
    V = multiply(fam.mult, lie_bracket(E, fam.mult.unit), E)
    rhs = field_einsum("kai,a->ki", sec.mult.c, V)
    return linear_combination([(1.0, lhs), (-1.0, rhs)])


def conjugation_rhs(fam: SpecialFamily, E: TensorField, A: TensorField) -> TensorField:
    """Right side of the curvature formula for nabla^A, indexed like curvature ``[l, x, y, z]``.

    E o R_{Y,Z}(E^{-1} o X) - Q(Y, X) o Z + Q(Z, X) o Y with
    Q(Y, X) = A(E o nabla_Y(E^{-1} o X)) + A(A(X) o Y) - E o nabla_Y(E^{-1} o A(X)).
    """
    c = fam.mult
    G = fam.conn
    CE = mul_operator(c, E)
    CEinv = mul_operator(c, invert_field(c, E))
    K = conjugated_part(fam, E)  # [k, y, x]
    q1 = field_einsum("mk,kyx->myx", A, K)
    q2 = field_einsum("mk,ksy,sx->myx", A, c.c, A)
    Gcols = field_einsum("st,tx->sx", CEinv, A)
    q3 = field_einsum("ms,sxy->myx", CE, cov_columns(G, Gcols))
    Q = linear_combination([(1.0, q1), (1.0, q2), (-1.0, q3)], name="Q")
    R = curvature(G)
    main = field_einsum("ls,sryz,rx->lxyz", CE, R, CEinv)
    return linear_combination(
        [
            (1.0, main),
            (-1.0, field_einsum("lmz,myx->lxyz", c.c, Q)),
            (1.0, field_einsum("lmy,mzx->lxyz", c.c, Q)),
        ],
        name="read",
    )


def curvature_conjugation_defect(fam: SpecialFamily, E: TensorField, A: TensorField, pts) -> float:
    pts = as_points(pts)
    lhs = curvature(connection_a(fam, E, A)).values(pts)
    return sup(lhs - conjugation_rhs(fam, E, A).values(pts))
