"""Connections in the coordinate frame: torsion, curvature, compatibility, shifts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..algebra import MultField, multiply
from ..chart_core.fields import (
    TensorField,
    as_points,
    field_einsum,
    linear_combination,
    partial,
    transpose,
)


def sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if np.size(values) else 0.0


@dataclass(frozen=True)
class SpecialFamily:
    """A torsion-free compatible representative together with its multiplication.

    The family itself is the orbit ``conn + V o X o Y`` over vector fields V.
    """

    conn: TensorField
    mult: MultField
    name: str = ""

    def __post_init__(self):
        n = self.mult.n
        if self.conn.shape != (n, n, n):
            raise ValueError(f"Christoffel field must have shape {(n, n, n)}")

    @property
    def n(self) -> int:
        return self.mult.n

    def unit_derivative(self) -> TensorField:
        """nabla_e(e) for the representative."""
        return covariant_along(self.conn, self.mult.unit, self.mult.unit)

    def with_conn(self, conn: TensorField, name: str = "") -> "SpecialFamily":
        return SpecialFamily(conn, self.mult, name or self.name)


# ---------------------------------------------------------------------------
# covariant derivatives


def cov_vector(G: TensorField, Y: TensorField) -> TensorField:
    """``[k, i]`` = (nabla_{d_i} Y)^k = d_i Y^k + G^k_is Y^s."""
    return linear_combination(
        [(1.0, partial(Y)), (1.0, field_einsum("kis,s->ki", G, Y))], name="nabla Y"
    )


def cov_columns(G: TensorField, B: TensorField) -> TensorField:
    """Covariant derivative of each column of a matrix field: ``[k, j, i]`` = nabla_i (B[:, j])."""
    return linear_combination(
        [(1.0, partial(B)), (1.0, field_einsum("kis,sj->kji", G, B))], name="nabla cols"
    )


def cov_endo(G: TensorField, A: TensorField) -> TensorField:
    """``[k, j, i]`` = (nabla_{d_i} A)(d_j)^k for an endomorphism field A."""
    return linear_combination(
        [
            (1.0, partial(A)),
            (1.0, field_einsum("kis,sj->kji", G, A)),
            (-1.0, field_einsum("ks,sij->kji", A, G)),
        ],
        name="nabla A",
    )


def covariant_along(G: TensorField, X: TensorField, Y: TensorField) -> TensorField:
    """nabla_X Y as a vector field."""
    return field_einsum("ki,i->k", cov_vector(G, Y), X, name="nabla_X Y")


# ---------------------------------------------------------------------------
# basic tensors


def torsion(G: TensorField) -> TensorField:
    """T^k_ij = G^k_ij - G^k_ji."""
    return linear_combination([(1.0, G), (-1.0, transpose(G, (0, 2, 1)))], name="torsion")


def nabla_mul(G: TensorField, c: MultField) -> TensorField:
    """``N[k, i, j, l]`` = nabla_{d_i}(o)(d_j, d_l)^k."""
    dc = partial(c.c)  # [k, j, l, i]
    return linear_combination(
        [
            (1.0, transpose(dc, (0, 3, 1, 2))),
            (1.0, field_einsum("kis,sjl->kijl", G, c.c)),
            (-1.0, field_einsum("sij,ksl->kijl", G, c.c)),
            (-1.0, field_einsum("sil,kjs->kijl", G, c.c)),
        ],
        name="nabla(o)",
    )


def nabla_mul_apply(G: TensorField, c: MultField, X, Y, Z) -> TensorField:
    """nabla_X(o)(Y, Z) = nabla_X(Y o Z) - nabla_X(Y) o Z - Y o nabla_X(Z)."""
    return linear_combination(
        [
            (1.0, covariant_along(G, X, multiply(c, Y, Z))),
            (-1.0, multiply(c, covariant_along(G, X, Y), Z)),
            (-1.0, multiply(c, Y, covariant_along(G, X, Z))),
        ]
    )


def compat_tensor(G: TensorField, c: MultField) -> TensorField:
    N = nabla_mul(G, c)
    return linear_combination([(1.0, N), (-1.0, transpose(N, (0, 2, 1, 3)))], name="compat")


def torsion_defect(G: TensorField, pts) -> float:
    return sup(torsion(G).values(as_points(pts)))


def compat_defect(G: TensorField, c: MultField, pts) -> float:
    return sup(compat_tensor(G, c).values(as_points(pts)))


def curvature(G: TensorField) -> TensorField:
    """``R[l, k, i, j]`` = (R(d_i, d_j) d_k)^l.

    R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_is G^s_jk - G^l_js G^s_ik.
    """
    dG = partial(G)  # [l, j, k, i] = d_i G^l_jk
    return linear_combination(
        [
            (1.0, transpose(dG, (0, 2, 3, 1))),
            (-1.0, transpose(dG, (0, 2, 1, 3))),
            (1.0, field_einsum("lis,sjk->lkij", G, G)),
            (-1.0, field_einsum("ljs,sik->lkij", G, G)),
        ],
        name="curvature",
    )


def curvature_defect(G: TensorField, pts) -> float:
    """Sup norm of the curvature (zero for flat connections)."""
    return sup(curvature(G).values(as_points(pts)))


def hessian_field(G: TensorField, E: TensorField) -> TensorField:
    """``H[k, i, j]`` = (nabla^2_{d_i, d_j} E)^k = nabla_i nabla_j E - nabla_{nabla_i d_j} E."""
    DE = cov_vector(G, E)  # [k, j]
    return linear_combination(
        [
            (1.0, transpose(partial(DE), (0, 2, 1))),
            (1.0, field_einsum("kis,sj->kij", G, DE)),
            (-1.0, field_einsum("sij,ks->kij", G, DE)),
        ],
        name="hessian",
    )


def triple_product_tensor(c: MultField, V: TensorField) -> TensorField:
    """``[k, i, j]`` = (V o d_i o d_j)^k."""
    return field_einsum("kmj,mai,a->kij", c.c, c.c, V, name="V o . o .")


# ---------------------------------------------------------------------------
# special-family operations


def shift(fam: SpecialFamily, V: TensorField) -> SpecialFamily:
    """Member ``nabla + V o X o Y`` of the family (same multiplication)."""
    G = linear_combination([(1.0, fam.conn), (1.0, triple_product_tensor(fam.mult, V))], name="shift")
    return fam.with_conn(G)


def unit_shift(fam: SpecialFamily, U: TensorField) -> TensorField:
    """The unique V for which ``shift(fam, V)`` satisfies nabla_X e = U o X."""
    return linear_combination([(1.0, U), (-1.0, fam.unit_derivative())], name="V")


def unit_derivative_defect(fam: SpecialFamily, U: TensorField, pts) -> float:
    """Sup of nabla_{d_i} e - U o d_i over the frame."""
    De = cov_vector(fam.conn, fam.mult.unit)
    rhs = field_einsum("kai,a->ki", fam.mult.c, U)
    return sup(linear_combination([(1.0, De), (-1.0, rhs)]).values(as_points(pts)))


@dataclass(frozen=True)
class FamilyComparison:
    equal: bool
    shift: np.ndarray  # recovered V at every point, shape (P, n)
    residual: float
    residual_per_point: np.ndarray


def family_equal(G1: TensorField, G2: TensorField, c: MultField, pts, tol: float = 1e-9) -> FamilyComparison:
    """Decide whether ``G2 = G1 + V o X o Y`` for some V, by per-point least squares.

    The recovered V (relative to G1) is returned at every point.
    """
    pts = as_points(pts)
    n = c.n
    D = (G2.values(pts) - G1.values(pts)).reshape(len(pts), -1)
    C = c.c.values(pts)
    B = np.einsum("pkmj,pmai->pkija", C, C).reshape(len(pts), n**3, n)
    Vs = np.empty((len(pts), n))
    res = np.empty(len(pts))
    for p in range(len(pts)):
        sol, *_ = np.linalg.lstsq(B[p], D[p], rcond=None)
        Vs[p] = sol
        res[p] = sup(D[p] - B[p] @ sol)
    worst = float(res.max()) if len(res) else 0.0
    return FamilyComparison(worst <= tol, Vs, worst, res)


def lorenz_tensor(G: TensorField, c: MultField) -> TensorField:
    """``T[m, v, z, y, x]`` = V o R_{Z,Y} X + Y o R_{V,Z} X + Z o R_{Y,V} X on frame fields."""
    R = curvature(G)
    return linear_combination(
        [
            (1.0, field_einsum("mvl,lxzy->mvzyx", c.c, R)),
            (1.0, field_einsum("myl,lxvz->mvzyx", c.c, R)),
            (1.0, field_einsum("mzl,lxyv->mvzyx", c.c, R)),
        ],
        name="lorenz",
    )


def lorenz_defect(G: TensorField, c: MultField, pts) -> float:
    return sup(lorenz_tensor(G, c).values(as_points(pts)))
