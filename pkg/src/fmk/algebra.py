"""Pointwise multiplication algebras on the tangent bundle of a chart.

Covers products, inverses and powers of vector fields, the Lie derivative of
the multiplication tensor, the Hertling-Manin condition, eventual
identities and the twisted (dual) multiplication ``X * Y = X o Y o E^{-1}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chart_core.fields import (
    TensorField,
    as_points,
    constant_field,
    expr_field,
    field_einsum,
    lie_bracket,
    linear_combination,
    matrix_inverse,
    partial,
    scalar_times,
)
from .errors import NonInvertible, NotEventualIdentity
from .chart_core.jets import COND_LIMIT

EVENTUAL_IDENTITY_GATE = 1e-8


@dataclass(frozen=True)
class MultField:
    """Structure functions ``c[k, i, j] = c^k_ij`` plus the unit vector field."""

    c: TensorField
    unit: TensorField
    name: str = ""

    def __post_init__(self):
        n = self.c.n
        if self.c.shape != (n, n, n):
            raise ValueError(f"structure functions must have shape {(n, n, n)}")
        if self.unit.shape != (n,):
            raise ValueError("unit must be a vector field")

    @property
    def n(self) -> int:
        return self.c.n


def symmetric_structure(n: int, entries, params=None, name: str = "c") -> TensorField:
    """Build c from the upper-triangular entries ``entries[k][(i, j)]`` with i <= j.

    Storage is symmetric in (i, j) by construction.
    """
    grid = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                e = entries[k][(i, j)]
                grid[k][i][j] = e
                grid[k][j][i] = e
    return expr_field(grid, n, params, name)


# ---------------------------------------------------------------------------
# products, inverses, powers


def multiply(c: MultField, X: TensorField, Y: TensorField) -> TensorField:
    """(X o Y)^k = c^k_ij X^i Y^j."""
    return field_einsum("kij,i,j->k", c.c, X, Y, name="prod")


def mul_operator(c: MultField, X: TensorField) -> TensorField:
    """The endomorphism Y -> X o Y as a matrix field ``[k, j]``."""
    return field_einsum("kij,i->kj", c.c, X, name="C_X")


def mul_endo(c: MultField, X: TensorField, A: TensorField) -> TensorField:
    """Endomorphism Y -> X o A(Y)."""
    return field_einsum("kij,i,jl->kl", c.c, X, A)


def invert_field(c: MultField, V: TensorField) -> TensorField:
    """V^{-1} with exact jets obtained by differentiating M x = e."""
    Minv = matrix_inverse(mul_operator(c, V))
    return field_einsum("kj,j->k", Minv, c.unit, name="inverse")


def invert(c: MultField, V: TensorField, p) -> np.ndarray:
    """Components of V^{-1} at the point(s) ``p``."""
    pts = as_points(p)
    out = invert_field(c, V).values(pts)
    return out[0] if np.ndim(p) == 1 else out


def check_invertible(c: MultField, V: TensorField, pts) -> float:
    """Largest condition number of X -> V o X over ``pts``; raises if too large."""
    M = mul_operator(c, V).values(as_points(pts))
    cond = np.linalg.cond(M)
    worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
    if worst > COND_LIMIT:
        raise NonInvertible(f"condition number {worst:.3e} exceeds {COND_LIMIT:.0e}")
    return worst


def vf_power(c: MultField, V: TensorField, k: int) -> TensorField:
    """k-th power of V for the multiplication c (k = 0 gives the unit)."""
    if k == 0:
        return c.unit
    base = V if k > 0 else invert_field(c, V)
    out = base
    for _ in range(abs(k) - 1):
        out = multiply(c, out, base)
    return out


# ---------------------------------------------------------------------------
# Lie derivative of the multiplication


def lie_derivative_mul(c: MultField, X: TensorField) -> TensorField:
    """Tensor ``L[k, i, j]`` = (L_X(o))(d_i, d_j)^k, computed in components.

    L^k_ij = X^s d_s c^k_ij - c^s_ij d_s X^k + d_i X^s c^k_sj + d_j X^s c^k_is.
    """
    dc, dX = partial(c.c), partial(X)
    return linear_combination(
        [
            (1.0, field_einsum("kijs,s->kij", dc, X)),
            (-1.0, field_einsum("sij,ks->kij", c.c, dX)),
            (1.0, field_einsum("si,ksj->kij", dX, c.c)),
            (1.0, field_einsum("sj,kis->kij", dX, c.c)),
        ],
        name="L_X(c)",
    )


def lie_derivative_mul_apply(c: MultField, X: TensorField, Y: TensorField, Z: TensorField) -> TensorField:
    """(L_X(o))(Y, Z) = [X, Y o Z] - [X, Y] o Z - Y o [X, Z], through brackets."""
    return linear_combination(
        [
            (1.0, lie_bracket(X, multiply(c, Y, Z))),
            (-1.0, multiply(c, lie_bracket(X, Y), Z)),
            (-1.0, multiply(c, Y, lie_bracket(X, Z))),
        ]
    )


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


@dataclass(frozen=True)
class AlgebraDefects:
    commutativity: float
    associativity: float
    unit: float


def algebra_defects(c: MultField, pts) -> AlgebraDefects:
    pts = as_points(pts)
    C = c.c.values(pts)
    e = c.unit.values(pts)
    n = c.n
    comm = C - np.swapaxes(C, 2, 3)
    assoc = np.einsum("pmij,pkml->pkijl", C, C) - np.einsum("pkim,pmjl->pkijl", C, C)
    unit = np.einsum("pkij,pi->pkj", C, e) - np.eye(n)[None]
    return AlgebraDefects(_sup(comm), _sup(assoc), _sup(unit))


def hm_tensor(c: MultField) -> TensorField:
    """HM defect on the coordinate frame, indexed ``[k, a, b, i, j]``.

    L_{d_a o d_b}(o)(d_i, d_j) - d_a o L_{d_b}(o)(d_i, d_j) - d_b o L_{d_a}(o)(d_i, d_j).
    """
    dc = partial(c.c)  # [k, i, j, s] = d_s c^k_ij
    return linear_combination(
        [
            (1.0, field_einsum("kijs,sab->kabij", dc, c.c)),
            (-1.0, field_einsum("sij,kabs->kabij", c.c, dc)),
            (1.0, field_einsum("sabi,ksj->kabij", dc, c.c)),
            (1.0, field_einsum("sabj,kis->kabij", dc, c.c)),
            (-1.0, field_einsum("kam,mijb->kabij", c.c, dc)),
            (-1.0, field_einsum("kbm,mija->kabij", c.c, dc)),
        ],
        name="HM",
    )


def hm_apply(c: MultField, X, Y, Z, W) -> TensorField:
    """HM expression for arbitrary vector fields, assembled from brackets."""
    return linear_combination(
        [
            (1.0, lie_derivative_mul_apply(c, multiply(c, X, Y), Z, W)),
            (-1.0, multiply(c, X, lie_derivative_mul_apply(c, Y, Z, W))),
            (-1.0, multiply(c, Y, lie_derivative_mul_apply(c, X, Z, W))),
        ]
    )


def scaling_polynomials(n: int) -> list[TensorField]:
    """Three fixed positive polynomials used to probe tensoriality."""
    u = [f"u{i + 1}" for i in range(n)]
    texts = [
        "1 + " + "^2 + ".join(u) + "^2",
        "2 + " + "*".join(u) + "^2" if n > 1 else "2 + u1^2",
        "3 + (" + " - ".join(u) + ")^2",
    ]
    return [expr_field(t, n) for t in texts]


def _coordinate_fields(n: int) -> list[TensorField]:
    return [constant_field(np.eye(n)[i], n) for i in range(n)]


def hm_defect(c: MultField, pts, scaled: bool = True) -> float:
    """Sup of the HM defect over the coordinate frame and function-scaled frames."""
    pts = as_points(pts)
    worst = _sup(hm_tensor(c).values(pts))
    if scaled:
        n = c.n
        polys = scaling_polynomials(n)
        frame = _coordinate_fields(n)
        for a in range(n):
            for b in range(n):
                for i in range(n):
                    for j in range(i, n):
                        X = scalar_times(polys[0], frame[a])
                        Y = scalar_times(polys[1], frame[b])
                        Z = scalar_times(polys[2], frame[i])
                        worst = max(worst, _sup(hm_apply(c, X, Y, Z, frame[j]).values(pts)))
    return worst


# ---------------------------------------------------------------------------
# eventual identities


def eventual_identity_tensor(c: MultField, E: TensorField) -> TensorField:
    """L_E(o)(d_i, d_j) - [e, E] o d_i o d_j, indexed ``[k, i, j]``."""
    ee = lie_bracket(c.unit, E)
    rhs = field_einsum("kmj,mai,a->kij", c.c, c.c, ee)
    return linear_combination([(1.0, lie_derivative_mul(c, E)), (-1.0, rhs)], name="char")


def eventual_identity_defect(c: MultField, E: TensorField, pts) -> float:
    pts = as_points(pts)
    check_invertible(c, E, pts)
    return _sup(eventual_identity_tensor(c, E).values(pts))


@dataclass(frozen=True)
class DualMultResult:
    """The twisted multiplication, together with what it was built from."""

    mult: MultField
    source: MultField
    eventual_identity: TensorField
    defect: float | None = None


def dual_structure(c: MultField, E: TensorField) -> TensorField:
    """c*[k, i, j] = c^k_ms c^m_ij (E^{-1})^s."""
    Einv = invert_field(c, E)
    return field_einsum("kms,mij,s->kij", c.c, c.c, Einv, name="c*")


def dual_mul(
    c: MultField,
    E: TensorField,
    pts=None,
    gate: float = EVENTUAL_IDENTITY_GATE,
    on_fail: str = "error",
) -> DualMultResult:
    """Twist ``c`` by the eventual identity ``E``; the new unit is ``E``.

    When ``pts`` is supplied the eventual-identity condition is checked there
    first; ``on_fail`` selects between raising and warning.
    """
    defect = None
    if pts is not None:
        defect = eventual_identity_defect(c, E, pts)
        if defect > gate:
            if on_fail == "error":
                raise NotEventualIdentity(defect, gate)
            warnings.warn(str(NotEventualIdentity(defect, gate)), stacklevel=2)
    star = MultField(dual_structure(c, E), E, name=f"{c.name}*" if c.name else "dual")
    return DualMultResult(star, c, E, defect)


def power_bracket_tensor(c: MultField, E: TensorField, n: int, m: int) -> TensorField:
    """[E^n, E^m] - (m - n) E^{m+n-1} o [e, E]."""
    lhs = lie_bracket(vf_power(c, E, n), vf_power(c, E, m))
    rhs = multiply(c, vf_power(c, E, m + n - 1), lie_bracket(c.unit, E))
    return linear_combination([(1.0, lhs), (-float(m - n), rhs)])


def power_bracket_defect(c: MultField, E: TensorField, n: int, m: int, pts) -> float:
    return _sup(power_bracket_tensor(c, E, n, m).values(as_points(pts)))


def frame_defects(c: MultField, fields: Sequence[TensorField], pts) -> list[float]:
    """Eventual-identity defect of each field in ``fields``."""
    return [eventual_identity_defect(c, f, pts) for f in fields]
