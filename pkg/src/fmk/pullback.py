"""F-manifolds induced by (D, A, u) data on a trivialized bundle over the chart.

Index conventions, with a frame s_a of the bundle:

* ``D[a, i, b]``: D_{d_i} s_b = D[a, i, b] s_a
* ``A[a, b, i]``: A_{d_i}(s_b) = A[a, b, i] s_a
* ``u[a]``: the section
* ``F[a, i]``: F(d_i) = A_{d_i}(u)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .algebra import MultField
from .chart_core.fields import (
    TensorField,
    as_points,
    expr_field,
    field_einsum,
    linear_combination,
    matrix_inverse,
    partial,
    transpose,
    vector_field,
)
from .chart_core.jets import COND_LIMIT
from .connections.core import SpecialFamily, sup
from .errors import ModelError, NotIsomorphism


@dataclass(frozen=True)
class BundleData:
    rank: int
    D: TensorField  # [a, i, b]
    A: TensorField  # [a, b, i]
    u: TensorField  # [a]
    name: str = ""

    def __post_init__(self):
        n, r = self.D.n, self.rank
        if self.D.shape != (r, n, r):
            raise ValueError(f"bundle connection must have shape {(r, n, r)}")
        if self.A.shape != (r, r, n):
            raise ValueError(f"Higgs form must have shape {(r, r, n)}")
        if self.u.shape != (r,):
            raise ValueError(f"section must have shape {(r,)}")

    @property
    def n(self) -> int:
        return self.D.n

    def with_pencil(self, z: float) -> "BundleData":
        """Same data with D replaced by D + z A."""
        D = linear_combination([(1.0, self.D), (float(z), transpose(self.A, (0, 2, 1)))], name="D+zA")
        return BundleData(self.rank, D, self.A, self.u, self.name)


def higgs_bundle(fam: SpecialFamily, u: TensorField, name: str = "higgs") -> BundleData:
    """Tangent bundle with D = the representative and A_X = X o (.)."""
    A = transpose(fam.mult.c, (0, 2, 1))  # A[a, b, i] = c^a_{ib}
    return BundleData(fam.n, fam.conn, A, u, name)


def _cov_section(b: BundleData) -> TensorField:
    """``[a, i]`` = (D_{d_i} u)^a."""
    return linear_combination([(1.0, partial(b.u)), (1.0, field_einsum("aib,b->ai", b.D, b.u))])


@dataclass(frozen=True)
class BundleConditions:
    flatness_of_A: float  # d^D A = 0
    commutativity: float  # [A_X, A_Y] = 0
    section: float  # A_Y(D_Z u) = A_Z(D_Y u)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.flatness_of_A, self.commutativity, self.section)


def bundle_conditions(b: BundleData, pts) -> BundleConditions:
    pts = as_points(pts)
    dA = partial(b.A)  # [a, b, j, i] = d_i A[a, b, j]
    DA = linear_combination(
        [
            (1.0, transpose(dA, (0, 1, 3, 2))),
            (1.0, field_einsum("aic,cbj->abij", b.D, b.A)),
            (-1.0, field_einsum("acj,cib->abij", b.A, b.D)),
        ]
    )  # [a, b, i, j] = (D_i A_j)[a, b]
    c1 = linear_combination([(1.0, DA), (-1.0, transpose(DA, (0, 1, 3, 2)))])
    AA = field_einsum("aci,cbj->abij", b.A, b.A)
    c2 = linear_combination([(1.0, AA), (-1.0, transpose(AA, (0, 1, 3, 2)))])
    Du = _cov_section(b)
    AD = field_einsum("abj,bi->aij", b.A, Du)
    c3 = linear_combination([(1.0, AD), (-1.0, transpose(AD, (0, 2, 1)))])
    return BundleConditions(sup(c1.values(pts)), sup(c2.values(pts)), sup(c3.values(pts)))


def bundle_map_field(b: BundleData) -> TensorField:
    return field_einsum("abi,b->ai", b.A, b.u, name="F")


@dataclass(frozen=True)
class BundleMap:
    F: np.ndarray
    invertible: bool
    condition: float


def bundle_map(b: BundleData, p) -> BundleMap:
    """F(X) = A_X(u) at one point, flagged non-invertible beyond the condition limit."""
    F = bundle_map_field(b).values(as_points(p))[0]
    if F.shape[0] != F.shape[1]:
        return BundleMap(F, False, float("inf"))
    cond = float(np.linalg.cond(F))
    return BundleMap(F, bool(np.isfinite(cond) and cond <= COND_LIMIT), cond)


def _require_isomorphism(b: BundleData, pts) -> None:
    if b.rank != b.n:
        raise NotIsomorphism(f"bundle rank {b.rank} differs from dimension {b.n}")
    if pts is None:
        return
    F = bundle_map_field(b).values(as_points(pts))
    cond = np.linalg.cond(F)
    worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
    if worst > COND_LIMIT:
        raise NotIsomorphism(f"F(X) = A_X(u) is not invertible (condition number {worst:.3e})")


def induced_multiplication(b: BundleData, pts=None) -> MultField:
    """X o Y = F^{-1}(A_X A_Y u) with unit F^{-1}(u)."""
    _require_isomorphism(b, pts)
    Finv = matrix_inverse(bundle_map_field(b))
    c = field_einsum("ka,aci,cbj,b->kij", Finv, b.A, b.A, b.u, name="induced c")
    unit = field_einsum("ka,a->k", Finv, b.u, name="induced e")
    return MultField(c, unit, name=f"{b.name}-induced" if b.name else "induced")


def pullback_connection(b: BundleData, z: float = 0.0, pts=None) -> TensorField:
    """Christoffel symbols of F^*(D + z A): F^{-1} D_X(F(Y))."""
    _require_isomorphism(b, pts)
    data = b.with_pencil(z) if z else b
    F = bundle_map_field(b)
    Finv = matrix_inverse(F)
    DF = linear_combination([(1.0, partial(F)), (1.0, field_einsum("aib,bj->aji", data.D, F))])  # [a, j, i]
    return field_einsum("ka,aji->kij", Finv, DF, name="F*D")


def pullback_family(b: BundleData, z: float = 0.0, pts=None) -> SpecialFamily:
    return SpecialFamily(pullback_connection(b, z, pts), induced_multiplication(b, pts), name="pullback")


def rel_u_defect(b: BundleData, pts) -> float:
    """Residual of A_{X o Y} = A_X A_Y on the coordinate frame."""
    pts = as_points(pts)
    m = induced_multiplication(b)
    lhs = field_einsum("abk,kij->abij", b.A, m.c)
    rhs = field_einsum("aci,cbj->abij", b.A, b.A)
    return sup(lhs.values(pts) - rhs.values(pts))


def identity_defect(b: BundleData, pts) -> float:
    """Residual of A_{F^{-1}(v)}(u) = v over the bundle frame."""
    pts = as_points(pts)
    Finv = matrix_inverse(bundle_map_field(b))
    img = field_einsum("abi,b,iv->av", b.A, b.u, Finv)
    return sup(img.values(pts) - np.eye(b.rank)[None])


def pencil_defect(b: BundleData, z: float, pts) -> float:
    """Residual of F^*(D + z A) = F^*D + z (o)."""
    pts = as_points(pts)
    m = induced_multiplication(b)
    lhs = pullback_connection(b, z).values(pts)
    rhs = pullback_connection(b, 0.0).values(pts) + z * m.c.values(pts)
    return sup(lhs - rhs)


# ---------------------------------------------------------------------------
# model-file support


def bundle_from_spec(spec: Mapping, model, name: str) -> BundleData:
    n = model.n
    kind = spec.get("kind", "higgs")
    if kind == "higgs":
        fam_name = spec["connection"]
        if fam_name not in model.families:
            raise ModelError(f"bundle {name!r} refers to unknown connection {fam_name!r}")
        u = vector_field(spec["section"], n, model.params, name=f"{name}.u")
        return higgs_bundle(model.families[fam_name], u, name)
    if kind == "explicit":
        r = int(spec["rank"])
        D = expr_field(spec["D"], n, model.params, name=f"{name}.D")
        A = expr_field(spec["A"], n, model.params, name=f"{name}.A")
        if len(spec["section"]) != r:
            raise ModelError(f"bundle {name!r}: section needs {r} components")
        u = expr_field(list(spec["section"]), n, model.params, name=f"{name}.u")
        try:
            return BundleData(r, D, A, u, name)
        except ValueError as err:
            raise ModelError(f"bundle {name!r}: {err}") from err
    raise ModelError(f"unknown bundle kind {kind!r}")
