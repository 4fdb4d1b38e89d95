"""Tensor fields on a chart, evaluated as jets at batches of points.

A field of tensor shape ``s`` returns, for points of shape ``(P, n)``, a
:class:`Jet` whose coefficient array has shape ``(M, P, *s)``.  Derived
fields are built lazily from other fields; whenever a derivative is needed
the constituent is requested at one order higher, so every derivative is
exact up to rounding.

Index conventions used throughout the package:

* vector ``X[k]`` is ``X^k``;
* endomorphism ``A[k, j]`` is the ``k``-th component of ``A(d_j)``;
* a trailing derivative axis ``[..., i]`` is ``d_i``;
* multiplication ``c[k, i, j]`` is ``c^k_ij`` with ``d_i o d_j = c^k_ij d_k``;
* connection ``G[k, i, j]`` gives ``nabla_{d_i} d_j = G^k_ij d_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .jets import Jet, jeinsum, jinv

ComputeFn = Callable[[np.ndarray, int], Jet]


def as_points(pts) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(pts, dtype=float))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("points must have shape (P, n)")
    return arr


class TensorField:
    """Lazily evaluated tensor field with a per-(points, order) jet cache."""

    def __init__(self, n: int, shape: Sequence[int], compute: ComputeFn, name: str = ""):
        self.n = int(n)
        self.shape = tuple(shape)
        self._compute = compute
        self.name = name
        self._cache: dict[bytes, Jet] = {}

    def jet(self, pts, order: int) -> Jet:
        pts = as_points(pts)
        if pts.shape[1] != self.n:
            raise ValueError(f"field on a {self.n}-chart evaluated at {pts.shape[1]}-points")
        key = pts.tobytes() + pts.shape[0].to_bytes(4, "little")
        hit = self._cache.get(key)
        if hit is not None and hit.order >= order:
            return hit.truncate(order)
        jet = self._compute(pts, order)
        if jet.order < order:
            raise RuntimeError(f"field {self.name!r} returned order {jet.order} < {order}")
        jet = jet.truncate(order)
        expected = (pts.shape[0],) + self.shape
        if jet.shape != expected:
            raise RuntimeError(f"field {self.name!r} produced shape {jet.shape}, expected {expected}")
        self._cache[key] = jet
        return jet

    def values(self, pts) -> np.ndarray:
        return self.jet(pts, 0).value

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"TensorField{label}(n={self.n}, shape={self.shape})"

    # arithmetic sugar (same shape or scalar-valued operands)
    def __add__(self, other: "TensorField") -> "TensorField":
        return combine(self, other, 1.0, 1.0)

    def __sub__(self, other: "TensorField") -> "TensorField":
        return combine(self, other, 1.0, -1.0)

    def __neg__(self) -> "TensorField":
        return scale(self, -1.0)

    def __mul__(self, k: float) -> "TensorField":
        return scale(self, k)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# expression-backed fields


def expr_jet(e: ex.Expr, pts: np.ndarray, order: int, params: Mapping[str, float] | None = None) -> Jet:
    """Evaluate an expression tree as a jet at every point of ``pts``."""
    params = params or {}
    n = pts.shape[1]
    P = pts.shape[0]

    def rec(node: ex.Expr) -> Jet:
        if isinstance(node, ex.Num):
            return Jet.constant(np.full(P, node.value), n, order)
        if isinstance(node, ex.Param):
            if node.name not in params:
                raise ex.UnknownSymbolError(f"unbound parameter {node.name!r}", 0)
            return Jet.constant(np.full(P, float(params[node.name])), n, order)
        if isinstance(node, ex.Coord):
            if node.index >= n:
                raise ex.UnknownSymbolError(f"coordinate u{node.index + 1} out of range", 0)
            return Jet.variable(pts[:, node.index], node.index, n, order)
        if isinstance(node, ex.Neg):
            return -rec(node.arg)
        if isinstance(node, ex.Func):
            base = ex.log_of_square(node)
            if base is not None:
                # log(a^2) = 2 log|a|, smooth wherever a != 0
                b = rec(base)
                return (b * np.sign(b.value)).log() * 2.0
            a = rec(node.arg)
            return {
                "log": a.log,
                "exp": a.exp,
                "sqrt": a.sqrt,
                "sin": a.sin,
                "cos": a.cos,
                "tanh": a.tanh,
            }[node.name]()
        if isinstance(node, ex.BinOp):
            if node.op == "^":
                expo = node.right
                if not ex.free_coords(expo):
                    k = rec(expo).value
                    if np.ptp(k) == 0:
                        return rec(node.left).power(float(k[0]))
                return rec(node.left) ** rec(expo)
            a, b = rec(node.left), rec(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                return a / b
        raise TypeError(f"not an expression: {node!r}")

    return rec(e)


def expr_field(
    exprs, n: int, params: Mapping[str, float] | None = None, name: str = ""
) -> TensorField:
    """Tensor field whose components are expression trees (nested lists)."""
    arr = np.empty(np.shape(np.array(exprs, dtype=object)), dtype=object)
    flat_in = list(_flatten(exprs))
    flat = arr.reshape(-1)
    names = list(params or {})
    for i, e in enumerate(flat_in):
        flat[i] = ex.parse_expr(e, n, names) if isinstance(e, str) else ex.as_expr(e)
    shape = arr.shape
    bound = dict(params or {})

    def compute(pts, order):
        comps = [expr_jet(e, pts, order, bound).coef for e in arr.reshape(-1)]
        M = comps[0].shape[0] if comps else 1
        coef = np.stack(comps, axis=-1).reshape((M, pts.shape[0]) + shape)
        return Jet(coef, n, order)

    f = TensorField(n, shape, compute, name)
    f.exprs = arr  # type: ignore[attr-defined]
    return f


def _flatten(obj):
    if isinstance(obj, (list, tuple, np.ndarray)):
        for item in obj:
            yield from _flatten(item)
    else:
        yield obj


def constant_field(value, n: int, name: str = "") -> TensorField:
    value = np.asarray(value, dtype=float)

    def compute(pts, order):
        return Jet.constant(np.broadcast_to(value, (pts.shape[0],) + value.shape), n, order)

    return TensorField(n, value.shape, compute, name)


def zero_field(n: int, shape: Sequence[int], name: str = "") -> TensorField:
    return constant_field(np.zeros(tuple(shape)), n, name)


def coordinate_field(n: int, i: int) -> TensorField:
    """The coordinate vector field d_i (0-based)."""
    v = np.zeros(n)
    v[i] = 1.0
    return constant_field(v, n, f"d{i + 1}")


# ---------------------------------------------------------------------------
# combinators


def field_einsum(spec: str, *fields: TensorField, name: str = "") -> TensorField:
    """Pointwise Einstein summation of fields (see :func:`jeinsum`)."""
    n = fields[0].n
    lhs, out = spec.replace(" ", "").split("->")
    dims: dict[str, int] = {}
    for s, f in zip(lhs.split(","), fields):
        if len(s) != len(f.shape):
            raise ValueError(f"spec {s!r} does not match field shape {f.shape}")
        for ch, d in zip(s, f.shape):
            if dims.setdefault(ch, d) != d:
                raise ValueError(f"index {ch!r} has inconsistent sizes")
    shape = tuple(dims[ch] for ch in out)

    def compute(pts, order):
        return jeinsum(spec, *(f.jet(pts, order) for f in fields))

    return TensorField(n, shape, compute, name)


def combine(a: TensorField, b: TensorField, ka: float, kb: float, name: str = "") -> TensorField:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")

    def compute(pts, order):
        return a.jet(pts, order) * ka + b.jet(pts, order) * kb

    return TensorField(a.n, a.shape, compute, name)


def linear_combination(terms: Sequence[tuple[float, TensorField]], name: str = "") -> TensorField:
    shape = terms[0][1].shape
    for _, f in terms:
        if f.shape != shape:
            raise ValueError("shape mismatch in linear combination")

    def compute(pts, order):
        out = None
        for k, f in terms:
            j = f.jet(pts, order) * k
            out = j if out is None else out + j
        return out

    return TensorField(terms[0][1].n, shape, compute, name)


def scale(a: TensorField, k: float, name: str = "") -> TensorField:
    return TensorField(a.n, a.shape, lambda pts, order: a.jet(pts, order) * k, name)


def scalar_times(f: TensorField, a: TensorField, name: str = "") -> TensorField:
    """Product of a scalar-valued field with a tensor field."""
    if f.shape != ():
        raise ValueError("first factor must be scalar-valued")
    extra = (None,) * len(a.shape)

    def compute(pts, order):
        fj = f.jet(pts, order)
        fj = fj.map(lambda c: c[(Ellipsis,) + extra])
        return fj * a.jet(pts, order)

    return TensorField(a.n, a.shape, compute, name)


def partial(a: TensorField, name: str = "") -> TensorField:
    """All first partials; a trailing derivative axis is appended."""

    def compute(pts, order):
        return a.jet(pts, order + 1).grad()

    return TensorField(a.n, a.shape + (a.n,), compute, name)


def transpose(a: TensorField, axes: Sequence[int], name: str = "") -> TensorField:
    axes = tuple(axes)
    shape = tuple(a.shape[i] for i in axes)

    def compute(pts, order):
        return a.jet(pts, order).map(lambda c: np.transpose(c, (0, 1) + tuple(i + 2 for i in axes)))

    return TensorField(a.n, shape, compute, name)


def component(a: TensorField, index: tuple, name: str = "") -> TensorField:
    """Slice of a tensor field (basic numpy indexing on the tensor axes)."""
    probe = np.empty(a.shape)[index]

    def compute(pts, order):
        return a.jet(pts, order)[(slice(None),) + index]

    return TensorField(a.n, probe.shape, compute, name)


def stack_fields(fields: Sequence[TensorField], name: str = "") -> TensorField:
    """Stack same-shape fields along a new leading tensor axis."""
    shape = (len(fields),) + fields[0].shape

    def compute(pts, order):
        coefs = [f.jet(pts, order).coef for f in fields]
        return Jet(np.stack(coefs, axis=2), fields[0].n, order)

    return TensorField(fields[0].n, shape, compute, name)


def matrix_inverse(a: TensorField, name: str = "") -> TensorField:
    """Pointwise inverse of an (r, r)-valued field, with exact jets."""
    if len(a.shape) != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix_inverse needs a square matrix field")
    return TensorField(a.n, a.shape, lambda pts, order: jinv(a.jet(pts, order)), name)


def function_of(a: TensorField, fn: str, name: str = "") -> TensorField:
    """Apply one of exp/log/sqrt/sin/cos/tanh/reciprocal componentwise."""

    def compute(pts, order):
        return getattr(a.jet(pts, order), fn)()

    return TensorField(a.n, a.shape, compute, name)


# ---------------------------------------------------------------------------
# vector-field calculus


def lie_bracket(X: TensorField, Y: TensorField, name: str = "") -> TensorField:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i."""
    if X.shape != (X.n,) or Y.shape != (Y.n,):
        raise ValueError("lie_bracket expects vector fields")
    dX, dY = partial(X), partial(Y)

    def compute(pts, order):
        return jeinsum("j,ij->i", X.jet(pts, order), dY.jet(pts, order)) - jeinsum(
            "j,ij->i", Y.jet(pts, order), dX.jet(pts, order)
        )

    return TensorField(X.n, (X.n,), compute, name or "bracket")


def directional(X: TensorField, a: TensorField, name: str = "") -> TensorField:
    """X(a): derivative of every component of ``a`` along the vector field X."""
    da = partial(a)
    idx = "abcdefgh"[: len(a.shape)]

    def compute(pts, order):
        return jeinsum(f"{idx}z,z->{idx}", da.jet(pts, order), X.jet(pts, order))

    return TensorField(a.n, a.shape, compute, name)


# ---------------------------------------------------------------------------
# single-point jet inspection


@dataclass(frozen=True)
class JetValue:
    """Value and exact partial derivatives of a scalar field at one point."""

    value: float
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    third: np.ndarray | None = None
    order: int = 0


MAX_ORDER = 3


def eval_jet(f: TensorField, p, order: int) -> JetValue:
    """Exact derivatives of a scalar field up to ``order`` (at most 3) at ``p``."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    if f.shape != ():
        raise ValueError("eval_jet expects a scalar field")
    pts = as_points(np.asarray(p, dtype=float))
    if pts.shape[0] != 1:
        raise ValueError("eval_jet takes a single point")
    j = f.jet(pts, order)
    blocks = [j.derivative_tensor(k)[0] for k in range(order + 1)]
    return JetValue(
        value=float(blocks[0]),
        gradient=blocks[1] if order >= 1 else None,
        hessian=blocks[2] if order >= 2 else None,
        third=blocks[3] if order >= 3 else None,
        order=order,
    )


def scalar_field(text_or_expr, n: int, params: Sequence[str] | Mapping[str, float] = ()) -> TensorField:
    """Convenience: one expression (string or tree) as a scalar field."""
    bound = dict(params) if isinstance(params, Mapping) else {}
    names = list(bound) if bound else list(params)
    e = ex.parse_expr(text_or_expr, n, names) if isinstance(text_or_expr, str) else text_or_expr
    return expr_field(e, n, bound)


def vector_field(components, n: int, params: Mapping[str, float] | None = None, name: str = "") -> TensorField:
    """Vector field from component expressions (strings are parsed)."""
    names = list(params or {})
    comps = [ex.parse_expr(c, n, names) if isinstance(c, str) else ex.as_expr(c) for c in components]
    if len(comps) != n:
        raise ValueError(f"expected {n} components, got {len(comps)}")
    return expr_field(comps, n, params, name)


__all__ = [
    "TensorField",
    "JetValue",
    "as_points",
    "combine",
    "component",
    "constant_field",
    "coordinate_field",
    "directional",
    "eval_jet",
    "expr_field",
    "expr_jet",
    "field_einsum",
    "function_of",
    "lie_bracket",
    "linear_combination",
    "matrix_inverse",
    "partial",
    "scalar_field",
    "scalar_times",
    "scale",
    "stack_fields",
    "transpose",
    "vector_field",
    "zero_field",
]
