"""Truncated multivariate Taylor polynomials ("jets"), vectorized over arrays.

A :class:`Jet` of order ``k`` in ``n`` variables stores the Taylor
coefficients ``c_alpha`` of ``f(x0 + h) = sum_alpha c_alpha h^alpha`` for all
multi-indices ``|alpha| <= k``.  Coefficients live in an array of shape
``(M, *shape)`` where ``M`` counts the monomials and ``shape`` is an arbitrary
trailing block (typically ``(points, *tensor_indices)``).  Monomials are
ordered by degree first, so the coefficients of a lower-order truncation are
a prefix of the array.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from ..errors import DomainError, NonInvertible

COND_LIMIT = 1e8


# ---------------------------------------------------------------------------
# monomial bookkeeping


@lru_cache(maxsize=None)
def monomials(n: int, order: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of all monomials of degree <= order, graded."""
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(n: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: k for k, alpha in enumerate(monomials(n, order))}


@lru_cache(maxsize=None)
def _product_table(n: int, order: int):
    """Pairs (a, b) of monomials whose product has degree <= order.

    Returned sorted by the index of the product so that a segmented sum
    (``np.add.reduceat``) assembles the result.
    """
    mons = monomials(n, order)
    index = monomial_index(n, order)
    rows = []
    for ia, a in enumerate(mons):
        da = sum(a)
        for ib, b in enumerate(mons):
            if da + sum(b) > order:
                continue
            m = tuple(x + y for x, y in zip(a, b))
            rows.append((index[m], ia, ib))
    rows.sort()
    im = np.array([r[0] for r in rows], dtype=np.intp)
    ia = np.array([r[1] for r in rows], dtype=np.intp)
    ib = np.array([r[2] for r in rows], dtype=np.intp)
    starts = np.flatnonzero(np.r_[True, im[1:] != im[:-1]])
    return ia, ib, starts


@lru_cache(maxsize=None)
def _derivative_table(n: int, order: int, i: int):
    """For d/dx_i: source index and multiplicity for each target monomial."""
    src_index = monomial_index(n, order)
    targets = monomials(n, order - 1)
    src = np.empty(len(targets), dtype=np.intp)
    mult = np.empty(len(targets))
    for t, beta in enumerate(targets):
        up = list(beta)
        up[i] += 1
        src[t] = src_index[tuple(up)]
        mult[t] = up[i]
    return src, mult


@lru_cache(maxsize=None)
def _factorials(n: int, order: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(a) for a in alpha) for alpha in monomials(n, order)])


# ---------------------------------------------------------------------------


class Jet:
    """Truncated Taylor expansion with array-valued coefficients."""

    __slots__ = ("coef", "n", "order")
    __array_priority__ = 1000

    def __init__(self, coef: np.ndarray, n: int, order: int):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[0] != len(monomials(n, order)):
            raise ValueError(
                f"coefficient block has {coef.shape[0]} rows, expected "
                f"{len(monomials(n, order))} for n={n}, order={order}"
            )
        self.coef = coef
        self.n = n
        self.order = order

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, n: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros((len(monomials(n, order)),) + value.shape)
        coef[0] = value
        return cls(coef, n, order)

    @classmethod
    def variable(cls, values, i: int, n: int, order: int) -> "Jet":
        """The coordinate function x_i expanded around ``values``."""
        jet = cls.constant(values, n, order)
        if order >= 1:
            alpha = [0] * n
            alpha[i] = 1
            jet.coef[monomial_index(n, order)[tuple(alpha)]] = 1.0
        return jet

    # -- basic properties ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coef[: len(monomials(self.n, order))], self.n, order)

    def map(self, fn) -> "Jet":
        """Apply a linear, coefficient-wise array map (reshape, slicing, sums)."""
        return Jet(fn(self.coef), self.n, self.order)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coef[(slice(None),) + idx], self.n, self.order)

    def __repr__(self) -> str:
        return f"Jet(n={self.n}, order={self.order}, shape={self.shape})"

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Jet | np.ndarray":
        if isinstance(other, Jet):
            if other.n != self.n:
                raise ValueError("jets over different numbers of variables")
            return other
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            a, b = self.truncate(k), other.truncate(k)
            return Jet(a.coef + b.coef, self.n, k)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coef = np.broadcast_to(self.coef, (self.coef.shape[0],) + shape).copy()
        coef[0] = coef[0] + other
        return Jet(coef, self.n, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef, self.n, self.order)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return _elementwise_product(self, other)
        return Jet(self.coef * other, self.n, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.coef / other, self.n, self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return (self.log() * exponent).exp()
        return self.power(float(exponent))

    # -- scalar functions via Taylor composition -----------------------------
    def _compose(self, derivs: Sequence[np.ndarray]) -> "Jet":
        """g(self) given g^(k)(value) for k = 0..order."""
        h = Jet(self.coef.copy(), self.n, self.order)
        h.coef[0] = 0.0
        coef = np.zeros_like(self.coef)
        coef[0] = derivs[0]
        out = Jet(coef, self.n, self.order)
        term = None
        for k in range(1, self.order + 1):
            term = h if term is None else term * h
            out = out + term * (derivs[k] / math.factorial(k))
        return out

    def exp(self) -> "Jet":
        v = np.exp(self.value)
        return self._compose([v] * (self.order + 1))

    def log(self) -> "Jet":
        x = self.value
        if np.any(x <= 0):
            raise DomainError("log of a non-positive value")
        derivs = [np.log(x)]
        for k in range(1, self.order + 1):
            derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / x**k)
        return self._compose(derivs)

    def power(self, a: float) -> "Jet":
        x = self.value
        if float(a).is_integer() and a >= 0:
            # exact repeated multiplication, valid for any sign of x
            out = Jet.constant(np.ones(self.shape), self.n, self.order)
            for _ in range(int(a)):
                out = out * self
            return out
        if float(a).is_integer():
            if np.any(x == 0):
                raise DomainError("negative power of zero")
            return self.reciprocal().power(-a)
        if np.any(x <= 0):
            raise DomainError(f"non-integer power {a} of a non-positive value")
        derivs = []
        coeff = 1.0
        for k in range(self.order + 1):
            derivs.append(coeff * x ** (a - k))
            coeff *= a - k
        return self._compose(derivs)

    def reciprocal(self) -> "Jet":
        x = self.value
        if np.any(x == 0):
            raise DomainError("division by zero")
        derivs = [(-1) ** k * math.factorial(k) / x ** (k + 1) for k in range(self.order + 1)]
        return self._compose(derivs)

    def sqrt(self) -> "Jet":
        if np.any(self.value <= 0):
            raise DomainError("sqrt of a non-positive value (derivatives blow up at 0)")
        return self.power(0.5)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [s, c, -s, -c]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [c, -s, -c, s]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def tanh(self) -> "Jet":
        t = np.tanh(self.value)
        # d/dx P(tanh) = P'(tanh) (1 - tanh^2)
        poly = np.polynomial.Polynomial([0.0, 1.0])
        sech2 = np.polynomial.Polynomial([1.0, 0.0, -1.0])
        derivs = []
        for _ in range(self.order + 1):
            derivs.append(poly(t))
            poly = poly.deriv() * sech2
        return self._compose(derivs)

    # -- differentiation --------------------------------------------------------
    def d(self, i: int) -> "Jet":
        """Partial derivative in variable ``i``; the order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, mult = _derivative_table(self.n, self.order, i)
        coef = self.coef[src] * mult.reshape((-1,) + (1,) * len(self.shape))
        return Jet(coef, self.n, self.order - 1)

    def grad(self) -> "Jet":
        """All first partials, stacked on a new trailing axis."""
        parts = [self.d(i).coef for i in range(self.n)]
        return Jet(np.stack(parts, axis=-1), self.n, self.order - 1)

    def derivative_tensor(self, k: int) -> np.ndarray:
        """The symmetric tensor of k-th partial derivatives at the base point.

        Leading axes are ``self.shape``; the k derivative axes come last.
        """
        if k > self.order:
            raise ValueError(f"jet of order {self.order} has no derivatives of order {k}")
        n = self.n
        index = monomial_index(n, self.order)
        fact = _factorials(n, self.order)
        out = np.empty(self.shape + (n,) * k)
        for combo in np.ndindex(*((n,) * k)):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            m = index[tuple(alpha)]
            out[(Ellipsis,) + combo] = self.coef[m] * fact[m]
        return out


def _elementwise_product(a: Jet, b: Jet) -> Jet:
    k = min(a.order, b.order)
    a, b = a.truncate(k), b.truncate(k)
    ia, ib, starts = _product_table(a.n, k)
    prod = a.coef[ia] * b.coef[ib]
    return Jet(np.add.reduceat(prod, starts, axis=0), a.n, k)


# ---------------------------------------------------------------------------
# tensor contraction


def _parse_spec(spec: str, count: int):
    if "->" not in spec:
        raise ValueError("jeinsum needs an explicit output (use '->')")
    lhs, out = spec.replace(" ", "").split("->")
    ins = lhs.split(",")
    if len(ins) != count:
        raise ValueError(f"spec lists {len(ins)} operands, got {count}")
    for s in ins + [out]:
        if any(ch in "ZP" or not ch.isalpha() for ch in s):
            raise ValueError("index letters must be alphabetic and exclude Z, P")
    return ins, out


def _pair_contract(sa: str, a: Jet, sb: str, b: Jet, so: str) -> Jet:
    k = min(a.order, b.order)
    a, b = a.truncate(k), b.truncate(k)
    ia, ib, starts = _product_table(a.n, k)
    lead_a = a.coef.ndim - 1 - len(sa)
    lead_b = b.coef.ndim - 1 - len(sb)
    if lead_a != 1 or lead_b != 1:
        raise ValueError("jeinsum operands must carry exactly one leading point axis")
    prod = np.einsum(f"ZP{sa},ZP{sb}->ZP{so}", a.coef[ia], b.coef[ib], optimize=True)
    return Jet(np.add.reduceat(prod, starts, axis=0), a.n, k)


def jeinsum(spec: str, *operands: Jet) -> Jet:
    """Einstein summation over jets whose shape is ``(points, *indices)``.

    ``spec`` names only the tensor indices; the point axis is implicit and
    shared.  Operands are contracted pairwise from left to right.
    """
    ins, out = _parse_spec(spec, len(operands))
    if len(operands) == 1:
        a = operands[0]
        return a.map(lambda c: np.einsum(f"ZP{ins[0]}->ZP{out}", c))
    cur_s, cur = ins[0], operands[0]
    for pos in range(1, len(operands)):
        nxt_s, nxt = ins[pos], operands[pos]
        later = set(out).union(*ins[pos + 1 :]) if pos + 1 < len(ins) else set(out)
        keep = "".join(dict.fromkeys(ch for ch in cur_s + nxt_s if ch in later))
        if pos == len(operands) - 1:
            keep = out
        cur = _pair_contract(cur_s, cur, nxt_s, nxt, keep)
        cur_s = keep
    return cur


def jinv(m: Jet) -> Jet:
    """Matrix inverse of a jet with shape ``(points, r, r)``.

    Uses the Neumann expansion around the inverse of the base-point matrix,
    which is exact to the jet order because the perturbation has no constant
    term.
    """
    m0 = m.value
    cond = np.linalg.cond(m0)
    if not np.all(np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
        raise NonInvertible(f"matrix condition number {worst:.3e} exceeds {COND_LIMIT:.0e}")
    inv0 = np.linalg.inv(m0)
    inv0_jet = Jet.constant(inv0, m.n, m.order)
    if m.order == 0:
        return inv0_jet
    pert = Jet(m.coef.copy(), m.n, m.order)
    pert.coef[0] = 0.0
    step = -jeinsum("ab,bc->ac", inv0_jet, pert)
    total = inv0_jet
    term = inv0_jet
    for _ in range(m.order):
        term = jeinsum("ab,bc->ac", step, term)
        total = total + term
    return total


def stack(jets: Sequence[Jet], axis: int) -> Jet:
    """Stack jets of identical shape along a new tensor axis (0 = first tensor axis after points)."""
    k = min(j.order for j in jets)
    coefs = [j.truncate(k).coef for j in jets]
    return Jet(np.stack(coefs, axis=axis + 2 if axis >= 0 else axis), jets[0].n, k)
