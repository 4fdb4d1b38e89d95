"""Chart domains (a box minus thin neighbourhoods of exclusion loci) and sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from ..errors import DomainError, SamplingError
from . import expr as ex
from .fields import expr_jet

DEFAULT_MARGIN = 0.1


@dataclass(frozen=True)
class Exclusion:
    """Points with ``|expr| <= margin`` are inadmissible."""

    expr: ex.Expr
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("exclusion margin must be non-negative")


@dataclass(frozen=True)
class ChartDomain:
    n: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    exclusions: tuple[Exclusion, ...] = ()
    params: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if len(self.lo) != self.n or len(self.hi) != self.n:
            raise ValueError("box bounds must have one entry per coordinate")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError(f"empty box side [{a}, {b}]")

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], exclusions=(), params=None) -> "ChartDomain":
        parsed = []
        names = list((params or {}).keys())
        for item in exclusions:
            if isinstance(item, Exclusion):
                parsed.append(item)
                continue
            if isinstance(item, tuple):
                e, margin = item
            else:
                e, margin = item, DEFAULT_MARGIN
            if isinstance(e, str):
                e = ex.parse_expr(e, len(lo), names)
            parsed.append(Exclusion(e, float(margin)))
        return cls(
            len(lo),
            tuple(float(x) for x in lo),
            tuple(float(x) for x in hi),
            tuple(parsed),
            tuple(sorted((params or {}).items())),
        )

    def admissible(self, pts) -> np.ndarray:
        """Boolean mask of points inside the box and clear of every exclusion."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo, hi = np.array(self.lo), np.array(self.hi)
        ok = np.all((pts >= lo) & (pts <= hi), axis=1)
        params = dict(self.params)
        for exc in self.exclusions:
            try:
                vals = expr_jet(exc.expr, pts, 0, params).value
            except DomainError:
                vals = np.array([_safe_value(exc.expr, p, params) for p in pts])
            ok &= np.isfinite(vals) & (np.abs(vals) > exc.margin)
        return ok


def _safe_value(e: ex.Expr, p: np.ndarray, params) -> float:
    try:
        return float(expr_jet(e, p[None, :], 0, params).value[0])
    except DomainError:
        return float("nan")


MAX_ROUNDS = 64


def sample_points(domain: ChartDomain, count: int, seed: int) -> np.ndarray:
    """Seeded, scrambled Halton points in the box, rejecting inadmissible ones.

    Returns an array of shape ``(count, n)``.  Identical arguments give
    identical output.
    """
    if count < 1:
        raise ValueError("count must be positive")
    sampler = qmc.Halton(d=domain.n, scramble=True, seed=np.random.default_rng(seed))
    lo, hi = np.array(domain.lo), np.array(domain.hi)
    kept: list[np.ndarray] = []
    have = 0
    batch = max(2 * count, 16)
    for _ in range(MAX_ROUNDS):
        raw = qmc.scale(sampler.random(batch), lo, hi)
        good = raw[domain.admissible(raw)]
        kept.append(good)
        have += len(good)
        if have >= count:
            return np.concatenate(kept)[:count]
    raise SamplingError(
        f"only {have} admissible points after {MAX_ROUNDS * batch} draws; domain too constrained"
    )
