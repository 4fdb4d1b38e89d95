"""Running checks and assembling deterministic JSON reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..chart_core.domain import sample_points
from ..errors import FmkError
from ..models import Model
from .suites import Check, checks_for

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class CheckReport:
    name: str
    suite: str
    anchor: str
    points: int
    seed: int
    max_residual: float | None
    mean_residual: float | None
    tolerance: float
    status: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "suite": self.suite,
            "anchor": self.anchor,
            "points": self.points,
            "seed": self.seed,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "tolerance": self.tolerance,
            "status": self.status,
            "details": self.details,
        }


@dataclass(frozen=True)
class SuiteReport:
    model: str
    suite: str
    seed: int
    points: int
    tolerance: float
    checks: tuple[CheckReport, ...]
    wall_clock: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def as_dict(self) -> dict:
        n_pass = sum(c.status == "pass" for c in self.checks)
        out: dict[str, Any] = {
            "model": self.model,
            "suite": self.suite,
            "seed": self.seed,
            "points": self.points,
            "tolerance": self.tolerance,
            "checks": [c.as_dict() for c in self.checks],
            "summary": {
                "checks": len(self.checks),
                "passed": n_pass,
                "failed": len(self.checks) - n_pass,
                "status": "pass" if self.passed else "fail",
            },
        }
        if self.wall_clock is not None:
            out["wall_clock_seconds"] = self.wall_clock
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, allow_nan=False) + "\n"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def resolve_tolerance(check: Check, model: Model, tol: float) -> float:
    if check.name in model.tolerances:
        return float(model.tolerances[check.name])
    return float(check.tol) if check.tol is not None else float(tol)


def run_check(check: Check, model: Model, pts: np.ndarray, seed: int, tol: float) -> CheckReport:
    t = resolve_tolerance(check, model, tol)
    try:
        out = check.run(pts, seed)
        r = np.asarray(out.residuals, dtype=float)
        mx = float(np.max(r)) if r.size else 0.0
        mean = float(np.mean(r)) if r.size else 0.0
        details = _clean(out.details)
        ok = math.isfinite(mx) and mx <= t
    except (FmkError, ArithmeticError, ValueError) as err:
        mx = mean = float("nan")
        details = {"error": f"{type(err).__name__}: {err}"}
        ok = False
    return CheckReport(
        name=check.name,
        suite=check.suite,
        anchor=check.anchor,
        points=int(len(pts)),
        seed=int(seed),
        max_residual=_clean(mx),
        mean_residual=_clean(mean),
        tolerance=t,
        status="pass" if ok else "fail",
        details=details,
    )


def run_suite(model: Model, suite: str, seed: int = 42, points: int = 100, tol: float = DEFAULT_TOL) -> SuiteReport:
    """Run every check of ``suite`` at ``points`` seeded sample points."""
    checks = checks_for(model, suite)
    pts = sample_points(model.domain, points, seed)
    reports = tuple(run_check(c, model, pts, seed, tol) for c in checks)
    return SuiteReport(model.name, suite, int(seed), int(points), float(tol), reports)
