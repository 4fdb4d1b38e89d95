"""Built-in geometries and the builders that turn model descriptions into them.

A model description is a plain dict in the model-file layout (see the README).
Built-in models are stored in that form, so exporting one and loading it back
goes through exactly the same code path.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .algebra import (
    EVENTUAL_IDENTITY_GATE,
    MultField,
    algebra_defects,
    eventual_identity_defect,
    hm_defect,
    lie_bracket,
)
from .chart_core import expr as ex
from .chart_core.domain import ChartDomain, sample_points
from .chart_core.fields import TensorField, as_points, expr_field, expr_jet, vector_field, zero_field
from .connections.core import SpecialFamily, compat_defect, torsion_defect
from .connections.legendre import legendre_defect
from .errors import DomainError, ExprError, FmkError, ModelError, NonInvertible

LOAD_GATE = 1e-9
GATE_POINTS = 64
GATE_SEED = 0
PAIRING_VARIATION = 1e-10
DISTINCT_MARGIN = 0.05


@dataclass(frozen=True)
class Model:
    """A validated geometry together with the named ingredients the checks use."""

    name: str
    domain: ChartDomain
    mult: MultField
    params: Mapping[str, float] = field(default_factory=dict)
    eventual_identities: Mapping[str, TensorField] = field(default_factory=dict)
    identity_tolerances: Mapping[str, float] = field(default_factory=dict)
    families: Mapping[str, SpecialFamily] = field(default_factory=dict)
    legendre_fields: Mapping[str, TensorField] = field(default_factory=dict)
    legendre_family: Mapping[str, str] = field(default_factory=dict)
    flat_candidates: Mapping[str, TensorField] = field(default_factory=dict)
    flat_shift_vectors: Mapping[str, TensorField] = field(default_factory=dict)
    bundles: Mapping[str, object] = field(default_factory=dict)
    tolerances: Mapping[str, float] = field(default_factory=dict)
    suites: tuple[str, ...] = ()
    kind: str = "structure"
    description: Mapping | None = None

    @property
    def n(self) -> int:
        return self.mult.n

    def gate_points(self) -> np.ndarray:
        return sample_points(self.domain, GATE_POINTS, GATE_SEED)


# ---------------------------------------------------------------------------
# multiplications


def semisimple_mult(n: int) -> MultField:
    """Canonical coordinates: d_i o d_j = delta_ij d_i, unit sum of d_i."""
    c = np.zeros((n, n, n))
    for i in range(n):
        c[i, i, i] = 1.0
    grid = c.tolist()
    return MultField(expr_field(grid, n, name="c"), expr_field([1.0] * n, n, name="e"), name="semisimple")


def _exprs(texts, n: int, names: Sequence[str]):
    if isinstance(texts, (list, tuple)):
        return [_exprs(t, n, names) for t in texts]
    if isinstance(texts, ex.Expr):
        return texts
    if isinstance(texts, (int, float)):
        return ex.num(float(texts))
    return ex.parse_expr(texts, n, names)


def _gate_pts(domain: ChartDomain) -> np.ndarray:
    return sample_points(domain, GATE_POINTS, GATE_SEED)


def semisimple_model(
    n: int,
    f_exprs: Sequence,
    domain: ChartDomain,
    params: Mapping[str, float] | None = None,
    name: str = "semisimple",
) -> Model:
    """Semi-simple F-manifold in canonical coordinates with E = sum f_i(u^i) d_i."""
    params = dict(params or {})
    E = _semisimple_identity(n, f_exprs, domain, params, "E")
    return Model(name, domain, semisimple_mult(n), params, {"E": E}, kind="semisimple")


def _semisimple_identity(n, f_exprs, domain, params, label) -> TensorField:
    if len(f_exprs) != n:
        raise ModelError(f"eventual identity {label!r} needs {n} components")
    comps = _exprs(list(f_exprs), n, list(params))
    for i, e in enumerate(comps):
        stray = ex.free_coords(e) - {i}
        if stray:
            raise ModelError(
                f"component {i + 1} of {label!r} depends on u{min(stray) + 1}; canonical identities "
                "need f_i(u^i)",
                gate="canonical-form",
            )
    E = expr_field(comps, n, params, name=label)
    vals = E.values(_gate_pts(domain))
    worst = float(np.min(np.abs(vals)))
    crosses = bool(np.any((np.min(vals, axis=0) < 0) & (np.max(vals, axis=0) > 0)))
    if crosses or worst <= 1e-12:
        raise ModelError(f"component of {label!r} vanishes on the domain", gate="invertibility", residual=worst)
    return E


def semisimple_connection(
    model: Model, X0_exprs: Sequence, diag_exprs: Sequence | None = None, margin: float = DISTINCT_MARGIN
) -> SpecialFamily:
    """Connection for which X0 is a Legendre field, in canonical coordinates.

    Off-diagonal symbols follow from X0 alone; the symbols G^i_ii are free and
    given by ``diag_exprs`` (zero when omitted).
    """
    n = model.n
    names = list(model.params)
    X = _exprs(list(X0_exprs), n, names)
    diag = _exprs(list(diag_exprs or [0.0] * n), n, names)
    _check_distinct(X, model, margin)
    G = [[[ex.num(0.0) for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        G[i][i][i] = diag[i]
        for j in range(n):
            if i == j:
                continue
            # G^j_ii from the Legendre condition, then G^j_ij = G^j_ji = -G^j_ii
            g = ex.div(ex.diff(X[j], i), ex.sub(X[j], X[i]))
            G[j][i][i] = g
            G[j][i][j] = ex.neg(g)
            G[j][j][i] = ex.neg(g)
    conn = expr_field(G, n, model.params, name="semisimple connection")
    return SpecialFamily(conn, model.mult, name="semisimple")


def _check_distinct(X, model: Model, margin: float) -> None:
    pts = model.gate_points()
    vals = expr_field(X, model.n, model.params).values(pts)
    n = model.n
    for i in range(n):
        for j in range(i + 1, n):
            gap = vals[:, i] - vals[:, j]
            crosses = np.min(gap) < 0 < np.max(gap)
            if crosses or np.min(np.abs(gap)) <= margin:
                raise ModelError(
                    f"components {i + 1} and {j + 1} of X0 come within {margin} of each other",
                    gate="distinct-components",
                    residual=float(np.min(np.abs(gap))),
                )


def prepotential_model(
    F_expr,
    params: Mapping[str, float] | None,
    domain: ChartDomain,
    euler: Sequence | None = None,
    name: str = "prepotential",
) -> Model:
    """Flat-coordinate model c^k_ij = eta^{kl} d_l d_i d_j F with unit d_1 and flat family."""
    params = dict(params or {})
    n = domain.n
    F = _exprs(F_expr, n, list(params))
    mult = prepotential_mult(F, n, params, domain)
    fams = {"flat": SpecialFamily(zero_field(n, (n, n, n), "flat"), mult, name="flat")}
    ids = {}
    if euler is not None:
        E = expr_field(_exprs(list(euler), n, list(params)), n, params, name="E")
        _gate("eventual-identity:E", eventual_identity_defect(mult, E, _gate_pts(domain)), LOAD_GATE)
        ids["E"] = E
    return Model(name, domain, mult, params, ids, families=fams, kind="prepotential")


def third_derivatives(F: ex.Expr, n: int):
    d1 = [ex.diff(F, i) for i in range(n)]
    d2 = [[ex.diff(d1[i], j) for j in range(n)] for i in range(n)]
    return [[[ex.diff(d2[l][i], j) for j in range(n)] for i in range(n)] for l in range(n)]


def prepotential_mult(F: ex.Expr, n: int, params: Mapping[str, float], domain: ChartDomain) -> MultField:
    T = third_derivatives(F, n)
    eta_field = expr_field(T[0], n, params)
    pts = _gate_pts(domain)
    samples = eta_field.values(pts)
    eta = samples[0]
    spread = float(np.max(np.abs(samples - eta)))
    if spread > PAIRING_VARIATION:
        raise ModelError("pairing d1 di dj F is not constant", gate="constant-pairing", residual=spread)
    if np.linalg.cond(eta) > 1e8:
        raise ModelError("pairing d1 di dj F is singular", gate="nondegenerate-pairing")
    eta_inv = np.linalg.inv(eta)
    c = []
    for k in range(n):
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc: ex.Expr = ex.num(0.0)
                for l in range(n):
                    if abs(eta_inv[k, l]) > 1e-15:
                        acc = ex.add(acc, ex.mul(ex.num(float(eta_inv[k, l])), T[l][i][j]))
                row.append(acc)
            rows.append(row)
        c.append(rows)
    unit = [1.0] + [0.0] * (n - 1)
    return MultField(expr_field(c, n, params, name="c"), expr_field(unit, n, name="e"), name="prepotential")


# ---------------------------------------------------------------------------
# the kappa-deformed example and its series eventual identity

KAPPA_PREPOTENTIAL = "1/2*t1^2*t2 + 1/4*t2^2*log(t2^2) - kappa/6*t1^3"
KAPPA_EULER = ("t1", "2*t2")

# Coefficients of kappa^0, kappa^1, kappa^2, transcribed as published.
PUBLISHED_SERIES = {
    "f": ("1/2*log(t2)", "-1/(2*t2^(1/2))", "1/(4*t2)"),
    "g": ("t2^(1/2)/2", "-1/2", "-1/(8*t2^(3/2))"),
}
# The solution of the two ODEs with integration constant 1 in the leading g term.
SERIES = {
    "f": ("1/2*log(t2)", "-1/(2*t2^(1/2))", "1/(4*t2)"),
    "g": ("t2^(1/2)", "-1/2", "-1/(8*t2^(1/2))"),
}
MAX_SERIES_ORDER = 2


@dataclass(frozen=True)
class SeriesVectorField:
    """E + kappa * sum_k kappa^k (f_k d_1 + g_k d_2), with kappa-free coefficients."""

    base: tuple[ex.Expr, ex.Expr]
    f: tuple[ex.Expr, ...]
    g: tuple[ex.Expr, ...]
    parameter: str = "kappa"

    def __post_init__(self):
        for e in (*self.f, *self.g):
            if self.parameter in ex.free_params(e):
                raise ValueError("series coefficients must not depend on the expansion parameter")

    @classmethod
    def from_strings(cls, series=SERIES, base=KAPPA_EULER, parameter: str = "kappa") -> "SeriesVectorField":
        parse = lambda s: ex.parse_expr(s, 2)  # noqa: E731
        return cls(
            (parse(base[0]), parse(base[1])),
            tuple(parse(s) for s in series["f"]),
            tuple(parse(s) for s in series["g"]),
            parameter,
        )

    @property
    def max_order(self) -> int:
        return len(self.f) - 1

    def _partial_sum(self, coeffs, order: int) -> ex.Expr:
        k = ex.Param(self.parameter)
        acc: ex.Expr = ex.num(0.0)
        for p in range(order + 1):
            term = coeffs[p] if p == 0 else ex.mul(ex.power(k, ex.num(p)), coeffs[p])
            acc = ex.add(acc, term)
        return acc

    def f_sum(self, order: int) -> ex.Expr:
        return self._partial_sum(self.f, order)

    def g_sum(self, order: int) -> ex.Expr:
        return self._partial_sum(self.g, order)

    def components(self, order: int) -> list[ex.Expr]:
        """Truncated components, with the parameter left symbolic."""
        if not 0 <= order <= self.max_order:
            raise ValueError(f"truncation order must be in 0..{self.max_order}")
        k = ex.Param(self.parameter)
        return [
            ex.add(self.base[0], ex.mul(k, self.f_sum(order))),
            ex.add(self.base[1], ex.mul(k, self.g_sum(order))),
        ]

    def field(self, kappa: float, order: int) -> TensorField:
        return expr_field(self.components(order), 2, {self.parameter: kappa}, name="E_kappa")


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    order: int
    ode_residuals: tuple[float, float]
    eventual_identity: float
    unit_bracket: float
    field: TensorField

    @property
    def ode_residual(self) -> float:
        return max(self.ode_residuals)


def kappa_domain(kappa: float) -> ChartDomain:
    return ChartDomain.box([-1.0, 0.2], [1.0, 3.0], params={"kappa": kappa})


def kappa_mult(kappa: float) -> MultField:
    F = ex.parse_expr(KAPPA_PREPOTENTIAL, 2, ["kappa"])
    return prepotential_mult(F, 2, {"kappa": kappa}, kappa_domain(kappa))


def kappa_eventual_identity(
    model: Model | None, kappa: float, order: int, pts=None, series: Mapping = SERIES
) -> KappaReport:
    """Truncated series eventual identity of the kappa example, with its residuals.

    ``model`` may be None, in which case a kappa model is built for ``kappa``.
    """
    if not 0 <= order <= MAX_SERIES_ORDER:
        raise ValueError(f"truncation order must be in 0..{MAX_SERIES_ORDER}")
    if model is not None and model.kind != "kappa":
        raise ModelError(f"model {model.name!r} is not the kappa example")
    mult = kappa_mult(kappa)
    if pts is None:
        pts = sample_points(kappa_domain(kappa), GATE_POINTS, GATE_SEED)
    pts = as_points(pts)
    sv = SeriesVectorField.from_strings(series)
    bound = {"kappa": kappa}
    f = expr_jet(sv.f_sum(order), pts, 1, bound)
    g = expr_jet(sv.g_sum(order), pts, 1, bound)
    x = pts[:, 1]
    fp, gp = f.d(1).value, g.d(1).value
    ode1 = 2 * x * gp - g.value - kappa * x * fp
    ode2 = 2 * x**2 * fp + kappa * x * gp - kappa * g.value - x
    E = sv.field(kappa, order)
    defect = eventual_identity_defect(mult, E, pts)
    bracket = lie_bracket(mult.unit, E).values(pts) - mult.unit.values(pts)
    return KappaReport(
        kappa,
        order,
        (float(np.max(np.abs(ode1))), float(np.max(np.abs(ode2)))),
        defect,
        float(np.max(np.abs(bracket))),
        E,
    )


def residual_slope(kappas: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log(residual) against log(kappa)."""
    lk, lr = np.log(np.asarray(kappas, float)), np.log(np.asarray(residuals, float))
    return float(np.polyfit(lk, lr, 1)[0])


def kappa_ode_slope(kappas=(1e-1, 1e-2, 1e-3), order: int = 2, pts=None, series: Mapping = SERIES) -> float:
    res = [kappa_eventual_identity(None, k, order, pts, series).ode_residual for k in kappas]
    return residual_slope(kappas, res)


# ---------------------------------------------------------------------------
# descriptions and the built-ins

SCHEMA_VERSION = 1


def _series_strings(order: int = MAX_SERIES_ORDER) -> list[str]:
    sv = SeriesVectorField.from_strings(SERIES)
    return [ex.to_string(e).replace("u1", "t1").replace("u2", "t2") for e in sv.components(order)]


_BUILTINS: dict[str, dict] = {
    "semisimple2": {
        "schema_version": SCHEMA_VERSION,
        "name": "semisimple2",
        "dimension": 2,
        "domain": {
            "lo": [0.5, 1.0],
            "hi": [1.5, 2.0],
            "exclusions": [{"expr": "u1 - 2*u2", "margin": 0.1}],
        },
        "multiplication": {"kind": "semisimple", "unit": ["1", "1"]},
        "eventual_identities": {
            "E": {"components": ["u1", "u2"]},
            "E2": {"components": ["exp(u1)", "1 + u2^2"]},
        },
        "connections": {
            "flat": {"kind": "semisimple", "X0": ["u1", "2*u2"], "diagonal": ["0", "0"]},
            "curved": {"kind": "semisimple", "X0": ["u1", "2*u2"], "diagonal": ["u2", "0"]},
        },
        "legendre_fields": {"X0": {"components": ["u1", "2*u2"], "family": "flat"}},
        "flat_shift_vectors": {
            "pencil": ["1", "1"],
            "separated": ["u1^2", "sin(u2)"],
        },
        "bundles": {"higgs_unit": {"kind": "higgs", "connection": "flat", "section": ["1", "1"]}},
        "suites": ["algebra", "duality", "connections", "lorenz", "legendre", "pullback"],
    },
    "semisimple3": {
        "schema_version": SCHEMA_VERSION,
        "name": "semisimple3",
        "dimension": 3,
        "domain": {"lo": [0.5, 1.5, 2.5], "hi": [1.0, 2.0, 3.0]},
        "multiplication": {"kind": "semisimple", "unit": ["1", "1", "1"]},
        "eventual_identities": {"E": {"components": ["u1", "u2", "u3"]}},
        "connections": {
            "main": {
                "kind": "semisimple",
                "X0": ["u1 + 0.05*u2*u3", "u2 + 0.05*u1^2", "u3 + 0.05*u1*u2"],
                "diagonal": ["0.1*u2", "u1*u3/10", "0"],
            }
        },
        "legendre_fields": {
            "X0": {"components": ["u1 + 0.05*u2*u3", "u2 + 0.05*u1^2", "u3 + 0.05*u1*u2"], "family": "main"}
        },
        "bundles": {
            "higgs_X0": {
                "kind": "higgs",
                "connection": "main",
                "section": ["u1 + 0.05*u2*u3", "u2 + 0.05*u1^2", "u3 + 0.05*u1*u2"],
            }
        },
        "suites": ["algebra", "duality", "connections", "lorenz", "legendre", "pullback"],
    },
    "kappa2d": {
        "schema_version": SCHEMA_VERSION,
        "name": "kappa2d",
        "dimension": 2,
        "parameters": {"kappa": 1e-3},
        "domain": {"lo": [-1.0, 0.2], "hi": [1.0, 3.0]},
        "multiplication": {"kind": "prepotential", "prepotential": KAPPA_PREPOTENTIAL, "unit": ["1", "0"]},
        "eventual_identities": {"E": {"components": _series_strings(), "tolerance": 1e-6}},
        "connections": {"flat": {"kind": "flat"}},
        "legendre_fields": {"u": {"components": ["1", "0.2"], "family": "flat"}},
        "flat_candidates": {"zero": ["0", "0"]},
        "flat_shift_vectors": {"pencil": ["1", "0"], "first_coordinate": ["2.5", "0"]},
        "bundles": {"higgs_u": {"kind": "higgs", "connection": "flat", "section": ["1", "0.2"]}},
        "suites": ["algebra", "duality", "connections", "lorenz", "legendre", "pullback", "kappa"],
        "series": {"order": MAX_SERIES_ORDER},
    },
    "frob-cp1": {
        "schema_version": SCHEMA_VERSION,
        "name": "frob-cp1",
        "dimension": 2,
        "domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]},
        "multiplication": {"kind": "prepotential", "prepotential": "1/2*t1^2*t2 + exp(t2)", "unit": ["1", "0"]},
        "eventual_identities": {"E": {"components": ["t1", "2"]}},
        "connections": {"flat": {"kind": "flat"}},
        "legendre_fields": {"u": {"components": ["1", "0.2"], "family": "flat"}},
        "flat_candidates": {"zero": ["0", "0"]},
        "flat_shift_vectors": {"pencil": ["1", "0"], "first_coordinate": ["2.5", "0"]},
        "bundles": {"higgs_u": {"kind": "higgs", "connection": "flat", "section": ["1", "0.2"]}},
        "suites": ["algebra", "duality", "connections", "flatness", "lorenz", "legendre", "pullback"],
    },
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_description(name: str, **params: float) -> dict:
    if name not in _BUILTINS:
        raise ModelError(f"unknown built-in model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    desc = copy.deepcopy(_BUILTINS[name])
    if params:
        unknown = set(params) - set(desc.get("parameters", {}))
        if unknown:
            raise ModelError(f"model {name!r} has no parameter(s) {sorted(unknown)}")
        desc["parameters"].update({k: float(v) for k, v in params.items()})
    return desc


def builtin_model(name: str, **params: float) -> Model:
    return build_model(builtin_description(name, **params))


# ---------------------------------------------------------------------------
# building a model from a description


def _domain(desc: Mapping, n: int, params: Mapping[str, float]) -> ChartDomain:
    d = desc["domain"]
    excl = [(e["expr"], float(e.get("margin", 0.1))) for e in d.get("exclusions", [])]
    try:
        return ChartDomain.box(d["lo"], d["hi"], excl, params=params)
    except ValueError as err:
        raise ModelError(f"invalid domain: {err}") from err


def _gate(name: str, value: float, tol: float) -> None:
    if not value <= tol:
        raise ModelError(f"validation gate {name!r} failed: residual {value:.3e} > {tol:.1e}", gate=name, residual=value)


def _vector(spec, n, params, label) -> TensorField:
    comps = spec["components"] if isinstance(spec, Mapping) else spec
    if len(comps) != n:
        raise ModelError(f"{label} needs {n} components, got {len(comps)}")
    return vector_field(comps, n, params, name=label)


def _multiplication(desc, n, params, domain) -> tuple[MultField, str]:
    m = desc["multiplication"]
    kind = m["kind"]
    names = list(params)
    if kind == "semisimple":
        mult = semisimple_mult(n)
    elif kind == "prepotential":
        mult = prepotential_mult(_exprs(m["prepotential"], n, names), n, params, domain)
    elif kind == "structure":
        c = m["c"]
        if np.shape(np.array(c, dtype=object)) != (n, n, n):
            raise ModelError(f"structure functions must be an {n}x{n}x{n} array")
        mult = MultField(expr_field(_exprs(c, n, names), n, params, name="c"), _vector(m["unit"], n, params, "e"))
    else:
        raise ModelError(f"unknown multiplication kind {kind!r}")
    declared = _vector(m["unit"], n, params, "e")
    pts = _gate_pts(domain)
    mismatch = float(np.max(np.abs(declared.values(pts) - mult.unit.values(pts))))
    _gate("declared-unit", mismatch, LOAD_GATE)
    return MultField(mult.c, declared, mult.name), kind


def _connection(spec, name, model: Model) -> SpecialFamily:
    n = model.n
    kind = spec["kind"]
    if kind == "flat":
        return SpecialFamily(zero_field(n, (n, n, n), name), model.mult, name=name)
    if kind == "christoffel":
        G = spec["gamma"]
        if np.shape(np.array(G, dtype=object)) != (n, n, n):
            raise ModelError(f"connection {name!r}: gamma must be an {n}x{n}x{n} array")
        conn = expr_field(_exprs(G, n, list(model.params)), n, model.params, name=name)
        return SpecialFamily(conn, model.mult, name=name)
    if kind == "semisimple":
        if model.kind != "semisimple":
            raise ModelError(f"connection {name!r}: the semisimple construction needs canonical coordinates")
        fam = semisimple_connection(model, spec["X0"], spec.get("diagonal"))
        return SpecialFamily(fam.conn, model.mult, name=name)
    raise ModelError(f"unknown connection kind {kind!r}")


def build_model(desc: Mapping) -> Model:
    """Construct and validate a model from a description dict.

    Every gate failure raises ModelError naming the gate and its residual.
    """
    from .pullback import bundle_from_spec  # local import: pullback depends on models' ingredients

    n = int(desc["dimension"])
    params = {k: float(v) for k, v in desc.get("parameters", {}).items()}
    try:
        domain = _domain(desc, n, params)
        mult, kind = _multiplication(desc, n, params, domain)
        if desc.get("series") is not None:
            kind = "kappa"
        pts = _gate_pts(domain)
        d = algebra_defects(mult, pts)
        _gate("commutativity", d.commutativity, LOAD_GATE)
        _gate("associativity", d.associativity, LOAD_GATE)
        _gate("unit", d.unit, LOAD_GATE)
        _gate("hertling-manin", hm_defect(mult, pts), LOAD_GATE)

        ids, id_tols = {}, {}
        for name, spec in desc.get("eventual_identities", {}).items():
            if not isinstance(spec, Mapping):
                spec = {"components": spec}
            if kind == "semisimple":
                E = _semisimple_identity(n, spec["components"], domain, params, name)
            else:
                E = _vector(spec, n, params, name)
            tol = float(spec.get("tolerance", EVENTUAL_IDENTITY_GATE))
            try:
                res = eventual_identity_defect(mult, E, pts)
            except NonInvertible as err:
                raise ModelError(f"eventual identity {name!r}: {err}", gate="invertibility") from err
            _gate(f"eventual-identity:{name}", res, tol)
            ids[name], id_tols[name] = E, tol

        model = Model(
            name=str(desc.get("name", "model")),
            domain=domain,
            mult=mult,
            params=params,
            eventual_identities=ids,
            identity_tolerances=id_tols,
            kind=kind,
            description=copy.deepcopy(dict(desc)),
        )
        fams = {}
        for name, spec in desc.get("connections", {}).items():
            fam = _connection(spec, name, model)
            _gate(f"torsion:{name}", torsion_defect(fam.conn, pts), LOAD_GATE)
            _gate(f"compatibility:{name}", compat_defect(fam.conn, mult, pts), LOAD_GATE)
            fams[name] = fam
        leg, leg_fam = {}, {}
        for name, spec in desc.get("legendre_fields", {}).items():
            u = _vector(spec, n, params, name)
            fam_name = spec.get("family") or next(iter(fams), None)
            if fam_name not in fams:
                raise ModelError(f"Legendre field {name!r} refers to unknown connection {fam_name!r}")
            try:
                res = legendre_defect(fams[fam_name], u, pts)
            except NonInvertible as err:
                raise ModelError(f"Legendre field {name!r}: {err}", gate="invertibility") from err
            _gate(f"legendre:{name}", res, LOAD_GATE)
            leg[name], leg_fam[name] = u, fam_name
        cands = {k: _vector(v, n, params, k) for k, v in desc.get("flat_candidates", {}).items()}
        shifts = {k: _vector(v, n, params, k) for k, v in desc.get("flat_shift_vectors", {}).items()}
        model = Model(
            name=model.name,
            domain=domain,
            mult=mult,
            params=params,
            eventual_identities=ids,
            identity_tolerances=id_tols,
            families=fams,
            legendre_fields=leg,
            legendre_family=leg_fam,
            flat_candidates=cands,
            flat_shift_vectors=shifts,
            tolerances={k: float(v) for k, v in desc.get("tolerances", {}).items()},
            suites=tuple(desc.get("suites", ())),
            kind=kind,
            description=copy.deepcopy(dict(desc)),
        )
        bundles = {k: bundle_from_spec(v, model, k) for k, v in desc.get("bundles", {}).items()}
        return replace(model, bundles=bundles)
    except ModelError:
        raise
    except (ExprError, DomainError, NonInvertible) as err:
        raise ModelError(str(err)) from err
    except FmkError as err:
        raise ModelError(str(err)) from err
