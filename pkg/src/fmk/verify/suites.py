"""Named, anchored checks grouped into suites.

Each check evaluates some residual at the sampled points and passes when its
largest value is within tolerance.  Checks are generated per model from the
ingredients it declares (eventual identities, connections, Legendre fields,
bundles), so the same suite adapts to every model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .. import algebra as alg
from .. import connections as cn
from .. import pullback as pb
from ..chart_core.fields import TensorField, constant_field, expr_field, scale
from ..errors import ModelError
from ..models import MAX_SERIES_ORDER, PUBLISHED_SERIES, Model, kappa_eventual_identity, residual_slope

SUITES = ("algebra", "duality", "connections", "flatness", "lorenz", "legendre", "pullback", "kappa")

PROBE_W = ("0", "e", "E")
PENCIL_LAMBDAS = (-1.0, 0.5, 2.5)
KAPPA_LADDER = (1e-1, 1e-2, 1e-3)
MIN_SLOPE = 2.7
LORENZ_SHIFTS = 5
RANDOM_ENDOMORPHISMS = 5
DUAL_FLAT_CURVATURE_TOL = 1e-8
STATUS_THRESHOLD = 1e-9  # pass/fail threshold used when comparing (lorenz) status


@dataclass
class Outcome:
    """Per-point residuals (or a single residual) plus free-form details."""

    residuals: np.ndarray
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    anchor: str
    run: Callable[[np.ndarray, int], Outcome]
    tol: float | None = None  # fixed tolerance; None means the suite tolerance


def per_point(values: np.ndarray) -> np.ndarray:
    v = np.abs(np.asarray(values, dtype=float))
    return v.reshape(v.shape[0], -1).max(axis=1) if v.ndim > 1 else v


def _field_outcome(f: TensorField, pts, **details) -> Outcome:
    return Outcome(per_point(f.values(pts)), details)


def _scalar(value: float, **details) -> Outcome:
    return Outcome(np.array([float(value)]), details)


def _probe(model: Model, key: str, E: TensorField) -> TensorField | None:
    return {"0": None, "e": model.mult.unit, "E": E}[key]


def _random_endomorphisms(n: int, seed: int, count: int) -> list[TensorField]:
    """Smooth endomorphism fields with seeded coefficients."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(-1.0, 1.0, size=(n, n, n + 1))
        grid = [
            [
                f"{a[i, j, 0]:.6f}*sin(" + " + ".join(f"{a[i, j, k + 1]:.6f}*u{k + 1}" for k in range(n)) + ")"
                for j in range(n)
            ]
            for i in range(n)
        ]
        out.append(expr_field(grid, n))
    return out


def _random_vectors(n: int, seed: int, count: int) -> list[TensorField]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(-1.0, 1.0, size=(n, n + 1))
        comps = [f"{a[i, 0]:.6f} + " + " + ".join(f"{a[i, k + 1]:.6f}*u{k + 1}^2" for k in range(n)) for i in range(n)]
        out.append(expr_field(comps, n))
    return out


# ---------------------------------------------------------------------------
# suites


def _algebra(model: Model) -> Iterator[Check]:
    m = model.mult

    def defects(pts, seed):
        d = alg.algebra_defects(m, pts)
        return _scalar(max(d.commutativity, d.associativity, d.unit), commutativity=d.commutativity,
                       associativity=d.associativity, unit=d.unit)

    yield Check("algebra.structure", "algebra", "commutative associative unital multiplication", defects)
    yield Check("algebra.hertling_manin", "algebra", "Hertling-Manin condition",
                lambda pts, seed: _scalar(alg.hm_defect(m, pts)))
    for name, E in model.eventual_identities.items():
        tol = model.identity_tolerances.get(name)
        yield Check(f"algebra.eventual_identity:{name}", "algebra", "eventual identity characterization",
                    lambda pts, seed, E=E: _field_outcome(alg.eventual_identity_tensor(m, E), pts), tol=tol)

        def twice(pts, seed, E=E):
            star = alg.dual_mul(m, E).mult
            back = alg.dual_mul(star, m.unit).mult
            rc = per_point(back.c.values(pts) - m.c.values(pts))
            ru = per_point(back.unit.values(pts) - m.unit.values(pts))
            return Outcome(np.maximum(rc, ru), {"structure": float(rc.max()), "unit": float(ru.max())})

        yield Check(f"algebra.double_twist:{name}", "algebra", "duality of eventual identities is an involution",
                    twice)
        yield Check(f"algebra.dual_hertling_manin:{name}", "algebra", "twisted multiplication is an F-manifold",
                    lambda pts, seed, E=E: _scalar(alg.hm_defect(alg.dual_mul(m, E).mult, pts)), tol=tol)


def _pairs(model: Model):
    for fname, fam in model.families.items():
        for ename, E in model.eventual_identities.items():
            yield fname, fam, ename, E


def _duality(model: Model) -> Iterator[Check]:
    if not model.eventual_identities or not model.families:
        raise ModelError(f"suite 'duality' needs an eventual identity and a connection on model {model.name!r}")
    for fname, fam, ename, E in _pairs(model):
        yield from _duality_pair(model, fam, E, f"{fname}:{ename}")


def _duality_pair(model: Model, fam, E: TensorField, tag: str) -> Iterator[Check]:
    for w in PROBE_W:
        def tors(pts, seed, W=_probe(model, w, E)):
            return _field_outcome(cn.torsion(cn.dual_connection(fam, E, W).conn), pts)

        def comp(pts, seed, W=_probe(model, w, E)):
            d = cn.dual_connection(fam, E, W)
            return _field_outcome(cn.compat_tensor(d.conn, d.mult), pts)

        yield Check(f"duality.dual_torsion:{tag}:W={w}", "duality", "dual connections are torsion-free", tors)
        yield Check(f"duality.dual_compatibility:{tag}:W={w}", "duality",
                    "dual connections are compatible with the dual multiplication", comp)

    def second(pts, seed):
        star = alg.dual_mul(model.mult, E).mult
        G1 = cn.second_structure(fam, E).conn
        G2 = cn.connection_a(fam, E, cn.admissible_endomorphism(fam, E))
        cmp = cn.family_equal(G1, G2, star, pts)
        S = cn.aux_shift(fam, E)
        expected = alg.multiply(model.mult, S, alg.multiply(model.mult, E, E)).values(pts)
        shift_res = per_point(cmp.shift - expected)
        return Outcome(np.maximum(cmp.residual_per_point, shift_res),
                       {"family_residual": cmp.residual, "shift_residual": float(shift_res.max())})

    yield Check(f"duality.second_structure_family:{tag}", "duality",
                "second structure connection belongs to the dual family", second)
    yield Check(f"duality.aux_identity:{tag}", "duality", "auxiliary identity for eventual identities",
                lambda pts, seed: _field_outcome(cn.duality.aux_identity_tensor(fam, E), pts))
    for w in PROBE_W:
        def invol(pts, seed, W=_probe(model, w, E)):
            back = cn.double_dual(fam, E, W)
            expected = cn.shift(fam, scale(cn.involution_shift(fam, E), -1.0))
            return Outcome(per_point(back.conn.values(pts) - expected.conn.values(pts)))

        yield Check(f"duality.involution:{tag}:W={w}", "duality", "duality of special families is an involution",
                    invol)

    U0 = constant_field(np.zeros(model.n), model.n)

    def fixed(pts, seed):
        start = cn.unit_normalized(fam, U0)
        back = cn.fixed_unit_dual(cn.fixed_unit_dual(start, E, U0), model.mult.unit, U0)
        return Outcome(per_point(back.conn.values(pts) - start.conn.values(pts)))

    yield Check(f"duality.fixed_unit_involution:{tag}", "duality",
                "duality with prescribed unit derivative is an involution", fixed)

    def ssinv(pts, seed):
        start = cn.second_structure_normalized(fam, E)
        back = cn.second_structure(cn.second_structure(start, E), model.mult.unit)
        return Outcome(per_point(back.conn.values(pts) - start.conn.values(pts)))

    yield Check(f"duality.second_structure_involution:{tag}", "duality",
                "second structure connections are mutually dual", ssinv)
    yield Check(f"duality.second_structure_euler:{tag}", "duality",
                "derivative of the eventual identity under the second structure connection",
                lambda pts, seed: _field_outcome(cn.second_structure_euler_tensor(fam, E), pts))


def _connections(model: Model) -> Iterator[Check]:
    if not model.families:
        raise ModelError(f"suite 'connections' needs a connection on model {model.name!r}")
    m = model.mult
    for fname, fam in model.families.items():
        yield Check(f"connections.torsion:{fname}", "connections", "torsion-free representative",
                    lambda pts, seed, fam=fam: _field_outcome(cn.torsion(fam.conn), pts))
        yield Check(f"connections.compatibility:{fname}", "connections", "total symmetry of the derivative of o",
                    lambda pts, seed, fam=fam: _field_outcome(cn.compat_tensor(fam.conn, m), pts))

        def shifted(pts, seed, fam=fam):
            worst = np.zeros(len(pts))
            for V in _random_vectors(model.n, seed, 3):
                G = cn.shift(fam, V).conn
                worst = np.maximum(worst, per_point(cn.torsion(G).values(pts)))
                worst = np.maximum(worst, per_point(cn.compat_tensor(G, m).values(pts)))
            return Outcome(worst)

        yield Check(f"connections.shift_preserves:{fname}", "connections",
                    "shifts by V o X o Y stay torsion-free and compatible", shifted)

        def unit_parallel(pts, seed, fam=fam):
            U0 = constant_field(np.zeros(model.n), model.n)
            member = cn.unit_normalized(fam, U0)
            De = cn.cov_vector(member.conn, m.unit)
            return _field_outcome(De, pts)

        yield Check(f"connections.unit_parallel:{fname}", "connections",
                    "unique member with parallel unit field", unit_parallel)
        for ename, E in model.eventual_identities.items():
            def read(pts, seed, fam=fam, E=E):
                worst = np.zeros(len(pts))
                for A in _random_endomorphisms(model.n, seed, RANDOM_ENDOMORPHISMS):
                    lhs = cn.curvature(cn.connection_a(fam, E, A)).values(pts)
                    rhs = cn.duality.conjugation_rhs(fam, E, A).values(pts)
                    worst = np.maximum(worst, per_point(lhs - rhs))
                return Outcome(worst, {"fields": RANDOM_ENDOMORPHISMS})

            yield Check(f"connections.curvature_conjugation:{fname}:{ename}", "connections",
                        "curvature of the conjugated connection for arbitrary A", read)


def _is_flat(fam, pts) -> tuple[bool, float]:
    r = cn.curvature_defect(fam.conn, pts)
    return r <= STATUS_THRESHOLD, r


def _flatness(model: Model) -> Iterator[Check]:
    if not model.families:
        raise ModelError(f"suite 'flatness' needs a connection on model {model.name!r}")
    m = model.mult
    U0 = constant_field(np.zeros(model.n), model.n)
    for fname, fam in model.families.items():
        yield Check(f"flatness.representative:{fname}", "flatness", "flat representative",
                    lambda pts, seed, fam=fam: _field_outcome(cn.curvature(fam.conn), pts))
        base = cn.unit_normalized(fam, U0)
        for lam in PENCIL_LAMBDAS:
            yield Check(f"flatness.pencil:{fname}:lambda={lam:g}", "flatness", "flat pencils along the unit field",
                        lambda pts, seed, lam=lam, base=base: _field_outcome(
                            cn.curvature(cn.shift(base, scale(m.unit, lam)).conn), pts))
        for vname, V in model.flat_shift_vectors.items():
            def flat_shift(pts, seed, fam=fam, V=V):
                rep = cn.flat_shift_defect(fam, V, pts)
                worst = max(rep.condition, rep.shifted_curvature, rep.curvature_relation)
                return _scalar(worst, condition=rep.condition, shifted_curvature=rep.shifted_curvature,
                               curvature_relation=rep.curvature_relation)

            yield Check(f"flatness.flat_shift:{fname}:{vname}", "flatness", "flatness of shifted connections",
                        flat_shift)
        for ename, E in model.eventual_identities.items():
            for wname, Wt in model.flat_candidates.items():
                def dual_flat(pts, seed, fam=fam, E=E, Wt=Wt):
                    rep = cn.dual_flat_defect(fam, E, Wt, pts)
                    hess = float(np.max(np.abs(cn.hessian_field(fam.conn, E).values(pts))))
                    # curvature is held to its own, looser bound
                    curv_excess = max(0.0, rep.dual_curvature - DUAL_FLAT_CURVATURE_TOL)
                    return _scalar(max(rep.condition, curv_excess), condition=rep.condition,
                                   dual_curvature=rep.dual_curvature, curvature_formula=rep.curvature_formula,
                                   hessian=hess)

                yield Check(f"flatness.dual_flat:{fname}:{ename}:{wname}", "flatness",
                            "flat members of the dual family", dual_flat)


def _lorenz(model: Model) -> Iterator[Check]:
    if not model.families:
        raise ModelError(f"suite 'lorenz' needs a connection on model {model.name!r}")
    m = model.mult
    for fname, fam in model.families.items():
        def invariance(pts, seed, fam=fam):
            base = cn.lorenz_defect(fam.conn, m, pts)
            status = base <= STATUS_THRESHOLD
            values = {"representative": base}
            for k, V in enumerate(_random_vectors(model.n, seed + 7, LORENZ_SHIFTS)):
                values[f"shift{k}"] = cn.lorenz_defect(cn.shift(fam, V).conn, m, pts)
            for ename, E in model.eventual_identities.items():
                d = cn.dual_connection(fam, E, None)
                values[f"dual:{ename}"] = cn.lorenz_defect(d.conn, d.mult, pts)
            flips = sum((v <= STATUS_THRESHOLD) != status for v in values.values())
            return _scalar(float(flips), holds=bool(status), defects=values)

        yield Check(f"lorenz.invariance:{fname}", "lorenz",
                    "curvature condition is independent of the representative and of duality", invariance,
                    tol=0.0)


def _legendre(model: Model) -> Iterator[Check]:
    if not model.legendre_fields:
        raise ModelError(f"suite 'legendre' needs a Legendre field on model {model.name!r}")
    m = model.mult
    for uname, u in model.legendre_fields.items():
        fam = model.families[model.legendre_family[uname]]
        yield Check(f"legendre.condition:{uname}", "legendre", "Legendre field condition",
                    lambda pts, seed, fam=fam, u=u: _field_outcome(cn.legendre_tensor(fam, u), pts))

        def special(pts, seed, fam=fam, u=u):
            G = cn.legendre_connection(fam, u)
            t = per_point(cn.torsion(G).values(pts))
            c = per_point(cn.compat_tensor(G, m).values(pts))
            return Outcome(np.maximum(t, c), {"torsion": float(t.max()), "compatibility": float(c.max())})

        yield Check(f"legendre.transform_special:{uname}", "legendre", "Legendre transformation is special", special)
        yield Check(f"legendre.curvature:{uname}", "legendre", "curvature of the Legendre transformation",
                    lambda pts, seed, fam=fam, u=u: _scalar(cn.legendre_curvature_defect(fam, u, pts)))

        def transport(pts, seed, fam=fam, u=u):
            G = cn.legendre_connection(fam, u)
            before = (cn.curvature_defect(fam.conn, pts), cn.lorenz_defect(fam.conn, m, pts))
            after = (cn.curvature_defect(G, pts), cn.lorenz_defect(G, m, pts))
            flips = sum((a <= STATUS_THRESHOLD) != (b <= STATUS_THRESHOLD) for a, b in zip(before, after))
            return _scalar(float(flips), curvature=[before[0], after[0]], lorenz=[before[1], after[1]])

        yield Check(f"legendre.status_transport:{uname}", "legendre",
                    "flatness and the curvature condition survive Legendre transformation", transport, tol=0.0)
        for ename, E in model.eventual_identities.items():
            def commute(pts, seed, fam=fam, u=u, E=E):
                rep = cn.legendre_duality_commute(fam, E, u, pts)
                return _scalar(max(rep.comparison.residual, rep.shift_residual),
                               family_residual=rep.comparison.residual, shift_residual=rep.shift_residual,
                               dual_legendre=rep.dual_legendre)

            yield Check(f"legendre.duality_commutes:{uname}:{ename}", "legendre",
                        "duality commutes with Legendre transformations", commute)


def _pullback(model: Model) -> Iterator[Check]:
    if not model.bundles:
        raise ModelError(f"suite 'pullback' needs bundle data on model {model.name!r}")
    for bname, b in model.bundles.items():
        def conds(pts, seed, b=b):
            r = pb.bundle_conditions(b, pts)
            return _scalar(max(r.as_tuple()), flatness_of_A=r.flatness_of_A, commutativity=r.commutativity,
                           section=r.section)

        yield Check(f"pullback.conditions:{bname}", "pullback", "external bundle conditions", conds)

        def induced(pts, seed, b=b):
            im = pb.induced_multiplication(b, pts)
            d = alg.algebra_defects(im, pts)
            hm = alg.hm_defect(im, pts)
            details = {"commutativity": d.commutativity, "associativity": d.associativity, "unit": d.unit,
                       "hertling_manin": hm, "rel_u": pb.rel_u_defect(b, pts), "identity": pb.identity_defect(b, pts)}
            return _scalar(max(details.values()), **details)

        yield Check(f"pullback.induced_multiplication:{bname}", "pullback", "induced F-manifold structure", induced)

        def conn(pts, seed, b=b):
            fam = pb.pullback_family(b, 0.0, pts)
            t = cn.torsion_defect(fam.conn, pts)
            c = cn.compat_defect(fam.conn, fam.mult, pts)
            p = pb.pencil_defect(b, 0.7, pts)
            return _scalar(max(t, c, p), torsion=t, compatibility=c, pencil=p)

        yield Check(f"pullback.connection:{bname}", "pullback", "pull-back connections are a compatible pencil",
                    conn)

        spec = (model.description or {}).get("bundles", {}).get(bname, {})
        if spec.get("kind", "higgs") == "higgs":
            fam = model.families[spec["connection"]]

            def round_trip(pts, seed, b=b, fam=fam):
                im = pb.induced_multiplication(b, pts)
                rc = per_point(im.c.values(pts) - model.mult.c.values(pts))
                G = pb.pullback_connection(b, 0.0, pts).values(pts)
                rg = per_point(G - cn.legendre_connection(fam, b.u).values(pts))
                return Outcome(np.maximum(rc, rg), {"multiplication": float(rc.max()), "connection": float(rg.max())})

            yield Check(f"pullback.higgs_round_trip:{bname}", "pullback",
                        "Higgs bundle data reproduces o and the Legendre transformation", round_trip)


def _kappa(model: Model) -> Iterator[Check]:
    if model.kind != "kappa":
        raise ModelError(f"suite 'kappa' needs the kappa example, not {model.name!r}")
    kappa = float(model.params["kappa"])
    order = int((model.description or {}).get("series", {}).get("order", MAX_SERIES_ORDER))
    tol = model.identity_tolerances.get("E")

    def slope(pts, seed):
        ours = [kappa_eventual_identity(model, k, order, pts).ode_residual for k in KAPPA_LADDER]
        printed = [kappa_eventual_identity(model, k, order, pts, PUBLISHED_SERIES).ode_residual for k in KAPPA_LADDER]
        s = residual_slope(KAPPA_LADDER, ours)
        return _scalar(max(0.0, MIN_SLOPE - s), slope=s, residuals=ours, printed_series_slope=residual_slope(
            KAPPA_LADDER, printed), printed_series_residuals=printed)

    yield Check("kappa.ode_slope", "kappa", "power series solution of the eventual identity equations", slope,
                tol=0.0)

    def identity(pts, seed):
        rep = kappa_eventual_identity(model, kappa, order, pts)
        return _scalar(rep.eventual_identity, kappa=kappa, order=order, ode_residuals=list(rep.ode_residuals))

    yield Check("kappa.eventual_identity", "kappa", "truncated series is an approximate eventual identity",
                identity, tol=tol)
    yield Check("kappa.unit_bracket", "kappa", "the ansatz satisfies [e, E] = e",
                lambda pts, seed: _scalar(kappa_eventual_identity(model, kappa, order, pts).unit_bracket), tol=1e-12)


_BUILDERS = {
    "algebra": _algebra,
    "duality": _duality,
    "connections": _connections,
    "flatness": _flatness,
    "lorenz": _lorenz,
    "legendre": _legendre,
    "pullback": _pullback,
    "kappa": _kappa,
}


def suite_names(model: Model, suite: str) -> tuple[str, ...]:
    if suite == "all":
        return model.suites or SUITES
    if suite not in _BUILDERS:
        raise ModelError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    return (suite,)


def checks_for(model: Model, suite: str) -> list[Check]:
    """All checks of ``suite`` for ``model``, ordered by name."""
    out: list[Check] = []
    for s in suite_names(model, suite):
        out.extend(_BUILDERS[s](model))
    return sorted(out, key=lambda c: c.name)


__all__ = ["Check", "Outcome", "SUITES", "checks_for", "per_point", "suite_names"]
