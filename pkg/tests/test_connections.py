import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from fmk import algebra as alg
from fmk import connections as cn
from fmk.chart_core.domain import sample_points
from fmk.chart_core.fields import constant_field, expr_field, linear_combination, scale, vector_field
from fmk.errors import NotLegendre
from fmk.models import kappa_mult

from conftest import sup

ZERO2 = constant_field([0.0, 0.0], 2)


def frame(n):
    return [constant_field(np.eye(n)[i], n) for i in range(n)]


def zero_conn(n):
    return expr_field(np.zeros((n, n, n)).astype(int).astype(str).tolist(), n)


@pytest.fixture(scope="module")
def ss2(models):
    return models("semisimple2")


@pytest.fixture(scope="module")
def pts2(ss2, points):
    return points(ss2, 30)


# --- torsion, compatibility, curvature -------------------------------------


def test_torsion_examples():
    pts = np.array([[0.3, 0.4]])
    assert cn.torsion_defect(zero_conn(2), pts) == 0.0
    sym = expr_field([[["u1", "u2"], ["u2", "1"]], [["0", "u1*u2"], ["u1*u2", "3"]]], 2)
    assert cn.torsion_defect(sym, pts) == 0.0
    G = expr_field([[["0", "1"], ["0", "0"]], [["0", "0"], ["0", "0"]]], 2)
    T = cn.torsion(G).values(pts)[0]
    assert T[0, 0, 1] == 1.0 and T[0, 1, 0] == -1.0


def test_nabla_mul_kappa_flat_coordinates_matches_sympy():
    kappa = 0.3
    mult = kappa_mult(kappa)
    t1, t2 = sp.symbols("t1 t2")
    F = t1**2 * t2 / 2 + t2**2 * sp.log(t2**2) / 4 - kappa * t1**3 / 6
    eta_inv = sp.Matrix([[sp.diff(F, t1, a, b) for b in (t1, t2)] for a in (t1, t2)]).inv()
    c_22 = [sum(eta_inv[k, l] * sp.diff(F, [t1, t2][l], t2, t2) for l in range(2)) for k in range(2)]
    oracle = [sp.diff(ck, t2) for ck in c_22]
    p = [0.4, 1.7]
    d = frame(2)
    got = cn.nabla_mul_apply(zero_conn(2), mult, d[1], d[1], d[1]).values(p)[0]
    want = [float(o.subs({t1: p[0], t2: p[1]})) for o in oracle]
    np.testing.assert_allclose(got, want, rtol=1e-12)
    np.testing.assert_allclose(got, np.array([-1.0, -kappa]) / p[1] ** 2, rtol=1e-12)


def test_nabla_mul_symmetric_in_last_pair(ss2, pts2):
    fam = ss2.families["curved"]
    T = cn.nabla_mul(fam.conn, fam.mult).values(pts2)
    assert sup(T - np.swapaxes(T, -1, -2)) <= 1e-12


def test_compatibility(models, ss2, pts2):
    pts = np.array([[0.1, 1.2], [0.5, 2.0]])
    assert cn.compat_defect(zero_conn(2), kappa_mult(0.2), pts) <= 1e-12
    for fam in ss2.families.values():
        assert cn.compat_defect(fam.conn, ss2.mult, pts2) <= 1e-9
    G = ss2.families["curved"].conn
    bump = expr_field([[["0", "0"], ["0", "0.5"]], [["0", "0"], ["0", "0"]]], 2)
    assert cn.compat_defect(linear_combination([(1.0, G), (1.0, bump)]), ss2.mult, pts2) > 1e-3


def test_curvature_against_symbolic_oracle(models):
    m = models("semisimple3")
    u = sp.symbols("u1:4")
    X = [u[0] + sp.Rational(1, 20) * u[1] * u[2], u[1] + sp.Rational(1, 20) * u[0] ** 2,
         u[2] + sp.Rational(1, 20) * u[0] * u[1]]
    diag = [u[1] / 10, u[0] * u[2] / 10, 0]
    G = [[[sp.S(0)] * 3 for _ in range(3)] for _ in range(3)]
    for i in range(3):
        G[i][i][i] = diag[i]
        for j in range(3):
            if i != j:
                g = sp.diff(X[j], u[i]) / (X[j] - X[i])
                G[j][i][i], G[j][i][j], G[j][j][i] = g, -g, -g
    # the construction makes X a Legendre field (independent symbolic check)
    DX = [[sp.diff(X[s], u[x]) + sum(G[s][x][t] * X[t] for t in range(3)) for x in range(3)] for s in range(3)]
    # with idempotent frames the Legendre condition says (nabla_i X0)^j = 0 for i != j
    for i in range(3):
        for j in range(3):
            if i != j:
                assert sp.simplify(DX[j][i]) == 0
    p = {u[0]: 0.8, u[1]: 1.7, u[2]: 2.9}
    R = np.zeros((3, 3, 3, 3))
    for l in range(3):
        for k in range(3):
            for i in range(3):
                for j in range(3):
                    e = (sp.diff(G[l][j][k], u[i]) - sp.diff(G[l][i][k], u[j])
                         + sum(G[l][i][s] * G[s][j][k] - G[l][j][s] * G[s][i][k] for s in range(3)))
                    R[l, k, i, j] = float(e.subs(p))
    got = cn.curvature(m.families["main"].conn).values([0.8, 1.7, 2.9])[0]
    np.testing.assert_allclose(got, R, atol=1e-12)
    assert sup(R) > 1e-3


def test_constant_symbols_give_quadratic_curvature():
    vals = [[["1", "2"], ["2", "0"]], [["0", "1"], ["1", "3"]]]
    G = expr_field(vals, 2)
    g = np.array(vals, dtype=float)
    quad = np.einsum("lis,sjk->lkij", g, g) - np.einsum("ljs,sik->lkij", g, g)
    np.testing.assert_allclose(cn.curvature(G).values([0.0, 0.0])[0], quad)


def test_hessian():
    G = zero_conn(2)
    H = cn.hessian_field(G, vector_field(["u1^2", "0"], 2)).values([0.3, 0.1])[0]
    np.testing.assert_allclose(H[:, 0, 0], [2.0, 0.0])
    assert sup(cn.hessian_field(G, vector_field(["2*u1 - 1", "u2 + 3"], 2)).values([0.3, 0.1])) == 0.0


def test_hessian_frobenius_euler(models, points):
    m = models("frob-cp1")
    assert sup(cn.hessian_field(m.families["flat"].conn, m.eventual_identities["E"]).values(points(m, 20))) <= 1e-12


# --- special families --------------------------------------------------------


def test_shift_group_and_invariants(ss2, pts2):
    fam = ss2.families["curved"]
    V = vector_field(["sin(u1)", "u1*u2"], 2)
    there = cn.shift(fam, V)
    back = cn.shift(there, scale(V, -1.0))
    assert sup(back.conn.values(pts2) - fam.conn.values(pts2)) <= 1e-14
    assert sup(cn.shift(fam, ZERO2).conn.values(pts2) - fam.conn.values(pts2)) == 0.0
    assert cn.torsion_defect(there.conn, pts2) <= 1e-12
    assert cn.compat_defect(there.conn, ss2.mult, pts2) <= 1e-12


def test_shift_changes_nabla_mul_by_quadruple_product(ss2, pts2):
    fam = ss2.families["curved"]
    V = vector_field(["u2", "exp(u1)"], 2)
    c = ss2.mult
    d = frame(2)
    for X in d:
        for Y in d:
            for Z in d:
                lhs = cn.nabla_mul_apply(cn.shift(fam, V).conn, c, X, Y, Z).values(pts2)
                base = cn.nabla_mul_apply(fam.conn, c, X, Y, Z).values(pts2)
                quad = alg.multiply(c, V, alg.multiply(c, X, alg.multiply(c, Y, Z))).values(pts2)
                assert sup(lhs - (base - quad)) <= 1e-12


def test_family_equal(ss2, pts2):
    fam = ss2.families["curved"]
    V0 = vector_field(["u1^2", "cos(u2)"], 2)
    cmp = cn.family_equal(fam.conn, cn.shift(fam, V0).conn, ss2.mult, pts2)
    assert cmp.equal and sup(cmp.shift - V0.values(pts2)) <= 1e-9
    junk = expr_field([[["0", "u2"], ["u2", "0"]], [["0", "0"], ["0", "0"]]], 2)
    other = linear_combination([(1.0, fam.conn), (1.0, junk)])
    assert not cn.family_equal(fam.conn, other, ss2.mult, pts2).equal


def test_unit_shift_examples_and_uniqueness(ss2, pts2):
    fam = ss2.families["curved"]
    De = fam.unit_derivative()
    assert sup(cn.unit_shift(fam, De).values(pts2)) == 0.0
    V = cn.unit_shift(fam, ZERO2)
    assert cn.unit_derivative_defect(cn.shift(fam, V), ZERO2, pts2) <= 1e-9
    # any V' with nabla^{V'}_X e = U o X for all X solves c[k, a, i] V'^a = (U o d_i - nabla_i e)^k
    U = vector_field(["u1", "u2^2"], 2)
    c = ss2.mult.c.values(pts2)
    rhs = (np.einsum("pkai,pa->pki", c, U.values(pts2))
           - cn.cov_vector(fam.conn, ss2.mult.unit).values(pts2))
    for p in range(len(pts2)):
        sol, *_ = np.linalg.lstsq(c[p].transpose(0, 2, 1).reshape(-1, 2), rhs[p].reshape(-1), rcond=None)
        assert sup(sol - cn.unit_shift(fam, U).values(pts2[p])[0]) <= 1e-9
    assert cn.unit_derivative_defect(cn.shift(fam, cn.unit_shift(fam, U)), U, pts2) <= 1e-9


# --- duality -----------------------------------------------------------------


def test_dual_by_unit_stays_in_family(ss2, pts2):
    fam = ss2.families["curved"]
    e = ss2.mult.unit
    d = cn.dual_connection(fam, e, fam.unit_derivative())
    assert cn.family_equal(fam.conn, d.conn, ss2.mult, pts2).equal


def test_frobenius_second_structure_is_flat(models, points):
    m = models("frob-cp1")
    d = cn.dual_connection(m.families["flat"], m.eventual_identities["E"], None)
    assert cn.curvature_defect(d.conn, points(m, 30)) <= 1e-9


@pytest.mark.parametrize("w", ["0", "e", "E"])
@pytest.mark.parametrize("fname", ["flat", "curved"])
def test_dual_connection_is_special(ss2, pts2, w, fname):
    fam = ss2.families[fname]
    E = ss2.eventual_identities["E2"]
    W = {"0": ZERO2, "e": ss2.mult.unit, "E": E}[w]
    d = cn.dual_connection(fam, E, W, pts=pts2)
    assert cn.torsion_defect(d.conn, pts2) <= 1e-9
    assert cn.compat_defect(d.conn, d.mult, pts2) <= 1e-9


def test_malformed_endomorphism_breaks_duality(ss2, pts2):
    fam = ss2.families["flat"]
    E = ss2.eventual_identities["E2"]
    star = alg.dual_mul(ss2.mult, E).mult
    good = cn.connection_a(fam, E, cn.admissible_endomorphism(fam, E, vector_field(["u2", "1"], 2)))
    assert max(cn.torsion_defect(good, pts2), cn.compat_defect(good, star, pts2)) <= 1e-9
    nilpotent = expr_field([["0", "1"], ["0", "0"]], 2)  # not a multiplication operator
    bad = cn.connection_a(fam, E, nilpotent)
    assert max(cn.torsion_defect(bad, pts2), cn.compat_defect(bad, star, pts2)) > 1e-3


@pytest.mark.parametrize("name", ["semisimple2", "semisimple3", "kappa2d", "frob-cp1"])
def test_second_structure_against_admissible_form(models, points, name):
    m = models(name)
    pts = points(m, 25)
    fam = next(iter(m.families.values()))
    E = m.eventual_identities["E"]
    star = alg.dual_mul(m.mult, E).mult
    sec = cn.second_structure(fam, E)
    assert sup(sec.conn.values(pts) - cn.dual_connection(fam, E, constant_field(np.zeros(m.n), m.n)).conn.values(pts)) == 0.0
    cmp = cn.family_equal(sec.conn, cn.connection_a(fam, E, cn.admissible_endomorphism(fam, E)), star, pts)
    S = cn.aux_shift(fam, E)
    assert cmp.equal
    assert sup(cmp.shift - alg.multiply(m.mult, S, alg.multiply(m.mult, E, E)).values(pts)) <= 1e-9
    assert sup(cn.second_structure_euler_tensor(fam, E).values(pts)) <= 1e-9


def test_aux_identity(ss2, pts2):
    fam = ss2.families["curved"]
    assert cn.aux_identity_defect(fam, ss2.mult.unit, pts2) <= 1e-12
    assert cn.aux_identity_defect(fam, ss2.eventual_identities["E"], pts2) <= 1e-9
    assert cn.aux_identity_defect(fam, vector_field(["u2", "u1"], 2), pts2) > 1e-3


@pytest.mark.parametrize("name", ["semisimple2", "semisimple3", "kappa2d", "frob-cp1"])
def test_duality_is_an_involution(models, points, name):
    m = models(name)
    pts = points(m, 20)
    for fam in m.families.values():
        for E in m.eventual_identities.values():
            for W in (None, m.mult.unit, E):
                assert cn.duality_involution_defect(fam, E, W, pts) <= 1e-9
            assert cn.fixed_unit_involution_defect(fam, E, constant_field(np.zeros(m.n), m.n), pts) <= 1e-9
            assert cn.second_structure_involution_defect(fam, E, pts) <= 1e-9


def test_duality_by_unit_is_a_shift(ss2, pts2):
    fam = ss2.families["curved"]
    e = ss2.mult.unit
    V = cn.involution_shift(fam, e)
    np.testing.assert_allclose(V.values(pts2), fam.unit_derivative().values(pts2), atol=1e-14)


# --- curvature identities ------------------------------------------------------


def test_lorenz(models, points, ss2, pts2):
    assert cn.lorenz_defect(ss2.families["flat"].conn, ss2.mult, pts2) == 0.0
    d = cn.dual_connection(ss2.families["flat"], ss2.eventual_identities["E2"], None)
    assert cn.lorenz_defect(d.conn, d.mult, pts2) <= 1e-9
    s3 = models("semisimple3")
    assert cn.lorenz_defect(s3.families["main"].conn, s3.mult, points(s3, 20)) > 1e-3


@pytest.mark.parametrize("name", ["semisimple2", "semisimple3"])
def test_lorenz_status_invariance(models, points, name):
    m = models(name)
    pts = points(m, 20)
    rng = np.random.default_rng(3)
    for fam in m.families.values():
        status = cn.lorenz_defect(fam.conn, m.mult, pts) <= 1e-9
        for _ in range(5):
            a, b = rng.normal(size=2)
            V = vector_field([f"{a} * u2", f"{b} * u1^2"] + ["u1"] * (m.n - 2), m.n)
            assert (cn.lorenz_defect(cn.shift(fam, V).conn, m.mult, pts) <= 1e-9) == status
        for E in m.eventual_identities.values():
            d = cn.dual_connection(fam, E, None)
            assert (cn.lorenz_defect(d.conn, d.mult, pts) <= 1e-9) == status


def random_endomorphism(n, rng):
    coeff = rng.normal(size=(n, n, 2))
    return expr_field([[f"{a} * sin(u1) + {b} * u2" for a, b in row] for row in coeff], n)


def test_curvature_conjugation(ss2, pts2, models, points):
    fam = ss2.families["curved"]
    zero = expr_field([["0", "0"], ["0", "0"]], 2)
    assert cn.curvature_conjugation_defect(fam, ss2.mult.unit, zero, pts2) <= 1e-12
    E = ss2.eventual_identities["E2"]
    assert cn.curvature_conjugation_defect(fam, E, cn.admissible_endomorphism(fam, E), pts2) <= 1e-9
    rng = np.random.default_rng(11)
    for _ in range(3):
        assert cn.curvature_conjugation_defect(fam, E, random_endomorphism(2, rng), pts2) <= 1e-9
    # E need not be an eventual identity
    Eodd = vector_field(["u2 + 1", "u1"], 2)
    assert cn.curvature_conjugation_defect(fam, Eodd, random_endomorphism(2, rng), pts2) <= 1e-9
    s3 = models("semisimple3")
    f3 = s3.families["main"]
    p3 = points(s3, 10)
    assert cn.curvature_conjugation_defect(f3, s3.eventual_identities["E"], random_endomorphism(3, rng), p3) <= 1e-9


# --- flatness ------------------------------------------------------------------


def test_flat_shift(ss2, pts2):
    fam = cn.unit_normalized(ss2.families["flat"], ZERO2)
    for lam in (1.0, 2.5):
        rep = cn.flat_shift_defect(fam, scale(ss2.mult.unit, lam), pts2)
        assert max(rep.condition, rep.shifted_curvature) <= 1e-9
    separated = cn.flat_shift_defect(fam, vector_field(["u1^2", "sin(u2)"], 2), pts2)
    assert max(separated.condition, separated.shifted_curvature) <= 1e-9
    generic = cn.flat_shift_defect(fam, vector_field(["u2", "u1*u2"], 2), pts2)
    assert generic.condition > 1e-4
    assert generic.curvature_relation <= 1e-9


def test_dual_flat(models, points, ss2, pts2):
    m = models("frob-cp1")
    pts = points(m, 30)
    rep = cn.dual_flat_defect(m.families["flat"], m.eventual_identities["E"], ZERO2, pts)
    assert rep.condition <= 1e-9 and rep.dual_curvature <= 1e-8
    flat = cn.unit_normalized(ss2.families["flat"], ZERO2)
    trivial = cn.dual_flat_defect(flat, ss2.mult.unit, ZERO2, pts2)
    assert trivial.condition <= 1e-12
    k = models("kappa2d")
    kp = points(k, 30)
    generic = cn.dual_flat_defect(k.families["flat"], k.eventual_identities["E"], ZERO2, kp)
    assert generic.condition > 1e-4
    assert generic.dual_curvature > 0.0  # reported even when the condition fails


@pytest.mark.parametrize("Wt", [["0", "0"], ["1", "0"], ["u1", "0"]])
def test_dual_flat_status_independent_of_flat_representative(models, points, Wt):
    m = models("frob-cp1")
    pts = points(m, 20)
    W = vector_field(Wt, 2)
    base = m.families["flat"]
    other = cn.shift(base, scale(m.mult.unit, 1.5))
    assert cn.curvature_defect(other.conn, pts) <= 1e-9
    s1 = cn.dual_flat_defect(base, m.eventual_identities["E"], W, pts).condition <= 1e-9
    s2 = cn.dual_flat_defect(other, m.eventual_identities["E"], W, pts).condition <= 1e-9
    assert s1 == s2


# --- Legendre fields -----------------------------------------------------------------


def test_legendre_condition(ss2, pts2):
    fam = ss2.families["flat"]
    assert cn.legendre_defect(cn.unit_normalized(fam, ZERO2), ss2.mult.unit, pts2) <= 1e-12
    X0 = ss2.legendre_fields["X0"]
    assert cn.legendre_defect(fam, X0, pts2) <= 1e-12
    assert cn.legendre_defect(fam, vector_field(["u2", "u1"], 2), pts2) > 1e-3
    shifted = cn.shift(fam, vector_field(["u1*u2", "1"], 2))
    assert cn.legendre_defect(shifted, X0, pts2) <= 1e-12


def test_legendre_transform(models, points, ss2, pts2):
    fam = ss2.families["flat"]
    same = cn.legendre_transform(fam, ss2.mult.unit, pts2)
    assert cn.family_equal(fam.conn, same.conn, ss2.mult, pts2).equal
    X0 = ss2.legendre_fields["X0"]
    L = cn.legendre_transform(fam, X0, pts2)
    assert cn.torsion_defect(L.conn, pts2) <= 1e-9 and cn.compat_defect(L.conn, L.mult, pts2) <= 1e-9
    assert cn.curvature_defect(L.conn, pts2) <= 1e-9
    with pytest.raises(NotLegendre):
        cn.legendre_transform(fam, vector_field(["u2", "u1"], 2), pts2)
    s3 = models("semisimple3")
    p3 = points(s3, 20)
    f3 = s3.families["main"]
    assert cn.legendre_curvature_defect(f3, s3.legendre_fields["X0"], p3) <= 1e-9


def test_legendre_transport_of_lorenz(ss2, pts2):
    fam = ss2.families["curved"]
    X0 = ss2.legendre_fields["X0"]
    assert cn.lorenz_defect(fam.conn, ss2.mult, pts2) <= 1e-9
    L = cn.legendre_transform(fam, X0, pts2)
    assert cn.lorenz_defect(L.conn, L.mult, pts2) <= 1e-9


@pytest.mark.parametrize("name, fam_name, u_name", [("semisimple2", "flat", "X0"), ("semisimple3", "main", "X0"),
                                                    ("frob-cp1", "flat", "u"), ("kappa2d", "flat", "u")])
def test_legendre_commutes_with_duality(models, points, name, fam_name, u_name):
    m = models(name)
    pts = points(m, 20)
    rep = cn.legendre_duality_commute(m.families[fam_name], m.eventual_identities["E"], m.legendre_fields[u_name], pts)
    assert rep.comparison.equal
    assert rep.shift_residual <= 1e-9
    assert rep.dual_legendre <= 1e-9


def test_legendre_duality_by_unit(ss2, pts2):
    rep = cn.legendre_duality_commute(ss2.families["flat"], ss2.mult.unit, ss2.legendre_fields["X0"], pts2)
    assert rep.comparison.equal and rep.shift_residual <= 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_special_family_invariants_under_random_shifts(a, b):
    from fmk.models import builtin_model

    m = builtin_model("semisimple2")
    pts = sample_points(m.domain, 10, 5)
    fam = cn.shift(m.families["curved"], vector_field([f"{a} * u1 * u2", f"{b} + exp(u2)"], 2))
    assert cn.torsion_defect(fam.conn, pts) <= 1e-9
    assert cn.compat_defect(fam.conn, m.mult, pts) <= 1e-9
