import numpy as np
import pytest
import sympy as sp

from fmk import algebra as alg
from fmk.chart_core.fields import constant_field, expr_field, scalar_times, vector_field
from fmk.errors import NonInvertible, NotEventualIdentity
from fmk.models import kappa_mult, semisimple_mult

from conftest import sup

PTS2 = np.array([[1.0, 2.0], [0.7, 1.3], [1.4, 1.9]])


@pytest.fixture(scope="module")
def ss():
    return semisimple_mult(2)


def frame(n):
    return [constant_field(np.eye(n)[i], n) for i in range(n)]


def test_unit_law_and_componentwise_product(ss):
    X = constant_field([1.0, 1.0], 2)
    Y = constant_field([2.0, 3.0], 2)
    np.testing.assert_allclose(alg.multiply(ss, X, Y).values(PTS2), [[2.0, 3.0]] * 3)
    Z = vector_field(["sin(u1)", "u1*u2"], 2)
    np.testing.assert_allclose(alg.multiply(ss, ss.unit, Z).values(PTS2), Z.values(PTS2))


def test_kappa_product_from_prepotential_oracle(models):
    m = models("kappa2d", kappa=0.0)
    t1, t2, k = sp.symbols("t1 t2 kappa")
    F = t1**2 * t2 / 2 + t2**2 * sp.log(t2**2) / 4 - k * t1**3 / 6
    T = [[[sp.diff(F, a, b, c) for c in (t1, t2)] for b in (t1, t2)] for a in (t1, t2)]
    eta = sp.Matrix(2, 2, lambda i, j: T[0][i][j])
    inv = eta.inv()
    oracle = [sum(inv[kk, l] * T[l][1][1] for l in range(2)) for kk in range(2)]
    p = {t1: 0, t2: 1, k: 0}
    got = alg.multiply(m.mult, frame(2)[1], frame(2)[1]).values([0.0, 1.0])[0]
    np.testing.assert_allclose(got, [float(o.subs(p)) for o in oracle], atol=1e-14)
    np.testing.assert_allclose(got, [1.0, 0.0], atol=1e-14)


def test_associativity_failure_detected(ss):
    c = expr_field([[[ "1", "0"], ["0", "u1"]], [["0", "0"], ["0", "1"]]], 2)
    bad = alg.MultField(c, ss.unit)
    assert alg.algebra_defects(bad, PTS2).associativity > 1e-3


@pytest.mark.parametrize("kappa", [0.0, 0.1])
def test_kappa_algebra_is_associative(kappa):
    mult = kappa_mult(kappa)
    pts = np.array([[0.3, 0.5], [-0.8, 2.1], [0.0, 1.0]])
    d = alg.algebra_defects(mult, pts)
    assert max(d.commutativity, d.associativity, d.unit) <= 1e-9
    assert alg.hm_defect(mult, pts) <= 1e-9


def test_inverse_examples(ss):
    V = vector_field(["u1", "u2"], 2)
    np.testing.assert_allclose(alg.invert(ss, V, [1.0, 2.0]), [1.0, 0.5])
    np.testing.assert_allclose(alg.invert(ss, ss.unit, [1.0, 2.0]), [1.0, 1.0])
    with pytest.raises(NonInvertible):
        alg.check_invertible(ss, constant_field([0.0, 1.0], 2), PTS2)


def test_inverse_jets_from_implicit_differentiation(ss):
    V = vector_field(["u1^2 + 1", "exp(u2)"], 2)
    inv = alg.invert_field(ss, V)
    x = np.array([[0.5, 0.2]])
    jet = inv.jet(x, 2)
    np.testing.assert_allclose(jet.derivative_tensor(1)[0, 0], [-2 * 0.5 / (1.25**2), 0.0])
    np.testing.assert_allclose(jet.derivative_tensor(2)[0, 1, 1, 1], np.exp(-0.2))


def test_powers(ss):
    V = vector_field(["u1", "u2"], 2)
    np.testing.assert_allclose(alg.vf_power(ss, V, 2).values(PTS2), PTS2**2)
    np.testing.assert_allclose(alg.vf_power(ss, V, 0).values(PTS2), 1.0)
    np.testing.assert_allclose(alg.vf_power(ss, V, -2).values(PTS2), PTS2**-2.0)


def test_lie_derivative_routes_agree(ss):
    E = vector_field(["u1", "u2"], 2)
    L = alg.lie_derivative_mul(ss, E).values(PTS2)
    # weight-one Euler field: L_E(o) = o, so (L_E o)(d_i, d_j) = delta_ij d_i
    np.testing.assert_allclose(L, ss.c.values(PTS2), atol=1e-14)
    d = frame(2)
    for i in range(2):
        for j in range(2):
            via_brackets = alg.lie_derivative_mul_apply(ss, E, d[i], d[j]).values(PTS2)
            np.testing.assert_allclose(via_brackets, L[:, :, i, j], atol=1e-14)
    np.testing.assert_allclose(alg.lie_derivative_mul(ss, ss.unit).values(PTS2), 0.0)


def test_lie_derivative_is_tensorial_in_arguments(ss):
    X = vector_field(["u2^2", "sin(u1)"], 2)
    f = expr_field("1 + u1^2", 2)
    Y, Z = vector_field(["u1", "1"], 2), vector_field(["u2", "u1*u2"], 2)
    lhs = alg.lie_derivative_mul_apply(ss, X, scalar_times(f, Y), Z).values(PTS2)
    rhs = f.values(PTS2)[:, None] * alg.lie_derivative_mul_apply(ss, X, Y, Z).values(PTS2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_hm_condition(ss, models, points):
    assert alg.hm_defect(ss, PTS2) <= 1e-10
    m = models("kappa2d")
    assert alg.hm_defect(m.mult, points(m, 20)) <= 1e-9
    c = expr_field([[["1", "0"], ["0", "0.1*u1*u2"]], [["0.1*u2^2", "0"], ["0", "1"]]], 2)
    pert = alg.MultField(c, ss.unit)  # symmetric and point-dependent
    assert alg.hm_defect(pert, PTS2) > 1e-3


def test_hm_tensoriality_audit(ss, models, points):
    # the scaled-frame and coordinate-frame evaluations agree for a genuine F-manifold
    m = models("kappa2d")
    pts = points(m, 10)
    assert alg.hm_defect(m.mult, pts, scaled=False) <= 1e-9
    assert alg.hm_defect(m.mult, pts, scaled=True) <= 1e-9


@pytest.mark.parametrize(
    "comps, ok",
    [(["1", "1"], True), (["u1", "u2"], True), (["exp(u1)", "1 + u2^2"], True), (["u2", "u1"], False)],
)
def test_eventual_identity_defect(ss, comps, ok):
    r = alg.eventual_identity_defect(ss, vector_field(comps, 2), PTS2)
    assert (r <= 1e-9) if ok else (r > 1e-2)


def test_dual_multiplication_componentwise(ss):
    E = vector_field(["exp(u1)", "1 + u2^2"], 2)
    star = alg.dual_mul(ss, E, pts=PTS2).mult
    C = star.c.values(PTS2)
    f = E.values(PTS2)
    for p in range(len(PTS2)):
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0], expected[1, 1, 1] = 1 / f[p, 0], 1 / f[p, 1]
        np.testing.assert_allclose(C[p], expected)
    np.testing.assert_allclose(star.unit.values(PTS2), f)
    same = alg.dual_mul(ss, ss.unit).mult
    np.testing.assert_allclose(same.c.values(PTS2), ss.c.values(PTS2))


def test_dual_multiplication_gate(ss):
    with pytest.raises(NotEventualIdentity):
        alg.dual_mul(ss, vector_field(["u2", "u1"], 2), pts=PTS2)
    with pytest.warns(UserWarning):
        alg.dual_mul(ss, vector_field(["u2", "u1"], 2), pts=PTS2, on_fail="warn")


def test_inverse_unit_of_dual_is_square(ss):
    E = vector_field(["u1 + 1", "u2^2"], 2)
    star = alg.dual_mul(ss, E).mult
    np.testing.assert_allclose(
        alg.invert_field(star, ss.unit).values(PTS2), alg.multiply(ss, E, E).values(PTS2), rtol=1e-12
    )


def test_dual_of_dual_and_transport(models, points):
    for name in ("semisimple2", "kappa2d", "frob-cp1"):
        m = models(name)
        pts = points(m, 20)
        E = m.eventual_identities["E"]
        star = alg.dual_mul(m.mult, E).mult
        back = alg.dual_mul(star, m.mult.unit).mult
        assert sup(back.c.values(pts) - m.mult.c.values(pts)) <= 1e-9
        assert alg.hm_defect(star, pts) <= 1e-8


@pytest.mark.parametrize("n_, m_", [(1, 1), (-1, 1), (2, 3), (2, -2)])
def test_power_brackets_semisimple(ss, n_, m_):
    E = vector_field(["u1", "u2^2"], 2)
    assert alg.power_bracket_defect(ss, E, n_, m_, PTS2) <= 1e-9


def test_power_bracket_kappa_series(models, points):
    m = models("kappa2d")
    assert alg.power_bracket_defect(m.mult, m.eventual_identities["E"], 2, -2, points(m, 20)) <= 1e-6


def test_group_property(ss):
    E1 = vector_field(["u1", "u2"], 2)
    E2 = vector_field(["exp(u1)", "1 + u2^2"], 2)
    assert alg.eventual_identity_defect(ss, alg.multiply(ss, E1, E2), PTS2) <= 1e-9
