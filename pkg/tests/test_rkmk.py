import math

import numpy as np
import pytest
import scipy.linalg
import sympy

from magnuslie.magnus import integrate, magnus2_step, magnus4_step, magnus_term, reference_solve
from magnuslie.matpoly import MatPoly
from magnuslie.rkmk import (
    TABLEAUS,
    ButcherTableau,
    ContinuousCoeffs,
    RkmkOptions,
    atomic_coeffs,
    cstage_step,
    exact_magnus_coeffs,
    get_tableau,
    gl4_exponent,
    heun_exponent,
    rkmk_exponent,
    rkmk_step,
)

from conftest import random_affine

ORDER1 = RkmkOptions(dexpinv_order=1, fp_iters=1)


def test_builtin_tableaux():
    gl = get_tableau("gl2")
    w = sympy.sqrt(3) / 6
    assert gl.a[0][1] == sympy.Rational(1, 4) - w
    assert gl.c[1] == sympy.Rational(1, 2) + w
    assert gl.b == (sympy.Rational(1, 2), sympy.Rational(1, 2))
    assert get_tableau("heun").explicit and not gl.explicit
    assert set(TABLEAUS) == {"euler", "heun", "gl2"}
    with pytest.raises(ValueError):
        get_tableau("rk4")


def test_row_sum_checked():
    with pytest.raises(ValueError):
        ButcherTableau(((0, 0), (1, 0)), (0.5, 0.5), (0, "1/2"))


def test_tableau_from_json():
    tab = ButcherTableau.from_json('{"a": [[0, 0], [[1, 2], 0]], "b": [0, 1], "c": [0, [1, 2]]}')
    assert tab.a[1][0] == sympy.Rational(1, 2)
    assert tab.explicit


def test_options_validated():
    with pytest.raises(ValueError):
        RkmkOptions(dexpinv_order=9)
    with pytest.raises(ValueError):
        RkmkOptions(fp_iters=-1)


def test_heun_closed_form(rng):
    A = random_affine(rng)
    h = 0.3
    e, _ = rkmk_step(TABLEAUS["heun"], ORDER1, A, 0.2, h, np.eye(3))
    assert np.allclose(e, heun_exponent(A(0.2), A(0.5), h), rtol=0, atol=1e-15)
    assert np.allclose(e, magnus2_step(A, 0.2, h)[0], rtol=0, atol=1e-15)


def test_gl_closed_form(rng):
    A = random_affine(rng)
    h = 0.3
    c = TABLEAUS["gl2"].c_float
    e = rkmk_exponent(TABLEAUS["gl2"], ORDER1, A, 0.0, h)
    assert np.allclose(e, gl4_exponent(A(c[0] * h), A(c[1] * h), h), rtol=0, atol=1e-15)
    assert np.allclose(e, magnus4_step(A, 0.0, h)[0], rtol=0, atol=1e-15)


def test_gl4_exponent_equal_samples():
    A1 = np.array([[1.0, 2.0], [0.0, -1.0]])
    assert np.allclose(gl4_exponent(A1, A1, 0.4), 0.4 * A1)


def test_gl4_exponent_frozen():
    A1 = np.array([[0.0, 1.0], [0.0, 0.0]])
    A2 = np.array([[0.0, 0.0], [1.0, 0.0]])
    want = 0.5 * (A1 + A2) - (math.sqrt(3) / 12) * np.diag([1.0, -1.0])
    assert np.allclose(gl4_exponent(A1, A2, 1.0), want, atol=1e-16)


def test_euler_exponent_is_left_sample(rng):
    A = random_affine(rng)
    e, Y1 = rkmk_step(TABLEAUS["euler"], ORDER1, A, 0.4, 0.1, np.eye(3))
    assert np.array_equal(e, 0.1 * A(0.4))
    assert np.allclose(Y1, scipy.linalg.expm(0.1 * A(0.4)), atol=1e-14)


def test_constant_field_exact():
    A = MatPoly.constant([[0.0, 1.0], [-1.0, 0.0]])
    for tab in TABLEAUS.values():
        e, Y1 = rkmk_step(tab, RkmkOptions(dexpinv_order=4, fp_iters=3), A, 0.0, 0.7, np.eye(2))
        assert np.allclose(e, 0.7 * A(0.0), atol=1e-15)
        assert np.allclose(Y1, scipy.linalg.expm(0.7 * A(0.0)), atol=1e-14)


def test_residual_mode_converges(rng):
    A = random_affine(rng)
    opts = RkmkOptions(dexpinv_order=4, fp_tol=1e-15, fp_max_iters=200)
    e_tol = rkmk_exponent(TABLEAUS["gl2"], opts, A, 0.0, 0.1)
    e_many = rkmk_exponent(TABLEAUS["gl2"], RkmkOptions(dexpinv_order=4, fp_iters=60), A, 0.0, 0.1)
    assert np.allclose(e_tol, e_many, atol=1e-14)


def test_gl_convergence_order(rng):
    A = random_affine(rng)
    ref = reference_solve(A, 0.0, 1.0)
    hs = [0.1 / 2**k for k in range(4)]
    errs = [np.linalg.norm(integrate("rkmk-gl2", A, 0.0, 1.0, round(1 / h), np.eye(3)).final - ref) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 3.7 <= slope <= 4.3


def test_continuous_coeffs_validation():
    with pytest.raises(ValueError):
        ContinuousCoeffs(a=lambda t, s: 1.0, b=lambda t: 1.0, nodes=(0.5,), weights=(-1.0,))
    with pytest.raises(ValueError):
        ContinuousCoeffs(a=lambda t, s: 1.0, b=lambda t: 1.0, nodes=(1.5,), weights=(1.0,))
    with pytest.raises(ValueError):
        ContinuousCoeffs(a=lambda t, s: 1.0, b=lambda t: 1.0, nodes=(0.5,), weights=(1.0,), rule="bogus")


def test_product_weights_integrate_step_kernel():
    co = exact_magnus_coeffs(8)
    for tau in (0.0, 0.3, 0.5, 1.0):
        # weights integrate polynomials of degree < m exactly against [s <= tau]
        K = co.kernel_weights(tau)
        x = np.array(co.nodes)
        assert abs(K.sum() - tau) < 1e-14
        assert abs(K @ x**3 - tau**4 / 4) < 1e-14


def test_cstage_constant_field():
    A = MatPoly.constant([[0.0, 2.0], [1.0, -1.0]])
    for rule in ("pointwise", "product"):
        u, v, Y1 = cstage_step(exact_magnus_coeffs(6, rule), ORDER1, A, 0.0, 0.5, np.eye(2))
        assert np.allclose(v, 0.5 * A(0.0), atol=1e-15)
        assert np.allclose(u(1.0), 0.5 * A(0.0), atol=1e-15)
        assert np.allclose(Y1, scipy.linalg.expm(0.5 * A(0.0)), atol=1e-14)


def test_cstage_atomic_gl_reproduces_rkmk(rng):
    A = random_affine(rng)
    tab = TABLEAUS["gl2"]
    for opts in (ORDER1, RkmkOptions(dexpinv_order=3, fp_iters=4)):
        _, v, Y1 = cstage_step(atomic_coeffs(tab), opts, A, 0.1, 0.2, np.eye(3))
        e, Y = rkmk_step(tab, opts, A, 0.1, 0.2, np.eye(3))
        assert np.allclose(v, e, rtol=0, atol=1e-15)
        assert np.allclose(Y1, Y, rtol=0, atol=1e-14)


def test_cstage_error_decays_with_order(rng):
    mats = [np.triu(rng.integers(-2, 3, (4, 4)), 1) for _ in range(3)]
    A = MatPoly([m.tolist() for m in mats])
    h = 0.5
    omega = sum(magnus_term(A, k, h) for k in (1, 2, 3))
    opts = RkmkOptions(dexpinv_order=8, fp_iters=6)
    errs = []
    for order in (2, 4, 8, 16):
        u, _, _ = cstage_step(exact_magnus_coeffs(order), opts, A, 0.0, h, np.eye(4))
        errs.append(np.linalg.norm(u(1.0) - omega))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-13 and errs[3] < 1e-13


def test_cstage_pointwise_rule_still_converges(rng):
    mats = [np.triu(rng.integers(-2, 3, (4, 4)), 1) for _ in range(3)]
    A = MatPoly([m.tolist() for m in mats])
    omega = sum(magnus_term(A, k, 0.5) for k in (1, 2, 3))
    opts = RkmkOptions(dexpinv_order=8, fp_iters=6)
    errs = [np.linalg.norm(cstage_step(exact_magnus_coeffs(o, "pointwise"), opts, A, 0.0, 0.5, np.eye(4))[0](1.0) - omega)
            for o in (4, 8, 16, 32)]
    assert all(x > y for x, y in zip(errs, errs[1:]))
