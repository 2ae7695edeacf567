import math

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import solve_ivp

from magnuslie.linalg import commutator, logm_near_identity
from magnuslie.magnus import (
    Trajectory,
    get_method,
    integrate,
    magnus2_step,
    magnus4_step,
    magnus_term,
    magnus_term_poly,
    magnus_term_series,
    method_names,
    reference_solve,
)
from magnuslie.matpoly import MatPoly

from conftest import random_affine


def _ivp(A, t0, T, n):
    def rhs(t, y):
        return (A(t) @ y.reshape(n, n)).ravel()

    sol = solve_ivp(rhs, (t0, T), np.eye(n).ravel(), method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1].reshape(n, n)


def test_omega1_is_integral():
    A = MatPoly([[[1, 0], [0, 2]], [[0, 3], [0, 0]], [[0, 0], [3, 0]]])
    assert np.allclose(magnus_term(A, 1, 2.0), [[2, 6], [8, 4]], atol=1e-14)


def test_omega2_affine_closed_form(rng):
    A = random_affine(rng)
    a, b = A.float_coeffs()
    for t in (0.3, 1.0, 2.5):
        want = -(t**3 / 12) * commutator(a, b)
        assert np.abs(magnus_term(A, 2, t) - want).max() <= 1e-12 * max(1.0, np.abs(want).max())


def test_omega2_frozen_value():
    A = MatPoly([[[0, 1], [0, 0]], [[0, 0], [1, 0]]])
    # [a, b] = diag(1, -1)
    assert np.allclose(magnus_term(A, 2, 1.0), -np.diag([1, -1]) / 12, atol=1e-16)


def test_constant_field_has_no_higher_terms():
    A = MatPoly.constant([[0, 1], [-2, 3]])
    for k in (2, 3):
        assert np.abs(magnus_term(A, k, 1.7)).max() < 1e-14


def test_quadrature_matches_exact(rng):
    A = MatPoly([rng.integers(-2, 3, (3, 3)).tolist() for _ in range(3)])
    for k in (1, 2, 3):
        exact = magnus_term_poly(A, k)
        assert np.allclose(magnus_term(A, k, 0.8), exact(0.8), atol=1e-12)
        assert np.allclose(magnus_term(A, k, 1.3, t0=0.5), magnus_term_poly(A.shift(0.5), k)(0.8), atol=1e-12)


def test_magnus_term_series_matches_poly(rng):
    A = MatPoly([rng.integers(-2, 3, (2, 2)).tolist() for _ in range(2)])
    for k in (1, 2, 3):
        exact = magnus_term_poly(A, k).float_coeffs()
        for p, M in magnus_term_series(A, k).items():
            want = exact[p] if p < len(exact) else 0 * M
            assert np.allclose(M, want, atol=1e-12)


def test_magnus_term_accepts_callable(rng):
    A = random_affine(rng)
    assert np.allclose(magnus_term(lambda t: A(t), 3, 0.7), magnus_term(A, 3, 0.7), atol=1e-12)


def test_magnus_term_rejects_bad_order():
    A = MatPoly.constant([[1]])
    with pytest.raises(ValueError):
        magnus_term(A, 4, 1.0)


def test_truncated_series_matches_log_of_flow(rng):
    A = random_affine(rng)
    h = 0.05
    Y = reference_solve(A, 0.0, h)
    omega = sum(magnus_term(A, k, h) for k in (1, 2, 3))
    # Omega_4 is O(h^5)
    assert np.abs(logm_near_identity(Y) - omega).max() < 50 * h**5


def test_steps_exact_for_constant_field():
    A = MatPoly.constant([[0.0, 1.0], [-4.0, 0.5]])
    M = A(0.0)
    for step in (magnus2_step, magnus4_step):
        exponent, update = step(A, 0.3, 0.25)
        assert np.allclose(exponent, 0.25 * M, atol=1e-15)
        assert np.allclose(update, scipy.linalg.expm(0.25 * M), atol=1e-14)


def test_zero_step_is_identity(rng):
    A = random_affine(rng)
    for step in (magnus2_step, magnus4_step):
        exponent, update = step(A, 0.0, 0.0)
        assert not exponent.any()
        assert np.array_equal(update, np.eye(3))


def test_step_exponent_frozen():
    A = MatPoly([[[0, 1], [0, 0]], [[0, 0], [1, 0]]])
    # magnus2 over [0, 1]: (a + (a+b))/2 - [a, a+b]/4
    e2, _ = magnus2_step(A, 0.0, 1.0)
    assert np.allclose(e2, [[-0.25, 1.0], [0.5, 0.25]], atol=1e-15)
    e4, _ = magnus4_step(A, 0.0, 1.0)
    want = np.array([[0, 1], [0.5, 0]]) - (math.sqrt(3) / 12) * (math.sqrt(3) / 3) * np.diag([1, -1])
    assert np.allclose(e4, want, atol=1e-15)


def test_reference_solve_against_ivp(rng):
    A = random_affine(rng)
    ref = reference_solve(A, 0.0, 1.0)
    ivp = _ivp(A, 0.0, 1.0, 3)
    assert np.linalg.norm(ref - ivp) / np.linalg.norm(ref) < 1e-10


def test_reference_solve_constant():
    A = MatPoly.constant([[0.0, 2.0], [-2.0, 0.0]])
    assert np.allclose(reference_solve(A, 0.0, 1.0), scipy.linalg.expm(A(0.0)), atol=1e-13)


def test_reference_solve_guards(rng):
    A = random_affine(rng)
    with pytest.raises(ValueError):
        reference_solve(A, 0.0, 1.0, tol=1e-16)
    with pytest.raises(ValueError):
        reference_solve(A, 1.0, 0.0)
    with pytest.raises(RuntimeError):
        reference_solve(A, 0.0, 1.0, tol=1e-13, max_steps=16)


@pytest.mark.parametrize("method,order", [("magnus2", 2), ("magnus4", 4)])
def test_convergence_order(rng, method, order):
    A = random_affine(rng)
    ref = reference_solve(A, 0.0, 1.0)
    errs = [np.linalg.norm(integrate(method, A, 0.0, 1.0, n, np.eye(3)).final - ref) for n in (10, 20, 40, 80)]
    slope = np.polyfit(np.log([1 / 10, 1 / 20, 1 / 40, 1 / 80]), np.log(errs), 1)[0]
    assert abs(slope - order) < 0.2


def test_integrate_trajectory(rng):
    A = random_affine(rng)
    tr = integrate("magnus4", A, 0.0, 1.1, 7, np.eye(3))
    assert len(tr.times) == 8 and tr.times[-1] == 1.1
    assert np.allclose(tr.states[0], np.eye(3))
    with pytest.raises(ValueError):
        Trajectory((0.0, 0.0), (np.eye(2), np.eye(2)))
    with pytest.raises(ValueError):
        integrate("nope", A, 0.0, 1.0, 4, np.eye(3))


def test_method_registry():
    names = method_names()
    for name in ("magnus2", "magnus4", "rkmk-euler", "rkmk-heun", "rkmk-gl2"):
        assert name in names
        assert callable(get_method(name))
