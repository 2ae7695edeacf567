"""Classical Magnus expansion: nested-integral terms, Magnus integrators,
a fixed-step driver and an adaptive high-accuracy reference solver.

A coefficient function ``A`` (a "MatFn") is either a :class:`MatPoly` or any
deterministic callable ``t -> (n, n) array``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import commutator, expm
from .matpoly import MatPoly

__all__ = [
    "Trajectory",
    "sample",
    "dim_of",
    "magnus_term",
    "magnus_term_poly",
    "magnus_term_series",
    "magnus2_step",
    "magnus4_step",
    "integrate",
    "reference_solve",
    "METHODS",
    "register_method",
    "get_method",
    "method_names",
    "GAUSS2_NODES",
]

SQRT3 = math.sqrt(3.0)
GAUSS2_NODES = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0)
DEFAULT_SAMPLER_NODES = 16


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    states: tuple

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    @property
    def final(self):
        return self.states[-1]


def sample(A, times):
    """Evaluate ``A`` at each entry of ``times``; returns a stack ``times.shape + (n, n)``."""
    times = np.asarray(times, dtype=float)
    if isinstance(A, MatPoly):
        return A(times)
    flat = [np.asarray(A(float(t)), dtype=float) for t in times.ravel()]
    if not flat:
        n = dim_of(A)
        return np.zeros(times.shape + (n, n))
    return np.array(flat).reshape(times.shape + flat[0].shape)


def dim_of(A, t=0.0):
    if isinstance(A, MatPoly):
        return A.dim
    return np.asarray(A(t)).shape[-1]


def _gauss01(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _node_count(A, k, nodes):
    if nodes is not None:
        return nodes
    if isinstance(A, MatPoly):
        d = A.degree
        # exact for the highest total degree in the outer variable
        return max(d + 2, math.ceil(k * (d + 1) / 2))
    return DEFAULT_SAMPLER_NODES


def _comm(X, Y):
    return X @ Y - Y @ X


def magnus_term(A, k, t, t0=0.0, nodes=None):
    """Magnus term ``Omega_k(A)`` over ``[t0, t]`` by nested Gauss-Legendre quadrature.

    The simplex limits are mapped onto the unit cube, so polynomial inputs are
    integrated exactly (up to round-off) with the default node count.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"magnus_term supports k in {{1, 2, 3}}, got {k}")
    if t < t0:
        raise ValueError("need t >= t0")
    T = float(t) - float(t0)
    m = _node_count(A, k, nodes)
    u, w = _gauss01(m)

    if k == 1:
        A1 = sample(A, t0 + T * u)
        return T * np.einsum("i,ijk->jk", w, A1)

    if k == 2:
        t1 = t0 + T * u
        t2 = t0 + T * u[:, None] * u[None, :]
        A1 = sample(A, t1)[:, None]
        A2 = sample(A, t2)
        weight = T * T * (w * u)[:, None] * w[None, :]
        return -0.5 * np.einsum("ij,ijkl->kl", weight, _comm(A2, A1))

    # k == 3: two nested integrals with different inner limits
    U1 = u[:, None, None]
    U2 = u[None, :, None]
    U3 = u[None, None, :]
    A1 = sample(A, t0 + T * u)[:, None, None]
    A2 = sample(A, t0 + T * U1 * U2 + 0 * U3)
    A3 = sample(A, t0 + T * U1 * U2 * U3)
    w3 = w[:, None, None] * w[None, :, None] * w[None, None, :]
    weight = T**3 * w3 * (U1**2 * U2)
    first = np.einsum("abc,abckl->kl", weight, _comm(_comm(A3, A2), A1))

    A2b = A2
    A3b = sample(A, t0 + T * U1 * U3 + 0 * U2)
    weight_b = T**3 * w3 * (U1**2 + 0 * U2)
    second = np.einsum("abc,abckl->kl", weight_b, _comm(A2b, _comm(A3b, A1)))
    return 0.25 * first + second / 12.0


def magnus_term_poly(A: MatPoly, k):
    """Exact ``Omega_k(A)(t)`` from ``0`` for polynomial ``A``, as a MatPoly in ``t``.

    Nested simplex integrals become iterated antiderivatives, e.g.
    ``Omega_2 = -1/2 I([I A, A])`` with ``I`` the antiderivative from zero.
    """
    IA = A.antiderivative()
    if k == 1:
        return IA
    if k == 2:
        return IA.commutator(A).antiderivative().scale(Fraction(-1, 2))
    if k == 3:
        inner = IA.commutator(A).antiderivative()
        first = inner.commutator(A).antiderivative().scale(Fraction(1, 4))
        second = IA.commutator(IA.commutator(A)).antiderivative().scale(Fraction(1, 12))
        return first + second
    raise ValueError(f"magnus_term_poly supports k in {{1, 2, 3}}, got {k}")


def magnus_term_series(A: MatPoly, k, nodes=12):
    """Taylor coefficients ``{p: C_p}`` of ``Omega_k(A)(tau) = sum_p C_p tau**p`` (from 0).

    The monomial moments of the unit-cube integrands are computed by Gauss
    quadrature in floating point, giving an independent floating route to the
    same coefficients that :func:`magnus_term_poly` produces exactly.
    """
    u, w = _gauss01(nodes)

    def moment(j):
        return float(np.dot(w, u**j))

    cs = A.float_coeffs()
    out = {}

    def add(p, M):
        out[p] = out.get(p, 0.0) + M

    rng = range(len(cs))
    if k == 1:
        for p in rng:
            add(p + 1, cs[p] * moment(p))
    elif k == 2:
        for p in rng:
            for q in rng:
                c = moment(1 + p + q) * moment(p)
                add(p + q + 2, -0.5 * c * _comm(cs[p], cs[q]))
    elif k == 3:
        for p in rng:
            for q in rng:
                for r in rng:
                    s = p + q + r
                    c1 = moment(2 + s) * moment(1 + p + q) * moment(p)
                    add(s + 3, 0.25 * c1 * _comm(_comm(cs[p], cs[q]), cs[r]))
                    # A(t2) = A_q, A(t3) = A_p, A(t1) = A_r
                    c2 = moment(2 + s) * moment(q) * moment(p)
                    add(s + 3, c2 / 12.0 * _comm(cs[q], _comm(cs[p], cs[r])))
    else:
        raise ValueError(f"magnus_term_series supports k in {{1, 2, 3}}, got {k}")
    return out


def _identity_step(A, t0):
    n = dim_of(A, t0)
    return np.zeros((n, n)), np.eye(n)


def magnus2_step(A, t0, h):
    """Second-order Magnus step with trapezoidal nodes."""
    if h == 0:
        return _identity_step(A, t0)
    A0, A1 = sample(A, [t0, t0 + h])
    exponent = 0.5 * h * (A0 + A1) - 0.25 * h * h * commutator(A0, A1)
    return exponent, expm(exponent)


def magnus4_step(A, t0, h):
    """Fourth-order Magnus step with two Gauss-Legendre nodes."""
    if h == 0:
        return _identity_step(A, t0)
    A1, A2 = sample(A, [t0 + h * GAUSS2_NODES[0], t0 + h * GAUSS2_NODES[1]])
    exponent = 0.5 * h * (A1 + A2) - (h * h * SQRT3 / 12.0) * commutator(A1, A2)
    return exponent, expm(exponent)


METHODS = {"magnus2": magnus2_step, "magnus4": magnus4_step}


def register_method(name, step):
    METHODS[name] = step


def _load_builtin_methods():
    from . import rkmk  # noqa: F401  registers rkmk-* steppers


def method_names():
    _load_builtin_methods()
    return sorted(METHODS)


def get_method(name):
    _load_builtin_methods()
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; known: {', '.join(sorted(METHODS))}") from None


def integrate(method, A, t0, T, nsteps, Y0):
    """Uniform-step integration of ``Y' = A(t) Y`` with a registered one-step method."""
    step = get_method(method)
    if nsteps < 1:
        raise ValueError("nsteps must be positive")
    if not T > t0:
        raise ValueError("need T > t0")
    h = (T - t0) / nsteps
    Y = np.array(Y0, dtype=float)
    times = [float(t0)]
    states = [Y]
    for i in range(nsteps):
        t = t0 + i * h
        _, update = step(A, t, h)
        Y = update @ Y
        times.append(t0 + (i + 1) * h if i + 1 < nsteps else float(T))
        states.append(Y)
    return Trajectory(tuple(times), tuple(states))


def _ordered_product(U):
    # U[0] acts first; pairwise reduction keeps round-off growth logarithmic
    while len(U) > 1:
        if len(U) % 2:
            U = np.concatenate([U, np.eye(U.shape[-1])[None]], axis=0)
        U = U[1::2] @ U[0::2]
    return U[0]


def _magnus4_flow(A, t0, T, nsteps):
    h = (T - t0) / nsteps
    starts = t0 + h * np.arange(nsteps)
    A1 = sample(A, starts + h * GAUSS2_NODES[0])
    A2 = sample(A, starts + h * GAUSS2_NODES[1])
    exponents = 0.5 * h * (A1 + A2) - (h * h * SQRT3 / 12.0) * _comm(A1, A2)
    return _ordered_product(expm(exponents))


def reference_solve(A, t0, T, tol=1e-12, Y0=None, n_start=8, max_steps=2**18):
    """High-accuracy ``Y(T)`` by repeated step halving of the order-4 Magnus method.

    Halving stops once two successive refinements agree to ``tol / 10``
    relative to the norm of the solution.  Raises ``RuntimeError`` if that
    does not happen within ``max_steps`` steps.
    """
    if tol < 1e-14:
        raise ValueError("tol must be >= 1e-14")
    if not T > t0:
        raise ValueError("need T > t0")
    n = dim_of(A, t0)
    Y0 = np.eye(n) if Y0 is None else np.asarray(Y0, dtype=float)
    N = n_start
    prev = _magnus4_flow(A, t0, T, N)
    while N < max_steps:
        N *= 2
        cur = _magnus4_flow(A, t0, T, N)
        if np.linalg.norm(cur - prev) <= 0.1 * tol * np.linalg.norm(cur):
            return cur @ Y0
        prev = cur
    raise RuntimeError(f"reference_solve did not reach tol={tol} within {max_steps} steps")
