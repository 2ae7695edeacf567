"""Autonomous form of ``Y' = A(t) Y`` on ``GL(n) x Aff(1)``.

The state ``blockdiag(Y, [[x, t], [0, 1]])`` is kept by components and the
field ``blockdiag(A(t), e0)`` only reads ``t`` from the state.  Steps act by
left multiplication with the exponential of a blockwise Lie-algebra element,
so the ``Aff(1)`` part stays exact: it is carried in rational arithmetic,
its exponent is always a multiple of ``e0`` and ``exp(s e0) = [[1, s], [0, 1]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import commutator, dexpinv, expm
from .magnus import GAUSS2_NODES, get_method, sample

__all__ = [
    "E0",
    "AugmentedState",
    "AlgebraElement",
    "augment",
    "aff_exp",
    "assemble",
    "augmented_trajectory",
    "solve_augmented",
    "AUGMENTED_METHODS",
]

E0 = np.array([[Fraction(0), Fraction(1)], [Fraction(0), Fraction(0)]], dtype=object)


def _exact(c):
    """Exact rational value of a scalar; floats enter through their binary value."""
    if isinstance(c, (int, Fraction)):
        return Fraction(c)
    return Fraction(float(c))


@dataclass(frozen=True)
class AugmentedState:
    """``Y`` block plus the ``Aff(1)`` entries ``x`` and ``t``, held as exact rationals."""

    Y: np.ndarray
    x: Fraction = Fraction(1)
    t: Fraction = Fraction(0)

    def as_matrix(self):
        n = self.Y.shape[0]
        M = np.zeros((n + 2, n + 2))
        M[:n, :n] = self.Y
        M[n:, n:] = [[float(self.x), float(self.t)], [0.0, 1.0]]
        return M


@dataclass(frozen=True)
class AlgebraElement:
    """Element of ``gl(n) x aff(1)``; ``aff`` is a 2x2 rational matrix with zero bottom row."""

    gl: np.ndarray
    aff: np.ndarray

    def __add__(self, other):
        return AlgebraElement(self.gl + other.gl, self.aff + other.aff)

    def __sub__(self, other):
        return AlgebraElement(self.gl - other.gl, self.aff - other.aff)

    def __rmul__(self, c):
        return AlgebraElement(float(c) * self.gl, _exact(c) * self.aff)

    def bracket(self, other):
        return AlgebraElement(commutator(self.gl, other.gl), commutator(self.aff, other.aff))

    def as_matrix(self):
        n = self.gl.shape[0]
        M = np.zeros((n + 2, n + 2))
        M[:n, :n] = self.gl
        M[n:, n:] = self.aff.astype(float)
        return M


def aff_exp(F):
    """Closed-form exponential of ``[[p, q], [0, 0]]``."""
    p, q = _exact(F[0, 0]), _exact(F[0, 1])
    one, zero = Fraction(1), Fraction(0)
    if p == 0:
        return np.array([[one, q], [zero, one]], dtype=object)
    ep = math.exp(p)
    return np.array([[_exact(ep), _exact(float(q) * math.expm1(p) / float(p))], [zero, one]], dtype=object)


def augment(A):
    """The autonomous field ``state -> blockdiag(A(state.t), e0)``."""

    def field(state: AugmentedState):
        return AlgebraElement(sample(A, [float(state.t)])[0], E0.copy())

    return field


def _act(u: AlgebraElement, state: AugmentedState):
    Y = expm(u.gl) @ state.Y
    M = aff_exp(u.aff) @ np.array([[state.x, state.t], [Fraction(0), Fraction(1)]], dtype=object)
    return AugmentedState(Y, M[0, 0], M[0, 1])


def assemble(state: AugmentedState, u: AlgebraElement):
    """Full-matrix version of one update, ``expm(u) @ state``, for cross-checks."""
    return expm(u.as_matrix()) @ state.as_matrix()


def _dexpinv(u, v, N):
    return AlgebraElement(dexpinv(u.gl, v.gl, N), dexpinv(u.aff, v.aff, N))


def _magnus2(field, state, h):
    f0 = field(state)
    f1 = field(_act(h * f0, state))
    return (h / 2) * (f0 + f1) - (h * h / 4) * f0.bracket(f1)


def _magnus4(field, state, h):
    f0 = field(state)
    f1 = field(_act((float(h) * GAUSS2_NODES[0]) * f0, state))
    f2 = field(_act((float(h) * GAUSS2_NODES[1]) * f0, state))
    return (h / 2) * (f1 + f2) - (float(h) ** 2 * math.sqrt(3.0) / 12.0) * f1.bracket(f2)


def _coef(x):
    # rational tableau entries stay exact in the aff(1) block
    return Fraction(int(x.p), int(x.q)) if x.is_Rational else float(x)


def _rkmk(tab, opts):
    a = [[_coef(x) for x in row] for row in tab.a]
    b = [_coef(x) for x in tab.b]
    s = tab.s
    N = opts.dexpinv_order
    strictly_lower = not np.any(np.triu(tab.a_float))

    def stage_sum(row, F, h):
        out = 0 * F[0]
        for j in range(s):
            if row[j]:
                out = out + (h * row[j]) * F[j]
        return out

    def exponent(field, state, h):
        if strictly_lower:
            F = []
            for i in range(s):
                u = stage_sum(a[i], F + [0 * field(state)] * (s - i), h)
                F.append(_dexpinv(u, field(_act(u, state)), N))
        else:
            f0 = field(state)
            # first-order guess: the field at each stage point
            F = [field(_act(stage_sum(a[i], [f0] * s, h), state)) for i in range(s)]
            for _ in range(opts.fp_iters):
                U = [stage_sum(a[i], F, h) for i in range(s)]
                F = [_dexpinv(U[i], field(_act(U[i], state)), N) for i in range(s)]
        return stage_sum(b, F, h)

    return exponent


def _method(name):
    if name == "magnus2":
        return _magnus2
    if name == "magnus4":
        return _magnus4
    step = get_method(name)
    if not hasattr(step, "tableau"):
        raise ValueError(f"method {name!r} has no augmented form")
    return _rkmk(step.tableau, step.options)


AUGMENTED_METHODS = ("magnus2", "magnus4", "rkmk-heun", "rkmk-gl2", "rkmk-euler")


def augmented_trajectory(method, A, t0, T, nsteps, Y0, debug=False):
    """States and per-step exponents of the augmented autonomous integration."""
    if method not in AUGMENTED_METHODS:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(AUGMENTED_METHODS)}")
    if nsteps < 1:
        raise ValueError("nsteps must be positive")
    if not T > t0:
        raise ValueError("need T > t0")
    exponent = _method(method)
    field = augment(A)
    h = (_exact(T) - _exact(t0)) / nsteps
    state = AugmentedState(np.array(Y0, dtype=float), Fraction(1), _exact(t0))
    states = [state]
    exponents = []
    for _ in range(nsteps):
        u = exponent(field, state, h)
        new = _act(u, state)
        if debug:
            full = assemble(state, u)
            if not np.allclose(full, new.as_matrix(), rtol=1e-12, atol=1e-12):
                raise RuntimeError("blockwise and assembled updates disagree")
        exponents.append(u)
        states.append(new)
        state = new
    return states, exponents


def solve_augmented(method, A, t0, T, nsteps, Y0, debug=False):
    """Integrate the augmented system; returns the final ``Y`` block and time."""
    states, _ = augmented_trajectory(method, A, t0, T, nsteps, Y0, debug=debug)
    return states[-1].Y, float(states[-1].t)
