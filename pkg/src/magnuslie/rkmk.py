"""Runge-Kutta-Munthe-Kaas stepping for ``Y' = A(t) Y`` on matrix groups.

The stages live in the Lie algebra::

    u_i = h * sum_j a_ij f_j
    f_i = dexpinv(u_i, A(t0 + h c_i))
    Y1  = expm(h * sum_i b_i f_i) @ Y0

with ``dexpinv`` truncated at ``RkmkOptions.dexpinv_order``.  Implicit
tableaux are solved by a fixed number of simultaneous fixed-point sweeps
starting from ``f_i = A(t0 + h c_i)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import sympy

from .linalg import commutator, dexpinv, expm
from .magnus import register_method, sample
from .matpoly import to_fraction

__all__ = [
    "ButcherTableau",
    "RkmkOptions",
    "ContinuousCoeffs",
    "TABLEAUS",
    "get_tableau",
    "rkmk_exponent",
    "rkmk_step",
    "heun_exponent",
    "gl4_exponent",
    "cstage_step",
    "exact_magnus_coeffs",
    "atomic_coeffs",
    "MAX_DEXPINV_ORDER",
]

MAX_DEXPINV_ORDER = 8


def _exact(x):
    if isinstance(x, sympy.Basic):
        return x
    q = to_fraction(x)
    return sympy.Rational(q.numerator, q.denominator)


@dataclass(frozen=True)
class ButcherTableau:
    """Butcher coefficients kept as exact sympy numbers.

    Rational tableaux stay rational; the Gauss-Legendre tableau carries
    ``sqrt(3)`` symbolically so the row-sum condition ``c_i = sum_j a_ij``
    can still be checked exactly at construction.
    """

    a: tuple
    b: tuple
    c: tuple
    name: str = "custom"

    def __post_init__(self):
        a = tuple(tuple(_exact(v) for v in row) for row in self.a)
        b = tuple(_exact(v) for v in self.b)
        c = tuple(_exact(v) for v in self.c)
        s = len(b)
        if len(c) != s or len(a) != s or any(len(row) != s for row in a):
            raise ValueError(f"inconsistent tableau shapes: a {len(a)}x?, b {len(b)}, c {len(c)}")
        for i, row in enumerate(a):
            if sympy.simplify(sum(row) - c[i]) != 0:
                raise ValueError(f"row {i}: c_i = {c[i]} differs from sum_j a_ij = {sum(row)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self):
        return len(self.b)

    @cached_property
    def explicit(self):
        return all(self.a[i][j] == 0 for i in range(self.s) for j in range(i, self.s))

    @cached_property
    def a_float(self):
        return np.array([[float(v) for v in row] for row in self.a])

    @cached_property
    def b_float(self):
        return np.array([float(v) for v in self.b])

    @cached_property
    def c_float(self):
        return np.array([float(v) for v in self.c])

    @classmethod
    def from_json(cls, obj, name="custom"):
        """Read ``{"a": [[...]], "b": [...], "c": [...]}`` with exact entries."""
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        return cls(obj["a"], obj["b"], obj["c"], name=obj.get("name", name))


_half = sympy.Rational(1, 2)
_quarter = sympy.Rational(1, 4)
_omega = sympy.sqrt(3) / 6

TABLEAUS = {
    "euler": ButcherTableau(((0,),), (1,), (0,), name="euler"),
    "heun": ButcherTableau(((0, 0), (1, 0)), (_half, _half), (0, 1), name="heun"),
    "gl2": ButcherTableau(
        ((_quarter, _quarter - _omega), (_quarter + _omega, _quarter)),
        (_half, _half),
        (_half - _omega, _half + _omega),
        name="gl2",
    ),
}


def get_tableau(name):
    try:
        return TABLEAUS[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; known: {', '.join(sorted(TABLEAUS))}") from None


@dataclass(frozen=True)
class RkmkOptions:
    """Stage-solver settings.

    ``fp_tol`` switches implicit stages to a residual-based stop (at most
    ``fp_max_iters`` sweeps); by default exactly ``fp_iters`` sweeps run.
    """

    dexpinv_order: int = 1
    fp_iters: int = 1
    fp_tol: float | None = None
    fp_max_iters: int = 100

    def __post_init__(self):
        if not 0 <= self.dexpinv_order <= MAX_DEXPINV_ORDER:
            raise ValueError(f"dexpinv_order must lie in [0, {MAX_DEXPINV_ORDER}]")
        if self.fp_iters < 0:
            raise ValueError("fp_iters must be nonnegative")


def _solve_stages(a, h, samples, opts):
    """Return the stage values ``f_i`` for coefficient matrix ``a`` (floats)."""
    s = len(samples)
    N = opts.dexpinv_order
    strictly_lower = not np.any(np.triu(a))
    if strictly_lower:
        F = []
        for i in range(s):
            u = h * sum((a[i, j] * F[j] for j in range(i)), np.zeros_like(samples[i]))
            F.append(dexpinv(u, samples[i], N))
        return np.array(F)

    F = np.array(samples, dtype=float)

    def sweep(F):
        U = h * np.einsum("ij,jkl->ikl", a, F)
        return np.array([dexpinv(U[i], samples[i], N) for i in range(s)])

    if opts.fp_tol is None:
        for _ in range(opts.fp_iters):
            F = sweep(F)
        return F
    for _ in range(opts.fp_max_iters):
        F_new = sweep(F)
        done = np.max(np.abs(F_new - F)) <= opts.fp_tol * max(1.0, np.max(np.abs(F_new)))
        F = F_new
        if done:
            break
    return F


def rkmk_exponent(tab: ButcherTableau, opts: RkmkOptions, A, t0, h):
    """The Lie-algebra increment ``h * sum_i b_i f_i`` of one RKMK step."""
    samples = sample(A, t0 + h * tab.c_float)
    F = _solve_stages(tab.a_float, h, samples, opts)
    return h * np.einsum("i,ikl->kl", tab.b_float, F)


def rkmk_step(tab: ButcherTableau, opts: RkmkOptions, A, t0, h, Y0):
    """One RKMK step; returns ``(exponent, Y1)``."""
    exponent = rkmk_exponent(tab, opts, A, t0, h)
    return exponent, expm(exponent) @ np.asarray(Y0, dtype=float)


def heun_exponent(A0, A1, h):
    """Closed form of the Heun RKMK exponent with a two-term ``dexpinv``."""
    A0 = np.asarray(A0, dtype=float)
    A1 = np.asarray(A1, dtype=float)
    return 0.5 * h * (A0 + A1) - 0.25 * h * h * commutator(A0, A1)


def gl4_exponent(A1, A2, h):
    """Closed form of the Gauss-Legendre RKMK exponent after one sweep."""
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    return 0.5 * h * (A1 + A2) - (h * h * np.sqrt(3.0) / 12.0) * commutator(A1, A2)


@dataclass(frozen=True)
class ContinuousCoeffs:
    """Continuous-stage coefficients discretized on a quadrature rule over ``[0, 1]``.

    Two kernel rules are available for ``u(tau) = h * int a(tau, s) f(s) ds``:

    ``"pointwise"``
        ``sum_l a(tau, sigma_l) w_l f_l``.  Kernel jumps are handled by the
        value the kernel itself returns at the jump.
    ``"product"``
        ``sum_l W_l(tau) f_l`` with ``W_l(tau) = int a(tau, s) l_l(s) ds``,
        ``l_l`` the Lagrange basis on the nodes.  The integral is split at
        ``breaks(tau)`` and done piecewise, so step kernels are integrated
        exactly against the interpolated stage values.

    ``c`` defaults to the discretized ``int a(tau, s) ds``; pass the exact
    integral when it is known.
    """

    a: Callable[[float, float], float]
    b: Callable[[float], float]
    nodes: tuple
    weights: tuple
    c: Callable[[float], float] | None = field(default=None)
    rule: str = "pointwise"
    breaks: Callable[[float], tuple] | None = field(default=None)

    def __post_init__(self):
        nodes = tuple(float(x) for x in self.nodes)
        weights = tuple(float(x) for x in self.weights)
        if len(nodes) != len(weights) or not nodes:
            raise ValueError("nodes and weights must be nonempty and of equal length")
        if any(w <= 0 for w in weights):
            raise ValueError("quadrature weights must be positive")
        if any(not 0.0 <= x <= 1.0 for x in nodes):
            raise ValueError("quadrature nodes must lie in [0, 1]")
        if self.rule not in ("pointwise", "product"):
            raise ValueError(f"unknown kernel rule {self.rule!r}")
        if self.rule == "product" and len(set(nodes)) != len(nodes):
            raise ValueError("product rule needs distinct nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def kernel_weights(self, tau):
        """Weights ``K_l`` with ``int a(tau, s) f(s) ds ~ sum_l K_l f(sigma_l)``."""
        if self.rule == "pointwise":
            return np.array([self.a(tau, s) * w for s, w in zip(self.nodes, self.weights)])
        return self._product_weights(tau)

    def _product_weights(self, tau):
        nodes = np.array(self.nodes)
        m = len(nodes)
        cuts = sorted({0.0, 1.0, *(float(x) for x in (self.breaks(tau) if self.breaks else ()) if 0.0 < x < 1.0)})
        gx, gw = np.polynomial.legendre.leggauss(m + 4)
        # Legendre Vandermonde on [-1, 1] is well conditioned at Gauss-type nodes
        inv_v = np.linalg.inv(np.polynomial.legendre.legvander(2 * nodes - 1, m - 1))
        out = np.zeros(m)
        for lo, hi in zip(cuts, cuts[1:]):
            s = lo + (hi - lo) * 0.5 * (gx + 1)
            ws = (hi - lo) * 0.5 * gw
            kern = np.array([self.a(tau, x) for x in s])
            basis = np.polynomial.legendre.legvander(2 * s - 1, m - 1) @ inv_v
            out += (ws * kern) @ basis
        return out

    def c_at(self, tau):
        if self.c is not None:
            return self.c(tau)
        return float(self.kernel_weights(tau).sum())


def exact_magnus_coeffs(order, rule="product"):
    """Coefficients ``b = 1``, ``a(tau, sigma) = [sigma <= tau]`` on a Gauss rule.

    ``order`` is the quadrature order ``2m`` of the ``m``-node Gauss-Legendre
    rule (odd orders round up).  The jump at ``sigma = tau`` is given the
    value ``1/2``; it only matters for the pointwise rule.
    """
    m = max(1, -(-int(order) // 2))
    x, w = np.polynomial.legendre.leggauss(m)

    def a(tau, sigma):
        if sigma < tau:
            return 1.0
        if sigma == tau:
            return 0.5
        return 0.0

    return ContinuousCoeffs(a=a, b=lambda tau: 1.0, nodes=tuple(0.5 * (x + 1)), weights=tuple(0.5 * w),
                            c=lambda tau: tau, rule=rule, breaks=lambda tau: (tau,))


def atomic_coeffs(tab: ButcherTableau):
    """Encode a tableau with distinct abscissae as atomic measures at its nodes."""
    nodes = tuple(tab.c_float)
    if len(set(nodes)) != len(nodes):
        raise ValueError("atomic encoding needs distinct c_i")
    s = tab.s
    weights = (1.0 / s,) * s
    index = {x: i for i, x in enumerate(nodes)}
    A = tab.a_float
    B = tab.b_float

    def a(tau, sigma):
        return A[index[tau], index[sigma]] * s

    def b(tau):
        return B[index[tau]] * s

    return ContinuousCoeffs(a=a, b=b, nodes=nodes, weights=weights, c=lambda tau: tab.c_float[index[tau]])


def cstage_step(co: ContinuousCoeffs, opts: RkmkOptions, A, t0, h, Y0):
    """Continuous-stage RKMK step discretized at the quadrature nodes.

    Returns ``(u, v, Y1)`` where ``u`` maps ``tau`` to the stage increment
    ``h * sum_l a(tau, sigma_l) w_l f_l``.
    """
    nodes = co.nodes
    w = np.array(co.weights)
    a = np.array([co.kernel_weights(t) for t in nodes])
    samples = sample(A, [t0 + h * co.c_at(t) for t in nodes])
    N = opts.dexpinv_order

    F = np.array(samples, dtype=float)
    for _ in range(opts.fp_iters):
        U = h * np.einsum("ij,jkl->ikl", a, F)
        F = np.array([dexpinv(U[i], samples[i], N) for i in range(len(nodes))])

    bw = np.array([co.b(t) for t in nodes]) * w
    v = h * np.einsum("i,ikl->kl", bw, F)

    def u(tau):
        return h * np.einsum("i,ikl->kl", co.kernel_weights(tau), F)

    return u, v, expm(v) @ np.asarray(Y0, dtype=float)


def _registered(tab_name, opts):
    tab = TABLEAUS[tab_name]

    def step(A, t0, h):
        if h == 0:
            n = sample(A, [t0]).shape[-1]
            return np.zeros((n, n)), np.eye(n)
        exponent = rkmk_exponent(tab, opts, A, t0, h)
        return exponent, expm(exponent)

    step.__name__ = f"rkmk_{tab_name}_step"
    step.tableau = tab
    step.options = opts
    return step


for _name in TABLEAUS:
    register_method(f"rkmk-{_name}", _registered(_name, RkmkOptions()))
