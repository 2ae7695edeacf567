"""The post-Lie algebra of quasi-right-invariant fields on ``GL(n) x Aff(1)``.

An element is a pair ``(P(t), h)``: the ``gl(n)`` block as an exact matrix
polynomial in ``t`` and the constant time-translation speed ``h`` along
``e0``.  All products here are exact; floating point only appears in the
cross-check against quadrature in :func:`geometric_magnus_check`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import bernoulli
from .magnus import magnus_term_poly, magnus_term_series
from .matpoly import MatPoly, frac_matrix, to_fraction

__all__ = [
    "TField",
    "TauSeries",
    "jacobi_bracket",
    "cartan_connection",
    "torsion_bracket",
    "adjoint_product",
    "postlie_axiom_check",
    "adjoint_axiom_check",
    "left_ladder",
    "shifted_field",
    "theta_series",
    "geometric_magnus_check",
    "MAX_THETA_ORDER",
]

MAX_THETA_ORDER = 8


@dataclass(frozen=True)
class TField:
    P: MatPoly
    h: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "h", to_fraction(self.h))

    @classmethod
    def zero(cls, n):
        return cls(MatPoly.zero(n), Fraction(0))

    @classmethod
    def from_json(cls, obj):
        """Read ``{"h": [num, den], "poly": [[matrix], ...]}``."""
        return cls(MatPoly([frac_matrix(c) for c in obj["poly"]]), to_fraction(obj.get("h", 0)))

    def to_json(self):
        return {"h": [self.h.numerator, self.h.denominator], "poly": self.P.to_json()["poly"]}

    @property
    def dim(self):
        return self.P.dim

    def is_zero(self):
        return self.h == 0 and self.P.is_zero()

    def __add__(self, other):
        return TField(self.P + other.P, self.h + other.h)

    def __sub__(self, other):
        return TField(self.P - other.P, self.h - other.h)

    def __neg__(self):
        return TField(-self.P, -self.h)

    def scale(self, c):
        c = to_fraction(c)
        return TField(self.P.scale(c), self.h * c)


def _check(H, K):
    if H.dim != K.dim:
        raise ValueError(f"dimension mismatch: {H.dim} vs {K.dim}")


def jacobi_bracket(H: TField, K: TField):
    """Vector-field bracket on the subalgebra: ``[H, K] + h K' - k H'``."""
    _check(H, K)
    P = H.P.commutator(K.P) + K.P.derivative().scale(H.h) - H.P.derivative().scale(K.h)
    return TField(P, Fraction(0))


def cartan_connection(H: TField, K: TField):
    """Right Cartan connection ``H ▷ K = h dK/dt``."""
    _check(H, K)
    return TField(K.P.derivative().scale(H.h), Fraction(0))


def torsion_bracket(H: TField, K: TField):
    """Negative torsion ``[H, K]_t``: the pointwise commutator of the blocks."""
    _check(H, K)
    return TField(H.P.commutator(K.P), Fraction(0))


def adjoint_product(H: TField, K: TField):
    """``H ▶ K = H ▷ K + [H, K]_t``."""
    return cartan_connection(H, K) + torsion_bracket(H, K)


def _neg_torsion(H, K):
    return -torsion_bracket(H, K)


def postlie_axiom_check(H, K, J, bracket=torsion_bracket, product=cartan_connection):
    """Residuals of the two post-Lie axioms; both are zero for a post-Lie algebra.

    ``r1 = H▷[K,J] - [H▷K, J] - [K, H▷J]``
    ``r2 = [H,K]▷J - (a(H,K,J) - a(K,H,J))`` with ``a(x,y,z) = x▷(y▷z) - (x▷y)▷z``.
    """
    _check(H, K)
    _check(K, J)
    r1 = product(H, bracket(K, J)) - bracket(product(H, K), J) - bracket(K, product(H, J))

    def assoc(x, y, z):
        return product(x, product(y, z)) - product(product(x, y), z)

    r2 = product(bracket(H, K), J) - (assoc(H, K, J) - assoc(K, H, J))
    return r1, r2


def adjoint_axiom_check(H, K, J):
    """Axiom residuals for the adjoint structure ``(-[.,.]_t, ▶)``."""
    return postlie_axiom_check(H, K, J, bracket=_neg_torsion, product=adjoint_product)


def left_ladder(A: TField, n):
    """``A ▷ (A ▷ ( ... ▷ A))`` with ``n`` applications of ``A ▷``."""
    out = A
    for _ in range(n):
        out = cartan_connection(A, out)
    return out


class TauSeries:
    """Truncated formal series ``sum_k coeffs[k] tau**k`` with TField coefficients."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order):
        coeffs = list(coeffs)[: order + 1]
        if not coeffs:
            raise ValueError("need at least one coefficient")
        n = coeffs[0].dim
        while len(coeffs) < order + 1:
            coeffs.append(TField.zero(n))
        self.coeffs = tuple(coeffs)
        self.order = order

    @property
    def dim(self):
        return self.coeffs[0].dim

    def __getitem__(self, k):
        return self.coeffs[k]

    def __add__(self, other):
        return TauSeries([a + b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    def scale(self, c):
        return TauSeries([a.scale(c) for a in self.coeffs], self.order)

    def bracket(self, other, bracket=torsion_bracket):
        out = [TField.zero(self.dim) for _ in range(self.order + 1)]
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j in range(self.order + 1 - i):
                b = other.coeffs[j]
                if not b.is_zero():
                    out[i + j] = out[i + j] + bracket(a, b)
        return TauSeries(out, self.order)

    def at(self, t, tau):
        """Float value of the ``gl(n)`` block at time ``t`` and parameter ``tau``."""
        return sum(c.P(float(t)) * float(tau) ** k for k, c in enumerate(self.coeffs))

    def block_at_zero(self, k):
        """Exact ``gl(n)`` block of the ``tau**k`` coefficient at ``t = 0``."""
        return self.coeffs[k].P.exact(0)


def _require_normalized(A: TField):
    if A.h != 1:
        raise ValueError(f"the field must have unit time-translation speed, got h = {A.h}")


def shifted_field(A: TField, N):
    """``sum_k tau**k / k! * A^(k)``: the field evaluating to ``A(t + tau)``.

    The ``k``-th coefficient is built from the ``▷``-ladder of length ``k``,
    which for a unit-speed field is the ``k``-th time derivative.
    """
    _require_normalized(A)
    coeffs = [A]
    for k in range(1, N + 1):
        ladder = left_ladder(A, k)
        coeffs.append(ladder.scale(Fraction(1, math.factorial(k))))
    return TauSeries(coeffs, N)


def theta_series(A: TField, N):
    """Post-Lie Magnus series ``theta(A)(tau)`` through ``tau**N``.

    Solves ``theta' = sum_n B_n/n! ad_theta^n (shifted_field(A))`` order by
    order with ``ad`` taken in ``[.,.]_t`` and ``theta(0) = 0``; the
    ``tau**(k-1)`` coefficient of the right-hand side only involves
    coefficients of ``theta`` below ``k``.
    """
    _require_normalized(A)
    if N < 1:
        raise ValueError("order must be positive")
    if N > MAX_THETA_ORDER:
        raise ValueError(f"order {N} exceeds the cap {MAX_THETA_ORDER}")
    n = A.dim
    S = shifted_field(A, N)
    theta = TauSeries([TField.zero(n)], N)
    for k in range(1, N + 1):
        rhs = S[k - 1]
        term = S
        for m in range(1, k):
            term = theta.bracket(term)
            coef = bernoulli(m) / math.factorial(m)
            if coef:
                rhs = rhs + term[k - 1].scale(coef)
        coeffs = list(theta.coeffs)
        coeffs[k] = rhs.scale(Fraction(1, k))
        theta = TauSeries(coeffs, N)
    return theta


def _max_abs(M):
    return max((abs(v) for v in np.asarray(M).flat), default=0)


def geometric_magnus_check(A: TField, N=4, exact_orders=3):
    """Compare the ``gl(n)`` block of ``theta(A)`` at ``t = 0`` with classical Magnus.

    Orders ``1..exact_orders`` in ``tau`` are compared exactly against the
    Taylor coefficients of ``Omega_1 + Omega_2 + Omega_3`` computed by
    iterated antiderivatives; higher orders up to ``min(N, 4)`` are compared
    against the floating-point quadrature route.  ``Omega_k`` for ``k >= 4``
    starts at ``tau**5``, so the first three terms fix every coefficient
    through ``tau**4``.

    Each exact row also carries the derivative-level comparison: the
    ``tau**(k-1)`` coefficient of ``theta'`` against that of ``Omega'``.
    """
    theta = theta_series(A, N)
    poly = A.P
    exact = MatPoly.zero(A.dim)
    for j in (1, 2, 3):
        exact = exact + magnus_term_poly(poly, j)
    exact_dot = exact.derivative()
    floating = {}
    for j in (1, 2, 3):
        for p, M in magnus_term_series(poly, j).items():
            floating[p] = floating.get(p, 0.0) + M

    rows = []
    for k in range(1, N + 1):
        got = theta.block_at_zero(k)
        if k <= exact_orders:
            want = exact.coeffs[k] if k < len(exact.coeffs) else np.zeros_like(got)
            res = _max_abs(got - want)
            kind = "exact"
        elif k <= 4:
            want = floating.get(k, np.zeros(got.shape))
            res = float(np.max(np.abs(got.astype(float) - want)))
            kind = "float"
        else:
            continue
        dot_res = None
        if kind == "exact":
            dot_got = got * k
            dot_want = exact_dot.coeffs[k - 1] if k - 1 < len(exact_dot.coeffs) else np.zeros_like(got)
            dot_res = _max_abs(dot_got - dot_want)
        rows.append({
            "order": k,
            "kind": kind,
            "residual": res,
            "theta_dot_residual": dot_res,
            "h_part": theta[k].h,
        })
    return {"orders": rows, "theta": theta}
