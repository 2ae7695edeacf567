"""Matrix-coefficient polynomials in time with exact rational coefficients."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational as _RationalABC

import numpy as np

__all__ = ["MatPoly", "to_fraction", "frac_matrix", "zeros_exact"]


def to_fraction(x):
    """Parse an exact scalar: int, Fraction, decimal string, ``"p/q"`` or ``[p, q]``."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"rational pair must have two entries, got {x!r}")
        num, den = x
        if not isinstance(num, int) or not isinstance(den, int):
            raise TypeError(f"rational pair entries must be integers, got {x!r}")
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        return Fraction(num, den)
    if isinstance(x, _RationalABC):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # floats are taken at their exact binary value
        return Fraction(x)
    raise TypeError(f"cannot read {x!r} as an exact rational")


def frac_matrix(rows):
    """Square object array of Fractions from nested lists."""
    M = np.array([[to_fraction(v) for v in row] for row in rows], dtype=object)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    return M


def zeros_exact(n):
    M = np.empty((n, n), dtype=object)
    M[...] = Fraction(0)
    return M


def _is_zero(M):
    return all(v == 0 for v in M.flat)


class MatPoly:
    """``P(t) = sum_k coeffs[k] * t**k`` with square Fraction matrix coefficients.

    Instances are immutable; arithmetic returns new polynomials.  Calling a
    polynomial on a float (or an array of floats) evaluates it in floating
    point, which lets a ``MatPoly`` stand in wherever a sampler ``t -> Mat``
    is expected.
    """

    __slots__ = ("_coeffs", "_float")

    def __init__(self, coeffs):
        cs = [frac_matrix(c) if not (isinstance(c, np.ndarray) and c.dtype == object) else c.copy()
              for c in coeffs]
        if not cs:
            raise ValueError("need at least one coefficient")
        n = cs[0].shape[0]
        for c in cs:
            if c.shape != (n, n):
                raise ValueError("all coefficients must share one square shape")
        while len(cs) > 1 and _is_zero(cs[-1]):
            cs.pop()
        for c in cs:
            c.setflags(write=False)
        self._coeffs = tuple(cs)
        self._float = None

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, M):
        return cls([M])

    @classmethod
    def zero(cls, n):
        return cls([zeros_exact(n)])

    @classmethod
    def from_json(cls, obj):
        """Read ``{"dim": n, "poly": [[matrix], ...]}``."""
        poly = cls([frac_matrix(c) for c in obj["poly"]])
        if "dim" in obj and int(obj["dim"]) != poly.dim:
            raise ValueError(f"dim {obj['dim']} does not match coefficient size {poly.dim}")
        return poly

    def to_json(self):
        return {
            "dim": self.dim,
            "poly": [[[[v.numerator, v.denominator] for v in row] for row in c] for c in self._coeffs],
        }

    # basic properties ---------------------------------------------------
    @property
    def coeffs(self):
        return self._coeffs

    @property
    def dim(self):
        return self._coeffs[0].shape[0]

    @property
    def degree(self):
        return len(self._coeffs) - 1

    def is_zero(self):
        return len(self._coeffs) == 1 and _is_zero(self._coeffs[0])

    def __eq__(self, other):
        if not isinstance(other, MatPoly):
            return NotImplemented
        if self.dim != other.dim or self.degree != other.degree:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self._coeffs, other._coeffs))

    def __hash__(self):
        return hash(tuple(tuple(c.flat) for c in self._coeffs))

    def __repr__(self):
        return f"MatPoly(dim={self.dim}, degree={self.degree})"

    # evaluation ---------------------------------------------------------
    def float_coeffs(self):
        if self._float is None:
            self._float = np.array([c.astype(float) for c in self._coeffs])
        return self._float

    def __call__(self, t):
        """Float evaluation; ``t`` may be a scalar or a 1-d array of times."""
        cs = self.float_coeffs()
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + cs.shape[1:])
        for c in cs[::-1]:
            out = out * t[..., None, None] + c
        return out

    def exact(self, t):
        """Exact evaluation at a rational time."""
        t = to_fraction(t)
        out = zeros_exact(self.dim)
        for c in self._coeffs[::-1]:
            out = out * t + c
        return out

    # arithmetic ---------------------------------------------------------
    def _padded(self, other):
        m = max(len(self._coeffs), len(other._coeffs))
        z = zeros_exact(self.dim)
        a = list(self._coeffs) + [z] * (m - len(self._coeffs))
        b = list(other._coeffs) + [z] * (m - len(other._coeffs))
        return a, b

    def _check(self, other):
        if not isinstance(other, MatPoly):
            raise TypeError("expected a MatPoly")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        self._check(other)
        a, b = self._padded(other)
        return MatPoly([x + y for x, y in zip(a, b)])

    def __sub__(self, other):
        self._check(other)
        a, b = self._padded(other)
        return MatPoly([x - y for x, y in zip(a, b)])

    def __neg__(self):
        return MatPoly([-c for c in self._coeffs])

    def scale(self, coef):
        coef = to_fraction(coef)
        return MatPoly([c * coef for c in self._coeffs])

    def __matmul__(self, other):
        self._check(other)
        out = [zeros_exact(self.dim) for _ in range(self.degree + other.degree + 1)]
        for i, a in enumerate(self._coeffs):
            for j, b in enumerate(other._coeffs):
                out[i + j] = out[i + j] + a @ b
        return MatPoly(out)

    def commutator(self, other):
        return self @ other - other @ self

    def derivative(self, k=1):
        cs = list(self._coeffs)
        for _ in range(k):
            if len(cs) == 1:
                return MatPoly.zero(self.dim)
            cs = [c * j for j, c in enumerate(cs) if j > 0]
        return MatPoly(cs)

    def antiderivative(self):
        """Antiderivative vanishing at ``t = 0``."""
        return MatPoly([zeros_exact(self.dim)] + [c * Fraction(1, j + 1) for j, c in enumerate(self._coeffs)])

    def shift(self, s):
        """``t -> P(t + s)`` for rational ``s``."""
        s = to_fraction(s)
        out = MatPoly.zero(self.dim)
        x_plus_s = MatPoly([_scalar(s, self.dim), _scalar(1, self.dim)])
        for c in self._coeffs[::-1]:
            out = out @ x_plus_s + MatPoly([c])
        return out

    def trace_free(self):
        return all(sum(c[i, i] for i in range(self.dim)) == 0 for c in self._coeffs)


def _scalar(x, n):
    M = zeros_exact(n)
    for i in range(n):
        M[i, i] = Fraction(x)
    return M
