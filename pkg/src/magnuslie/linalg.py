"""Small dense matrix kernels shared by every integrator.

Matrices are plain ``numpy`` arrays.  Float arrays are used for numerical
work; ``dtype=object`` arrays of :class:`fractions.Fraction` are accepted by
the bracket and series routines so that identities can be checked exactly.

Bernoulli numbers follow the ``z / (exp(z) - 1)`` convention, so
``bernoulli(1) == -1/2``.  The opposite sign convention would flip the
first-order correction in :func:`dexpinv`.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "as_mat",
    "commutator",
    "ad_pow",
    "bernoulli",
    "expm",
    "logm_near_identity",
    "dexpinv",
    "dexp",
    "scale",
]


def as_mat(X, name="matrix"):
    """Validate ``X`` as a square matrix (or a stack of them) and return it."""
    X = np.asarray(X)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    if X.dtype != object and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def _check_pair(X, Y):
    if X.shape[-2:] != Y.shape[-2:]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Y.shape}")


def scale(coef, M):
    """Multiply ``M`` by an exact coefficient, keeping float arrays float."""
    if M.dtype == object:
        return M * coef
    return M * float(coef)


def commutator(X, Y):
    """Matrix commutator ``XY - YX``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    _check_pair(X, Y)
    return X @ Y - Y @ X


def ad_pow(U, V, n):
    """``n``-fold nested commutator ``[U, [U, ... [U, V]]]``; ``n = 0`` gives ``V``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    U = np.asarray(U)
    out = np.asarray(V)
    _check_pair(U, out)
    for _ in range(n):
        out = commutator(U, out)
    return out


@lru_cache(maxsize=None)
def _bernoulli_table(n):
    table = [Fraction(1)]
    for m in range(1, n + 1):
        acc = sum(math.comb(m + 1, k) * table[k] for k in range(m))
        table.append(-acc / (m + 1))
    return tuple(table)


def bernoulli(n):
    """Exact Bernoulli number ``B_n`` with ``B_1 = -1/2``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _bernoulli_table(n)[n]


def dexpinv(U, V, N):
    """Truncated inverse derivative of the exponential.

    Returns ``sum_{n=0}^{N} B_n / n! * ad_U^n(V)``.
    """
    if N < 0:
        raise ValueError("truncation order must be nonnegative")
    U = np.asarray(U)
    term = np.asarray(V)
    _check_pair(U, term)
    out = term.copy()
    for n in range(1, N + 1):
        term = commutator(U, term)
        coef = bernoulli(n) / math.factorial(n)
        if coef:
            out = out + scale(coef, term)
    return out


def dexp(U, V, N):
    """Truncated derivative of the exponential, ``sum_{n=0}^{N} ad_U^n(V) / (n+1)!``."""
    if N < 0:
        raise ValueError("truncation order must be nonnegative")
    U = np.asarray(U)
    term = np.asarray(V)
    _check_pair(U, term)
    out = term.copy()
    for n in range(1, N + 1):
        term = commutator(U, term)
        out = out + scale(Fraction(1, math.factorial(n + 1)), term)
    return out


# Pade [13/13] coefficients and the 1-norm bound below which no scaling is
# needed for unit roundoff 2^-53.
_PADE13_RAW = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
# normalized so the constant term is 1 and expm(0) is exactly I
_PADE13 = tuple(c / _PADE13_RAW[0] for c in _PADE13_RAW)
_THETA13 = 5.371920351148152


def expm(X):
    """Matrix exponential by scaling and squaring with a [13/13] Pade kernel.

    Accepts a single matrix or a stack ``(..., n, n)``; every matrix in a stack
    gets its own scaling exponent.
    """
    X = as_mat(np.asarray(X, dtype=float))
    n = X.shape[-1]
    norms = np.abs(X).sum(axis=-2).max(axis=-1)
    s = np.where(norms > _THETA13, np.ceil(np.log2(np.maximum(norms, 1e-300) / _THETA13)), 0.0)
    s = s.astype(int)
    Xs = X / (2.0 ** s)[..., None, None]

    b = _PADE13
    ident = np.broadcast_to(np.eye(n), X.shape)
    X2 = Xs @ Xs
    X4 = X2 @ X2
    X6 = X4 @ X2
    U = Xs @ (
        X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
        + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident
    )
    V = (
        X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
        + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident
    )
    R = np.linalg.solve(V - U, V + U)

    smax = int(s.max()) if s.size else 0
    for k in range(smax):
        if s.ndim == 0:
            R = R @ R
        else:
            mask = s > k
            R[mask] = R[mask] @ R[mask]
    return R


def _sqrtm_db(Y, iters=60):
    # Denman-Beavers iteration; fine for matrices close to the identity.
    Z = np.eye(Y.shape[-1])
    for _ in range(iters):
        Y_next = 0.5 * (Y + np.linalg.inv(Z))
        Z = 0.5 * (Z + np.linalg.inv(Y))
        if np.max(np.abs(Y_next - Y)) <= 1e-16 * max(1.0, np.max(np.abs(Y_next))):
            return Y_next
        Y = Y_next
    return Y


def logm_near_identity(Y):
    """Principal logarithm by inverse scaling and squaring.

    Only defined here for ``||Y - I||_2 < 1/2``.
    """
    Y = as_mat(np.asarray(Y, dtype=float))
    n = Y.shape[-1]
    ident = np.eye(n)
    if np.linalg.norm(Y - ident, 2) >= 0.5:
        raise ValueError("logm_near_identity requires ||Y - I|| < 1/2")
    # each square root doubles the final rounding error, so take at most one
    k = 0
    if np.linalg.norm(Y - ident, 2) > 0.25:
        Y = _sqrtm_db(Y)
        k = 1
    # log Y = 2 atanh(Z), Z = (Y - I)(Y + I)^-1, ||Z|| < 1/7 here
    Z = np.linalg.solve((Y + ident).T, (Y - ident).T).T
    Z2 = Z @ Z
    term = Z
    out = Z.copy()
    for j in range(1, 40):
        term = term @ Z2
        out = out + term / (2 * j + 1)
        if np.max(np.abs(term)) <= 1e-18 * max(1.0, np.max(np.abs(out))):
            break
    return 2.0 ** (k + 1) * out
