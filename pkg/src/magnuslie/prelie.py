"""Free pre-Lie algebra on one generator, realized on non-planar rooted trees.

A tree is stored canonically as the sorted tuple of its root's subtrees, so
the single-node tree ``•`` is ``()`` and the two-node tree is ``((),)``.
The pre-Lie product ``s ↷ t`` grafts the root of ``s`` onto every node of
``t``.  Series are finitely supported maps ``tree -> Fraction``.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

from .linalg import bernoulli
from .matpoly import MatPoly, to_fraction

__all__ = [
    "DOT",
    "TreeSeries",
    "nodes",
    "tree_str",
    "parse_tree",
    "trees_of_grade",
    "graft",
    "prelie_magnus",
    "prelie_inverse",
    "substitute",
    "parse_magmatic",
    "expand_magmatic",
    "evaluate_morphism",
    "matrix_prelie_product",
    "eval_matrix_prelie",
    "eval_matrix_prelie_poly",
    "vector_field_product",
    "eval_vector_field_prelie",
    "flow_taylor",
    "MAX_GRADE",
]

DOT = ()
MAX_GRADE = 8


def _canon(children):
    return tuple(sorted(children))


@lru_cache(maxsize=None)
def nodes(tree):
    return 1 + sum(nodes(c) for c in tree)


def tree_str(tree):
    return "[" + "".join(tree_str(c) for c in tree) + "]"


def parse_tree(text):
    """Inverse of :func:`tree_str`: ``"[]"`` is ``•``, ``"[[][]]"`` the cherry."""
    text = text.strip()
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(text) or text[pos] != "[":
            raise ValueError(f"bad tree string {text!r} at {pos}")
        pos += 1
        kids = []
        while pos < len(text) and text[pos] == "[":
            kids.append(parse())
        if pos >= len(text) or text[pos] != "]":
            raise ValueError(f"bad tree string {text!r} at {pos}")
        pos += 1
        return _canon(kids)

    tree = parse()
    if pos != len(text):
        raise ValueError(f"trailing characters in tree string {text!r}")
    return tree


@lru_cache(maxsize=None)
def _graft_trees(s, t):
    """Grafting of tree ``s`` onto every node of tree ``t``, as ``((tree, mult), ...)``."""
    acc = Counter()
    acc[_canon(t + (s,))] += 1
    for i, child in enumerate(t):
        rest = t[:i] + t[i + 1:]
        for r, k in _graft_trees(s, child):
            acc[_canon(rest + (r,))] += k
    return tuple(sorted(acc.items()))


@lru_cache(maxsize=None)
def trees_of_grade(n):
    """All non-planar rooted trees with ``n`` nodes, sorted."""
    if n < 1:
        return ()
    if n == 1:
        return (DOT,)
    out = set()
    for t in trees_of_grade(n - 1):
        for r, _ in _graft_trees(DOT, t):
            out.add(r)
    return tuple(sorted(out))


def _sort_key(tree):
    return (nodes(tree), tree)


class TreeSeries:
    """Finite linear combination of rooted trees with rational coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        clean = {}
        for tree, c in (terms or {}).items():
            c = to_fraction(c)
            if c:
                clean[tree] = c
        self._terms = clean

    @classmethod
    def generator(cls):
        return cls({DOT: 1})

    @classmethod
    def tree(cls, tree, coef=1):
        return cls({tree: coef})

    @classmethod
    def parse(cls, text):
        """Read terms like ``"1 [] + -1/2 [[]]"``; ``0`` is the empty series."""
        text = text.strip()
        if text in ("", "0"):
            return cls()
        terms = Counter()
        pattern = re.compile(r"([+-]?\s*\d+(?:/\d+)?)?\s*(\[[\[\]]*\])")
        consumed = 0
        for m in pattern.finditer(text):
            between = text[consumed:m.start()].strip()
            if between not in ("", "+"):
                raise ValueError(f"cannot parse series near {between!r}")
            coef = Fraction(m.group(1).replace(" ", "")) if m.group(1) else Fraction(1)
            terms[parse_tree(m.group(2))] += coef
            consumed = m.end()
        if text[consumed:].strip():
            raise ValueError(f"trailing text in series: {text[consumed:]!r}")
        return cls(terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: _sort_key(kv[0]))

    def coef(self, tree):
        return self._terms.get(tree, Fraction(0))

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if not isinstance(other, TreeSeries):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __add__(self, other):
        out = Counter(self._terms)
        for t, c in other._terms.items():
            out[t] += c
        return TreeSeries(out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return TreeSeries({t: -c for t, c in self._terms.items()})

    def __mul__(self, coef):
        coef = to_fraction(coef)
        return TreeSeries({t: c * coef for t, c in self._terms.items()})

    __rmul__ = __mul__

    @property
    def max_grade(self):
        return max((nodes(t) for t in self._terms), default=0)

    @property
    def min_grade(self):
        return min((nodes(t) for t in self._terms), default=0)

    def grade(self, k):
        return TreeSeries({t: c for t, c in self._terms.items() if nodes(t) == k})

    def truncate(self, N):
        return TreeSeries({t: c for t, c in self._terms.items() if nodes(t) <= N})

    def __str__(self):
        if not self._terms:
            return "0"
        return " + ".join(f"{c} {tree_str(t)}" for t, c in self.items())

    def __repr__(self):
        return f"TreeSeries({str(self)!r})"


def graft(s1: TreeSeries, s2: TreeSeries, max_grade=None):
    """Bilinear grafting product ``s1 ↷ s2``, optionally truncated."""
    out = Counter()
    for t1, c1 in s1._terms.items():
        n1 = nodes(t1)
        for t2, c2 in s2._terms.items():
            if max_grade is not None and n1 + nodes(t2) > max_grade:
                continue
            for r, k in _graft_trees(t1, t2):
                out[r] += c1 * c2 * k
    return TreeSeries(out)


def _check_cap(N):
    if N < 1:
        raise ValueError("order must be positive")
    if N > MAX_GRADE:
        raise ValueError(f"order {N} exceeds the cap {MAX_GRADE}")


def prelie_magnus(N):
    """Pre-Lie Magnus expansion ``Ω = Σ_n B_n/n! ℓ^n_{Ω↷}(x)`` through grade ``N``.

    Solved grade by grade: the grade-``k`` part of the right-hand side only
    involves grades ``< k`` of ``Ω``.
    """
    _check_cap(N)
    x = TreeSeries.generator()
    omega = x
    for k in range(2, N + 1):
        term = x
        rhs = TreeSeries()
        for n in range(1, k):
            term = graft(omega, term, max_grade=k)
            rhs = rhs + term * (bernoulli(n) / math.factorial(n))
        omega = omega + rhs.grade(k)
    return omega


def prelie_inverse(N):
    """Compositional inverse ``W(x) = Σ_n 1/(n+1)! ℓ^n_{x↷}(x)`` through grade ``N``."""
    _check_cap(N)
    x = TreeSeries.generator()
    term = x
    out = x
    for n in range(1, N):
        term = graft(x, term)
        out = out + term * Fraction(1, math.factorial(n + 1))
    return out


def evaluate_morphism(tree, gen, product, add, sub, scale, cache=None):
    """Image of ``tree`` under the pre-Lie morphism sending ``•`` to ``gen``.

    Uses ``B+(T1, ..., Tk) = T1 ↷ B+(T2, ..., Tk) - Σ_i B+(T2, ..., T1 ↷ Ti, ..., Tk)``,
    which expresses every tree through products of smaller ones.
    """
    if cache is None:
        cache = {}

    def phi(t):
        if t in cache:
            return cache[t]
        if t == DOT:
            val = gen
        else:
            t1, rest = t[0], t[1:]
            val = product(phi(t1), phi(rest))
            for i, ti in enumerate(rest):
                others = rest[:i] + rest[i + 1:]
                for r, k in _graft_trees(t1, ti):
                    val = sub(val, scale(k, phi(_canon(others + (r,)))))
        cache[t] = val
        return val

    return phi(tree)


def _series_morphism(s, gen, product, add, sub, scale, zero):
    cache = {}
    out = zero
    for t, c in s.items():
        out = add(out, scale(c, evaluate_morphism(t, gen, product, add, sub, scale, cache)))
    return out


def substitute(outer: TreeSeries, inner: TreeSeries, order=None):
    """Replace the generator in ``outer`` by the series ``inner``.

    ``inner`` must have no grade-0 part.  The result is truncated at
    ``order`` (default: the larger of the two maximal grades).
    """
    if order is None:
        order = max(outer.max_grade, inner.max_grade)
    return _series_morphism(
        outer.truncate(order),
        inner.truncate(order),
        lambda a, b: graft(a, b, max_grade=order),
        lambda a, b: a + b,
        lambda a, b: a - b,
        lambda c, a: a * c,
        TreeSeries(),
    )


# magmatic expressions -----------------------------------------------------

_TOKEN = re.compile(r"\s*(↷|->|>|\(|\)|[xA•])")


def parse_magmatic(text):
    """Parse e.g. ``"((x↷x)↷x)↷x"`` into nested pairs; ``"x"`` is the generator.

    ``A`` and ``•`` are accepted as the generator, ``->`` and ``>`` as ``↷``;
    unparenthesized chains associate to the right.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"unexpected input at {text[pos:]!r}")
        tok = m.group(1)
        tokens.append("↷" if tok in ("->", ">") else ("x" if tok in "A•" else tok))
        pos = m.end()

    def expr(i):
        left, i = atom(i)
        if i < len(tokens) and tokens[i] == "↷":
            right, i = expr(i + 1)
            return (left, right), i
        return left, i

    def atom(i):
        if i >= len(tokens):
            raise ValueError("unexpected end of expression")
        if tokens[i] == "x":
            return "x", i + 1
        if tokens[i] == "(":
            e, i = expr(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise ValueError("unbalanced parentheses")
            return e, i + 1
        raise ValueError(f"unexpected token {tokens[i]!r}")

    e, i = expr(0)
    if i != len(tokens):
        raise ValueError("trailing tokens in expression")
    return e


def expand_magmatic(e):
    """Evaluate a magmatic expression in the free pre-Lie algebra."""
    if isinstance(e, str):
        if e.strip() == "x":
            return TreeSeries.generator()
        e = parse_magmatic(e)
        if e == "x":
            return TreeSeries.generator()
    left, right = e
    return graft(expand_magmatic(left), expand_magmatic(right))


# matrix-valued functions ---------------------------------------------------

def matrix_prelie_product(U: MatPoly, V: MatPoly):
    """``(U ↷ V)(t) = ∫_0^t [U(s), V(t)] ds`` for polynomial ``U, V``."""
    return U.antiderivative().commutator(V)


def eval_matrix_prelie_poly(s: TreeSeries, A: MatPoly):
    """Exact image of ``s`` under ``• -> A`` in the matrix-function pre-Lie algebra."""
    return _series_morphism(
        s, A, matrix_prelie_product,
        lambda a, b: a + b, lambda a, b: a - b, lambda c, a: a.scale(c),
        MatPoly.zero(A.dim),
    )


def _collocation(t, m):
    # Chebyshev-Lobatto nodes on [0, t] with the spectral integration matrix
    x = -np.cos(np.pi * np.arange(m) / (m - 1))
    V = np.polynomial.legendre.legvander(x, m - 1)
    Vint = np.zeros_like(V)
    for k in range(m):
        P = np.polynomial.legendre.Legendre.basis(k).integ(lbnd=-1)
        Vint[:, k] = P(x)
    S = Vint @ np.linalg.inv(V) * (t / 2.0)
    return (x + 1.0) * (t / 2.0), S


def eval_matrix_prelie(s: TreeSeries, A, t, nodes_count=24):
    """Image of ``s`` under ``• -> A`` evaluated at time ``t``.

    Polynomial ``A`` goes through exact polynomial arithmetic.  For a sampler
    the functions are represented by their values on a Chebyshev-Lobatto grid
    over ``[0, t]`` and integrated spectrally.
    """
    if t < 0:
        raise ValueError("need t >= 0")
    if isinstance(A, MatPoly):
        return eval_matrix_prelie_poly(s, A)(float(t))
    from .magnus import sample

    if t == 0:
        base = sample(A, [0.0])[0]
        return base * float(s.coef(DOT))
    grid, S = _collocation(float(t), nodes_count)
    G = sample(A, grid)

    def product(U, V):
        IU = np.einsum("jk,kab->jab", S, U)
        return IU @ V - V @ IU

    vals = _series_morphism(
        s, G, product,
        lambda a, b: a + b, lambda a, b: a - b, lambda c, a: a * float(c),
        np.zeros_like(G),
    )
    return vals[-1]


# polynomial vector fields --------------------------------------------------

def vector_field_product(f, g, variables):
    """``(f ↷ g)^i = Σ_j f^j ∂_j g^i`` for fields given as lists of sympy expressions."""
    return [sympy.expand(sum(fj * sympy.diff(gi, xj) for fj, xj in zip(f, variables))) for gi in g]


def eval_vector_field_prelie(s: TreeSeries, f, variables):
    """Image of ``s`` under ``• -> f`` with grafting mapped to :func:`vector_field_product`."""
    f = [sympy.sympify(fi) for fi in f]
    if len(f) != len(variables):
        raise ValueError("field and variable lists differ in length")
    return _series_morphism(
        s, f,
        lambda a, b: vector_field_product(a, b, variables),
        lambda a, b: [sympy.expand(x + y) for x, y in zip(a, b)],
        lambda a, b: [sympy.expand(x - y) for x, y in zip(a, b)],
        lambda c, a: [sympy.Rational(c.numerator, c.denominator) * x for x in a],
        [sympy.Integer(0)] * len(f),
    )


def _truncate(expr, var, N):
    poly = sympy.Poly(sympy.expand(expr), var)
    return sum((c * var**k for (k,), c in poly.terms() if k <= N), sympy.Integer(0))


def flow_taylor(f, variables, t, order, small=None):
    """Taylor polynomial in ``t`` of the exact flow of ``y' = f(y)``.

    Uses the Lie series ``y(t) = Σ t^n/n! D^n(y)`` with ``D = Σ f^j ∂_j``.
    ``small=(symbol, N)`` drops powers of ``symbol`` above ``N`` along the way.
    Returns a list of expressions in ``variables`` (the initial point) and ``t``.
    """
    f = [sympy.sympify(fi) for fi in f]

    def cut(e):
        return _truncate(e, small[0], small[1]) if small else sympy.expand(e)

    out = []
    for xi in variables:
        term, total = sympy.Integer(1) * xi, sympy.Integer(0) + xi
        for n in range(1, order + 1):
            term = cut(sum(fj * sympy.diff(term, xj) for fj, xj in zip(f, variables)))
            total += t**n / sympy.factorial(n) * term
        out.append(cut(total))
    return out
