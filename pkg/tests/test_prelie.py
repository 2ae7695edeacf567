import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from magnuslie.magnus import magnus_term, magnus_term_poly
from magnuslie.matpoly import MatPoly
from magnuslie.prelie import (
    TreeSeries,
    eval_matrix_prelie,
    eval_matrix_prelie_poly,
    eval_vector_field_prelie,
    expand_magmatic,
    flow_taylor,
    graft,
    nodes,
    parse_magmatic,
    parse_tree,
    prelie_inverse,
    prelie_magnus,
    substitute,
    tree_str,
    trees_of_grade,
    vector_field_product,
)

x = TreeSeries.generator()
PRINTED_OMEGA4 = (expand_magmatic("((x↷x)↷x)↷x") * Fraction(1, 6)
                  + expand_magmatic("x↷((x↷x)↷x)") * Fraction(1, 12))


def _assoc(a, b, c):
    return graft(graft(a, b), c) - graft(a, graft(b, c))


def test_tree_counts():
    assert [len(trees_of_grade(n)) for n in range(1, 8)] == [1, 1, 2, 4, 9, 20, 48]


def test_tree_string_roundtrip():
    for n in range(1, 6):
        for t in trees_of_grade(n):
            assert parse_tree(tree_str(t)) == t
            assert nodes(t) == n
    assert parse_tree("[[[]][]]") == parse_tree("[[][[]]]")
    with pytest.raises(ValueError):
        parse_tree("[[]")


def test_graft_small_cases():
    assert graft(x, x) == TreeSeries.parse("1 [[]]")
    ladder = TreeSeries.parse("1 [[]]")
    # onto the root gives the cherry, onto the leaf gives the ladder
    assert graft(x, ladder) == TreeSeries.parse("1 [[][]] + 1 [[[]]]")
    assert graft(ladder, x) == TreeSeries.parse("1 [[[]]]")
    cherry = TreeSeries.parse("1 [[][]]")
    assert graft(x, cherry) == TreeSeries.parse("1 [[][][]] + 2 [[][[]]]")


def test_series_parse_and_print():
    s = TreeSeries.parse("1 [] + -1/2 [[]] + 1/12 [[][]]")
    assert str(s) == "1 [] + -1/2 [[]] + 1/12 [[][]]"
    assert s.coef(parse_tree("[[]]")) == Fraction(-1, 2)
    assert TreeSeries.parse("0") == TreeSeries()
    assert (s - s) == TreeSeries() and not (s - s)
    assert s.grade(2) == TreeSeries.parse("-1/2 [[]]")
    assert s.truncate(2).max_grade == 2 and s.min_grade == 1


def test_prelie_identity_exhaustive_up_to_five_nodes():
    trees = [TreeSeries.tree(t) for n in range(1, 4) for t in trees_of_grade(n)]
    count = 0
    for a, b, c in itertools.product(trees, repeat=3):
        if a.max_grade + b.max_grade + c.max_grade > 5:
            continue
        assert _assoc(a, b, c) == _assoc(b, a, c)
        count += 1
    # 1 triple with 3 nodes, 3 with 4, 6 + 3 with 5
    assert count == 13


def test_graft_pairs_exhaustive_up_to_five_nodes():
    for n1 in range(1, 5):
        for n2 in range(1, 6 - n1):
            for s in trees_of_grade(n1):
                for t in trees_of_grade(n2):
                    prod = graft(TreeSeries.tree(s), TreeSeries.tree(t))
                    # one term per node of t, each with n1 + n2 nodes
                    assert sum(c for _, c in prod.items()) == n2
                    assert prod.min_grade == prod.max_grade == n1 + n2


def test_graft_not_associative():
    assert _assoc(x, x, x) != TreeSeries()


tree_strategy = st.integers(1, 4).flatmap(lambda n: st.sampled_from(trees_of_grade(n)))
series_strategy = st.dictionaries(tree_strategy, st.fractions(-3, 3, max_denominator=4), max_size=3).map(TreeSeries)


@given(series_strategy, series_strategy, series_strategy)
def test_prelie_identity_on_series(a, b, c):
    assert _assoc(a, b, c) == _assoc(b, a, c)


def test_prelie_magnus_frozen():
    omega = prelie_magnus(4)
    assert omega == TreeSeries.parse(
        "1 [] + -1/2 [[]] + 1/12 [[][]] + 1/3 [[[]]]"
        " + -1/12 [[][[]]] + -1/12 [[[][]]] + -1/4 [[[[]]]]"
    )


def test_prelie_magnus_grade_four_against_printed_form():
    grade4 = prelie_magnus(4).grade(4)
    # the two-term form matches up to an overall sign
    assert grade4 == -PRINTED_OMEGA4
    assert grade4 != PRINTED_OMEGA4


def test_prelie_inverse_frozen():
    W = prelie_inverse(3)
    assert W == TreeSeries.parse("1 [] + 1/2 [[]] + 1/6 [[][]] + 1/6 [[[]]]")


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_inverse_both_orders(N):
    omega, W = prelie_magnus(N), prelie_inverse(N)
    assert substitute(omega, W, order=N) == x
    assert substitute(W, omega, order=N) == x


def test_caps():
    with pytest.raises(ValueError):
        prelie_magnus(0)
    with pytest.raises(ValueError):
        prelie_magnus(9)


def test_magmatic_parsing():
    assert parse_magmatic("x↷x") == ("x", "x")
    assert parse_magmatic("x -> x > x") == ("x", ("x", "x"))
    assert expand_magmatic("(x↷x)↷x") == TreeSeries.parse("1 [[[]]]")
    with pytest.raises(ValueError):
        parse_magmatic("x↷")


def test_matrix_evaluation_gives_classical_terms(rng):
    A = MatPoly([rng.integers(-2, 3, (3, 3)).tolist() for _ in range(2)])
    omega = prelie_magnus(3)
    for k in (1, 2, 3):
        # the morphism yields the time derivative of Omega_k
        assert eval_matrix_prelie_poly(omega.grade(k), A).antiderivative() == magnus_term_poly(A, k)


def test_matrix_evaluation_sampler_matches_poly(rng):
    A = MatPoly([rng.integers(-2, 3, (2, 2)).tolist() for _ in range(3)])
    s = prelie_magnus(4)
    exact = eval_matrix_prelie(s, A, 0.7)
    approx = eval_matrix_prelie(s, lambda t: A(t), 0.7)
    assert np.allclose(exact, approx, atol=1e-12)


def test_matrix_prelie_relation(rng):
    A = MatPoly([rng.integers(-2, 3, (2, 2)).tolist() for _ in range(2)])
    lhs = eval_matrix_prelie_poly(graft(x, x), A)
    assert lhs == A.antiderivative().commutator(A)
    assert np.allclose(lhs.antiderivative()(1.0), -2 * magnus_term(A, 2, 1.0), atol=1e-13)


def test_vector_field_product_is_prelie():
    y, z = sympy.symbols("y z")
    f, g, h = [y * z, y**2], [z, y], [y + z**2, sympy.Integer(1)]
    V = [y, z]

    def p(a, b):
        return vector_field_product(a, b, V)

    def assoc(a, b, c):
        return [sympy.expand(u - v) for u, v in zip(p(p(a, b), c), p(a, p(b, c)))]

    assert assoc(f, g, h) == assoc(g, f, h)


def test_euler_modified_field_frozen():
    y, h = sympy.symbols("y h")
    modified = eval_vector_field_prelie(prelie_magnus(6), [h * y**2], [y])[0]
    want = (h * y**2 - h**2 * y**3 + sympy.Rational(3, 2) * h**3 * y**4 - sympy.Rational(8, 3) * h**4 * y**5
            + sympy.Rational(31, 6) * h**5 * y**6 - sympy.Rational(157, 15) * h**6 * y**7)
    assert sympy.expand(modified - want) == 0


def test_flow_taylor_exponential():
    y, t = sympy.symbols("y t")
    flow = flow_taylor([y], [y], t, 4)[0]
    assert sympy.expand(flow - y * sum(t**k / sympy.factorial(k) for k in range(5))) == 0


def test_inverse_gives_flow_taylor():
    y, t = sympy.symbols("y t")
    f = y**2
    W = eval_vector_field_prelie(prelie_inverse(5), [t * f], [y])[0]
    # exact flow y / (1 - t y)
    exact = sympy.series(y / (1 - t * y), t, 0, 6).removeO()
    assert sympy.expand(y + W - exact) == 0
