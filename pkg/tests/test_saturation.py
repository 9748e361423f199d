from fractions import Fraction as Q

import pytest

from torusctrl.errors import BudgetExceeded
from torusctrl.saturation import (
    Generator,
    SpanBasis,
    TrigPolynomial,
    cross_product_tree,
    expand_square_to_quartics,
    generate_next,
    h0_basis,
    membership,
    mode_ladder,
    tree_add,
    tree_from_sexpr,
    tree_scale,
    tree_to_sexpr,
)

COS = TrigPolynomial.cos
SIN = TrigPolynomial.sin
CONST = TrigPolynomial.const


class TestTrigPolynomial:
    def test_product_to_sum(self):
        assert COS(1) * COS(1) == CONST(Q(1, 2)) + COS(2, Q(1, 2))
        assert SIN(1) * COS(1) == SIN(2, Q(1, 2))
        assert SIN(1) * SIN(1) == CONST(Q(1, 2)) - COS(2, Q(1, 2))

    def test_derivative(self):
        p = COS(3, 2) + SIN(1, 5)
        assert p.derivative() == SIN(3, -6) + COS(1, 5)

    def test_sin_quartic(self):
        # sin^4 x = 3/8 - cos 2x / 2 + cos 4x / 8
        q = SIN(1).pow4()
        assert q == CONST(Q(3, 8)) + COS(2, Q(-1, 2)) + COS(4, Q(1, 8))

    def test_binomial_identity_scalars(self):
        # [(a+b)^4 + (a-b)^4 - 2a^4 - 2b^4]/12 = a^2 b^2 at a=2, b=3
        a, b = Q(2), Q(3)
        val = ((a + b) ** 4 + (a - b) ** 4 - 2 * a ** 4 - 2 * b ** 4) / 12
        assert val == a ** 2 * b ** 2 == 36


class TestSpanBasis:
    def test_h0_membership(self):
        B = h0_basis()
        ok, res = membership(CONST(1), B)
        assert ok and res.is_zero()
        ok, _ = membership(COS(2), B)
        assert not ok

    def test_generate_next_contains_cos2(self):
        B1 = generate_next(h0_basis())
        ok, res = membership(COS(2), B1)
        assert ok, f"residual {res}"

    def test_generate_next_contains_sin2_and_cos4(self):
        B1 = generate_next(h0_basis())
        assert membership(SIN(2), B1)[0]
        assert membership(COS(4), B1)[0]

    def test_prime_product_square_identity_member(self):
        # (phi1')^2 (phi2')^2 = sin^2 x cos^2 x for phi1 = cos x, phi2 = sin x
        B1 = generate_next(h0_basis())
        p = (COS(1).derivative() * COS(1).derivative()) * \
            (SIN(1).derivative() * SIN(1).derivative())
        assert membership(p, B1)[0]

    def test_zero_generator_stays_zero(self):
        B = SpanBasis([TrigPolynomial.zero()])
        assert B.dim == 0
        B1 = generate_next(B)
        assert B1.dim == 0

    def test_chain_monotone(self):
        B = h0_basis(max_freq=70)
        B1 = generate_next(B)
        for p in B.polynomials():
            assert B1.contains(p)
        B2 = generate_next(B1, max_freq=70)
        for p in B1.polynomials():
            assert B2.contains(p)
        assert B.dim <= B1.dim <= B2.dim

    def test_budget_exceeded(self):
        with pytest.raises(BudgetExceeded):
            generate_next(h0_basis(max_freq=3), max_freq=3)


class TestPhaseTrees:
    def test_expand_square_of_sin(self):
        # phi = sin x: (phi')^2 = cos^2 x = 1/2 + cos 2x / 2
        t = expand_square_to_quartics(Generator((Q(0), Q(0), Q(1))))
        assert t.evaluate() == CONST(Q(1, 2)) + COS(2, Q(1, 2))
        assert t.depth == 1

    def test_expand_square_of_constant(self):
        t = expand_square_to_quartics(Generator((Q(5), Q(0), Q(0))))
        assert t.evaluate().is_zero()

    def test_cross_product(self):
        # phi1' = sin x (phi1 = -cos x), phi2' = cos x (phi2 = sin x)
        phi1 = Generator((Q(0), Q(-1), Q(0)))
        phi2 = Generator((Q(0), Q(0), Q(1)))
        t = cross_product_tree(phi1, phi2)
        assert t.evaluate() == SIN(2, Q(1, 2))

    def test_tree_linear_ops(self):
        g1 = Generator((Q(1), Q(2), Q(0)))
        g2 = Generator((Q(0), Q(1), Q(-3)))
        assert tree_add(g1, g2).evaluate() == g1.evaluate() + g2.evaluate()
        q = expand_square_to_quartics(g2)
        s = tree_scale(q, Q(3, 7))
        assert s.evaluate() == Q(3, 7) * q.evaluate()
        assert tree_add(q, g1).evaluate() == q.evaluate() + g1.evaluate()


class TestModeLadder:
    def test_mode_one_is_generator(self):
        cos_t, sin_t = mode_ladder(1)
        assert isinstance(cos_t, Generator) and isinstance(sin_t, Generator)
        assert cos_t.depth == 0

    def test_mode_two(self):
        cos_t, sin_t = mode_ladder(2)
        assert cos_t.evaluate() == COS(2)
        assert sin_t.evaluate() == SIN(2)
        assert cos_t.depth == 1 and sin_t.depth == 1

    @pytest.mark.parametrize("n", range(1, 9))
    def test_exact_evaluation_up_to_eight(self, n):
        cos_t, sin_t = mode_ladder(n)
        assert cos_t.evaluate() == COS(n)
        assert sin_t.evaluate() == SIN(n)

    def test_depth_table_nondecreasing(self):
        depths = [max(t.depth for t in mode_ladder(n)) for n in range(1, 9)]
        assert all(d2 >= d1 for d1, d2 in zip(depths, depths[1:])), depths
        assert depths[4] <= 4  # n = 5 within depth 4

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            mode_ladder(5, budget_freq=8)


class TestSerialization:
    def test_roundtrip(self):
        t = cross_product_tree(Generator((Q(0), Q(-1, 2), Q(0))),
                               Generator((Q(1, 3), Q(0), Q(1))))
        text = tree_to_sexpr(t)
        back = tree_from_sexpr(text)
        assert back == t
        assert back.evaluate() == t.evaluate()
