"""Polynomial substrate: arithmetic, series prefixes, Hankel ranks, roots."""

from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from billiards.polynomials import (
    RATIONAL,
    REAL,
    Polynomial,
    ScalarKindError,
    SeriesError,
    SeriesPrefix,
    count_roots_between,
    hankel_matrix,
    hankel_rank,
    isolate_real_roots,
    matrix_determinant,
    quotient_series,
    smallest_singular_vector,
    solve_linear_system,
    sqrt_series,
)

X = Polynomial.variable()


class TestPolynomialBasics:
    def test_zero_polynomial_degree(self):
        assert Polynomial.zero().degree == -1
        assert Polynomial([0, 0, 0]).degree == -1
        assert Polynomial([0, 0, 0]).is_zero

    def test_trailing_zeros_trimmed(self):
        assert Polynomial([1, 2, 0, 0]).coeffs == (F(1), F(2))

    def test_kind_detection(self):
        assert Polynomial([1, F(1, 2)]).kind == RATIONAL
        assert Polynomial([1.0, 2.0]).kind == REAL

    def test_kind_mismatch_raises(self):
        p = Polynomial([1, 2])
        q = Polynomial([1.0, 2.0])
        with pytest.raises(ScalarKindError):
            p + q
        with pytest.raises(ScalarKindError):
            p * q

    def test_explicit_conversion_roundtrip(self):
        p = Polynomial([F(1, 3), F(2, 7)])
        back = p.to_real().to_rational()
        # mpf is binary so 1/3 is rounded once; conversion back is lossless
        assert back.kind == RATIONAL
        assert abs(back.coeffs[0] - F(1, 3)) < F(1, 2**100)

    def test_eval_exact(self):
        p = (X - 1) * (X - 2) * (X + F(1, 2))
        assert p.eval(F(3)) == F(7)
        assert p.eval(1) == 0

    def test_eval_promotes_to_real(self):
        p = (X - 1) * (X + 1)
        v = p.eval(mp.mpf("0.5"))
        assert isinstance(v, mpmath.mpf)
        assert mp.almosteq(v, mp.mpf("-0.75"))

    def test_divmod_exact(self):
        num = X**4 - 1
        den = X - 1
        q, r = num.divmod(den)
        assert r.is_zero
        assert q == X**3 + X**2 + X + 1

    def test_divmod_reconstructs(self):
        a = 3 * X**5 - 2 * X**2 + 7
        b = 2 * X**2 + X - 1
        q, r = a.divmod(b)
        assert q * b + r == a
        assert r.degree < b.degree

    def test_from_roots(self):
        p = Polynomial.from_roots([1, 2, 3])
        assert p == (X - 1) * (X - 2) * (X - 3)
        assert p.leading == 1

    def test_compose(self):
        p = X**2 + 1
        inner = 2 * X - 3
        assert p.compose(inner) == 4 * X**2 - 12 * X + 10

    def test_derivative(self):
        assert (X**3 - 4 * X).derivative() == 3 * X**2 - 4
        assert Polynomial([5]).derivative().is_zero

    @given(st.lists(st.integers(-9, 9), min_size=1, max_size=6),
           st.lists(st.integers(-9, 9), min_size=1, max_size=6),
           st.fractions(min_value=-4, max_value=4))
    def test_product_eval_homomorphism(self, ac, bc, x):
        a, b = Polynomial(ac), Polynomial(bc)
        assert (a * b).eval(x) == a.eval(x) * b.eval(x)

    @given(st.lists(st.integers(-9, 9), min_size=2, max_size=7).filter(
        lambda c: c[-1] != 0),
        st.lists(st.integers(-9, 9), min_size=1, max_size=5).filter(
        lambda c: c[-1] != 0))
    def test_division_invariant(self, ac, bc):
        a, b = Polynomial(ac), Polynomial(bc)
        q, r = a.divmod(b)
        assert q * b + r == a
        assert r.degree < b.degree


class TestSqrtSeries:
    def test_exact_perfect_square(self):
        # sqrt((1+x)^2) = 1 + x exactly
        s = sqrt_series(Polynomial([1, 2, 1]), 5)
        assert s.kind == RATIONAL
        assert s.coefficients == (F(1), F(1), F(0), F(0), F(0))

    def test_binomial_series(self):
        # sqrt(1+x) = sum binom(1/2, k) x^k
        s = sqrt_series(Polynomial([1, 1]), 6)
        assert s.coefficients == (
            F(1), F(1, 2), F(-1, 8), F(1, 16), F(-5, 128), F(7, 256))

    def test_rational_constant_term_scaling(self):
        # sqrt(9 + x): a0 = 3, a1 = 1/6
        s = sqrt_series(Polynomial([9, 1]), 2)
        assert s.coefficients == (F(3), F(1, 6))

    def test_irrational_branch_point_goes_real(self):
        s = sqrt_series(Polynomial([2, 1]), 3)
        assert s.kind == REAL
        assert mp.almosteq(s[0], mp.sqrt(2))
        assert mp.almosteq(s[1], 1 / (2 * mp.sqrt(2)))

    def test_square_of_prefix_matches(self):
        # the defining identity: (sum A_k x^k)^2 = P + O(x^K)
        P = Polynomial([4, -3, 2, 1])
        s = sqrt_series(P, 8)
        sq = Polynomial(s.coefficients) ** 2
        for k in range(8):
            assert sq.coefficient(k) == P.coefficient(k)

    def test_nonpositive_constant_rejected(self):
        with pytest.raises(SeriesError):
            sqrt_series(Polynomial([0, 1]), 3)
        with pytest.raises(SeriesError):
            sqrt_series(Polynomial([-1, 1]), 3)

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=5),
           st.integers(1, 9))
    def test_defining_identity_random(self, coeffs, K):
        coeffs = [max(1, abs(coeffs[0]))] + coeffs[1:]
        P = Polynomial(coeffs)
        s = sqrt_series(P, K)
        if s.kind == RATIONAL:
            sq = Polynomial(s.coefficients) ** 2
            for k in range(K):
                assert sq.coefficient(k) == P.coefficient(k)
        else:
            sq = Polynomial(s.coefficients, REAL) ** 2
            for k in range(K):
                assert mp.fabs(sq.coefficient(k) - P.coefficient(k)) < mp.mpf(2) ** -100


class TestQuotientSeries:
    def test_sqrt_over_linear(self):
        # sqrt(1+x)/(1-x) = 1 + (3/2) x + (11/8) x^2 + ...
        q = quotient_series(Polynomial([1, 1]), Polynomial([1, -1]), 3)
        assert q.coefficients == (F(1), F(3, 2), F(11, 8))

    def test_denominator_vanishing_at_zero_rejected(self):
        with pytest.raises(SeriesError):
            quotient_series(Polynomial([1, 1]), Polynomial([0, 1]), 3)

    def test_quotient_times_denominator(self):
        P = Polynomial([9, 1, -2])
        D = Polynomial([3, -1, 1])
        K = 9
        q = quotient_series(P, D, K)
        s = sqrt_series(P, K)
        prod = Polynomial(q.coefficients) * D
        for k in range(K):
            assert prod.coefficient(k) == s[k]

    def test_real_mode(self):
        q = quotient_series(Polynomial([2, 1]), Polynomial([1, -1]), 2)
        assert q.kind == REAL
        assert mp.almosteq(q[0], mp.sqrt(2))
        # a1 = 1/(2 sqrt 2) + sqrt 2
        assert mp.almosteq(q[1], 1 / (2 * mp.sqrt(2)) + mp.sqrt(2))


class TestHankel:
    def test_block_layout(self):
        s = SeriesPrefix(list(range(10)))
        M = hankel_matrix(s, 2, 2, 3)
        assert M == [[2, 3, 4], [3, 4, 5]]

    def test_short_prefix_rejected(self):
        with pytest.raises(SeriesError):
            hankel_matrix(SeriesPrefix([1, 2, 3]), 0, 2, 3)

    def test_geometric_sequence_rank_one(self):
        s = SeriesPrefix([F(2) ** k for k in range(12)])
        assert hankel_rank(s, 0, 5, 5) == 1

    def test_polynomial_sequence_rank(self):
        # s_k = k^3 + 1 lives in span{1, k, k^2, k^3}, so every Hankel
        # block of size >= 4 has rank exactly 4
        s = SeriesPrefix([F(k**3 + 1) for k in range(14)])
        assert hankel_rank(s, 0, 5, 5) == 4
        assert hankel_rank(s, 0, 6, 6) == 4

    def test_real_rank_with_tolerance(self):
        s = SeriesPrefix([mp.mpf(2) ** k for k in range(12)])
        assert hankel_rank(s, 0, 5, 5) == 1
        # perturb far above tolerance and the rank jumps
        bumped = list(s.coefficients)
        bumped[3] += mp.mpf("0.001")
        assert hankel_rank(SeriesPrefix(bumped), 0, 5, 5) > 1

    def test_wide_and_tall_blocks(self):
        s = SeriesPrefix([mp.mpf(3) ** k for k in range(9)])
        assert hankel_rank(s, 0, 2, 5) == 1
        assert hankel_rank(s, 0, 5, 2) == 1

    def test_start_offset(self):
        data = [F(0), F(0), F(1), F(2), F(4), F(8), F(16), F(32)]
        s = SeriesPrefix(data)
        assert hankel_rank(s, 2, 3, 3) == 1


class TestRootIsolation:
    def test_rational_simple_roots(self):
        p = (X - 1) * (X - 2) * (X + F(3, 2))
        roots = isolate_real_roots(p, F(-10), F(10), tol=F(1, 10**30))
        assert [par for _, par in roots] == ["odd", "odd", "odd"]
        vals = [r for r, _ in roots]
        assert abs(vals[0] + F(3, 2)) < F(1, 10**29)
        assert abs(vals[1] - 1) < F(1, 10**29)
        assert abs(vals[2] - 2) < F(1, 10**29)

    def test_rational_multiplicity_parity(self):
        p = (X - F(1, 3)) ** 2 * (X - 5)
        roots = isolate_real_roots(p, F(0), F(6))
        assert len(roots) == 2
        assert roots[0][1] == "even"
        assert roots[1][1] == "odd"

    def test_endpoint_roots_included(self):
        p = (X - 2) * (X + 1) * (X - F(7, 2))
        roots = isolate_real_roots(p, F(-1), F(2))
        assert [r for r, _ in roots] == [F(-1), F(2)]

    def test_window_excludes_outside_roots(self):
        p = (X - 1) * (X - 10)
        roots = isolate_real_roots(p, F(0), F(5))
        assert len(roots) == 1

    def test_real_mode_parities(self):
        p = ((X - 1) ** 2 * (X - 3) * (X + F(1, 2))).to_real()
        roots = isolate_real_roots(p, -2, 4)
        got = [(float(r), par) for r, par in roots]
        assert len(got) == 3
        assert got[0][1] == "odd" and abs(got[0][0] + 0.5) < 1e-12
        assert got[1][1] == "even" and abs(got[1][0] - 1) < 1e-12
        assert got[2][1] == "odd" and abs(got[2][0] - 3) < 1e-12

    def test_real_triple_root_is_odd(self):
        p = ((X - 1) ** 3).to_real()
        roots = isolate_real_roots(p, 0, 2)
        assert len(roots) == 1
        assert roots[0][1] == "odd"

    def test_real_close_pair_separated(self):
        gap = F(1, 10**6)
        p = ((X - 1) * (X - 1 - gap) * (X + 1)).to_real()
        roots = isolate_real_roots(p, 0, 2)
        assert len(roots) == 2
        assert all(par == "odd" for _, par in roots)

    def test_count_roots_halfopen(self):
        p = (X - 1) * (X - 5) * (X + 3)
        assert count_roots_between(p, 0, 6) == 2
        assert count_roots_between(p, 1, 6) == 1  # (1, 6] excludes 1
        assert count_roots_between(p, 0, 5) == 2  # includes 5

    @given(st.lists(st.integers(-6, 6), min_size=1, max_size=4, unique=True))
    @settings(max_examples=40, deadline=None)
    def test_recovers_planted_integer_roots(self, planted):
        p = Polynomial.from_roots(planted)
        roots = isolate_real_roots(p, F(-8), F(8), tol=F(1, 10**20))
        assert len(roots) == len(planted)
        for (r, par), want in zip(roots, sorted(planted)):
            assert par == "odd"
            assert abs(r - want) < F(1, 10**19)


class TestLinearKernels:
    def test_solve_exact(self):
        x = solve_linear_system([[F(2), 1], [1, F(3)]], [F(5), F(10)])
        assert x == [F(1), F(3)]

    def test_solve_needs_pivoting(self):
        x = solve_linear_system([[0, 1], [1, 0]], [F(7), F(9)])
        assert x == [F(9), F(7)]

    def test_singular_raises(self):
        with pytest.raises(ZeroDivisionError):
            solve_linear_system([[1, 2], [2, 4]], [1, 1])

    def test_determinant_exact(self):
        assert matrix_determinant([[1, 2], [3, 4]]) == -2
        assert matrix_determinant([[F(1, 2), 0], [5, F(4)]]) == 2

    def test_determinant_zero(self):
        assert matrix_determinant([[1, 2], [2, 4]]) == 0

    def test_determinant_real(self):
        d = matrix_determinant([[mp.mpf(1), mp.mpf(2)], [mp.mpf(3), mp.mpf("4.5")]])
        assert mp.almosteq(d, mp.mpf("-1.5"))

    def test_smallest_singular_vector_finds_kernel(self):
        sigma, v = smallest_singular_vector([[1.0, 2.0], [2.0, 4.0]])
        assert sigma < mp.mpf(10) ** -30
        # kernel of [[1,2],[2,4]] is spanned by (2, -1)/sqrt(5)
        ratio = v[0] / v[1]
        assert mp.almosteq(ratio, mp.mpf(-2))

    def test_wide_kernel(self):
        # one equation, three unknowns: x + y + z = 0
        sigma, v = smallest_singular_vector([[1.0, 1.0, 1.0]])
        assert sigma < mp.mpf(10) ** -30
        assert mp.fabs(mp.fsum(v)) < mp.mpf(10) ** -30

    @given(st.lists(st.lists(st.integers(-9, 9), min_size=3, max_size=3),
                    min_size=3, max_size=3),
           st.lists(st.integers(-9, 9), min_size=3, max_size=3))
    @settings(max_examples=60)
    def test_solution_satisfies_system(self, rows, rhs):
        det = matrix_determinant(rows)
        if det == 0:
            return
        x = solve_linear_system(rows, rhs)
        for row, b in zip(rows, rhs):
            assert sum(F(c) * xi for c, xi in zip(row, x)) == b
