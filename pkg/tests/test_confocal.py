"""Confocal families, elliptic coordinates, caustics, and band systems."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from billiards.confocal import (
    AudinReport,
    CausticSet,
    ConfocalFamily,
    DegenerateLineError,
    IntervalSystem,
    audin_check,
    cartesian_from_jacobi,
    caustic_parameters,
    interval_system,
    jacobi_coordinates,
    quadric_type_name,
    tangency_polynomial,
)
from billiards.polynomials import RATIONAL, REAL, as_real


F = Fraction


@pytest.fixture
def family3():
    return ConfocalFamily((4, F(9, 4), 1))


@pytest.fixture
def family2():
    return ConfocalFamily((2, 1))


class TestConfocalFamily:
    def test_axes_must_decrease(self):
        with pytest.raises(ValueError):
            ConfocalFamily((1, 2))
        with pytest.raises(ValueError):
            ConfocalFamily((2, 2))

    def test_axes_must_be_positive(self):
        with pytest.raises(ValueError):
            ConfocalFamily((2, 0))

    def test_needs_at_least_two(self):
        with pytest.raises(ValueError):
            ConfocalFamily((4,))

    def test_kind_detection(self, family3):
        assert family3.kind == RATIONAL
        assert ConfocalFamily((2.0, 1.0)).kind == REAL

    def test_boundary_membership(self, family3):
        assert family3.boundary_value((2, 0, 0)) == 0
        assert family3.boundary_value((0, F(3, 2), 0)) == 0
        assert family3.boundary_value((0, 0, F(1, 2))) < 0

    def test_normal_direction(self, family3):
        n = family3.normal_direction((2, 0, 0))
        assert n == (F(1, 2), 0, 0)

    def test_quadric_type_names(self):
        assert quadric_type_name(0, 3) == "ellipsoid"
        assert "one-sheeted" in quadric_type_name(1, 3)
        assert "two-sheeted" in quadric_type_name(2, 3)


class TestJacobiCoordinates:
    def test_axis_endpoint_is_exact(self, family3):
        pt = jacobi_coordinates(family3, (2, 0, 0))
        assert pt.lambdas == (0, 1, F(9, 4))

    def test_hyperplane_point_roundtrip_exact(self, family3):
        # both zero coordinates pin two parameters at axis values and the
        # third at 9/4 - 1, all rational, so inversion is exact
        pt = jacobi_coordinates(family3, (0, 1, 0))
        assert pt.lambdas == (1, F(5, 4), 4)
        assert cartesian_from_jacobi(family3, pt) == (0, 1, 0)

    def test_interior_point_roundtrip(self, family3):
        x = (F(11, 10), F(1, 2), F(3, 10))
        pt = jacobi_coordinates(family3, x)
        back = cartesian_from_jacobi(family3, pt)
        assert max(abs(as_real(a) - as_real(b))
                   for a, b in zip(back, x)) < mp.mpf("1e-20")

    def test_lambdas_interlace_axes(self, family3):
        pt = jacobi_coordinates(family3, (F(11, 10), F(1, 2), F(3, 10)))
        l1, l2, l3 = pt.lambdas
        assert 0 <= l1 <= 1
        assert 1 <= l2 <= F(9, 4)
        assert F(9, 4) <= l3 <= 4

    def test_boundary_point_has_zero_coordinate(self, family3):
        # x on the boundary ellipsoid puts the smallest coordinate at 0
        pt = jacobi_coordinates(family3, (0, F(3, 2), 0))
        assert pt.lambdas[0] == 0

    def test_real_roundtrip(self, family3):
        x = (mp.mpf("1.1"), mp.mpf("0.5"), mp.mpf("0.3"))
        pt = jacobi_coordinates(family3, x)
        back = cartesian_from_jacobi(family3, pt)
        assert max(abs(a - b) for a, b in zip(back, x)) < mp.mpf("1e-25")

    def test_signs_recover_orthant(self, family3):
        x = (F(-11, 10), F(1, 2), F(-3, 10))
        pt = jacobi_coordinates(family3, x)
        assert pt.signs == (-1, 1, -1)
        back = cartesian_from_jacobi(family3, pt)
        assert max(abs(as_real(a) - as_real(b))
                   for a, b in zip(back, x)) < mp.mpf("1e-20")

    def test_wrong_dimension_rejected(self, family3):
        with pytest.raises(ValueError):
            jacobi_coordinates(family3, (1, 2))

    @settings(max_examples=20, deadline=None)
    @given(st.tuples(
        st.fractions(F(1, 10), F(19, 10), max_denominator=64),
        st.fractions(F(-9, 10), F(9, 10), max_denominator=64).filter(bool),
    ))
    def test_planar_roundtrip_property(self, x):
        f = ConfocalFamily((2, 1))
        if x[0] ** 2 / 2 + x[1] ** 2 >= 1:
            return
        pt = jacobi_coordinates(f, x)
        back = cartesian_from_jacobi(f, pt)
        assert max(abs(as_real(a) - as_real(b))
                   for a, b in zip(back, x)) < mp.mpf("1e-20")


class TestTangency:
    def test_leading_coefficient_sign(self, family3):
        # degree d-1 with leading coefficient (-1)^(d-1) |v|^2
        W = tangency_polynomial(family3, (2, 0, 0), (0, 1, 0))
        assert W.degree == 2
        assert W.leading == 1
        W2 = tangency_polynomial(ConfocalFamily((2, 1)), (0, F(3, 2)), (1, 0))
        assert W2.leading == -1

    def test_horizontal_tangent_line_in_plane(self, family2):
        # the line x_2 = 3/2 touches the confocal ellipse through
        # parameter -5/4, whose vertical semi-axis is exactly 3/2
        cs = caustic_parameters(family2, (0, F(3, 2)), (1, 0))
        assert cs.gammas == (F(-5, 4),)

    def test_minor_axis_line_is_degenerate(self, family2):
        cs = caustic_parameters(family2, (0, 1), (0, 1))
        assert cs.degenerate
        assert cs.gammas == (2,)
        with pytest.raises(DegenerateLineError):
            caustic_parameters(family2, (0, 1), (0, 1),
                               allow_degenerate=False)

    def test_caustic_count_matches_dimension(self, family3):
        cs = caustic_parameters(family3, (2, 0, 0), (0, F(3, 5), F(4, 5)))
        assert len(cs.gammas) == 2

    def test_zero_direction_rejected(self, family3):
        with pytest.raises((ValueError, DegenerateLineError)):
            tangency_polynomial(family3, (2, 0, 0), (0, 0, 0))

    def test_caustics_constant_along_line(self, family3):
        p = (mp.mpf(2), mp.mpf(0), mp.mpf(0))
        v = (mp.mpf("-0.3"), mp.mpf("0.6"), mp.mpf("0.74"))
        a = caustic_parameters(family3, p, v)
        q = tuple(pi + 3 * vi for pi, vi in zip(p, v))
        b = caustic_parameters(family3, q, v)
        assert max(abs(x - y) for x, y in zip(a.gammas, b.gammas)) < mp.mpf("1e-30")


class TestCausticSet:
    def test_types_count_axes_below(self, family3):
        cs = CausticSet((F(1, 2), 3), family=family3)
        assert cs.types == (0, 2)

    def test_degenerate_on_axis_value(self, family3):
        cs = CausticSet((F(1, 2), F(9, 4)), family=family3)
        assert cs.degenerate

    def test_degenerate_on_repeat(self, family3):
        cs = CausticSet((F(1, 2), F(1, 2)), family=family3)
        assert cs.degenerate


class TestAudin:
    def test_ellipse_plus_far_hyperboloid(self, family3):
        report = audin_check(family3, CausticSet((F(1, 2), 3), family=family3))
        assert isinstance(report, AudinReport)
        assert report.admissible
        assert report.positions == (1, 4)

    def test_adjacent_pair_below_second_axis(self, family3):
        report = audin_check(family3, CausticSet((F(23, 10), F(12, 5)),
                                                 family=family3))
        assert not report.admissible

    def test_straddling_pair(self, family3):
        report = audin_check(family3, CausticSet((F(3, 2), F(7, 2)),
                                                 family=family3))
        assert report.admissible
        assert report.positions == (2, 4)

    def test_two_ellipse_caustics_rejected(self, family3):
        # both parameters below every axis would mean two confocal
        # ellipsoid caustics, which no line realizes
        report = audin_check(family3, CausticSet((F(1, 2), F(7, 10)),
                                                 family=family3))
        assert not report.admissible

    def test_wrong_count_raises(self, family3):
        with pytest.raises(ValueError):
            audin_check(family3, CausticSet((F(1, 2),), family=family3))


class TestIntervalSystem:
    def test_reciprocal_endpoints_exact(self, family3):
        cs = CausticSet((F(1, 2), 3), family=family3)
        E = interval_system(family3, cs)
        assert E.c == (2, 1, F(4, 9), F(1, 3), F(1, 4), 0)

    def test_bands_and_gaps(self, family3):
        E = interval_system(family3, CausticSet((F(1, 2), 3), family=family3))
        assert E.bands == ((1, 2), (F(1, 3), F(4, 9)), (0, F(1, 4)))
        assert E.gaps == ((F(4, 9), 1), (F(1, 4), F(1, 3)))
        assert E.d == 3
        assert E.genus == 2

    def test_planar_system(self, family2):
        E = interval_system(family2, CausticSet((F(1, 2),), family=family2))
        assert E.c == (2, 1, F(1, 2), 0)
        assert E.bands == ((1, 2), (0, F(1, 2)))
        assert E.gaps == ((F(1, 2), 1),)

    def test_endpoint_polynomial_sign_pattern(self, family3):
        E = interval_system(family3, CausticSet((F(1, 2), 3), family=family3))
        T = E.endpoint_polynomial()
        assert T.degree == 2 * E.d
        assert T.leading == 1
        for lo, hi in E.bands:
            assert T.eval((lo + hi) / 2) < 0
        for lo, hi in E.gaps:
            assert T.eval((lo + hi) / 2) > 0

    def test_band_and_gap_lookup(self, family3):
        E = interval_system(family3, CausticSet((F(1, 2), 3), family=family3))
        assert E.band_containing(F(3, 2)) == 0
        assert E.band_containing(F(1, 8)) == 2
        assert E.band_containing(F(3, 10)) is None
        assert E.gap_containing(F(3, 10)) == 1
        assert E.gap_containing(F(1, 8)) is None

    def test_from_band_edges_symmetric(self):
        E = IntervalSystem.from_band_edges([-1, F(-1, 2), F(1, 2), 1])
        assert E.d == 2
        assert E.bands == ((F(1, 2), 1), (-1, F(-1, 2)))
        assert E.gaps == ((F(-1, 2), F(1, 2)),)

    def test_from_band_edges_validation(self):
        with pytest.raises(ValueError):
            IntervalSystem.from_band_edges([0, 1, 2])
        with pytest.raises(ValueError):
            IntervalSystem.from_band_edges([0, 1, 1, 2])

    def test_odd_endpoint_count_required(self):
        with pytest.raises(ValueError):
            IntervalSystem((1, 2, 3, 4))

    def test_increasing_required(self):
        with pytest.raises(ValueError):
            IntervalSystem((1, 3, 2, 4, 5))
