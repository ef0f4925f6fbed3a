"""Billiard iteration: reflections, conserved caustics, turning counts,
and closure certificates.

The two worked orbits here were chosen so that every frozen number has an
independent derivation.  In the ellipse with semi-axes squared (2, 1) the
caustic gamma = 6 - 4*sqrt(2) gives rotation number 1/3, hence a hexagon
of perimeter 8*sqrt(2) - 4.  In the ellipsoid with axes (4, 9/4, 1) the
caustic pair below was solved (separately, via the frequency map) to give
rotation vector (2/7, 3/7); the orbit closes in elliptic coordinates after
7 bounces but needs 14 for the Cartesian signs to realign.
"""

import json
from fractions import Fraction

import pytest
from mpmath import mp

from billiards.confocal import ConfocalFamily, DegenerateLineError
from billiards.dynamics import (
    GrazingImpactError,
    Ray,
    Segment,
    classify_segment_pair,
    next_reflection,
    ray_with_caustics,
    simulate,
    weak_closure_check,
)

HEX_GAMMA = 6 - 4 * mp.sqrt(2)
HEX_PERIMETER = 8 * mp.sqrt(2) - 4

RES_GAMMAS = (
    mp.mpf("0.55203321810667544652699549581171"),
    mp.mpf("3.206128627948324411032464507733"),
)
RES_LENGTH_14 = mp.mpf("22.33388395674588974142706")


@pytest.fixture(scope="module")
def ellipse():
    return ConfocalFamily((2, 1))


@pytest.fixture(scope="module")
def ellipsoid():
    return ConfocalFamily((4, Fraction(9, 4), 1))


@pytest.fixture(scope="module")
def hexagon(ellipse):
    ray = ray_with_caustics(ellipse, (HEX_GAMMA,), seed=3)
    return simulate(ellipse, ray, 101)


@pytest.fixture(scope="module")
def resonant(ellipsoid):
    ray = ray_with_caustics(ellipsoid, RES_GAMMAS, seed=1)
    return simulate(ellipsoid, ray, 25)


class TestRayAndSegment:
    def test_direction_is_normalized(self):
        r = Ray((0, 0, 0), (3, 4, 0))
        assert abs(r.direction[0] - mp.mpf(3) / 5) < mp.mpf("1e-30")
        assert abs(r.direction[1] - mp.mpf(4) / 5) < mp.mpf("1e-30")

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            Ray((0, 0), (0, 0))

    def test_at_walks_along_the_ray(self):
        r = Ray((1, 2), (0, 1))
        assert r.at(3) == (1, 5)

    def test_segment_end(self):
        s = Segment((0, 0), (mp.mpf(1), mp.mpf(0)), mp.mpf(2))
        assert s.end == (2, 0)


class TestNextReflection:
    def test_horizontal_chord_reverses(self, ellipse):
        impact, out = next_reflection(ellipse, Ray((0, 0), (1, 0)))
        assert abs(impact[0] - mp.sqrt(2)) < mp.mpf("1e-30")
        assert abs(impact[1]) < mp.mpf("1e-30")
        assert abs(out.direction[0] + 1) < mp.mpf("1e-30")

    def test_tangent_start_is_grazing(self, ellipse):
        with pytest.raises(GrazingImpactError):
            next_reflection(ellipse, Ray((0, 1), (1, 0)))

    def test_impact_lies_on_boundary(self, ellipsoid):
        impact, _ = next_reflection(ellipsoid, Ray((0.1, 0.2, -0.3), (1, 2, 2)))
        assert abs(ellipsoid.boundary_value(impact)) < mp.mpf("1e-30")


class TestSimulate:
    def test_needs_a_positive_count(self, ellipse):
        with pytest.raises(ValueError):
            simulate(ellipse, Ray((0, 0), (1, 1)), 0)

    def test_interior_start_is_carried_to_the_boundary(self, ellipse):
        t = simulate(ellipse, Ray((0.1, 0.2), (1, 1)), 3)
        assert len(t) == 3
        for seg in t.segments:
            assert abs(ellipse.boundary_value(seg.point)) < mp.mpf("1e-25")
        assert len(t.impacts) == 4

    def test_consecutive_segments_share_endpoints(self, hexagon):
        for a, b in zip(hexagon.segments, hexagon.segments[1:]):
            gap = max(abs(x - y) for x, y in zip(a.end, b.point))
            assert gap < mp.mpf("1e-30")


class TestAxisOrbit:
    """A ray along the middle axis bounces between two antipodal points."""

    def test_two_periodic_bouncing(self, ellipsoid):
        t = simulate(ellipsoid, Ray((0, 1.5, 0), (0, -1, 0)), 4)
        for k, seg in enumerate(t.segments):
            y = mp.mpf(3) / 2 if k % 2 == 0 else -mp.mpf(3) / 2
            assert abs(seg.point[1] - y) < mp.mpf("1e-30")
            assert abs(seg.point[0]) < mp.mpf("1e-30")
            assert abs(seg.length - 3) < mp.mpf("1e-30")
        assert t.caustics.degenerate

    def test_degenerate_caustics_count_only_impacts(self, ellipsoid):
        t = simulate(ellipsoid, Ray((0, 1.5, 0), (0, -1, 0)), 4)
        assert t.turning_counts[3] == ((4, 0), (0, 0), (0, 0))

    def test_degenerate_caustics_can_be_refused(self, ellipsoid):
        with pytest.raises(DegenerateLineError):
            simulate(ellipsoid, Ray((0, 1.5, 0), (0, -1, 0)), 2,
                     allow_degenerate=False)


class TestHexagonOrbit:
    def test_closes_after_six_bounces(self, hexagon):
        cert = weak_closure_check(hexagon.family, hexagon, 6, s=-1)
        assert cert.kind == "periodic"
        assert cert.gap < mp.mpf("1e-25")

    def test_perimeter(self, hexagon):
        assert abs(hexagon.length(6) - HEX_PERIMETER) < mp.mpf("1e-25")

    def test_turning_counts_through_one_period(self, hexagon):
        assert hexagon.turning_counts[5] == ((6, 6), (2, 2))

    def test_caustic_is_conserved(self, hexagon):
        assert hexagon.caustic_drift() < mp.mpf("1e-18")

    @pytest.mark.parametrize("k", [25, 100])
    def test_turning_counts_track_the_rotation_number(self, hexagon, k):
        # one third of the bounces touch the caustic interval's far end,
        # never drifting more than one event away
        expected = round(k / 3)
        assert abs(hexagon.upper_turning_counts(k)[1] - expected) <= 1

    def test_length_is_monotone(self, hexagon):
        assert hexagon.length(5) < hexagon.length(6) < hexagon.length()


class TestResonantOrbit3d:
    def test_elliptic_closure_after_seven(self, resonant):
        assert resonant.turning_counts[6] == ((7, 7), (3, 3), (2, 2))

    def test_seven_is_not_a_cartesian_period(self, resonant):
        cert = weak_closure_check(resonant.family, resonant, 7, s=-1)
        assert cert.kind == "none"
        assert cert.gap > mp.mpf("0.1")

    def test_closes_after_fourteen(self, resonant):
        cert = weak_closure_check(resonant.family, resonant, 14, s=-1)
        assert cert.kind == "periodic"
        assert cert.gap < mp.mpf("1e-18")
        assert resonant.turning_counts[13] == ((14, 14), (6, 6), (4, 4))

    def test_period_length(self, resonant):
        assert abs(resonant.length(14) - RES_LENGTH_14) < mp.mpf("1e-18")

    def test_turning_counts_track_the_rotation_vector(self, resonant):
        # rotation vector (2/7, 3/7), innermost coordinate listed first
        hi = resonant.upper_turning_counts(25)
        assert abs(hi[2] - round(25 * 2 / 7)) <= 1
        assert abs(hi[1] - round(25 * 3 / 7)) <= 1

    def test_caustics_are_conserved(self, resonant):
        assert resonant.caustic_drift() < mp.mpf("1e-18")

    def test_length_is_seed_independent(self, ellipsoid):
        ray = ray_with_caustics(ellipsoid, RES_GAMMAS, seed=4)
        other = simulate(ellipsoid, ray, 14)
        assert abs(other.length(14) - RES_LENGTH_14) < mp.mpf("1e-18")


class TestSegmentPairs:
    def test_coincident(self):
        kind, pt = classify_segment_pair(((0, 0), (1, 0)), ((2, 0), (-1, 0)))
        assert kind == "coincident" and pt is None

    def test_parallel(self):
        kind, pt = classify_segment_pair(((0, 0), (1, 0)), ((0, 1), (1, 0)))
        assert kind == "parallel" and pt is None

    def test_intersecting(self):
        kind, pt = classify_segment_pair(((0, 0), (1, 0)), ((1, -1), (0, 1)))
        assert kind == "coplanar-intersecting"
        assert max(abs(c - e) for c, e in zip(pt, (1, 0))) < mp.mpf("1e-30")

    def test_skew(self):
        kind, pt = classify_segment_pair(((0, 0, 0), (1, 0, 0)),
                                         ((0, 1, 1), (0, 0, 1)))
        assert kind == "skew" and pt is None


class TestWeakClosure:
    """Certificates for paths that close only up to one auxiliary
    reflection off a pencil member."""

    def test_consecutive_lines_close_nothing(self, hexagon):
        cert = weak_closure_check(hexagon.family, hexagon, 1)
        assert cert.kind == "none"
        assert "impact" in cert.reason

    def test_hexagon_halves_close_weakly(self, hexagon):
        cert = weak_closure_check(hexagon.family, hexagon, 2)
        assert cert.kind == "weak"
        assert len(cert.alphas) == 1
        assert abs(cert.alphas[0] + 2 * mp.sqrt(2)) < mp.mpf("1e-6")
        assert cert.residuals[0] < mp.mpf("1e-7")
        # the auxiliary mirror sits outside the table
        assert hexagon.family.boundary_value(cert.point) > 0

    def test_skipping_three_gives_parallel_lines(self, hexagon):
        cert = weak_closure_check(hexagon.family, hexagon, 3)
        assert cert.kind == "none"
        assert "parallel" in cert.reason

    def test_full_period_gives_coincident_lines(self, hexagon):
        cert = weak_closure_check(hexagon.family, hexagon, 6)
        assert cert.kind == "none"
        assert "coincide" in cert.reason

    def test_skew_lines_in_three_dimensions(self, resonant):
        cert = weak_closure_check(resonant.family, resonant, 7)
        assert cert.kind == "none"
        assert "skew" in cert.reason

    def test_needs_enough_segments(self, resonant):
        with pytest.raises(ValueError):
            weak_closure_check(resonant.family, resonant, 25)

    def test_rejects_other_depths(self, hexagon):
        with pytest.raises(ValueError):
            weak_closure_check(hexagon.family, hexagon, 2, s=1)


def test_trajectory_serializes_to_json(hexagon):
    payload = json.loads(hexagon.to_json())
    assert set(payload) == {"axes", "caustics", "segments"}
    assert len(payload["segments"]) == 101
    first = payload["segments"][0]
    assert set(first) == {"impact", "direction", "length"}
    assert len(first["impact"]) == 2
