"""Confocal quadric geometry for the ellipsoidal billiard.

The ambient ellipsoid has squared semi-axes a_1 > ... > a_d > 0 and sits
inside the one-parameter pencil of quadrics

    Q_lambda:  sum_i  x_i^2 / (a_i - lambda) = 1,

whose members share the focal set of Q_0.  This module computes Jacobi
elliptic coordinates of a point (the d pencil parameters through it),
the d-1 caustic parameters of a line (the pencil members tangent to it),
the admissibility test for caustic configurations, and the reciprocal
band system on which all the spectral machinery downstream lives.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from mpmath import mp

from .polynomials import (
    RATIONAL,
    REAL,
    Polynomial,
    RootIsolationError,
    _rational_sqrt,
    as_real,
    isolate_real_roots,
    working_precision,
)

__all__ = [
    "ConfocalFamily",
    "CausticSet",
    "IntervalSystem",
    "JacobiPoint",
    "AudinReport",
    "DegenerateLineError",
    "jacobi_coordinates",
    "cartesian_from_jacobi",
    "caustic_parameters",
    "tangency_polynomial",
    "audin_check",
    "interval_system",
    "quadric_type_name",
]

#: Absolute tolerance under which a pencil parameter is treated as equal
#: to an axis value (a degenerate member of the family).
AXIS_COINCIDENCE_TOL = 1e-9


class DegenerateLineError(ValueError):
    """The tangency polynomial of a line degenerates (axis line, focal line)."""


def _is_rationals(values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool)
               for v in values)


def _coerce_seq(values, rational: bool):
    if rational:
        return tuple(Fraction(v) for v in values)
    return tuple(as_real(v) for v in values)


def _common_domain(*seqs):
    """Coerce several sequences to one comparable scalar kind.

    Exact rationals survive only when every sequence is rational; a single
    real value drags the whole comparison into mpf (Fraction and mpf do not
    order against each other directly).
    """
    rational = all(_is_rationals(s) for s in seqs)
    return [_coerce_seq(s, rational) for s in seqs]


@dataclass(frozen=True)
class ConfocalFamily:
    """The ellipsoid sum x_i^2/a_i = 1 and its confocal pencil.

    ``axes`` are the squared semi-axes, strictly decreasing and positive.
    Rational axes keep all derived quantities exact; any other input is
    carried in extended-precision reals.
    """

    axes: Tuple

    def __init__(self, axes: Sequence):
        values = list(axes)
        if len(values) < 2:
            raise ValueError("need dimension >= 2")
        coerced = _coerce_seq(values, _is_rationals(values))
        if any(v <= 0 for v in coerced):
            raise ValueError("squared semi-axes must be positive")
        if any(coerced[i] <= coerced[i + 1] for i in range(len(coerced) - 1)):
            raise ValueError("squared semi-axes must be strictly decreasing")
        object.__setattr__(self, "axes", coerced)

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def kind(self) -> str:
        return RATIONAL if _is_rationals(self.axes) else REAL

    def boundary_value(self, x: Sequence):
        """sum x_i^2/a_i - 1; zero on the ellipsoid, negative inside."""
        return sum((xi * xi) / ai for xi, ai in zip(x, self.axes)) - 1

    def pencil_value(self, lam, x: Sequence):
        """sum x_i^2/(a_i - lambda) - 1 for a non-degenerate member."""
        if any(ai == lam for ai in self.axes):
            raise ZeroDivisionError("degenerate pencil member")
        return sum((xi * xi) / (ai - lam) for xi, ai in zip(x, self.axes)) - 1

    def normal_direction(self, x: Sequence):
        """Outward normal direction of the ellipsoid at a boundary point."""
        return tuple(xi / ai for xi, ai in zip(x, self.axes))


def quadric_type_name(index: int, d: int) -> str:
    """Human name of a pencil member by type index.

    The index counts how many axis values lie below the parameter: 0 is an
    ellipsoid, k >= 1 a hyperboloid whose intersection signature has k minus
    signs (for d = 3: one-sheeted at 1, two-sheeted at 2).
    """
    if index == 0:
        return "ellipsoid"
    if d == 3:
        return {1: "one-sheeted hyperboloid", 2: "two-sheeted hyperboloid"}[index]
    return f"hyperboloid-{index}"


@dataclass(frozen=True)
class CausticSet:
    """Pencil parameters of the d-1 quadrics tangent to a line.

    ``types[j]`` is the number of axis values below ``gammas[j]``, which
    pins the quadric's signature.  ``degenerate`` marks sets containing a
    parameter within :data:`AXIS_COINCIDENCE_TOL` of an axis value or a
    repeated tangency; downstream consumers refuse those unless told not to.
    """

    gammas: Tuple
    types: Tuple[int, ...]
    degenerate: bool = False

    def __init__(self, gammas: Sequence, family: Optional[ConfocalFamily] = None,
                 degenerate: Optional[bool] = None):
        values = list(gammas)
        coerced = _coerce_seq(values, _is_rationals(values))
        if any(coerced[i] > coerced[i + 1] for i in range(len(coerced) - 1)):
            coerced = tuple(sorted(coerced))
        types = ()
        degen = bool(degenerate)
        if family is not None:
            axes_c, gam_c = _common_domain(family.axes, coerced)
            types = tuple(sum(1 for a in axes_c if a < g) for g in gam_c)
            if degenerate is None:
                degen = any(
                    min(abs(g - a) for a in axes_c) <= AXIS_COINCIDENCE_TOL
                    for g in gam_c)
                degen = degen or any(
                    abs(gam_c[i + 1] - gam_c[i]) <= AXIS_COINCIDENCE_TOL
                    for i in range(len(gam_c) - 1))
        object.__setattr__(self, "gammas", coerced)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "degenerate", degen)

    def type_names(self, d: int) -> Tuple[str, ...]:
        return tuple(quadric_type_name(t, d) for t in self.types)


@dataclass(frozen=True)
class JacobiPoint:
    """Elliptic coordinates of a Cartesian point: the d pencil parameters
    through it, ascending, plus the sign bits lost by the squaring."""

    lambdas: Tuple
    signs: Tuple[int, ...]

    def __init__(self, lambdas: Sequence, signs: Sequence[int]):
        lam = list(lambdas)
        coerced = _coerce_seq(lam, _is_rationals(lam))
        sg = tuple(1 if s >= 0 else -1 for s in signs)
        if len(sg) != len(coerced):
            raise ValueError("need one sign bit per coordinate")
        if any(coerced[i] > coerced[i + 1] for i in range(len(coerced) - 1)):
            raise ValueError("pencil parameters must be ascending")
        object.__setattr__(self, "lambdas", coerced)
        object.__setattr__(self, "signs", sg)


@dataclass(frozen=True)
class AudinReport:
    """Outcome of the caustic admissibility test.

    ``positions[j]`` is the 1-based rank of the j-th smallest caustic
    parameter inside the merged sorted sequence of axes and caustics;
    admissibility requires rank 2j-1 or 2j for every j.
    """

    admissible: bool
    positions: Tuple[int, ...]
    merged: Tuple


@dataclass(frozen=True)
class IntervalSystem:
    """The reciprocal band system of an admissible caustic configuration.

    From the merged values b_1 < ... < b_{2d-1} (axes and caustics) set
    c_j = 1/b_j and append c_{2d} = 0.  The set E is the union of the d
    closed bands [c_{2p}, c_{2p-1}]; between consecutive bands sit d-1
    open gaps.  ``bands[0]`` is the topmost band [c_2, c_1] and bands
    descend from there; ``gaps[0]`` is the gap just below band 1.
    """

    b: Tuple
    c: Tuple
    bands: Tuple[Tuple, ...]
    gaps: Tuple[Tuple, ...]

    def __init__(self, b: Sequence):
        values = list(b)
        if len(values) % 2 == 0:
            raise ValueError("need an odd number of endpoints (axes + caustics)")
        coerced = _coerce_seq(values, _is_rationals(values))
        if any(v <= 0 for v in coerced):
            raise ValueError("all endpoints must be positive")
        if any(coerced[i] >= coerced[i + 1] for i in range(len(coerced) - 1)):
            raise ValueError("endpoints must be strictly increasing")
        if _is_rationals(coerced):
            recip = tuple(1 / v for v in coerced) + (Fraction(0),)
        else:
            recip = tuple(1 / v for v in coerced) + (mp.mpf(0),)
        d = (len(values) + 1) // 2
        bands = tuple((recip[2 * p - 1], recip[2 * p - 2]) for p in range(1, d + 1))
        gaps = tuple((recip[2 * p], recip[2 * p - 1]) for p in range(1, d))
        object.__setattr__(self, "b", coerced)
        object.__setattr__(self, "c", recip)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def from_band_edges(cls, edges: Sequence) -> "IntervalSystem":
        """Build a system directly from 2d ascending band-edge values.

        Bypasses the reciprocal construction; for synthetic test systems
        (symmetric bands, shifted bands) that do not arise from any axis
        configuration.  ``b`` is left empty on the result.
        """
        values = list(edges)
        if len(values) < 2 or len(values) % 2:
            raise ValueError("need an even number (>= 2) of band edges")
        coerced = _coerce_seq(values, _is_rationals(values))
        if any(coerced[i] >= coerced[i + 1] for i in range(len(coerced) - 1)):
            raise ValueError("band edges must be strictly increasing")
        self = object.__new__(cls)
        d = len(coerced) // 2
        recip = tuple(reversed(coerced))
        bands = tuple((recip[2 * p - 1], recip[2 * p - 2]) for p in range(1, d + 1))
        gaps = tuple((recip[2 * p], recip[2 * p - 1]) for p in range(1, d))
        object.__setattr__(self, "b", ())
        object.__setattr__(self, "c", recip)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "gaps", gaps)
        return self

    @property
    def d(self) -> int:
        return len(self.bands)

    @property
    def genus(self) -> int:
        return len(self.gaps)

    def endpoint_polynomial(self) -> Polynomial:
        """Monic polynomial vanishing at every c_j (degree 2d).

        Negative exactly on the open bands, which is what puts the square
        root of its absolute value under every band and gap integral.
        """
        return Polynomial.from_roots(self.c)

    def band_containing(self, z) -> Optional[int]:
        """0-based band index containing z (closed bands), or None."""
        for i, (lo, hi) in enumerate(self.bands):
            if lo <= z <= hi:
                return i
        return None

    def gap_containing(self, z) -> Optional[int]:
        """0-based gap index with z strictly inside, or None."""
        for i, (lo, hi) in enumerate(self.gaps):
            if lo < z < hi:
                return i
        return None


# ---------------------------------------------------------------------------
# coordinates


def _product_of_differences(values, kind) -> Polynomial:
    """prod_j (v_j - x) as a polynomial in x (sign-correct for odd counts)."""
    p = Polynomial.from_roots(values, kind=kind)
    return p if len(values) % 2 == 0 else -p


def _axis_interlace_polynomial(f: ConfocalFamily, x: Sequence) -> Polynomial:
    """sum_i x_i^2 prod_{k != i}(a_k - lam) - prod_k (a_k - lam), in lam."""
    rational = f.kind == RATIONAL and _is_rationals(list(x))
    axes = f.axes if rational else tuple(as_real(a) for a in f.axes)
    pt = _coerce_seq(x, rational)
    kind = RATIONAL if rational else REAL
    total = -_product_of_differences(axes, kind)
    for i, xi in enumerate(pt):
        if xi == 0:
            continue
        others = tuple(a for k, a in enumerate(axes) if k != i)
        total = total + _product_of_differences(others, kind) * (xi * xi)
    return total


def jacobi_coordinates(f: ConfocalFamily, x: Sequence) -> JacobiPoint:
    """Elliptic coordinates of x: the d solutions of the pencil equation.

    Clearing denominators in sum x_i^2/(a_i - lam) = 1 gives a degree-d
    polynomial whose roots interlace the axes.  Points on coordinate
    hyperplanes make some roots collide with axis values; those roots are
    recognized exactly and split off before isolating the rest.
    """
    if len(x) != f.d:
        raise ValueError(f"point has {len(x)} coordinates, family has {f.d}")
    F = _axis_interlace_polynomial(f, x)
    if F.degree != f.d:
        raise RootIsolationError("pencil polynomial degenerated (origin point?)")
    roots = []
    candidates = [Fraction(0)] + list(f.axes) if F.kind == RATIONAL else \
        [mp.mpf(0)] + [as_real(a) for a in f.axes]
    work = F
    for v in candidates:
        while work.degree > 0 and work.eval(v) == 0:
            roots.append(v)
            work = work // Polynomial.from_roots([v], kind=work.kind)
    if work.degree == 1:
        roots.append(-work.coeffs[0] / work.coeffs[1])
    elif work.degree > 1:
        rational = work.kind == RATIONAL
        lo_bound = -(sum(xi * xi for xi in _coerce_seq(x, rational)) + 1)
        hi_bound = Fraction(f.axes[0]) * 2 if rational else as_real(f.axes[0]) * 2
        found = isolate_real_roots(work, lo_bound, hi_bound)
        for r, parity in found:
            roots.append(r)
            if parity == "even":
                roots.append(r)
    if len(roots) != f.d:
        raise RootIsolationError(
            f"expected {f.d} pencil parameters, isolated {len(roots)}")
    roots.sort()
    signs = tuple(1 if xi >= 0 else -1 for xi in x)
    return JacobiPoint(roots, signs)


def cartesian_from_jacobi(f: ConfocalFamily, j: JacobiPoint) -> Tuple:
    """Invert elliptic coordinates:
    x_i^2 = prod_j (a_i - lam_j) / prod_{k != i} (a_i - a_k)."""
    if len(j.lambdas) != f.d:
        raise ValueError("dimension mismatch")
    rational = f.kind == RATIONAL and _is_rationals(j.lambdas)
    axes = f.axes if rational else tuple(as_real(a) for a in f.axes)
    lams = _coerce_seq(j.lambdas, rational)
    out = []
    scale = max(abs(a) for a in axes)
    tol = 0 if rational else scale ** f.d * mp.mpf(2) ** (-(mp.prec // 2))
    for i, ai in enumerate(axes):
        num = ai - lams[0]
        for lam in lams[1:]:
            num = num * (ai - lam)
        den = Fraction(1) if rational else mp.mpf(1)
        for k, ak in enumerate(axes):
            if k != i:
                den = den * (ai - ak)
        sq = num / den
        if sq < 0:
            if rational or sq < -tol:
                raise ValueError(
                    f"coordinate {i} squares to {sq} < 0; "
                    "pencil parameters do not interlace the axes")
            sq = mp.mpf(0)
        root = _exact_or_real_sqrt(sq, rational)
        out.append(j.signs[i] * root)
    return tuple(out)


def _exact_or_real_sqrt(v, rational: bool):
    if rational:
        r = _rational_sqrt(v)
        if r is not None:
            return r
        with working_precision(None):
            return mp.sqrt(as_real(v))
    return mp.sqrt(v)


# ---------------------------------------------------------------------------
# caustics of a line


def tangency_polynomial(f: ConfocalFamily, p: Sequence, v: Sequence) -> Polynomial:
    """Degree-(d-1) polynomial in the pencil parameter whose roots are the
    caustics of the line t -> p + t v.

    The line is tangent to Q_g exactly when the quadratic (in t) membership
    equation has a double root, i.e. (J p.v)^2 = (J v.v)(J p.p - 1) with
    J = diag(1/(a_i - g)).  Clearing all denominators leaves a polynomial
    multiple of prod(a_i - g); the exact quotient below is the tangency
    polynomial.  Its leading coefficient is (-1)^(d-1) |v|^2.
    """
    if len(p) != f.d or len(v) != f.d:
        raise ValueError("dimension mismatch")
    if all(vi == 0 for vi in v):
        raise ValueError("direction must be nonzero")
    rational = f.kind == RATIONAL and _is_rationals(list(p) + list(v))
    kind = RATIONAL if rational else REAL
    axes = f.axes if rational else tuple(as_real(a) for a in f.axes)
    pp = _coerce_seq(p, rational)
    vv = _coerce_seq(v, rational)

    prod_all = _product_of_differences(axes, kind)
    abar = Polynomial.zero(kind)
    bbar = Polynomial.zero(kind)
    cbar = -prod_all
    for i in range(f.d):
        others = _product_of_differences(
            tuple(a for k, a in enumerate(axes) if k != i), kind)
        abar = abar + others * (vv[i] * vv[i])
        bbar = bbar + others * (pp[i] * vv[i])
        cbar = cbar + others * (pp[i] * pp[i])
    numer = bbar * bbar - abar * cbar
    quot, rem = numer.divmod(prod_all)
    if not rem.is_zero:
        worst = rem.max_abs_coeff()
        scale = max(numer.max_abs_coeff(), 1)
        if rational or worst > scale * mp.mpf(2) ** (-(mp.prec // 2)):
            raise ArithmeticError(
                f"tangency polynomial division left remainder {worst}")
    return quot


def _small_degree_roots(W: Polynomial) -> list:
    """Real roots of a real linear or quadratic, multiplicities expanded.

    The closed form keeps the per-segment conservation checks cheap; the
    general Sturm machinery costs two orders of magnitude more on the same
    input.  A discriminant within rounding noise of zero collapses to a
    double root, matching what root isolation would report as even parity.
    """
    if W.degree == 1:
        return [-W.coeffs[0] / W.coeffs[1]]
    c0, c1, c2 = W.coeffs
    disc = c1 * c1 - 4 * c2 * c0
    scale = c1 * c1 + abs(4 * c2 * c0)
    if scale > 0 and disc < -mp.mpf("1e-28") * scale:
        return []
    if disc <= 0 or disc < mp.mpf("1e-28") * scale:
        r = -c1 / (2 * c2)
        return [r, r]
    root = mp.sqrt(disc)
    q = -(c1 + root) / 2 if c1 >= 0 else -(c1 - root) / 2
    return [q / c2, c0 / q]


def _exact_quadratic_roots(W: Polynomial) -> Optional[list]:
    """Roots of a rational quadratic when the discriminant is a perfect
    square; None otherwise (the caller falls back to isolation)."""
    c0, c1, c2 = (Fraction(c) for c in W.coeffs)
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    sq = _rational_sqrt(disc)
    if sq is None:
        return None
    if sq == 0:
        r = -c1 / (2 * c2)
        return [r, r]
    return sorted([(-c1 - sq) / (2 * c2), (-c1 + sq) / (2 * c2)])


def caustic_parameters(f: ConfocalFamily, p: Sequence, v: Sequence,
                       allow_degenerate: bool = True) -> CausticSet:
    """The d-1 pencil parameters of quadrics tangent to the line p + t v.

    Parameters that coincide with axis values (the line meets a focal
    quadric) and repeated parameters mark the set degenerate.  With
    ``allow_degenerate=False`` such lines raise instead.
    """
    W = tangency_polynomial(f, p, v)
    if W.degree != f.d - 1:
        raise DegenerateLineError(
            f"tangency polynomial has degree {W.degree}, expected {f.d - 1}")
    roots = None
    if W.degree == 1:
        roots = [-W.coeffs[0] / W.coeffs[1]]
    elif W.degree == 2:
        if W.kind == REAL:
            roots = _small_degree_roots(W)
        else:
            roots = _exact_quadratic_roots(W)
    if roots is None:
        bound = 1 + max(abs(c) for c in W.coeffs) / abs(W.leading)
        found = isolate_real_roots(W, -bound, bound)
        roots = []
        for r, parity in found:
            roots.append(r)
            if parity == "even":
                roots.append(r)
    if len(roots) != f.d - 1:
        raise DegenerateLineError(
            f"expected {f.d - 1} tangency parameters, found {len(roots)}")
    cs = CausticSet(sorted(roots), family=f)
    if cs.degenerate and not allow_degenerate:
        raise DegenerateLineError(
            "line is tangent to a degenerate member of the pencil")
    return cs


# ---------------------------------------------------------------------------
# admissibility and the band system


def _merge_positions(axes, gammas):
    """Sorted merge of axes and caustic values; returns (merged, positions)
    with 1-based positions of each caustic.  Ties sort caustics first."""
    axes, gammas = _common_domain(axes, gammas)
    tagged = [(a, 1) for a in axes] + [(g, 0) for g in gammas]
    tagged.sort(key=lambda t: (t[0], t[1]))
    merged = tuple(val for val, _ in tagged)
    positions = tuple(i + 1 for i, (_, tag) in enumerate(tagged) if tag == 0)
    return merged, positions


def audin_check(f: ConfocalFamily, c: CausticSet) -> AudinReport:
    """Admissibility of a caustic configuration.

    Merge the axes with the caustic parameters and sort; the configuration
    is admissible when the j-th smallest caustic occupies position 2j-1 or
    2j (1-based).  Equivalent formulations partition the merged sequence
    into d-1 leading pairs each containing exactly one caustic, plus the
    largest axis.
    """
    if len(c.gammas) != f.d - 1:
        raise ValueError(f"need {f.d - 1} caustics, got {len(c.gammas)}")
    merged, positions = _merge_positions(f.axes, c.gammas)
    ok = all(pos in (2 * j - 1, 2 * j) for j, pos in enumerate(positions, start=1))
    return AudinReport(admissible=ok, positions=positions, merged=merged)


def interval_system(f: ConfocalFamily, c: CausticSet) -> IntervalSystem:
    """Reciprocal band system of the merged axis/caustic sequence.

    Requires every merged value positive (billiard caustics of interior
    segments always are) and pairwise distinct.
    """
    if len(c.gammas) != f.d - 1:
        raise ValueError(f"need {f.d - 1} caustics, got {len(c.gammas)}")
    merged, _ = _merge_positions(f.axes, c.gammas)
    if any(v <= 0 for v in merged):
        raise ValueError("band construction needs positive parameters")
    for u, w in zip(merged, merged[1:]):
        if u == w:
            raise ValueError("degenerate caustic set: repeated endpoint")
    return IntervalSystem(merged)
