"""Billiard iteration inside the ellipsoid.

Impacts are roots of a quadratic in the ray parameter, reflections mirror
the direction across the boundary tangent plane, and every segment's
turning events (contacts of the elliptic coordinates with their oscillation
endpoints) are located analytically: a hyperplane crossing is the root of a
linear equation per coordinate, a caustic contact is the double root of the
tangency quadratic.  Sampling-based detection would miss near-tangent turns,
so none is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from mpmath import mp

from .confocal import (
    CausticSet,
    ConfocalFamily,
    caustic_parameters,
    jacobi_coordinates,
)
from .polynomials import as_real, solve_linear_system, working_precision

__all__ = [
    "Ray",
    "Segment",
    "Trajectory",
    "ClosureCertificate",
    "GrazingImpactError",
    "next_reflection",
    "simulate",
    "classify_segment_pair",
    "weak_closure_check",
    "ray_with_caustics",
]

#: Chord lengths and discriminants below this flag a grazing impact.
GRAZING_TOL = mp.mpf("1e-10")

#: Reflection-law residual threshold (radians) for closure certificates.
REFLECTION_TOL = mp.mpf("1e-7")


class GrazingImpactError(RuntimeError):
    """Ray meets the boundary tangentially; the iteration is ill-posed."""


def _vec(x) -> Tuple:
    return tuple(as_real(v) for v in x)


def _dot(u, v):
    return mp.fsum(a * b for a, b in zip(u, v))


def _norm(u):
    return mp.sqrt(_dot(u, u))


def _unit(u):
    n = _norm(u)
    if n == 0:
        raise ValueError("zero vector")
    return tuple(a / n for a in u)


def _axpy(p, t, v):
    return tuple(pi + t * vi for pi, vi in zip(p, v))


@dataclass(frozen=True)
class Ray:
    """Point plus unit direction; the direction is normalized on entry."""

    origin: Tuple
    direction: Tuple

    def __init__(self, origin: Sequence, direction: Sequence):
        object.__setattr__(self, "origin", _vec(origin))
        object.__setattr__(self, "direction", _unit(_vec(direction)))

    def at(self, t):
        return _axpy(self.origin, as_real(t), self.direction)


@dataclass(frozen=True)
class Segment:
    """One chord of the trajectory: start impact, direction, length."""

    point: Tuple
    direction: Tuple
    length: object

    @property
    def end(self):
        return _axpy(self.point, self.length, self.direction)


@dataclass(frozen=True)
class ClosureCertificate:
    """Outcome of a (weak) closure test after n reflections.

    kind is "periodic", "weak" or "none".  For a weak closure the auxiliary
    quadric parameters found are in ``alphas`` with per-quadric reflection
    residuals (radians) in ``residuals``; ``inside`` records whether each
    auxiliary reflection happens from inside its quadric.  ``gap`` is the
    periodicity defect |M_{n+1} - M_1| and ``reason`` explains a "none".
    """

    kind: str
    n: int
    s: int
    alphas: Tuple = ()
    residuals: Tuple = ()
    inside: Tuple = ()
    point: Optional[Tuple] = None
    gap: Optional[object] = None
    reason: str = ""


class Trajectory:
    """A simulated billiard path.

    ``segments[i]`` starts at the (i+1)-st boundary impact; consecutive
    segments share endpoints.  ``caustics`` is the caustic set of the first
    segment (conserved along the path, which :meth:`caustic_drift` checks).

    ``turning_counts[i][j]`` is a pair
    (hits of the lower endpoint, hits of the upper endpoint) of the
    oscillation interval of the (j+1)-st elliptic coordinate, accumulated
    through segment i.  The boundary impact starting each segment counts as
    a lower-endpoint hit of the first coordinate.
    """

    def __init__(self, family: ConfocalFamily, segments: Sequence[Segment],
                 caustics: CausticSet, turning_counts: Sequence):
        self.family = family
        self.segments = tuple(segments)
        self.caustics = caustics
        self.turning_counts = tuple(tuple(pairs) for pairs in turning_counts)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def impacts(self):
        pts = [s.point for s in self.segments]
        pts.append(self.segments[-1].end)
        return tuple(pts)

    def length(self, upto: Optional[int] = None):
        segs = self.segments if upto is None else self.segments[:upto]
        return mp.fsum(s.length for s in segs)

    def caustic_drift(self):
        """Worst per-parameter deviation of any segment's caustics from the
        first segment's."""
        base = self.caustics.gammas
        worst = mp.mpf(0)
        for seg in self.segments:
            cs = caustic_parameters(self.family, seg.point, seg.direction)
            for g0, g1 in zip(base, cs.gammas):
                worst = max(worst, abs(as_real(g0) - as_real(g1)))
        return worst

    def upper_turning_counts(self, upto: int):
        """Hits of each coordinate's upper oscillation endpoint through the
        first ``upto`` segments (1-based count of segments)."""
        if not 1 <= upto <= len(self.segments):
            raise IndexError("segment index out of range")
        return tuple(hi for _, hi in self.turning_counts[upto - 1])

    def to_json(self) -> str:
        payload = {
            "axes": [str(a) for a in self.family.axes],
            "caustics": [str(g) for g in self.caustics.gammas],
            "segments": [
                {
                    "impact": [mp.nstr(as_real(c), 25) for c in s.point],
                    "direction": [mp.nstr(as_real(c), 25) for c in s.direction],
                    "length": mp.nstr(as_real(s.length), 25),
                }
                for s in self.segments
            ],
        }
        return json.dumps(payload, indent=2)


def _impact_quadratic(f: ConfocalFamily, p, v):
    A = mp.fsum(vi * vi / as_real(ai) for vi, ai in zip(v, f.axes))
    B = mp.fsum(pi * vi / as_real(ai) for pi, vi, ai in zip(p, v, f.axes))
    C = mp.fsum(pi * pi / as_real(ai) for pi, ai in zip(p, f.axes)) - 1
    return A, B, C


def next_reflection(f: ConfocalFamily, r: Ray):
    """Advance to the next boundary impact and reflect.

    Returns (impact point, reflected ray).  The impact is the farthest
    forward intersection of the ray line with the boundary, which from an
    interior or boundary origin is the unique strictly positive root.
    """
    p, v = r.origin, r.direction
    A, B, C = _impact_quadratic(f, p, v)
    disc = B * B - A * C
    if disc < GRAZING_TOL * GRAZING_TOL:
        raise GrazingImpactError("discriminant below grazing threshold")
    t = (-B + mp.sqrt(disc)) / A
    if t < GRAZING_TOL:
        raise GrazingImpactError(f"forward chord length {mp.nstr(t, 6)} too short")
    impact = _axpy(p, t, v)
    normal = _unit(f.normal_direction(impact))
    vn = _dot(v, normal)
    if abs(vn) < GRAZING_TOL:
        raise GrazingImpactError("tangential impact")
    reflected = tuple(vi - 2 * vn * ni for vi, ni in zip(v, normal))
    return impact, Ray(impact, reflected)


def _endpoint_positions(f: ConfocalFamily, caustics: CausticSet):
    """Map each merged endpoint value to (coordinate index j, side).

    Value at 1-based merged position 2j-1 is the upper endpoint of the
    oscillation interval of coordinate j; position 2j is the lower endpoint
    of coordinate j+1.  Side is 0 for lower, 1 for upper.
    """
    axes = [as_real(a) for a in f.axes]
    gammas = [as_real(g) for g in caustics.gammas]
    merged = sorted(axes + gammas)
    table = {}
    for pos, value in enumerate(merged, start=1):
        if pos % 2 == 1:
            table[value] = ((pos + 1) // 2 - 1, 1)
        else:
            table[value] = (pos // 2, 0)
    return table


def _segment_events(f: ConfocalFamily, p, v, t_end, caustics, table, counts):
    """Accumulate turning events strictly inside one segment."""
    # hyperplane crossings: coordinate i vanishes at t = -p_i/v_i
    for i, (pi, vi) in enumerate(zip(p, v)):
        if vi == 0:
            continue
        t = -pi / vi
        if 0 < t < t_end:
            value = as_real(f.axes[i])
            if value in table:
                j, side = table[value]
                counts[j][side] += 1
    # caustic contacts: double root of the tangency quadratic
    if caustics.degenerate:
        return
    for g in caustics.gammas:
        gr = as_real(g)
        A = mp.fsum(vi * vi / (as_real(ai) - gr) for vi, ai in zip(v, f.axes))
        B = mp.fsum(pi * vi / (as_real(ai) - gr)
                    for pi, vi, ai in zip(p, v, f.axes))
        if A == 0:
            continue
        t = -B / A
        if 0 < t < t_end:
            j, side = table[gr]
            counts[j][side] += 1


def simulate(f: ConfocalFamily, r: Ray, k: int,
             allow_degenerate: bool = True) -> Trajectory:
    """Iterate k reflections, tracking caustics and turning counts.

    A ray starting strictly inside is first carried to the boundary; the
    recorded segments all start at impacts.  Degenerate caustic sets (axis
    trajectories and the like) are tolerated by default but their caustic
    contacts are not counted; pass ``allow_degenerate=False`` to refuse them.
    """
    if k < 1:
        raise ValueError("need at least one reflection")
    with working_precision(None):
        boundary_gap = abs(f.boundary_value(r.origin))
        ray = r
        if boundary_gap > GRAZING_TOL:
            _, ray = next_reflection(f, r)
        caustics = caustic_parameters(f, ray.origin, ray.direction,
                                      allow_degenerate=allow_degenerate)
        # degenerate merges make endpoint attribution ambiguous: count only
        # the impacts (the first coordinate's lower endpoint) in that case
        table = {} if caustics.degenerate else _endpoint_positions(f, caustics)
        counts = [[0, 0] for _ in range(f.d)]
        segments = []
        history = []
        for _ in range(k):
            impact, nxt = next_reflection(f, ray)
            length = _norm(tuple(b - a for a, b in zip(ray.origin, impact)))
            counts[0][0] += 1  # the impact starting this segment
            _segment_events(f, ray.origin, ray.direction, length,
                            caustics, table, counts)
            segments.append(Segment(ray.origin, ray.direction, length))
            history.append(tuple((lo, hi) for lo, hi in counts))
            ray = nxt
        return Trajectory(f, segments, caustics, history)


def classify_segment_pair(s1, s2, tol=None):
    """Relative position of two lines, each given as (point, direction).

    Returns (kind, point) with kind in {"coincident", "parallel",
    "coplanar-intersecting", "skew"} and point the intersection when the
    kind admits one.
    """
    p1, v1 = _vec(s1[0]), _unit(_vec(s1[1]))
    p2, v2 = _vec(s2[0]), _unit(_vec(s2[1]))
    if tol is None:
        tol = mp.mpf(2) ** (-(mp.prec // 2))
    w = tuple(b - a for a, b in zip(p1, p2))
    scale = 1 + _norm(w)
    c = _dot(v1, v2)
    parallel = abs(abs(c) - 1) < tol * tol
    if parallel:
        # distance of p2 from line 1
        offset = tuple(wi - _dot(w, v1) * vi for wi, vi in zip(w, v1))
        if _norm(offset) < tol * scale:
            return "coincident", None
        return "parallel", None
    # closest approach parameters of the two lines
    d1 = _dot(w, v1)
    d2 = _dot(w, v2)
    denom = 1 - c * c
    t1 = (d1 - c * d2) / denom
    t2 = (c * d1 - d2) / denom
    q1 = _axpy(p1, t1, v1)
    q2 = _axpy(p2, t2, v2)
    sep = _norm(tuple(b - a for a, b in zip(q1, q2)))
    if sep < tol * scale:
        mid = tuple((a + b) / 2 for a, b in zip(q1, q2))
        return "coplanar-intersecting", mid
    return "skew", None


def _mirror(u, normal):
    n = _unit(normal)
    un = _dot(u, n)
    return tuple(ui - 2 * un * ni for ui, ni in zip(u, n))


def _angle_between(u, w):
    c = _dot(_unit(u), _unit(w))
    c = max(mp.mpf(-1), min(mp.mpf(1), c))
    return mp.acos(c)


def weak_closure_check(f: ConfocalFamily, t: Trajectory, n: int,
                       s: int = 0) -> ClosureCertificate:
    """Test whether the path closes after n reflections, exactly or weakly.

    s = -1 asks for genuine periodicity: the (n+1)-st impact and direction
    reproduce the first.  s = 0 asks the first and (n+1)-st segment lines to
    intersect at a point X lying on a pencil member off which they satisfy
    the reflection law; all d pencil parameters through X are tried and the
    smallest-residual one is reported, along with whether the reflection is
    from inside that quadric (sign of the approach derivative).
    """
    if s not in (-1, 0):
        raise ValueError("geometric closure supports s in {-1, 0} only")
    if len(t.segments) < n + 1:
        raise ValueError(f"need at least {n + 1} segments, have {len(t.segments)}")
    first = t.segments[0]
    last = t.segments[n]
    gap = _norm(tuple(b - a for a, b in zip(first.point, last.point)))
    if s == -1:
        dir_gap = _norm(tuple(b - a for a, b in
                              zip(first.direction, last.direction)))
        scale = max(1, _norm(first.point))
        if gap < REFLECTION_TOL * scale and dir_gap < REFLECTION_TOL:
            return ClosureCertificate(kind="periodic", n=n, s=-1, gap=gap)
        return ClosureCertificate(kind="none", n=n, s=-1, gap=gap,
                                  reason="endpoints or directions differ")
    kind, X = classify_segment_pair((first.point, first.direction),
                                    (last.point, last.direction))
    if kind == "coincident":
        return ClosureCertificate(kind="none", n=n, s=0, gap=gap,
                                  reason="segment lines coincide")
    if X is None:
        return ClosureCertificate(kind="none", n=n, s=0, gap=gap,
                                  reason=f"segment lines are {kind}")
    # the closing curve runs X -> first impact -> ... -> (n+1)-st impact
    # -> X, so the particle arrives at X along the (n+1)-st segment line
    # and departs toward the first impact.  Either edge collapsing to a
    # point means the lines only meet at a shared impact, which closes
    # nothing.
    t_in = _dot(tuple(x - p for x, p in zip(X, last.point)), last.direction)
    t_out = _dot(tuple(p - x for p, x in zip(first.point, X)), first.direction)
    edge_tol = mp.mpf(2) ** (-(mp.prec // 2)) * max(1, _norm(X))
    if abs(t_in) < edge_tol or abs(t_out) < edge_tol:
        return ClosureCertificate(kind="none", n=n, s=0, gap=gap, point=X,
                                  reason="lines meet only at an impact point")
    u_in = last.direction if t_in > 0 else tuple(-c for c in last.direction)
    u_out = first.direction if t_out > 0 else tuple(-c for c in first.direction)
    jp = jacobi_coordinates(f, X)
    best = None
    for lam in jp.lambdas:
        lam = as_real(lam)
        if min(abs(lam - as_real(a)) for a in f.axes) < GRAZING_TOL:
            continue  # degenerate pencil member has no tangent plane here
        normal = tuple(x / (as_real(a) - lam) for x, a in zip(X, f.axes))
        if _norm(normal) == 0:
            continue
        residual = _angle_between(_mirror(u_in, normal), u_out)
        inside = _dot(u_in, normal) > 0
        if best is None or residual < best[1]:
            best = (lam, residual, inside)
    if best is None:
        return ClosureCertificate(kind="none", n=n, s=0, gap=gap, point=X,
                                  reason="no pencil member admits a tangent plane")
    alpha, residual, inside = best
    if residual < REFLECTION_TOL:
        return ClosureCertificate(kind="weak", n=n, s=0, alphas=(alpha,),
                                  residuals=(residual,), inside=(inside,),
                                  point=X, gap=gap)
    return ClosureCertificate(kind="none", n=n, s=0, alphas=(alpha,),
                              residuals=(residual,), point=X, gap=gap,
                              reason="reflection law fails on every pencil member")


# ---------------------------------------------------------------------------
# rays with prescribed caustics


def _tangency_residuals(f: ConfocalFamily, p, v, gammas):
    out = []
    for g in gammas:
        g = as_real(g)
        A = mp.fsum(vi * vi / (as_real(ai) - g) for vi, ai in zip(v, f.axes))
        B = mp.fsum(pi * vi / (as_real(ai) - g)
                    for pi, vi, ai in zip(p, v, f.axes))
        C = mp.fsum(pi * pi / (as_real(ai) - g)
                    for pi, ai in zip(p, f.axes)) - 1
        out.append(B * B - A * C)
    return out


def _boundary_point(f: ConfocalFamily, angles):
    """A boundary parameterization by d-1 spherical angles."""
    d = f.d
    coords = []
    radius = mp.mpf(1)
    for i in range(d - 1):
        coords.append(radius * mp.cos(angles[i]))
        radius = radius * mp.sin(angles[i])
    coords.append(radius)
    return tuple(mp.sqrt(as_real(a)) * c for a, c in zip(f.axes, coords))


def ray_with_caustics(f: ConfocalFamily, gammas: Sequence, seed: int = 0,
                      attempts: int = 200) -> Ray:
    """A boundary ray whose segment line is tangent to every Q_gamma.

    Works on the unit direction sphere at a pseudo-randomly chosen boundary
    point: the d-1 tangency residuals vanish on a finite solution set, found
    by Newton iteration with finite-difference Jacobian and restarts.  The
    result is verified against caustic_parameters before being returned.
    """
    import random

    rng = random.Random(seed)
    d = f.d
    targets = [as_real(g) for g in gammas]
    if len(targets) != d - 1:
        raise ValueError(f"need {d - 1} caustic parameters")
    with working_precision(None):
        for _ in range(attempts):
            angles = [mp.mpf(rng.uniform(0.2, 1.4)) for _ in range(d - 1)]
            p = _boundary_point(f, angles)
            # random inward-ish direction as Newton seed
            v = _unit(tuple(mp.mpf(rng.uniform(-1, 1)) for _ in range(d)))
            sol = _newton_direction(f, p, v, targets)
            if sol is None:
                continue
            # discard directions that immediately leave the ellipsoid
            normal = f.normal_direction(p)
            if _dot(sol, normal) > 0:
                sol = tuple(-c for c in sol)
            if abs(_dot(sol, normal)) < 100 * GRAZING_TOL:
                continue
            ray = Ray(p, sol)
            try:
                cs = caustic_parameters(f, ray.origin, ray.direction,
                                        allow_degenerate=False)
            except Exception:
                continue
            err = max(abs(as_real(a) - b)
                      for a, b in zip(cs.gammas, sorted(targets)))
            if err < mp.mpf("1e-20"):
                return ray
    raise RuntimeError("could not construct a ray with the requested caustics")


def _newton_direction(f: ConfocalFamily, p, v0, targets, iterations: int = 60):
    """Newton on the direction sphere for the tangency residual system."""
    d = f.d
    m = len(targets)
    v = _unit(v0)
    h = mp.mpf(2) ** (-mp.prec // 3)
    for _ in range(iterations):
        res = _tangency_residuals(f, p, v, targets)
        if max(abs(r) for r in res) < mp.mpf(2) ** (-(mp.prec - 20)):
            return _unit(v)
        # tangent basis at v on the sphere
        basis = _sphere_tangent_basis(v)
        jac = []
        for r_idx in range(m):
            row = []
            for b in basis:
                vp = _unit(tuple(vi + h * bi for vi, bi in zip(v, b)))
                rp = _tangency_residuals(f, p, vp, targets)[r_idx]
                row.append((rp - res[r_idx]) / h)
            jac.append(row)
        try:
            step = solve_linear_system(jac, [-r for r in res])
        except ZeroDivisionError:
            return None
        norm_step = mp.sqrt(mp.fsum(s * s for s in step))
        if norm_step > 1:
            step = [s / norm_step for s in step]
        v = _unit(tuple(vi + mp.fsum(s * b[i] for s, b in zip(step, basis))
                        for i, vi in enumerate(v)))
    return None


def _sphere_tangent_basis(v):
    """d-1 orthonormal vectors spanning the tangent space of the unit
    sphere at v (Gram-Schmidt against coordinate directions)."""
    d = len(v)
    basis = []
    for i in range(d):
        e = [mp.mpf(0)] * d
        e[i] = mp.mpf(1)
        w = tuple(e)
        w = tuple(wi - _dot(w, v) * vi for wi, vi in zip(w, v))
        for b in basis:
            w = tuple(wi - _dot(w, b) * bi for wi, bi in zip(w, b))
        nw = _norm(w)
        if nw > mp.mpf("1e-6"):
            basis.append(tuple(wi / nw for wi in w))
        if len(basis) == d - 1:
            break
    return basis
