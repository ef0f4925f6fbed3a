"""Generalized Pell identities and restricted Chebyshev extremal problems.

A band system E (see :class:`billiards.confocal.IntervalSystem`) carries a
monic endpoint polynomial T of degree 2d, negative exactly on the open
bands.  A generalized Pell triple consists of polynomials A, B, S with

    A**2 - T * B**2 = S**2,

S monic of degree g < d with at most one zero per gap.  Such triples are
exactly the extremal points of a Chebyshev problem: among monic rationals
of degree m with denominator zeros confined to the gaps, the quotient
A / (A_0 S) has the smallest sup norm on E, and its modulus touches that
norm at m + 2g + 1 alternance points.  This module solves the extremal
problem numerically, verifies candidate triples, reconstructs denominators
from level-set data, computes the representation counting integrals of
Krein, Levin and Nudelman, and checks the weak-periodicity Pell identities
used by the closure criteria.
"""

import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from mpmath import mp

from .confocal import CausticSet, ConfocalFamily, IntervalSystem
from .polynomials import (
    RATIONAL,
    REAL,
    Polynomial,
    as_real,
    isolate_real_roots,
    matrix_determinant,
    solve_linear_system,
    working_precision,
)
from .spectral import band_measures, chebyshev_integral, gap_normalized_differential

__all__ = [
    "PellError",
    "ExchangeError",
    "PellTriple",
    "PellVerification",
    "ExtremalSolution",
    "AdjointReport",
    "WeakPellReport",
    "verify_generalized_pell",
    "solve_restricted_extremal",
    "alternance_points",
    "reconstruct_denominator",
    "kln_numbers",
    "adjoint_report",
    "verify_weak_pell",
    "resonance_weakness_inequality",
]

PELL_RESIDUAL_TOL = 1e-8
EXCHANGE_TARGET = mp.mpf("1e-12")
EXCHANGE_MAX_ITER = 60
OUTER_TARGET = mp.mpf("1e-11")
OUTER_MAX_ITER = 40
KLN_TARGET = mp.mpf("1e-10")
INTEGRALITY_TOL = 1e-6
COPRIMALITY_TOL = mp.mpf("1e-18")


class PellError(ArithmeticError):
    """A Pell-side computation failed or received inconsistent data."""


class ExchangeError(PellError):
    """The exchange iteration did not reach an admissible solution.

    ``last`` holds the best candidate seen (an :class:`ExtremalSolution`
    or None) so a caller can inspect how far the iteration got.
    """

    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class PellTriple:
    """Polynomials of a (claimed) identity A**2 - T B**2 = S**2.

    Degrees are pinned by the metadata: A has degree m + g, B degree
    m + g - d and S degree g, with S monic.  ``verify_generalized_pell``
    checks the claim.
    """

    A: Polynomial
    B: Polynomial
    S: Polynomial
    m: int
    g: int
    d: int

    def to_json(self) -> str:
        return json.dumps(self._payload(), indent=2)

    def _payload(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "g": self.g,
            "A": _coeff_strings(self.A),
            "B": _coeff_strings(self.B),
            "S": _coeff_strings(self.S),
        }


@dataclass(frozen=True)
class PellVerification:
    """Residual size plus named structural checks, each pass or fail."""

    residual: object
    checks: Tuple[Tuple[str, bool], ...]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.checks)

    def failures(self) -> Tuple[str, ...]:
        return tuple(name for name, ok in self.checks if not ok)


@dataclass(frozen=True)
class ExtremalSolution:
    """Solution of the restricted extremal problem on a band system.

    ``norm_level`` is the sup norm L of the extremal rational on E;
    ``alternance`` lists the m + 2g + 1 points where the modulus attains
    L, ascending.  ``restricted`` records whether the achieved
    denominator degree g stayed within the requested bound.
    """

    triple: PellTriple
    norm_level: object
    alternance: Tuple
    g: int
    restricted: bool
    system: IntervalSystem

    def to_json(self) -> str:
        payload = self.triple._payload()
        payload["L"] = mp.nstr(as_real(self.norm_level), 25)
        payload["alternance"] = [mp.nstr(as_real(x), 25) for x in self.alternance]
        return json.dumps(payload, indent=2)


@dataclass(frozen=True)
class AdjointReport:
    """Zero-counting data of a solved Pell system.

    ``adjoint_winding`` lists, for j = 1 .. d-1, the number of zeros of A
    in the closed interval from the bottom edge of E up to the lower edge
    of band j; the sequence is strictly decreasing.  ``tau`` counts zeros
    of B per band (entry j belongs to band j+1, counted from the top), so
    the recursion winding[j] = winding[j+1] + tau[j] + 1 holds.
    ``k_type`` marks which gaps hold a zero of S, topmost gap first.
    """

    adjoint_winding: Tuple[int, ...]
    tau: Tuple[int, ...]
    k_type: Tuple[int, ...]
    adjoint_resonance: int


@dataclass(frozen=True)
class WeakPellReport:
    """Verification record of a weak-periodicity Pell identity."""

    n: int
    s: int
    residual: object
    coprimality: Tuple[Tuple[str, object, bool], ...]
    alphas: Tuple
    alpha_types: Tuple[int, ...]

    # The tolerance travels with the report so ``passed`` means the same
    # thing later that it meant when the check ran.
    _tol: object = mp.mpf("1e-9")

    @property
    def residual_ok(self) -> bool:
        return bool(self.residual <= self._tol)

    @property
    def passed(self) -> bool:
        return bool(self.residual_ok and all(ok for _, _, ok in self.coprimality))


def _coeff_strings(p: Polynomial) -> List[str]:
    if p.kind == RATIONAL:
        return [str(c) for c in p.coeffs]
    return [mp.nstr(as_real(c), 25) for c in p.coeffs]


# ---------------------------------------------------------------------------
# verification


def _system_polynomial(E: IntervalSystem, kind: str) -> Polynomial:
    T = E.endpoint_polynomial()
    return T.to_real() if kind == REAL else T


def _expanded_roots(p: Polynomial, lo, hi) -> List:
    """Real roots in [lo, hi], even-multiplicity roots listed twice."""
    out: List = []
    for root, parity in isolate_real_roots(p, lo, hi):
        out.append(root)
        if parity == "even":
            out.append(root)
    return out


def verify_generalized_pell(triple: PellTriple, E: IntervalSystem,
                            tol: float = PELL_RESIDUAL_TOL) -> PellVerification:
    """Check a claimed identity A**2 - T B**2 = S**2 on a band system.

    The residual polynomial is compared coefficientwise against the size
    of its constituents; with rational inputs the comparison is exact.
    Structural requirements are reported separately: all zeros of A and B
    real and lying in the bands, one more A zero than B zero per band
    with strict interleaving, no vanishing at band edges, S monic with at
    most one zero per gap interior.  Degree mismatches against the
    metadata raise ValueError since no meaningful check is possible.
    """
    d = E.d
    if triple.d != d:
        raise ValueError(f"triple dimension {triple.d} does not match system {d}")
    m, g = triple.m, triple.g
    if triple.A.degree != m + g:
        raise ValueError("degree of A does not match m + g")
    if triple.B.degree != m + g - d:
        raise ValueError("degree of B does not match m + g - d")
    if triple.S.degree != g:
        raise ValueError("degree of S does not match g")

    rational = (triple.A.kind == RATIONAL and triple.B.kind == RATIONAL
                and triple.S.kind == RATIONAL and E.endpoint_polynomial().kind == RATIONAL)
    if rational:
        A, B, S = triple.A, triple.B, triple.S
        T = _system_polynomial(E, RATIONAL)
        edges = sorted(E.c)
    else:
        A, B, S = triple.A.to_real(), triple.B.to_real(), triple.S.to_real()
        T = _system_polynomial(E, REAL)
        edges = sorted(as_real(c) for c in E.c)

    A2 = A * A
    TB2 = T * (B * B)
    S2 = S * S
    residual_poly = A2 - TB2 - S2
    scale = max(A2.max_abs_coeff(), TB2.max_abs_coeff(), S2.max_abs_coeff(), 1)
    residual = residual_poly.max_abs_coeff() / scale

    checks: List[Tuple[str, bool]] = [("residual", residual <= tol)]

    span = edges[-1] - edges[0]
    pad = span / 2 + 1
    slack = 0 if rational else span * mp.mpf("1e-12")
    a_roots = _expanded_roots(A, edges[0] - pad, edges[-1] + pad)
    b_roots = _expanded_roots(B, edges[0] - pad, edges[-1] + pad) if B.degree > 0 else []

    bands = [(lo, hi) if rational else (as_real(lo), as_real(hi)) for lo, hi in E.bands]

    def band_of(x) -> Optional[int]:
        for i, (lo, hi) in enumerate(bands):
            if lo - slack <= x <= hi + slack:
                return i
        return None

    a_by_band = [[] for _ in bands]
    b_by_band = [[] for _ in bands]
    a_placed = b_placed = True
    for r in a_roots:
        i = band_of(r)
        if i is None:
            a_placed = False
        else:
            a_by_band[i].append(r)
    for r in b_roots:
        i = band_of(r)
        if i is None:
            b_placed = False
        else:
            b_by_band[i].append(r)
    checks.append(("a_zeros_real_in_bands",
                   a_placed and len(a_roots) == A.degree))
    checks.append(("b_zeros_real_in_bands",
                   b_placed and len(b_roots) == max(B.degree, 0)))

    counts_ok = all(len(az) == len(bz) + 1
                    for az, bz in zip(a_by_band, b_by_band))
    checks.append(("one_extra_a_zero_per_band", counts_ok))

    interleaved = counts_ok
    if counts_ok:
        for az, bz in zip(a_by_band, b_by_band):
            merged = sorted([(r, "a") for r in az] + [(r, "b") for r in bz])
            labels = [lab for _, lab in merged]
            if labels != ["a", "b"] * len(bz) + ["a"]:
                interleaved = False
                break
    checks.append(("zeros_interleave", interleaved))

    floor = 0 if rational else scale * mp.mpf("1e-30")
    edge_ok = all(abs(A.eval(c)) > floor and abs(B.eval(c)) > floor
                  for c in edges)
    checks.append(("edges_nonvanishing", edge_ok))

    checks.append(("s_monic", S.degree >= 0 and abs(S.leading - 1) <= (0 if rational else mp.mpf("1e-20"))))

    if g == 0:
        s_ok = True
    else:
        gaps = [(lo, hi) if rational else (as_real(lo), as_real(hi))
                for lo, hi in E.gaps]
        s_roots = _expanded_roots(S, edges[0] - pad, edges[-1] + pad)
        occupied = set()
        s_ok = len(s_roots) == g
        for r in s_roots:
            idx = next((i for i, (lo, hi) in enumerate(gaps) if lo < r < hi),
                       None)
            if idx is None or idx in occupied:
                s_ok = False
                break
            occupied.add(idx)
    checks.append(("s_zeros_in_distinct_gaps", s_ok))

    return PellVerification(residual=residual, checks=tuple(checks))


# ---------------------------------------------------------------------------
# the restricted extremal problem


def _allocate_counts(weights: Sequence, total: int, minimum: int) -> List[int]:
    """Split ``total`` points over bands proportionally, ``minimum`` each."""
    n = len(weights)
    counts = [minimum] * n
    remaining = total - minimum * n
    if remaining < 0:
        raise PellError("fewer alternance points than bands")
    targets = [as_real(w) * total for w in weights]
    for _ in range(remaining):
        deficits = [targets[i] - counts[i] for i in range(n)]
        counts[deficits.index(max(deficits))] += 1
    return counts


def _initial_nodes(E: IntervalSystem, counts: Sequence[int],
                   perturbation: Optional[int]) -> List[List]:
    """Chebyshev-spaced nodes per band for a given per-band allocation.

    Returns one ascending list per band, bands in ascending order.  A
    perturbation seed jitters the interior placement deterministically,
    giving independent starting configurations for reproducibility tests.
    """
    bands = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.bands)]
    rng = random.Random(perturbation) if perturbation is not None else None
    per_band: List[List] = []
    for (lo, hi), n in zip(bands, counts):
        mid = (lo + hi) / 2
        half = (hi - lo) / 2
        if n == 1:
            local = [mid]
        else:
            local = [mid + half * mp.cos(mp.pi * k / (n - 1))
                     for k in range(n - 1, -1, -1)]
        if rng is not None and n > 1:
            spread = (hi - lo) / (4 * n)
            jittered = []
            for x in local:
                y = x + spread * mp.mpf(rng.uniform(-1.0, 1.0))
                jittered.append(min(max(y, lo), hi))
            local = sorted(jittered)
        per_band.append(local)
    return per_band


def _sign_walk(total: int) -> List[int]:
    """Strictly alternating signs, normalized to +1 at the top point.

    The reference chain is the maximal alternating subsequence of the
    level set: consecutive points of one band alternate, crossing a gap
    with a denominator zero flips, and at every other gap the subsequence
    skips one of the two equal-sign band edges, so it alternates there as
    well.
    """
    return [1 if (total - 1 - k) % 2 == 0 else -1 for k in range(total)]


def _collapse_runs(vals: Sequence[Tuple]) -> List[Tuple]:
    """Keep one representative of maximal modulus per same-sign run."""
    kept: List[Tuple] = []
    for x, v in vals:
        sign = 1 if v >= 0 else -1
        if kept:
            prev_sign = 1 if kept[-1][1] >= 0 else -1
            if sign == prev_sign:
                if abs(v) > abs(kept[-1][1]):
                    kept[-1] = (x, v)
                continue
        kept.append((x, v))
    return kept


def _inner_fit(points: Sequence, signs: Sequence[int], n: int,
               S: Polynomial):
    """Interpolate A(x_i) = sign_i * level * |S(x_i)| with monic A.

    The reference carries n + 1 points for the n free coefficients of the
    monic numerator plus the level, so the system is square.  Returns the
    numerator and the signed level; the caller normalizes its sign.
    """
    rows = []
    rhs = []
    for x, s in zip(points, signs):
        powers = [mp.mpf(1)]
        for _ in range(n):
            powers.append(powers[-1] * x)
        rows.append(powers[:n] + [-s * abs(S.eval(x))])
        rhs.append(-powers[n])
    coeffs = list(solve_linear_system(rows, rhs))
    A = Polynomial(coeffs[:n] + [mp.mpf(1)], REAL)
    return A, coeffs[n]


def _scaled_extrema(A: Polynomial, S: Polynomial, bands_asc: Sequence,
                    current: Sequence) -> List[Tuple]:
    """Candidate extrema of A/|S| over the bands as ascending (x, value).

    Pools the band endpoints, the interior stationary points of A/S and
    the current reference nodes.  The denominator zeros all sit in gaps,
    so the quotient is smooth on every band.
    """
    N = A.derivative() * S - A * S.derivative()
    xs = []
    for lo, hi in bands_asc:
        xs.append(lo)
        xs.append(hi)
        # extremum values are flat to second order, so locating the
        # stationary points to 1e-9 of the band width keeps the level
        # readings far below the exchange tolerance
        for r, _ in isolate_real_roots(N, lo, hi, tol=(hi - lo) * 1e-9):
            if lo < r < hi:
                xs.append(r)
    xs.extend(current)
    return [(x, A.eval(x) / abs(S.eval(x))) for x in sorted(xs)]


def _single_exchange(points: List, signs: List[int], x, sigma: int) -> None:
    """Swap one reference point for x, keeping the signs alternating.

    The classical exchange step: x evicts the neighbor that carries its
    own error sign, or the far end of the reference when x falls outside
    the span with a sign opposite to the near end.  Always applicable,
    which makes the surrounding iteration converge even from references
    far away from the solution.
    """
    i = 0
    while i < len(points) and points[i] < x:
        i += 1
    if i < len(points) and points[i] == x:
        return
    if i == 0:
        if signs[0] == sigma:
            points[0] = x
        else:
            points.insert(0, x)
            signs.insert(0, sigma)
            points.pop()
            signs.pop()
    elif i == len(points):
        if signs[-1] == sigma:
            points[-1] = x
        else:
            points.append(x)
            signs.append(sigma)
            points.pop(0)
            signs.pop(0)
    else:
        j = i - 1 if signs[i - 1] == sigma else i
        points[j] = x
        signs[j] = sigma


def _inner_remez(bands_asc: Sequence, n: int, S: Polynomial, points: List,
                 signs: List[int], target, itmax: int):
    """Minimize max |A/S| over the bands among monic A of degree n.

    For a fixed denominator this is uniform approximation by the weighted
    monomials x^k / |S(x)|, a Haar system on the band union, so the Remez
    exchange converges globally: the pooled extrema are collapsed to an
    alternating chain and adopted whole when they fill the reference,
    with the single-point exchange as the safe fallback.  The reference
    lists are mutated in place so outer iterations restart warm.  Returns
    (A, level) or None when a fit degenerates.
    """
    for _ in range(itmax):
        try:
            A, lam = _inner_fit(points, signs, n, S)
        except ZeroDivisionError:
            return None
        if lam == 0:
            return None
        if lam < 0:
            lam = -lam
            signs[:] = [-s for s in signs]
        cands = _scaled_extrema(A, S, bands_asc, points)
        peak = max(abs(v) for _, v in cands)
        if peak / lam - 1 < target:
            return A, lam
        chain = _collapse_runs(cands)
        while len(chain) > n + 1:
            if abs(chain[0][1]) <= abs(chain[-1][1]):
                chain.pop(0)
            else:
                chain.pop()
        if len(chain) == n + 1:
            points[:] = [x for x, _ in chain]
            signs[:] = [1 if v >= 0 else -1 for _, v in chain]
        else:
            x, v = max(cands, key=lambda t: abs(t[1]))
            _single_exchange(points, signs, x, 1 if v >= 0 else -1)
    return None


def _edge_defects(A: Polynomial, S: Polynomial, lam, gaps_asc: Sequence,
                  idx: Sequence[int]) -> List:
    """Scaled level mismatch across the selected gaps.

    For a gap (lo, hi) the defect is (|A/S|(hi) - |A/S|(lo)) / level.  It
    vanishes exactly when both flanking band edges lie on the level set,
    and it runs to -inf or +inf as the gap's pole approaches lo or hi,
    so every gap brackets a root in its own coordinate.
    """
    out = []
    for j in idx:
        lo, hi = gaps_asc[j]
        vl = abs(A.eval(lo) / S.eval(lo))
        vr = abs(A.eval(hi) / S.eval(hi))
        out.append((vr - vl) / lam)
    return out


def _pole_seeds(E: IntervalSystem, gaps_asc: Sequence) -> List:
    """Starting pole positions, one per gap.

    The zeros of the normalized differential underlying the band measures
    sit strictly inside the gaps and approximate the balanced positions
    well already at moderate degree.
    """
    if not gaps_asc:
        return []
    Q = gap_normalized_differential(E)
    seeds = []
    for lo, hi in gaps_asc:
        roots = [r for r, _ in isolate_real_roots(Q, lo, hi,
                                                  tol=(hi - lo) * 1e-9)
                 if lo < r < hi]
        seeds.append(roots[0] if roots else (lo + hi) / 2)
    return seeds


def _gap_invasion(A: Polynomial, gaps_asc: Sequence,
                  idx: Sequence[int]) -> List[int]:
    """Detect numerator zeros that strayed into the selected gaps.

    For each selected gap the entry is 0 when no real zero of A lies
    inside, else the sign forced onto the defect.  An invaded
    configuration satisfies the plain level balance identically, so the
    defect carries no signal there and the invasion side must steer the
    pole instead: a zero that slipped in across the left edge pulls back
    out when the pole moves left, which is the same steering direction
    as a positive defect, and symmetrically on the right.
    """
    out = []
    for j in idx:
        lo, hi = gaps_asc[j]
        roots = [r for r, _ in isolate_real_roots(A, lo, hi,
                                                  tol=(hi - lo) * 1e-3)
                 if lo < r < hi]
        if not roots:
            out.append(0)
        else:
            out.append(1 if min(roots) < (lo + hi) / 2 else -1)
    return out


def _level_chain(E: IntervalSystem, m: int, g: int, A: Polynomial,
                 S: Polynomial, points: Sequence) -> Optional[List]:
    """Alternance chain of a converged pair.

    The full level set consists of all band edges together with the
    interior reference points; collapsing same-sign runs of A/S leaves
    the maximal alternating chain, which must carry m + 2g + 1 points.
    Returns the chain abscissas, or None when the counts do not match
    the claimed denominator degree.
    """
    d = E.d
    edges = sorted(as_real(c) for c in E.c)
    span = edges[-1] - edges[0]
    eps = span * mp.mpf("1e-12")
    interior = [x for x in points if all(abs(x - c) > eps for c in edges)]
    if len(interior) != m + g - d:
        return None
    vals = [(x, A.eval(x) / S.eval(x)) for x in sorted(edges + interior)]
    chain = _collapse_runs(vals)
    if len(chain) != m + 2 * g + 1:
        return None
    return [x for x, _ in chain]


def _outer_solve(E: IntervalSystem, m: int, g: int, J: Sequence[int], q: int,
                 weights: Sequence, seeds: Sequence,
                 perturbation: Optional[int]) -> Optional[ExtremalSolution]:
    """Solve one (g, gap-subset) hypothesis by nested pole balancing.

    The numerator problem for fixed poles goes to the inner exchange; the
    pole positions are then driven to equalize the level at the flanking
    edges of each selected gap.  The gaps are balanced one nesting level
    per pole: for every trial position of an outer pole the deeper poles
    are re-balanced to their own roots first, so each level faces a
    genuine one-variable problem whose defect changes sign across the
    gap.  Levels converge by bracketed Illinois iteration, with invaded
    configurations steered by the side the stray numerator zero entered.
    The converged pair is assembled and fully verified before acceptance.
    """
    n = m + g
    bands_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.bands)]
    gaps_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.gaps)]
    counts = _allocate_counts(weights, n + 1, 1)
    per_band = _initial_nodes(E, counts, perturbation)
    points = [x for band in per_band for x in band]
    signs = _sign_walk(len(points))
    idx = sorted(J)
    svec = [seeds[j] for j in idx]
    big = mp.mpf("1e6")

    def eval_point():
        S = (Polynomial.from_roots(svec, REAL) if svec
             else Polynomial([mp.mpf(1)], REAL))
        got = _inner_remez(bands_asc, n, S, points, signs,
                           EXCHANGE_TARGET, EXCHANGE_MAX_ITER)
        if got is None:
            return None
        A, lam = got
        psi = _edge_defects(A, S, lam, gaps_asc, idx)
        for k, side in enumerate(_gap_invasion(A, gaps_asc, idx)):
            if side:
                psi[k] = side * big
        return A, S, lam, psi

    def solve_level(k):
        if k == len(idx):
            return eval_point()
        glo, ghi = gaps_asc[idx[k]]
        width = ghi - glo
        lo, hi = glo, ghi
        flo = fhi = None
        side = 0
        s = svec[k]
        best = None
        for _ in range(OUTER_MAX_ITER):
            svec[k] = s
            got = solve_level(k + 1)
            if got is None:
                return None
            f = got[3][k]
            if abs(f) < OUTER_TARGET:
                return got
            if best is None or abs(f) < best[0]:
                best = (abs(f), got)
            if f > 0:
                if side > 0 and flo is not None:
                    flo = flo / 2
                hi, fhi, side = s, f, 1
            else:
                if side < 0 and fhi is not None:
                    fhi = fhi / 2
                lo, flo, side = s, f, -1
            if hi - lo < width * mp.mpf("1e-10"):
                break
            if flo is None or fhi is None or max(abs(flo), abs(fhi)) > big / 2:
                s = (lo + hi) / 2
            else:
                s = (lo * fhi - hi * flo) / (fhi - flo)
                if not lo < s < hi:
                    s = (lo + hi) / 2
        # The defect is kinked at the root, so it cannot always be pushed
        # below target before the bracket bottoms out.  A collapsed bracket
        # around a small defect is a located root; a collapsed bracket with
        # a large defect means the root left the gap and the hypothesis is
        # wrong.
        if best is not None and best[0] < mp.mpf("1e-6"):
            return best[1]
        return None

    got = solve_level(0)
    if got is None:
        return None
    A, S, lam, _ = got
    chain = _level_chain(E, m, g, A, S, points)
    if chain is None:
        return None
    return _assemble_solution(E, m, g, A, S * lam, chain, q)


def _assemble_solution(E: IntervalSystem, m: int, g: int, A: Polynomial,
                       W: Polynomial, chain: Sequence,
                       q: int) -> Optional[ExtremalSolution]:
    """Convert a converged levelled pair into a verified Pell solution."""
    d = E.d
    ell = W.leading
    L = abs(ell)
    if L == 0:
        return None
    S = W.monic()
    A_pell = A * (1 / ell)
    if A_pell.leading < 0:
        A_pell = -A_pell
    edges = sorted(as_real(c) for c in E.c)
    span = edges[-1] - edges[0]
    eps = span * mp.mpf("1e-12")
    interior = [x for x in chain
                if all(abs(x - c) > eps for c in edges)]
    if len(interior) != m + g - d:
        return None
    A0 = abs(1 / ell)
    B = Polynomial.from_roots(interior, REAL, leading=A0)
    triple = PellTriple(A=A_pell, B=B, S=S, m=m, g=g, d=d)
    report = verify_generalized_pell(triple, E)
    if not report.passed:
        return None
    return ExtremalSolution(
        triple=triple,
        norm_level=L,
        alternance=tuple(chain),
        g=g,
        restricted=g <= q,
        system=E,
    )


def solve_restricted_extremal(E: IntervalSystem, m: int,
                              q: Optional[int] = None,
                              perturbation: Optional[int] = None) -> ExtremalSolution:
    """Solve the extremal problem for monic degree-m rationals on E.

    One zero per gap is the generic shape of the solution denominator, so
    the hypotheses run through g = d-1 down to 0, each with every
    assignment of the g zeros to gaps; a converged candidate is accepted
    only if the assembled triple passes the full Pell verification, which
    also certifies optimality through the alternance count.  ``q`` bounds
    the denominator degree the caller wanted; the achieved degree is
    reported on the solution and the ``restricted`` flag records whether
    it met the bound.  A perturbation seed varies the starting nodes
    without affecting the limit.
    """
    d = E.d
    if m < d:
        raise ValueError("polynomial degree m must be at least the band count")
    if q is None:
        q = d - 1
    if not 0 <= q <= d - 1:
        raise ValueError("denominator degree bound must lie in [0, d-1]")
    with working_precision(None):
        gaps_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.gaps)]
        if d == 1:
            weights = [mp.mpf(1)]
        else:
            weights = list(reversed(
                [as_real(w) for w in band_measures(E).band_measures]))
        seeds = _pole_seeds(E, gaps_asc)
        for g in range(d - 1, -1, -1):
            for combo in itertools.combinations(range(d - 1), g):
                for jitter in (perturbation, _retry_seed(perturbation, 1),
                               _retry_seed(perturbation, 2)):
                    sol = _outer_solve(E, m, g, combo, q, weights, seeds,
                                       jitter)
                    if sol is not None:
                        return sol
    raise ExchangeError(
        f"no admissible equioscillation found for m={m} on {d} bands")


def _retry_seed(perturbation: Optional[int], attempt: int) -> int:
    return (0 if perturbation is None else perturbation * 101) + 7919 * attempt


# ---------------------------------------------------------------------------
# level sets and denominator reconstruction


def alternance_points(sol: ExtremalSolution) -> Tuple[Tuple, Tuple]:
    """Full level sets of the extremal rational, split by sign.

    Every band edge is a simple solution of chi = +L or chi = -L and
    every interior alternance point a double one; the two returned
    multisets therefore have m + g elements each.  Their power sums must
    agree up to order m - 1, which is checked before returning.
    """
    E = sol.system
    t = sol.triple
    m, g = t.m, t.g
    A0 = as_real(t.A.leading)
    edges = sorted(as_real(c) for c in E.c)
    span = edges[-1] - edges[0]
    eps = span * mp.mpf("1e-12")

    def chi(x):
        return t.A.eval(x) / (A0 * t.S.eval(x))

    plus: List = []
    minus: List = []
    for c in edges:
        (plus if chi(c) >= 0 else minus).append(c)
    for x in sol.alternance:
        if any(abs(x - c) <= eps for c in edges):
            continue
        xv = as_real(x)
        target = plus if chi(xv) >= 0 else minus
        target.extend([xv, xv])
    if len(plus) != m + g or len(minus) != m + g:
        raise PellError("level sets are unbalanced; solution is inconsistent")
    for k in range(m):
        sp = mp.fsum(x ** k for x in plus)
        sm = mp.fsum(x ** k for x in minus)
        scale = max(mp.mpf(1), abs(sp), abs(sm))
        if abs(sp - sm) > scale * mp.mpf("1e-6"):
            raise PellError(f"power sums of order {k} disagree")
    return tuple(sorted(plus)), tuple(sorted(minus))


def _symmetric_functions(points: Sequence) -> Tuple[Polynomial, List]:
    prod = Polynomial.from_roots(points, REAL)
    n = len(points)
    sigma = [(-1) ** k * prod.coefficient(n - k) for k in range(n + 1)]
    return prod, sigma


def reconstruct_denominator(x_plus: Sequence, x_minus: Sequence,
                            tol: float = 1e-8) -> Tuple[object, Polynomial]:
    """Recover the norm level and the denominator from the level sets.

    The elementary symmetric functions of the two multisets agree up to
    order m - 1 and first differ at order m; the level is half that
    difference (up to sign) and the denominator coefficients come from
    the higher-order differences.  The reconstruction is cross-checked
    against the polynomial identity prod(z - x+) - prod(z - x-) = 2 L H(z)
    and a violation beyond tolerance is rejected.
    """
    xs_p = [as_real(x) for x in x_plus]
    xs_m = [as_real(x) for x in x_minus]
    if len(xs_p) != len(xs_m):
        raise ValueError("level sets must have equal cardinality")
    n = len(xs_p)
    if n == 0:
        raise ValueError("empty level sets")
    prod_p, sig_p = _symmetric_functions(xs_p)
    prod_m, sig_m = _symmetric_functions(xs_m)
    m = None
    for k in range(1, n + 1):
        scale = max(mp.mpf(1), abs(sig_p[k]), abs(sig_m[k]))
        if abs(sig_p[k] - sig_m[k]) > scale * tol:
            m = k
            break
    if m is None:
        raise PellError("level sets coincide; the level is undefined")
    level = (-1) ** m * (sig_p[m] - sig_m[m]) / 2
    g = n - m
    coeffs = []
    for i in range(g, 0, -1):
        h_i = (-1) ** (i + m) * (sig_p[i + m] - sig_m[i + m]) / (2 * level)
        coeffs.append(h_i)
    H = Polynomial(coeffs + [mp.mpf(1)], REAL)
    diff = prod_p - prod_m
    check = diff - (H * (2 * level))
    scale = max(mp.mpf(1), diff.max_abs_coeff())
    if check.max_abs_coeff() > scale * tol * 100:
        raise PellError("symmetric-function differences violate the "
                        "denominator identity beyond tolerance")
    return abs(level), H


# ---------------------------------------------------------------------------
# representation counting integrals


def _midpoint_integral(f, count: int, target) -> Tuple:
    """Vector midpoint rule on (0, 1) with one Richardson extrapolation.

    Doubles the node count until the extrapolated values stabilize.  The
    integrand is never evaluated at the endpoints, which is what the
    substitutions feeding this helper rely on.
    """
    n = 64
    prev = None
    prev_extrap = None
    while n <= (1 << 17):
        h = mp.mpf(1) / n
        sums = [mp.mpf(0)] * count
        x = h / 2
        for _ in range(n):
            vals = f(x)
            for i in range(count):
                sums[i] += vals[i]
            x += h
        cur = [s * h for s in sums]
        if prev is not None:
            extrap = [(4 * c - p) / 3 for c, p in zip(cur, prev)]
            if prev_extrap is not None:
                ok = all(abs(e - pe) <= target * max(1, abs(e))
                         for e, pe in zip(extrap, prev_extrap))
                if ok:
                    return tuple(extrap)
            prev_extrap = extrap
        prev = cur
        n *= 2
    raise PellError("tail integral did not stabilize")


def _rest_factor(E: IntervalSystem, skip: Tuple[int, int]) -> Polynomial:
    roots = [as_real(c) for i, c in enumerate(E.c) if i not in skip]
    return Polynomial.from_roots(roots, REAL)


def kln_numbers(P: Union[Polynomial, int, Fraction], E: IntervalSystem,
                m: int, target=KLN_TARGET) -> Tuple[Tuple, Tuple[int, ...]]:
    """Counting numbers of an (E, m)-representation candidate.

    For P positive on E the d-1 moment identities of Krein, Levin and
    Nudelman tie weighted logarithmic integrals of P over the bands to
    integer combinations of gap and tail integrals of 1/sqrt(|T|).  The
    linear system is solved for those combinations N_1 .. N_{d-1}; P
    admits an (E, m)-representation exactly when all of them are positive
    integers, and then N_k counts the zeros of the representation's A
    polynomial in the k lowest bands.  Returns the solved values and
    per-value integrality flags.
    """
    if not isinstance(P, Polynomial):
        P = Polynomial.constant(P)
    P = P.to_real()
    d = E.d
    if d == 1:
        return (), ()
    for lo, hi in E.bands:
        lo_r, hi_r = as_real(lo), as_real(hi)
        if isolate_real_roots(P, lo_r, hi_r):
            raise PellError("P vanishes on a band")
        if P.eval((lo_r + hi_r) / 2) <= 0:
            raise PellError("P is not positive on the bands")

    c1 = as_real(E.c[0])
    T = E.endpoint_polynomial().to_real()
    ncols = d - 1

    lhs = [mp.mpf(0)] * ncols
    for p in range(1, d + 1):
        skip = (2 * p - 1, 2 * p - 2)
        rest = _rest_factor(E, skip)
        lo = as_real(E.c[skip[0]])
        hi = as_real(E.c[skip[1]])

        def band_integrand(s, rest=rest):
            w = mp.log(P.eval(s)) / mp.sqrt(abs(rest.eval(s)))
            out = []
            acc = w
            for _ in range(ncols):
                out.append(acc)
                acc *= s
            return tuple(out)

        vals = chebyshev_integral(band_integrand, lo, hi)
        sgn = (-1) ** (d - p)
        for j in range(ncols):
            lhs[j] += sgn * vals[j]
    for j in range(ncols):
        lhs[j] /= 2 * mp.pi

    gap_vals = []
    for p in range(1, d):
        skip = (2 * p, 2 * p - 1)
        rest = _rest_factor(E, skip)
        lo = as_real(E.c[skip[0]])
        hi = as_real(E.c[skip[1]])

        def gap_integrand(s, rest=rest):
            w = 1 / mp.sqrt(abs(rest.eval(s)))
            out = []
            acc = w
            for _ in range(ncols):
                out.append(acc)
                acc *= s
            return tuple(out)

        gap_vals.append(chebyshev_integral(gap_integrand, lo, hi))

    def tail_integrand(u):
        z = c1 + u * u / (1 - u)
        jac = u * (2 - u) / ((1 - u) * (1 - u))
        w = jac / mp.sqrt(T.eval(z))
        out = []
        acc = w
        for _ in range(ncols):
            out.append(acc)
            acc *= z
        return tuple(out)

    tail = _midpoint_integral(tail_integrand, ncols, target)

    rows = []
    rhs = []
    for j in range(ncols):
        row = []
        for k in range(1, d):
            row.append((-1) ** k * gap_vals[d - k - 1][j])
        rows.append(row)
        rhs.append(lhs[j] - (-1) ** d * m * tail[j])
    try:
        N = solve_linear_system(rows, rhs)
    except ZeroDivisionError as exc:
        raise PellError("gap integral system is singular") from exc
    flags = tuple(abs(v - mp.nint(v)) < INTEGRALITY_TOL and mp.nint(v) >= 1
                  for v in N)
    return tuple(N), flags


# ---------------------------------------------------------------------------
# adjoint winding data


def adjoint_report(sol: ExtremalSolution, E: Optional[IntervalSystem] = None,
                   k: Optional[int] = None) -> AdjointReport:
    """Zero-counting report of a solved system, for resonance bounds.

    ``k`` is accepted for symmetry with scanning callers and defaults to
    the solution's own degree.
    """
    E = E if E is not None else sol.system
    t = sol.triple
    d = E.d
    if d < 2:
        return AdjointReport((), (), (), d - 1 - t.g)
    edges = sorted(as_real(c) for c in E.c)
    span = edges[-1] - edges[0]
    window = (edges[0] - span / 2 - 1, edges[-1] + span / 2 + 1)
    a_roots = _expanded_roots(t.A.to_real(), *window)
    b_roots = (_expanded_roots(t.B.to_real(), *window)
               if t.B.degree > 0 else [])

    bands = [(as_real(lo), as_real(hi)) for lo, hi in E.bands]

    def per_band(roots):
        counts = [0] * d
        for r in roots:
            for i, (lo, hi) in enumerate(bands):
                if lo <= r <= hi:
                    counts[i] += 1
                    break
        return counts

    a_counts = per_band(a_roots)
    b_counts = per_band(b_roots)
    winding = tuple(sum(a_counts[j:]) for j in range(1, d))
    tau = tuple(b_counts[j] for j in range(1, d))
    k_type = []
    s_roots = _expanded_roots(t.S.to_real(), *window) if t.g > 0 else []
    for lo, hi in E.gaps:
        lo_r, hi_r = as_real(lo), as_real(hi)
        k_type.append(1 if any(lo_r < r < hi_r for r in s_roots) else 0)
    return AdjointReport(
        adjoint_winding=winding,
        tau=tau,
        k_type=tuple(k_type),
        adjoint_resonance=d - 1 - t.g,
    )


def resonance_weakness_inequality(r_hat: int, s: int, d: int) -> bool:
    """Whether the adjoint resonance and skewness satisfy r + s + 2 <= d."""
    return r_hat + s + 2 <= d


# ---------------------------------------------------------------------------
# weak-periodicity Pell identities


def _sylvester_resultant(u: Polynomial, v: Polynomial):
    du, dv = u.degree, v.degree
    if du < 0 or dv < 0:
        return mp.mpf(0)
    if du == 0:
        return abs(as_real(u.coefficient(0))) ** max(dv, 1)
    if dv == 0:
        return abs(as_real(v.coefficient(0))) ** max(du, 1)
    n = du + dv
    u_desc = [as_real(c) for c in reversed(u.coeffs)]
    v_desc = [as_real(c) for c in reversed(v.coeffs)]
    rows = []
    for i in range(dv):
        rows.append([mp.mpf(0)] * i + u_desc
                    + [mp.mpf(0)] * (n - du - 1 - i))
    for i in range(du):
        rows.append([mp.mpf(0)] * i + v_desc
                    + [mp.mpf(0)] * (n - dv - 1 - i))
    return abs(matrix_determinant(rows))


def _normalized_resultant(u: Polynomial, v: Polynomial):
    res = _sylvester_resultant(u, v)
    nu = max(as_real(u.max_abs_coeff()), mp.mpf("1e-300"))
    nv = max(as_real(v.max_abs_coeff()), mp.mpf("1e-300"))
    return res / (nu ** max(v.degree, 1) * nv ** max(u.degree, 1))


def verify_weak_pell(p: Polynomial, q: Polynomial, r: Polynomial,
                     f: ConfocalFamily, c: Union[CausticSet, Sequence],
                     n: int, s: int, tol=mp.mpf("1e-9")) -> WeakPellReport:
    """Check a weak-periodicity identity p**2 - Pol q**2 = x**(2n) r**2.

    ``Pol`` is the degree 2d-1 product of (parameter - x) over the d axes
    and d-1 caustic parameters.  Degrees are pinned to n+s+1, n+s+1-d and
    s+1; the identity residual is measured coefficientwise relative to
    its largest term, and pairwise coprimality is established through
    normalized resultants.  The zeros of r are the caustic parameters of
    the limit quadrics and are reported with their type index (number of
    axes below the value).
    """
    gammas = c.gammas if isinstance(c, CausticSet) else tuple(c)
    d = f.d
    if len(gammas) != d - 1:
        raise ValueError("need d - 1 caustic parameters")
    if p.degree != n + s + 1:
        raise ValueError("degree of p must be n + s + 1")
    if q.degree != n + s + 1 - d:
        raise ValueError("degree of q must be n + s + 1 - d")
    if r.degree != s + 1:
        raise ValueError("degree of r must be s + 1")
    merged = sorted(as_real(b) for b in tuple(f.axes) + tuple(gammas))
    Pol = Polynomial.from_roots(merged, REAL, leading=mp.mpf(-1))

    p_r, q_r, r_r = p.to_real(), q.to_real(), r.to_real()
    p2 = p_r * p_r
    polq2 = Pol * (q_r * q_r)
    xr2 = (r_r * r_r).shift(2 * n)
    residual_poly = p2 - polq2 - xr2
    scale = max(p2.max_abs_coeff(), polq2.max_abs_coeff(),
                xr2.max_abs_coeff(), mp.mpf(1))
    residual = residual_poly.max_abs_coeff() / scale

    pairs = (("p,q", p_r, q_r), ("p,r", p_r, r_r), ("q,r", q_r, r_r))
    coprimality = []
    for label, u, v in pairs:
        value = _normalized_resultant(u, v)
        coprimality.append((label, value, value > COPRIMALITY_TOL))

    span = merged[-1] - merged[0]
    alphas = tuple(root for root, _ in
                   isolate_real_roots(r_r, merged[0] - span - 1,
                                      merged[-1] + span + 1))
    axes = sorted(as_real(a) for a in f.axes)
    types = tuple(sum(1 for a in axes if a < alpha) for alpha in alphas)

    return WeakPellReport(
        n=n,
        s=s,
        residual=residual,
        coprimality=tuple(coprimality),
        alphas=alphas,
        alpha_types=types,
        _tol=as_real(tol),
    )
