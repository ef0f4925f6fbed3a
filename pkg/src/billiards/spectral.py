"""Frequency analysis on the reciprocal band system.

A trajectory with fixed caustics oscillates quasi-periodically: each
elliptic coordinate sweeps its interval at a rate that depends only on
the caustics, not on the starting ray.  Those rates are band masses of
an equilibrium-type measure on the union E of the reciprocal bands,
computed here by quadrature of hyperelliptic integrals.

The measure's density is |eta| / sqrt(|T|) up to the 1/pi factor, where
T is the monic polynomial vanishing at every band edge and eta is the
unique monic polynomial of degree d-1 whose weighted integral over every
gap between consecutive bands vanishes.  Both T and the gap factors have
inverse-square-root singularities at interval endpoints, which the
cosine substitution absorbs exactly; node doubling then converges
geometrically for the analytic remainder.

Frequencies are cumulative masses counted from the bottom band up: the
j-th frequency is the total mass of the j lowest bands.  Scanning
integer multiples of the frequency vector for near-integer components
detects resonances and the weak period.  The same quadrature machinery
evaluates the closed-form length of a periodic trajectory from its
winding numbers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

from mpmath import mp

from .confocal import CausticSet, ConfocalFamily, IntervalSystem
from .polynomials import (
    RATIONAL,
    Polynomial,
    as_real,
    isolate_real_roots,
    solve_linear_system,
)

__all__ = [
    "SpectralError",
    "QuadratureError",
    "FrequencyData",
    "ResonanceRow",
    "ResonanceReport",
    "chebyshev_integral",
    "gap_normalized_differential",
    "band_measures",
    "resonance_scan",
    "periodic_length",
    "DEFAULT_RESONANCE_TOL",
    "NEAR_RESONANCE_WINDOW",
]

QUADRATURE_TARGET = mp.mpf("1e-11")
DEFAULT_RESONANCE_TOL = mp.mpf("1e-8")
NEAR_RESONANCE_WINDOW = mp.mpf("1e-4")
MASS_SUM_TOL = mp.mpf("1e-10")

_MAX_NODES = 1 << 17


class SpectralError(ArithmeticError):
    """Frequency data violates a structural requirement."""


class QuadratureError(SpectralError):
    """Node doubling failed to stabilize an integral estimate."""


# ---------------------------------------------------------------------------
# quadrature


def chebyshev_integral(g: Callable, lo, hi,
                       target=QUADRATURE_TARGET) -> Tuple:
    """Integrate g(s) / sqrt((s - lo)(hi - s)) over (lo, hi).

    ``g`` returns a scalar or a tuple; the result is always a tuple of
    the same arity.  Substituting s = mid + half*cos(theta) turns the
    integral into a plain average of g over Chebyshev angles, and the
    midpoint rule in theta is then spectrally accurate for analytic g.
    Node counts double until successive estimates agree componentwise
    to ``target`` (relative to max(1, |value|)).
    """
    lo = as_real(lo)
    hi = as_real(hi)
    if not lo < hi:
        raise ValueError("empty integration interval")
    mid = (lo + hi) / 2
    half = (hi - lo) / 2
    n = 16
    prev: Optional[List] = None
    while n <= _MAX_NODES:
        step = mp.pi / n
        sums: Optional[List] = None
        for i in range(n):
            s = mid + half * mp.cos(step * (i + mp.mpf("0.5")))
            value = g(s)
            if not isinstance(value, tuple):
                value = (value,)
            if sums is None:
                sums = list(value)
            else:
                for j, v in enumerate(value):
                    sums[j] += v
        estimates = [step * v for v in sums]
        if prev is not None and all(
            abs(e - p) <= target * max(mp.mpf(1), abs(e))
            for e, p in zip(estimates, prev)
        ):
            return tuple(estimates)
        prev = estimates
        n *= 2
    raise QuadratureError(
        f"integral did not stabilize to {mp.nstr(target, 3)} "
        f"within {_MAX_NODES} nodes")


def _rest_polynomial(E: IntervalSystem, skip: Tuple[int, int]) -> Polynomial:
    """Product of (s - c_k) over all endpoints except the two skipped.

    On the interval between the skipped endpoints the full endpoint
    polynomial factors as (s - lo)(s - hi) times this remainder, so the
    integrand's smooth part is h(s) / sqrt(|remainder(s)|).
    """
    roots = [as_real(c) for k, c in enumerate(E.c) if k not in skip]
    return Polynomial.from_roots(roots)


def _band_indices(p: int) -> Tuple[int, int]:
    """0-based endpoint indices of band p (1-based, topmost first)."""
    return (2 * p - 1, 2 * p - 2)


def _gap_indices(p: int) -> Tuple[int, int]:
    """0-based endpoint indices of gap p (1-based, just below band p)."""
    return (2 * p, 2 * p - 1)


# ---------------------------------------------------------------------------
# the gap-normalized differential and band masses


@dataclass(frozen=True)
class FrequencyData:
    """Equilibrium masses of the bands and the derived frequencies.

    ``eta`` is the monic degree d-1 numerator of the measure's density;
    ``band_measures`` lists the band masses topmost band first, summing
    to 1; ``frequencies`` are the d-1 strictly increasing cumulative
    masses counted from the bottom band.
    """

    system: IntervalSystem
    eta: Polynomial
    band_measures: Tuple
    frequencies: Tuple

    @property
    def d(self) -> int:
        return self.system.d


def gap_normalized_differential(E: IntervalSystem) -> Polynomial:
    """The monic polynomial of degree d-1 with vanishing gap integrals.

    Each of the d-1 gaps contributes one linear condition on the
    non-leading coefficients: the integral of eta(s)/sqrt(|T(s)|) over
    the gap is zero, T being the endpoint polynomial.  The resulting
    square system is solved exactly once the moment integrals
    int s^k / sqrt(|T|) ds are known per gap.  The solution has exactly
    one simple root inside each gap, which is what makes the band
    masses positive.
    """
    d = E.d
    if d < 2:
        raise ValueError("need at least two bands")
    rows: List[List] = []
    rhs: List = []
    for p in range(1, d):
        skip = _gap_indices(p)
        rest = _rest_polynomial(E, skip)
        lo = as_real(E.c[skip[0]])
        hi = as_real(E.c[skip[1]])

        def powers(s, rest=rest):
            w = 1 / mp.sqrt(abs(rest.eval(s)))
            out = []
            acc = w
            for _ in range(d):
                out.append(acc)
                acc *= s
            return tuple(out)

        moments = chebyshev_integral(powers, lo, hi)
        rows.append(list(moments[: d - 1]))
        rhs.append(-moments[d - 1])
    try:
        coeffs = solve_linear_system(rows, rhs)
    except ZeroDivisionError as exc:
        raise SpectralError("singular gap moment matrix") from exc
    return Polynomial(tuple(coeffs) + (mp.mpf(1),))


def band_measures(E: IntervalSystem) -> FrequencyData:
    """Band masses of the equilibrium measure and the frequency vector.

    Masses are (1/pi) times the integral of |eta| / sqrt(|T|) over each
    band.  Their sum must come out as 1 on its own (it is a residue
    identity, not a normalization), and the check failing signals a
    broken eta rather than a reason to rescale.
    """
    eta = gap_normalized_differential(E)
    d = E.d
    masses: List = []
    for p in range(1, d + 1):
        skip = _band_indices(p)
        rest = _rest_polynomial(E, skip)
        lo = as_real(E.c[skip[0]])
        hi = as_real(E.c[skip[1]])

        def density(s, rest=rest):
            return abs(eta.eval(s)) / mp.sqrt(abs(rest.eval(s)))

        (mass,) = chebyshev_integral(density, lo, hi)
        masses.append(mass / mp.pi)
    total = mp.fsum(masses)
    if abs(total - 1) > MASS_SUM_TOL:
        raise SpectralError(
            f"band masses sum to {mp.nstr(total, 15)}, expected 1")
    frequencies = tuple(mp.fsum(masses[d - j:]) for j in range(1, d))
    for a, b in zip(frequencies, frequencies[1:]):
        if not a < b:
            raise SpectralError("frequencies are not strictly increasing")
    return FrequencyData(
        system=E,
        eta=eta,
        band_measures=tuple(masses),
        frequencies=frequencies,
    )


# ---------------------------------------------------------------------------
# resonance detection


@dataclass(frozen=True)
class ResonanceRow:
    """One scanned multiple: winding numbers, residuals, resonance count."""

    k: int
    winding: Tuple[int, ...]
    residuals: Tuple
    resonance: int


@dataclass(frozen=True)
class ResonanceReport:
    """Outcome of scanning k*f for near-integer components.

    ``rows`` covers every scanned k.  ``resonance`` is the maximum
    number of integer components seen; ``weak_period`` the smallest k
    attaining it, undefined (None) when nothing resonates within
    tolerance.  ``candidates`` lists (k, component, distance) triples
    that missed the tolerance but fell inside the near-miss window.
    """

    d: int
    kmax: int
    tol: object
    rows: Tuple[ResonanceRow, ...]
    resonance: int
    weak_period: Optional[int]
    weak_winding: Optional[Tuple[int, ...]]
    candidates: Tuple[Tuple[int, int, object], ...]

    def to_csv(self) -> str:
        """The (k, winding, residuals, resonance) table as CSV text."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        n = self.d - 1
        writer.writerow(
            ["k"]
            + [f"m{j}" for j in range(1, n + 1)]
            + [f"w{j}" for j in range(1, n + 1)]
            + ["r"]
        )
        for row in self.rows:
            writer.writerow(
                [row.k]
                + list(row.winding)
                + [mp.nstr(w, 12) for w in row.residuals]
                + [row.resonance]
            )
        return buf.getvalue()


def _as_frequencies(fd: Union[FrequencyData, Sequence]) -> Tuple:
    if isinstance(fd, FrequencyData):
        return tuple(as_real(f) for f in fd.frequencies)
    return tuple(as_real(f) for f in fd)


def resonance_scan(fd: Union[FrequencyData, Sequence], kmax: int,
                   tol=DEFAULT_RESONANCE_TOL) -> ResonanceReport:
    """Scan k = d+1 .. kmax for integer components of k * frequencies.

    A component counts as integer when its fractional part lies within
    ``tol`` of 0 or 1; the winding number then rounds to the nearest
    integer instead of truncating.  The scan never fails: a frequency
    vector with no resonances up to kmax reports resonance 0 and leaves
    the weak period undefined.
    """
    freqs = _as_frequencies(fd)
    d = len(freqs) + 1
    if kmax <= d:
        raise ValueError(f"kmax must exceed the dimension {d}")
    tol = as_real(tol)
    rows: List[ResonanceRow] = []
    candidates: List[Tuple[int, int, object]] = []
    best_r = 0
    weak_period: Optional[int] = None
    weak_winding: Optional[Tuple[int, ...]] = None
    for k in range(d + 1, kmax + 1):
        winding: List[int] = []
        residuals: List = []
        hits = 0
        for j, f in enumerate(freqs, start=1):
            y = k * f
            nearest = mp.nint(y)
            dist = abs(y - nearest)
            frac = y - mp.floor(y)
            residuals.append(frac)
            if dist <= tol:
                winding.append(int(nearest))
                hits += 1
            else:
                winding.append(int(mp.floor(y)))
                if dist <= NEAR_RESONANCE_WINDOW:
                    candidates.append((k, j, dist))
        row = ResonanceRow(k=k, winding=tuple(winding),
                           residuals=tuple(residuals), resonance=hits)
        rows.append(row)
        if hits > best_r:
            best_r = hits
            weak_period = k
            weak_winding = row.winding
    return ResonanceReport(
        d=d,
        kmax=kmax,
        tol=tol,
        rows=tuple(rows),
        resonance=best_r,
        weak_period=weak_period,
        weak_winding=weak_winding,
        candidates=tuple(candidates),
    )


# ---------------------------------------------------------------------------
# length of a periodic trajectory


def _interval_polynomial(f: ConfocalFamily, c: CausticSet) -> Tuple[Polynomial, List]:
    """The product of (a_i - s) and (gamma_k - s), plus sorted roots."""
    axes = list(f.axes)
    gammas = list(c.gammas)
    rational = f.kind == RATIONAL and all(
        isinstance(g, (int, Fraction)) for g in gammas)
    if not rational:
        axes = [as_real(a) for a in axes]
        gammas = [as_real(g) for g in gammas]
    values = sorted(axes + gammas)
    for u, v in zip(values, values[1:]):
        if not u < v:
            raise ValueError(
                "degenerate caustic configuration has no length formula")
    poly = Polynomial.from_roots(values)
    if len(values) % 2:
        poly = -poly
    return poly, values


def periodic_length(f: ConfocalFamily, c: CausticSet,
                    winding: Sequence[int]):
    """Total length of a periodic trajectory from its winding numbers.

    The length splits into d interval integrals of s^(d-1)/sqrt(P(s)),
    P the product of (axis - s) and (caustic - s) factors, each weighted
    by how many times the corresponding elliptic coordinate sweeps its
    interval per period and by an alternating sign.  The first interval
    starts at 0, which is not a root of P, so it gets a one-sided
    square-root substitution instead of the two-sided Chebyshev rule.
    """
    d = f.d
    if len(winding) != d:
        raise ValueError(f"need {d} winding numbers, got {len(winding)}")
    if len(c.gammas) != d - 1:
        raise ValueError(f"need {d - 1} caustics, got {len(c.gammas)}")
    P, roots = _interval_polynomial(f, c)
    b = [type(roots[0])(0)] + roots
    total = mp.mpf(0)
    for j in range(1, d + 1):
        lo = as_real(b[2 * j - 2])
        hi = as_real(b[2 * j - 1])
        mid = (lo + hi) / 2
        if P.eval(mid) <= 0:
            raise SpectralError(
                "interval polynomial is not positive between consecutive "
                "endpoints; axes and caustics are inconsistent")
        if j == 1:
            # P(lo) = P(0) > 0: only the upper endpoint is singular.
            rest = P // Polynomial.from_roots([b[1]], kind=P.kind)
            rest = -rest

            def integrand(w, rest=rest, hi=hi, d=d):
                s = hi - w * w
                return 2 * s ** (d - 1) / mp.sqrt(abs(rest.eval(s)))

            value = mp.quad(integrand, [0, mp.sqrt(hi - lo)])
        else:
            keep = [r for i, r in enumerate(roots)
                    if i not in (2 * j - 3, 2 * j - 2)]
            rest = Polynomial.from_roots([as_real(r) for r in keep])

            def density(s, rest=rest, d=d):
                return s ** (d - 1) / mp.sqrt(abs(rest.eval(s)))

            (value,) = chebyshev_integral(density, lo, hi)
        sign = 1 if (j + d) % 2 == 0 else -1
        total += sign * winding[j - 1] * value
    return total


def eta_gap_roots(fd: FrequencyData) -> Tuple:
    """The root of eta inside each gap, top gap first.

    Mostly a diagnostic: the density construction guarantees one simple
    root per gap, and callers wanting the sign pattern of eta on the
    bands can read it off these.
    """
    roots: List = []
    for lo, hi in fd.system.gaps:
        found = isolate_real_roots(fd.eta, as_real(lo), as_real(hi))
        if len(found) != 1 or found[0][1] != "odd":
            raise SpectralError("expected exactly one simple root per gap")
        roots.append(found[0][0])
    return tuple(roots)
