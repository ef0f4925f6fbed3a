"""Univariate polynomials over exact rationals or extended-precision reals.

This module is the computational substrate for everything else in the
package: polynomial arithmetic, Taylor prefixes of algebraic functions
(square roots of polynomials and their quotients), Hankel rank tests,
real root isolation, and the small dense linear-algebra kernels shared
by the geometry and approximation layers.

Two scalar kinds are supported and never mixed silently:

* ``rational`` -- ``fractions.Fraction``; all arithmetic exact.
* ``real`` -- ``mpmath.mpf`` at a configurable working precision
  (128 bits by default), because quantities such as the square root of
  a polynomial's constant term are generically irrational.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import mpmath
from mpmath import mp

__all__ = [
    "RATIONAL",
    "REAL",
    "DEFAULT_PRECISION_BITS",
    "ScalarKindError",
    "SeriesError",
    "RootIsolationError",
    "Polynomial",
    "SeriesPrefix",
    "working_precision",
    "as_real",
    "exact_fraction",
    "sqrt_series",
    "quotient_series",
    "hankel_rank",
    "hankel_matrix",
    "isolate_real_roots",
    "count_roots_between",
    "solve_linear_system",
    "matrix_determinant",
    "smallest_singular_vector",
    "singular_values",
]

RATIONAL = "rational"
REAL = "real"

#: Default mantissa width, in bits, for real-mode computations.
DEFAULT_PRECISION_BITS = 128

Scalar = Union[int, Fraction, float, mpmath.mpf]


class ScalarKindError(TypeError):
    """Raised when rational and real scalars are mixed in arithmetic."""


class SeriesError(ValueError):
    """Raised for invalid series expansions (bad branch point, short prefix)."""


class RootIsolationError(RuntimeError):
    """Raised when root isolation cannot certify its output."""


def working_precision(bits: Optional[int] = None):
    """Context manager setting the mpmath working precision in bits.

    ``bits=None`` selects :data:`DEFAULT_PRECISION_BITS` unless the ambient
    precision is already higher, in which case the ambient one is kept (a
    caller who deliberately raised precision should not be clipped).
    """
    if bits is None:
        bits = max(DEFAULT_PRECISION_BITS, mp.prec)
    return mp.workprec(bits)


def _is_rational_scalar(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def as_real(v) -> mpmath.mpf:
    """Convert an int, float, Fraction or mpf to mpf at current precision."""
    if isinstance(v, mpmath.mpf):
        return v
    if isinstance(v, Fraction):
        return mp.mpf(v.numerator) / v.denominator
    return mp.mpf(v)


def exact_fraction(v) -> Fraction:
    """Lossless Fraction from an mpf (every finite mpf is dyadic)."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, float)):
        return Fraction(v)
    return Fraction(*mpmath.libmp.to_rational(v._mpf_))


def _coerce(values: Iterable[Scalar], kind: str) -> tuple:
    if kind == RATIONAL:
        return tuple(Fraction(v) for v in values)
    return tuple(as_real(v) for v in values)


def _detect_kind(values: Sequence[Scalar]) -> str:
    return RATIONAL if all(_is_rational_scalar(v) for v in values) else REAL


class Polynomial:
    """Immutable univariate polynomial, coefficients in ascending degree.

    The zero polynomial is encoded with ``degree == -1`` (empty coefficient
    tuple).  The scalar kind is fixed per instance; arithmetic between
    mismatched kinds raises :class:`ScalarKindError` rather than silently
    promoting.
    """

    __slots__ = ("coeffs", "kind")

    def __init__(self, coefficients: Iterable[Scalar], kind: Optional[str] = None):
        values = list(coefficients)
        if kind is None:
            kind = _detect_kind(values)
        if kind not in (RATIONAL, REAL):
            raise ValueError(f"unknown scalar kind {kind!r}")
        coeffs = list(_coerce(values, kind))
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, *_):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------

    @classmethod
    def zero(cls, kind: str = RATIONAL) -> "Polynomial":
        return cls((), kind)

    @classmethod
    def constant(cls, c: Scalar, kind: Optional[str] = None) -> "Polynomial":
        return cls((c,), kind)

    @classmethod
    def variable(cls, kind: str = RATIONAL) -> "Polynomial":
        """The monomial x."""
        return cls((0, 1), kind)

    @classmethod
    def from_roots(cls, roots: Iterable[Scalar], kind: Optional[str] = None,
                   leading: Scalar = 1) -> "Polynomial":
        """Monic-from-roots product ``leading * prod (x - r)``."""
        roots = list(roots)
        if kind is None:
            kind = _detect_kind(list(roots) + [leading])
        p = cls((leading,), kind)
        x = cls((0, 1), kind)
        for r in roots:
            p = p * (x - cls((r,), kind))
        return p

    # -- basic structure ----------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Scalar:
        if self.is_zero:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def coefficient(self, k: int) -> Scalar:
        """k-th coefficient, zero beyond the degree."""
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return Fraction(0) if self.kind == RATIONAL else mp.mpf(0)

    def _zero_scalar(self):
        return Fraction(0) if self.kind == RATIONAL else mp.mpf(0)

    def __repr__(self) -> str:
        if self.is_zero:
            return f"Polynomial(0, kind={self.kind})"
        terms = ", ".join(str(c) for c in self.coeffs)
        return f"Polynomial([{terms}], kind={self.kind})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.kind == other.kind and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.kind, self.coeffs))

    def _check_kind(self, other: "Polynomial") -> None:
        if self.kind != other.kind:
            raise ScalarKindError(
                f"cannot combine {self.kind} and {other.kind} polynomials; "
                "convert explicitly with to_real()/to_rational()")

    # -- conversions ---------------------------------------------------

    def to_real(self) -> "Polynomial":
        return self if self.kind == REAL else Polynomial(self.coeffs, REAL)

    def to_rational(self) -> "Polynomial":
        """Exact conversion; mpf values are dyadic rationals so this is lossless."""
        if self.kind == RATIONAL:
            return self
        return Polynomial([exact_fraction(c) for c in self.coeffs], RATIONAL)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction, float, mpmath.mpf)):
            other = Polynomial((other,), self._scalar_kind_for(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_kind(other)
        n = max(len(self.coeffs), len(other.coeffs))
        z = self._zero_scalar()
        out = [(self.coeffs[i] if i < len(self.coeffs) else z)
               + (other.coeffs[i] if i < len(other.coeffs) else z)
               for i in range(n)]
        return Polynomial(out, self.kind)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs], self.kind)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial)
                       else Polynomial((other,), self._scalar_kind_for(other)).__neg__())

    def __rsub__(self, other):
        return (-self) + other

    def _scalar_kind_for(self, scalar) -> str:
        if _is_rational_scalar(scalar):
            return self.kind  # ints embed in either kind
        if self.kind == RATIONAL:
            raise ScalarKindError("real scalar mixed with rational polynomial")
        return REAL

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, float, mpmath.mpf)):
            kind = self._scalar_kind_for(other)
            c = Fraction(other) if kind == RATIONAL else as_real(other)
            return Polynomial([ci * c for ci in self.coeffs], kind)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_kind(other)
        if self.is_zero or other.is_zero:
            return Polynomial.zero(self.kind)
        z = self._zero_scalar()
        out = [z] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out, self.kind)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers unsupported")
        result = Polynomial((1,), self.kind)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def eval(self, x: Scalar) -> Scalar:
        """Horner evaluation.  Exact in rational mode with rational x.

        A rational polynomial evaluated at a real point embeds its (exact)
        coefficients into mpf; a real polynomial refuses Fraction points only
        if they cannot be represented, which never happens, so the result
        kind is real whenever either side is real.
        """
        real = self.kind == REAL or not _is_rational_scalar(x)
        if self.is_zero:
            return mp.mpf(0) if real else Fraction(0)
        if real:
            xv = as_real(x)
            acc = as_real(self.coeffs[-1])
            for c in reversed(self.coeffs[:-1]):
                acc = acc * xv + as_real(c)
            return acc
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    __call__ = eval

    def derivative(self) -> "Polynomial":
        if self.degree <= 0:
            return Polynomial.zero(self.kind)
        return Polynomial([i * c for i, c in enumerate(self.coeffs)][1:], self.kind)

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise ValueError("cannot normalize the zero polynomial")
        lead = self.leading
        return Polynomial([c / lead for c in self.coeffs], self.kind)

    def compose(self, inner: "Polynomial") -> "Polynomial":
        """self(inner(x)) by Horner over polynomials."""
        self._check_kind(inner)
        acc = Polynomial.zero(self.kind)
        for c in reversed(self.coeffs):
            acc = acc * inner + Polynomial((c,), self.kind)
        return acc

    def shift(self, k: int) -> "Polynomial":
        """Multiply by x**k."""
        if self.is_zero or k == 0:
            return self
        z = self._zero_scalar()
        return Polynomial([z] * k + list(self.coeffs), self.kind)

    def divmod(self, divisor: "Polynomial"):
        """Euclidean division; exact for rationals, floating for reals."""
        self._check_kind(divisor)
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dlead = divisor.leading
        dd = divisor.degree
        quo = [self._zero_scalar()] * max(0, len(rem) - dd)
        for i in range(len(rem) - dd - 1, -1, -1):
            factor = rem[i + dd] / dlead
            quo[i] = factor
            if factor != 0:
                for j, c in enumerate(divisor.coeffs):
                    rem[i + j] -= factor * c
        return Polynomial(quo, self.kind), Polynomial(rem[:dd] if dd > 0 else [], self.kind)

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def max_abs_coeff(self):
        if self.is_zero:
            return self._zero_scalar()
        return max(abs(c) for c in self.coeffs)


# ---------------------------------------------------------------------------
# series prefixes


class SeriesPrefix:
    """A finite Taylor prefix A_0..A_{K-1} of a power series at x = 0."""

    __slots__ = ("coefficients", "source", "kind")

    def __init__(self, coefficients: Sequence[Scalar], source: str = "",
                 kind: Optional[str] = None):
        values = list(coefficients)
        if kind is None:
            kind = _detect_kind(values)
        object.__setattr__(self, "coefficients", _coerce(values, kind))
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, *_):
        raise AttributeError("SeriesPrefix is immutable")

    def __len__(self) -> int:
        return len(self.coefficients)

    def __getitem__(self, k):
        return self.coefficients[k]

    def __iter__(self):
        return iter(self.coefficients)

    def __repr__(self) -> str:
        head = ", ".join(str(c) for c in self.coefficients[:6])
        tail = ", ..." if len(self.coefficients) > 6 else ""
        return f"SeriesPrefix([{head}{tail}], source={self.source!r})"


def _rational_sqrt(f: Fraction) -> Optional[Fraction]:
    """Exact square root of a nonnegative Fraction, or None if irrational."""
    if f < 0:
        return None
    num, den = f.numerator, f.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


def sqrt_series(P: Polynomial, K: int, prec_bits: Optional[int] = None) -> SeriesPrefix:
    """Taylor prefix of the branch of sqrt(P(x)) positive at x = 0.

    Uses the quadratic recurrence
    ``A_k = (P_k - sum_{j=1}^{k-1} A_j A_{k-j}) / (2 A_0)`` with
    ``A_0 = +sqrt(P(0))``.  Stays in exact rationals when P is rational and
    sqrt(P(0)) is rational, otherwise works in extended-precision reals.
    """
    if K < 1:
        raise SeriesError("K must be >= 1")
    if P.is_zero:
        raise SeriesError("sqrt series requires P(0) > 0, got the zero polynomial")
    p0 = P.coefficient(0)
    if p0 <= 0:
        raise SeriesError(f"sqrt series requires P(0) > 0, got P(0) = {p0}")
    if P.kind == RATIONAL:
        a0 = _rational_sqrt(p0)
        if a0 is not None:
            out = [a0]
            for k in range(1, K):
                acc = P.coefficient(k)
                for j in range(1, k):
                    acc -= out[j] * out[k - j]
                out.append(acc / (2 * a0))
            return SeriesPrefix(out, source=f"sqrt of degree-{P.degree} polynomial",
                                kind=RATIONAL)
    with working_precision(prec_bits):
        a0 = mp.sqrt(as_real(p0))
        out = [a0]
        for k in range(1, K):
            acc = as_real(P.coefficient(k))
            for j in range(1, k):
                acc -= out[j] * out[k - j]
            out.append(acc / (2 * a0))
    return SeriesPrefix(out, source=f"sqrt of degree-{P.degree} polynomial", kind=REAL)


def quotient_series(P: Polynomial, D: Polynomial, K: int,
                    prec_bits: Optional[int] = None) -> SeriesPrefix:
    """Taylor prefix of sqrt(P(x)) / D(x), same branch convention at 0."""
    if D.is_zero or D.coefficient(0) == 0:
        raise SeriesError("quotient series requires D(0) != 0")
    s = sqrt_series(P, K, prec_bits=prec_bits)
    if s.kind == RATIONAL and D.kind == RATIONAL:
        d0 = D.coefficient(0)
        out = []
        for k in range(K):
            acc = s[k]
            for j in range(k):
                acc -= out[j] * D.coefficient(k - j)
            out.append(acc / d0)
        return SeriesPrefix(out, source=f"sqrt quotient by degree-{D.degree}",
                            kind=RATIONAL)
    with working_precision(prec_bits):
        d0 = as_real(D.coefficient(0))
        out = []
        for k in range(K):
            acc = as_real(s[k])
            for j in range(k):
                acc -= out[j] * as_real(D.coefficient(k - j))
            out.append(acc / d0)
    return SeriesPrefix(out, source=f"sqrt quotient by degree-{D.degree}", kind=REAL)


# ---------------------------------------------------------------------------
# dense linear algebra (small matrices, dual scalar kind)


def _matrix_kind(rows) -> str:
    for row in rows:
        for v in row:
            if not _is_rational_scalar(v):
                return REAL
    return RATIONAL


def matrix_determinant(rows) -> Scalar:
    """Determinant; Bareiss fraction-free for rationals, LU for reals."""
    n = len(rows)
    if n == 0:
        return Fraction(1)
    if any(len(r) != n for r in rows):
        raise ValueError("determinant requires a square matrix")
    kind = _matrix_kind(rows)
    if kind == RATIONAL:
        m = [[Fraction(v) for v in row] for row in rows]
        sign = 1
        prev = Fraction(1)
        for k in range(n - 1):
            if m[k][k] == 0:
                for i in range(k + 1, n):
                    if m[i][k] != 0:
                        m[k], m[i] = m[i], m[k]
                        sign = -sign
                        break
                else:
                    return Fraction(0)
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev
                m[i][k] = Fraction(0)
            prev = m[k][k]
        return sign * m[n - 1][n - 1]
    with working_precision(None):
        m = [[as_real(v) for v in row] for row in rows]
        det = mp.mpf(1)
        for k in range(n):
            piv, pi = abs(m[k][k]), k
            for i in range(k + 1, n):
                if abs(m[i][k]) > piv:
                    piv, pi = abs(m[i][k]), i
            if piv == 0:
                return mp.mpf(0)
            if pi != k:
                m[k], m[pi] = m[pi], m[k]
                det = -det
            det *= m[k][k]
            inv = 1 / m[k][k]
            for i in range(k + 1, n):
                f = m[i][k] * inv
                if f != 0:
                    for j in range(k, n):
                        m[i][j] -= f * m[k][j]
        return det


def solve_linear_system(rows, rhs):
    """Solve A x = b with partial pivoting; exact over rationals.

    Raises ``ZeroDivisionError`` on a singular (to working precision) matrix.
    """
    n = len(rows)
    kind = _matrix_kind(rows)
    if kind == RATIONAL and not all(_is_rational_scalar(v) for v in rhs):
        kind = REAL
    if kind == RATIONAL:
        m = [[Fraction(v) for v in row] + [Fraction(rhs[i])] for i, row in enumerate(rows)]
    else:
        m = [[as_real(v) for v in row] + [as_real(rhs[i])] for i, row in enumerate(rows)]
    for k in range(n):
        piv, pi = abs(m[k][k]), k
        for i in range(k + 1, n):
            if abs(m[i][k]) > piv:
                piv, pi = abs(m[i][k]), i
        if piv == 0:
            raise ZeroDivisionError("singular linear system")
        if pi != k:
            m[k], m[pi] = m[pi], m[k]
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            if f != 0:
                for j in range(k, n + 1):
                    m[i][j] -= f * m[k][j]
    x = [None] * n
    for i in range(n - 1, -1, -1):
        acc = m[i][n]
        for j in range(i + 1, n):
            acc -= m[i][j] * x[j]
        x[i] = acc / m[i][i]
    return x


def _padded_real_matrix(rows):
    """mpmath matrix, zero-padded with rows so that rows >= cols.

    Zero rows change neither the nonzero singular values nor the right
    singular vectors (A^T A is untouched), and mpmath's SVD wants a tall
    or square input.
    """
    m = [[as_real(v) for v in row] for row in rows]
    ncols = len(m[0])
    while len(m) < ncols:
        m.append([mp.mpf(0)] * ncols)
    return mp.matrix(m)


def singular_values(rows, prec_bits: Optional[int] = None):
    """Singular values of a real matrix, descending, as mpf values."""
    with working_precision(prec_bits):
        A = _padded_real_matrix(rows)
        sv = mpmath.svd_r(A, compute_uv=False)
        values = sorted((abs(sv[i]) for i in range(sv.rows)), reverse=True)
    return values


def smallest_singular_vector(rows, prec_bits: Optional[int] = None):
    """Right singular vector for the smallest singular value of A.

    Returns ``(sigma_min, vector)`` with the vector normalized to unit
    Euclidean length.  Used to extract near-kernels of nearly singular
    condition matrices.
    """
    with working_precision(prec_bits):
        A = _padded_real_matrix(rows)
        U, S, V = mpmath.svd_r(A)
        idx = min(range(S.rows), key=lambda i: abs(S[i]))
        vec = [V[idx, j] for j in range(V.cols)]
        norm = mp.sqrt(mp.fsum(v * v for v in vec))
        vec = [v / norm for v in vec]
    return abs(S[idx]), vec


def hankel_matrix(s: SeriesPrefix, start: int, rows: int, cols: int):
    """The Hankel block M[i][j] = s[start + i + j]."""
    need = start + rows + cols - 2
    if need >= len(s):
        raise SeriesError(
            f"series prefix of length {len(s)} too short for Hankel block "
            f"(needs index {need})")
    return [[s[start + i + j] for j in range(cols)] for i in range(rows)]


def _exact_rank(rows) -> int:
    m = [[Fraction(v) for v in row] for row in rows]
    nr, nc = len(m), len(m[0]) if m else 0
    rank, r = 0, 0
    for c in range(nc):
        pivot = None
        for i in range(r, nr):
            if m[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][c]
        for i in range(r + 1, nr):
            if m[i][c] != 0:
                f = m[i][c] * inv
                for j in range(c, nc):
                    m[i][j] -= f * m[r][j]
        rank += 1
        r += 1
        if r == nr:
            break
    return rank


def hankel_rank(s: SeriesPrefix, start: int, rows: int, cols: int,
                tol: float = 1e-10, prec_bits: Optional[int] = None) -> int:
    """Rank of the Hankel block of a series prefix.

    Rational series get an exact fraction-free elimination rank; real series
    get the number of singular values above ``tol`` times the largest one.
    The tolerance is exposed because the rank-drop loci are exactly where the
    interesting geometry happens.
    """
    if rows < 1 or cols < 1:
        return 0
    block = hankel_matrix(s, start, rows, cols)
    if s.kind == RATIONAL:
        return _exact_rank(block)
    sv = singular_values(block, prec_bits=prec_bits)
    if not sv or sv[0] == 0:
        return 0
    top = sv[0]
    return sum(1 for v in sv if v > tol * top)


# ---------------------------------------------------------------------------
# real root isolation


def _sign(v) -> int:
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Monic GCD over rationals (Euclid)."""
    while not b.is_zero:
        a, b = b, a % b
    if a.is_zero:
        return a
    return a.monic()


def _squarefree_decomposition(p: Polynomial):
    """Yun's algorithm: (factor, multiplicity) pairs, factors monic squarefree."""
    p = p.monic()
    g = _poly_gcd(p, p.derivative())
    if g.degree <= 0:
        return [(p, 1)]
    out = []
    w = p // g
    y = p.derivative() // g
    mult = 1
    while w.degree > 0:
        z = y - w.derivative()
        f = _poly_gcd(w, z)
        if f.degree > 0:
            out.append((f, mult))
            w = w // f
            y = z // f
        else:
            y = z
        mult += 1
        if mult > p.degree + 2:
            raise RootIsolationError("squarefree decomposition did not terminate")
    return out


def _sturm_chain(p: Polynomial):
    chain = [p, p.derivative()]
    while chain[-1].degree > 0:
        rem = chain[-2] % chain[-1]
        if rem.is_zero:
            break
        chain.append(-rem)
    return [q for q in chain if not q.is_zero]


def _sturm_variations(chain, x: Fraction) -> int:
    signs = [_sign(q.eval(x)) for q in chain]
    signs = [s for s in signs if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _isolate_squarefree_rational(p: Polynomial, lo: Fraction, hi: Fraction,
                                 tol: Fraction):
    """Roots of a squarefree rational polynomial in [lo, hi], exact logic."""
    # divide out exact endpoint roots so Sturm counts over (lo, hi] are clean
    roots = []
    for endpoint in (lo, hi):
        if not p.is_zero and p.eval(endpoint) == 0:
            roots.append(endpoint)
            p = p // Polynomial.from_roots([endpoint])
    if p.degree < 1:
        return sorted(set(roots))
    chain = _sturm_chain(p)

    def count(a: Fraction, b: Fraction) -> int:
        return _sturm_variations(chain, a) - _sturm_variations(chain, b)

    work = [(lo, hi)]
    isolated = []
    budget = 4000
    while work:
        budget -= 1
        if budget < 0:
            raise RootIsolationError("Sturm bisection budget exhausted")
        a, b = work.pop()
        n = count(a, b)
        if n == 0:
            continue
        if n == 1:
            isolated.append((a, b))
            continue
        mid = (a + b) / 2
        while p.eval(mid) == 0:
            mid = mid + (b - a) / 64
        work.append((a, mid))
        work.append((mid, b))
    for a, b in isolated:
        # the counted root lies in (a, b]; bisect on sign, exact arithmetic
        if p.eval(b) == 0:
            roots.append(b)
            continue
        fa = p.eval(a)
        while b - a > tol:
            mid = (a + b) / 2
            fm = p.eval(mid)
            if fm == 0:
                a = b = mid
                break
            if (fa > 0) != (fm > 0):
                b = mid
            else:
                a, fa = mid, fm
        roots.append((a + b) / 2)
    return sorted(set(roots))


def _isolate_rational(p: Polynomial, lo, hi, tol) -> list:
    lo, hi, tol = Fraction(lo), Fraction(hi), Fraction(tol)
    found = []
    for factor, mult in _squarefree_decomposition(p):
        if factor.degree < 1:
            continue
        parity = "even" if mult % 2 == 0 else "odd"
        for r in _isolate_squarefree_rational(factor, lo, hi, tol):
            found.append((r, parity))
    found.sort(key=lambda t: t[0])
    return found


def _isolate_real(p: Polynomial, lo, hi, tol, zero_tol=None) -> list:
    """Derivative-chain isolation for mpf polynomials.

    Between consecutive critical points the polynomial is monotone, so every
    sign change brackets exactly one (odd) root; critical points where |p| is
    below the evaluation noise floor are even-multiplicity roots (or odd
    roots of multiplicity >= 3, whose parity the sign probe resolves).
    """
    lo, hi = as_real(lo), as_real(hi)
    if p.degree < 1:
        return []
    scale = as_real(p.max_abs_coeff())
    span = max(mp.mpf(1), abs(lo), abs(hi))
    if zero_tol is None:
        zero_tol = scale * span ** p.degree * mp.mpf(2) ** (-(mp.prec - 14))

    if p.degree == 1:
        r = -as_real(p.coeffs[0]) / as_real(p.coeffs[1])
        return [(r, "odd")] if lo <= r <= hi else []

    crit = [r for r, _ in _isolate_real(p.derivative(), lo, hi, tol)]
    points = [lo] + crit + [hi]
    vals = [p.eval(x) for x in points]
    results = []

    def bisect(a, b, fa):
        it = 0
        while b - a > tol and it < 600:
            midp = (a + b) / 2
            fm = p.eval(midp)
            if fm == 0:
                return midp
            if (fa > 0) != (fm > 0):
                b = midp
            else:
                a, fa = midp, fm
            it += 1
        return (a + b) / 2

    h = max(tol * 16, (hi - lo) * mp.mpf(2) ** (-mp.prec // 2))

    def probe_sign(x0, direction, cap):
        """Sign of p just off x0, stepping outward until clear of the
        evaluation noise floor (adapts to the root's multiplicity)."""
        step = h
        while step < cap:
            v = p.eval(x0 + direction * step)
            if abs(v) > 4 * zero_tol:
                return 1 if v > 0 else -1
            step *= 2
        v = p.eval(x0 + direction * cap)
        return _sign(v)

    span = hi - lo
    for i, (x, v) in enumerate(zip(points, vals)):
        if abs(v) <= zero_tol:
            lcap = (x - points[i - 1]) / 2 if i > 0 else span
            rcap = (points[i + 1] - x) / 2 if i + 1 < len(points) else span
            left = probe_sign(x, -1, max(lcap, h * 2))
            right = probe_sign(x, +1, max(rcap, h * 2))
            parity = "odd" if left * right < 0 else "even"
            results.append((x, parity))
    for i in range(len(points) - 1):
        a, b, fa, fb = points[i], points[i + 1], vals[i], vals[i + 1]
        if abs(fa) <= zero_tol or abs(fb) <= zero_tol:
            continue
        if (fa > 0) != (fb > 0):
            results.append((bisect(a, b, fa), "odd"))
    # dedupe near-coincident reports (a critical point flagged both ways)
    results.sort(key=lambda t: t[0])
    deduped = []
    for r, parity in results:
        if deduped and abs(r - deduped[-1][0]) <= max(tol * 4, h):
            continue
        deduped.append((r, parity))
    return deduped


def isolate_real_roots(p: Polynomial, lo, hi, tol=None):
    """All real roots of p in [lo, hi], ascending, with multiplicity parity.

    Returns a list of ``(root, parity)`` pairs, ``parity in {"odd", "even"}``.
    Rational polynomials use exact Sturm isolation plus Yun squarefree
    decomposition (so the parity flags are exact); real polynomials use a
    derivative-chain bisection whose even-root detection is tolerance based.
    """
    if p.is_zero:
        raise ValueError("cannot isolate roots of the zero polynomial")
    if not lo < hi:
        raise ValueError("need lo < hi")
    if p.kind == RATIONAL:
        if tol is None:
            tol = Fraction(1, 10 ** 24)
        return _isolate_rational(p, lo, hi, tol)
    with working_precision(None):
        if tol is None:
            tol = (as_real(hi) - as_real(lo)) * mp.mpf(2) ** (-(mp.prec - 24)) + \
                mp.mpf(2) ** (-(mp.prec - 24))
        return _isolate_real(p, lo, hi, as_real(tol))


def count_roots_between(p: Polynomial, lo, hi) -> int:
    """Number of roots in (lo, hi], counted without multiplicity."""
    if p.kind == RATIONAL:
        chain = _sturm_chain(p)
        return _sturm_variations(chain, Fraction(lo)) - _sturm_variations(chain, Fraction(hi))
    return len(isolate_real_roots(p, lo, hi))
