"""Prototype: inner weighted Remez + outer pole placement."""
import time
from mpmath import mp
from billiards.confocal import IntervalSystem
from billiards.polynomials import (Polynomial, REAL, as_real,
                                   isolate_real_roots, solve_linear_system)
from billiards.spectral import band_measures, gap_normalized_differential
from billiards.pell import _allocate_counts, _initial_nodes, _collapse_runs


def inner_fit(points, signs, n, S):
    rows, rhs = [], []
    for x, s in zip(points, signs):
        powers = [mp.mpf(1)]
        for _ in range(n):
            powers.append(powers[-1] * x)
        rows.append(powers[:n] + [-s * abs(S.eval(x))])
        rhs.append(-powers[n])
    coeffs = solve_linear_system(rows, rhs)
    A = Polynomial(list(coeffs[:n]) + [mp.mpf(1)], REAL)
    return A, coeffs[n]


def inner_candidates(A, S, bands_asc, current):
    N = A.derivative() * S - A * S.derivative()
    out = []
    for lo, hi in bands_asc:
        xs = [lo, hi]
        for r, _ in isolate_real_roots(N, lo, hi):
            if lo < r < hi:
                xs.append(r)
        for x in current:
            if lo < x < hi:
                xs.append(x)
        out.append([(x, A.eval(x) / abs(S.eval(x))) for x in sorted(xs)])
    return out


def merge_reference(points, signs, chain):
    merged = [[x, s, False] for x, s in zip(points, signs)]
    for x, v in chain:
        s = 1 if v >= 0 else -1
        slots = [i for i, (_, si, done) in enumerate(merged)
                 if si == s and not done]
        if not slots:
            return None
        i = min(slots, key=lambda k: abs(merged[k][0] - x))
        if i > 0 and not merged[i - 1][0] < x:
            continue
        if i + 1 < len(merged) and not x < merged[i + 1][0]:
            continue
        merged[i][0] = x
        merged[i][2] = True
    for (xa, sa, _), (xb, sb, _) in zip(merged, merged[1:]):
        if not xa < xb or sa == sb:
            return None
    return [r[0] for r in merged], [r[1] for r in merged]


def inner_remez(bands_asc, n, S, points, signs, target=mp.mpf("1e-13"),
                itmax=40):
    M = n + 1
    stall = 0
    for it in range(itmax):
        try:
            A, L = inner_fit(points, signs, n, S)
        except ZeroDivisionError:
            return None
        if L <= 0:
            return None
        cands = inner_candidates(A, S, bands_asc, points)
        dev = max(abs(v) for band in cands for _, v in band) / L - 1
        pooled = [item for band in cands for item in band]
        chain = _collapse_runs(pooled)
        while len(chain) > M:
            if abs(chain[0][1]) <= abs(chain[-1][1]):
                chain.pop(0)
            else:
                chain.pop()
        if len(chain) != M:
            fb = merge_reference(points, signs, chain)
            if fb is None:
                return None
            points, signs = fb
            stall += 1
            if stall > 10:
                return None
            continue
        if dev < target:
            return A, L, points, signs
        points = [x for x, _ in chain]
        signs = [1 if v >= 0 else -1 for _, v in chain]
    return None


def solve_io(E, m, verbose=False):
    d = E.d
    g = d - 1
    n = m + g
    mu = list(reversed([as_real(w) for w in band_measures(E).band_measures]))
    bands_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.bands)]
    gaps_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.gaps)]
    Q = gap_normalized_differential(E)
    s = []
    for lo, hi in gaps_asc:
        roots = [r for r, _ in isolate_real_roots(Q, lo, hi) if lo < r < hi]
        s.append(roots[0] if roots else (lo + hi) / 2)
    counts = _allocate_counts(mu, n + 1, 1)
    per_band = _initial_nodes(E, counts, None)
    points = [x for band in per_band for x in band]
    signs = [1 if (len(points) - 1 - k) % 2 == 0 else -1
             for k in range(len(points))]

    def psi_of(svec):
        nonlocal points, signs
        S = Polynomial.from_roots(svec, REAL, leading=1)
        got = inner_remez(bands_asc, n, S, list(points), list(signs))
        if got is None:
            return None, None, None
        A, L, points, signs = got
        psi = []
        for j in range(d - 1):
            el = bands_asc[j][1]
            er = bands_asc[j + 1][0]
            psi.append((abs(A.eval(er) / S.eval(er))
                        - abs(A.eval(el) / S.eval(el))) / L)
        return psi, A, L

    psi, A, L = psi_of(s)
    if psi is None:
        return None
    for outer in range(30):
        err = max(abs(p) for p in psi) if psi else mp.mpf(0)
        if verbose:
            print(f"  outer{outer}: s={[mp.nstr(x, 8) for x in s]} "
                  f"psi={[mp.nstr(p, 3) for p in psi]} L={mp.nstr(L, 8)}")
        if err < mp.mpf("1e-11"):
            return A, L, list(s)
        cols = []
        for j in range(d - 1):
            lo, hi = gaps_asc[j]
            h = (hi - lo) * mp.mpf("1e-5")
            sj = list(s)
            sj[j] = s[j] + h
            pj, _, _ = psi_of(sj)
            if pj is None:
                return None
            cols.append([(pj[i] - psi[i]) / h for i in range(d - 1)])
        rows = [[cols[j][i] for j in range(d - 1)] for i in range(d - 1)]
        try:
            step = solve_linear_system(rows, [-p for p in psi])
        except ZeroDivisionError:
            return None
        news = []
        for j in range(d - 1):
            lo, hi = gaps_asc[j]
            width = hi - lo
            dsj = step[j]
            cap = width * mp.mpf("0.3")
            if abs(dsj) > cap:
                dsj = cap if dsj > 0 else -cap
            news.append(min(max(s[j] + dsj, lo + width * mp.mpf("1e-4")),
                            hi - width * mp.mpf("1e-4")))
        s = news
        psi, A, L = psi_of(s)
        if psi is None:
            return None
    return None


if __name__ == "__main__":
    for b, ms in (((1, 2, 3), range(2, 9)), ((1, 2, 3, 4, 5), range(3, 9))):
        E = IntervalSystem(b)
        for m in ms:
            t0 = time.time()
            got = solve_io(E, m, verbose=(m in (3, 5) and E.d == 3))
            if got is None:
                print(f"d={E.d} m={m}: FAILED ({time.time()-t0:.2f}s)")
            else:
                A, L, s = got
                print(f"d={E.d} m={m}: L={mp.nstr(L, 11)} "
                      f"s={[mp.nstr(x, 8) for x in s]} ({time.time()-t0:.2f}s)")
