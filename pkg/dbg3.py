import sys
from mpmath import mp
from billiards.confocal import IntervalSystem
from billiards.polynomials import Polynomial, REAL, as_real, working_precision, solve_linear_system
from billiards.pell import (_allocate_counts, _initial_nodes, _sign_walk,
    _inner_remez, _edge_defects, _pole_seeds, _gap_invasion,
    EXCHANGE_TARGET, EXCHANGE_MAX_ITER, OUTER_TARGET, OUTER_MAX_ITER)
from billiards.spectral import band_measures

def trace(b, m, itmax=40):
    E = IntervalSystem(b)
    d = E.d
    g = d - 1
    n = m + g
    bands_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.bands)]
    gaps_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.gaps)]
    weights = list(reversed([as_real(w) for w in band_measures(E).band_measures]))
    counts = _allocate_counts(weights, n + 1, 1)
    print(f"m={m} n={n} counts={counts}")
    per_band = _initial_nodes(E, counts, None)
    points = [x for band in per_band for x in band]
    signs = _sign_walk(len(points))
    idx = list(range(d - 1))
    svec = list(_pole_seeds(E, gaps_asc))
    brackets = [list(gaps_asc[j]) for j in idx]

    def run_inner(sv, pts, sgs):
        S = Polynomial.from_roots(sv, REAL)
        got = _inner_remez(bands_asc, n, S, pts, sgs, EXCHANGE_TARGET, EXCHANGE_MAX_ITER)
        return None if got is None else (got[0], S, got[1])

    for it in range(itmax):
        got = run_inner(svec, points, signs)
        if got is None:
            print(f"it{it}: INNER FAIL s={[float(x) for x in svec]}")
            return
        A, S, lam = got
        psi = _edge_defects(A, S, lam, gaps_asc, idx)
        inv = _gap_invasion(A, gaps_asc, idx)
        raw = [float(p) for p in psi]
        for k, side in enumerate(inv):
            if side:
                psi[k] = side * mp.mpf("1e6")
        print(f"it{it}: s=({float(svec[0]):.10f},{float(svec[1]):.10f}) lam={float(lam):.6e} "
              f"psi=({raw[0]:+.3e},{raw[1]:+.3e}) inv={inv} "
              f"br0=({float(brackets[0][0]):.6f},{float(brackets[0][1]):.6f}) "
              f"br1=({float(brackets[1][0]):.6f},{float(brackets[1][1]):.6f})")
        err = max(abs(p) for p in psi)
        if err < OUTER_TARGET:
            print("CONVERGED")
            return
        clean = not any(inv)
        for k, j in enumerate(idx):
            if psi[k] > 0:
                brackets[k][1] = min(brackets[k][1], svec[k])
            else:
                brackets[k][0] = max(brackets[k][0], svec[k])
            if not brackets[k][0] < brackets[k][1]:
                brackets[k] = list(gaps_asc[j])
        delta = None
        if clean:
            cols = []
            for k, j in enumerate(idx):
                lo, hi = gaps_asc[j]
                h = (hi - lo) * mp.mpf("1e-5")
                if psi[k] < 0:
                    h = -h
                if not lo < svec[k] + h < hi:
                    h = -h
                shifted = list(svec)
                shifted[k] += h
                got2 = run_inner(shifted, list(points), list(signs))
                if got2 is None:
                    print("  jac inner fail")
                    cols = None
                    break
                psi2 = _edge_defects(got2[0], got2[1], got2[2], gaps_asc, idx)
                inv2 = _gap_invasion(got2[0], gaps_asc, idx)
                if any(inv2):
                    print(f"  jac sample invaded k={k}")
                    cols = None
                    break
                cols.append([(psi2[r] - psi[r]) / h for r in range(len(idx))])
            if cols is not None:
                rows = [[cols[c][r] for c in range(len(idx))] for r in range(len(idx))]
                try:
                    delta = list(solve_linear_system(rows, [-p for p in psi]))
                except ZeroDivisionError:
                    delta = None
        for k in range(len(idx)):
            lo, hi = brackets[k]
            cand = None if delta is None else svec[k] + delta[k]
            if cand is None or not lo < cand < hi:
                cand = (lo + hi) / 2
            svec[k] = cand

with working_precision(None):
    trace((1, 2, 3, 4, 5), int(sys.argv[1]) if len(sys.argv) > 1 else 8)
