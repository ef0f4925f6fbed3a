import time
from mpmath import mp
from billiards.confocal import IntervalSystem
from billiards.polynomials import Polynomial, REAL, as_real, working_precision
from billiards import pell
from billiards.pell import (
    _allocate_counts, _initial_nodes, _sign_walk, _inner_remez,
    _edge_defects, _pole_seeds, _level_chain, _assemble_solution,
    EXCHANGE_TARGET, EXCHANGE_MAX_ITER, OUTER_TARGET)
from billiards.spectral import band_measures

def trace(b, m, g=None, itmax=20):
    E = IntervalSystem(b)
    d = E.d
    if g is None:
        g = d - 1
    n = m + g
    bands_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.bands)]
    gaps_asc = [(as_real(lo), as_real(hi)) for lo, hi in reversed(E.gaps)]
    weights = list(reversed([as_real(w) for w in band_measures(E).band_measures])) if d > 1 else [mp.mpf(1)]
    counts = _allocate_counts(weights, n + 1, 1)
    print(f"d={d} m={m} g={g} n={n} counts={counts} weights={[float(w) for w in weights]}")
    per_band = _initial_nodes(E, counts, None)
    points = [x for band in per_band for x in band]
    signs = _sign_walk(len(points))
    idx = list(range(d - 1))[:g]
    seeds = _pole_seeds(E, gaps_asc)
    svec = [seeds[j] for j in idx]
    print("gaps:", [(float(lo), float(hi)) for lo, hi in gaps_asc])
    print("seeds:", [float(s) for s in svec])
    for it in range(itmax):
        S = Polynomial.from_roots(svec, REAL) if svec else Polynomial([mp.mpf(1)], REAL)
        got = _inner_remez(bands_asc, n, S, points, signs, EXCHANGE_TARGET, EXCHANGE_MAX_ITER)
        if got is None:
            print(f"  it{it}: INNER FAILED at s={[float(x) for x in svec]}")
            return
        A, lam = got
        psi = _edge_defects(A, S, lam, gaps_asc, idx)
        print(f"  it{it}: s={[f'{float(x):.8f}' for x in svec]} lam={float(lam):.6e} psi={[f'{float(p):.3e}' for p in psi]}")
        err = max((abs(p) for p in psi), default=mp.mpf(0))
        if err < OUTER_TARGET:
            chain = _level_chain(E, m, g, A, S, points)
            print(f"  CONVERGED chain={'None' if chain is None else len(chain)}")
            if chain is not None:
                sol = _assemble_solution(E, m, g, A, S * lam, chain, d - 1)
                print(f"  assembled: {sol is not None}")
                if sol is not None:
                    print(f"  L={float(sol.norm_level):.10g}")
            return
        # newton
        from billiards.polynomials import solve_linear_system
        cols = []
        for k, j in enumerate(idx):
            lo, hi = gaps_asc[j]
            h = (hi - lo) * mp.mpf("1e-5")
            if svec[k] + h >= hi:
                h = -h
            shifted = list(svec)
            shifted[k] += h
            S2 = Polynomial.from_roots(shifted, REAL)
            got2 = _inner_remez(bands_asc, n, S2, list(points), list(signs), EXCHANGE_TARGET, EXCHANGE_MAX_ITER)
            if got2 is None:
                print(f"    jac eval failed k={k}")
                return
            psi2 = _edge_defects(got2[0], S2, got2[1], gaps_asc, idx)
            cols.append([(psi2[r] - psi[r]) / h for r in range(len(idx))])
        rows = [[cols[c][r] for c in range(len(idx))] for r in range(len(idx))]
        delta = list(solve_linear_system(rows, [-p for p in psi]))
        for k, j in enumerate(idx):
            lo, hi = gaps_asc[j]
            cand = svec[k] + delta[k]
            if not lo < cand < hi:
                cand = (lo + hi) / 2
                print(f"    clipped k={k}")
            svec[k] = cand

import sys
with working_precision(None):
    trace((1, 2, 3), 7)
