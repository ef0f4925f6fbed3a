import time
from billiards.confocal import IntervalSystem
from billiards.pell import solve_restricted_extremal, ExchangeError

known = {
    (2, 3): "0.02581431878", (2, 8): "2.2976523549e-5",
    (2, 5): "0.001626350391", (2, 7): "0.0001037362806",
    (3, 4): None, (3, 8): "2.133485798e-5",
}

t0 = time.time()
for d, b, ms in [(2, (1, 2, 3), range(2, 9)),
                 (3, (1, 2, 3, 4, 5), range(3, 9)),
                 (1, (1,), range(1, 6))]:
    E = IntervalSystem(b)
    for m in ms:
        t1 = time.time()
        try:
            sol = solve_restricted_extremal(E, m)
            rep = sol.triple
            print(f"d={d} m={m}: g={sol.g} L={float(sol.norm_level):.10g} "
                  f"alt={len(sol.alternance)} exp={m+2*sol.g+1} "
                  f"[{time.time()-t1:.2f}s]")
        except ExchangeError as e:
            print(f"d={d} m={m}: FAILED {e} [{time.time()-t1:.2f}s]")
print(f"total {time.time()-t0:.1f}s")
