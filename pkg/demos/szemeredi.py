"""Random differences, blockers and progression-free zero sets.

Run with ``python3 demos/szemeredi.py``.
"""
from trk.szemeredi import (
    SimParams,
    ap_free_set,
    chevalley_warning_check,
    construct_blocker,
    independence_experiment,
    randomized_szemeredi_demo,
    sample_points,
    verify_no_ap,
    veronese_independent,
)

p, k, n = 5, 3, 3
S = sample_points(n, p, 4, seed=2)
print("S =", S.tolist(), " independent:", veronese_independent(S, k - 1, p))

# a quadratic form equal to 1 on every s in S; its zero set has no
# 3-term progression with difference in S
T = construct_blocker(S, k, p)
A = ap_free_set(T, k, n)
print("|A| =", A.size, "of", p**n)
print("AP check:", verify_no_ap(A, S, k, n, p)[:2])
print("Chevalley-Warning:", chevalley_warning_check(A, k, n, p))

# independence probability falls off a cliff at s = m.  The floor is only
# promised for s well below m (by a C (log_p m)^2 n^(d-1) margin); near m
# the empirical rate drops under it
for s in (5, 8, 10, 11):
    rep = independence_experiment(SimParams(p, k, 4, s=s, trials=200))
    a = rep.aggregate
    print(f"m={a['m']} s={s}: empirical {a['probability']:.3f}  floor {a['floor']:.3f}")

rep = randomized_szemeredi_demo(SimParams(p, k, n, s=5, trials=20, seed=3))
print({key: rep.aggregate[key] for key in ("independent", "ap_free_verified", "mean_density")})
