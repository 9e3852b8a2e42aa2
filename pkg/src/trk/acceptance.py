"""Exit criteria, runnable from pytest or ``trk selftest``.

Each check returns a :class:`Criterion`; a check passes only if every
instance holds at the stated tolerance and it finishes inside its time
budget.  All seeds are fixed here.
"""

from __future__ import annotations

import contextlib
import io
import itertools
import json
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .algebra import SubspaceBasis, Tensor, full_space_basis, restrict, restrict_rect
from .extract import (
    all_matchings,
    cover_assign,
    extract_subspace,
    matching_cells,
    verify_certificate,
)
from .field import all_vectors, rank_mod_p
from .rank import bias, c_constant, coset_bias, matrix_rank, prank_oracle
from .szemeredi import (
    SimParams,
    ap_free_set,
    chevalley_warning_check,
    construct_blocker,
    independence_experiment,
    independence_floor,
    sample_points,
    tail_bound_check,
    trial_rng,
    veronese_independent,
    verify_no_ap,
)

COSET_TOL = 1e-9


@dataclass
class Criterion:
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.detail} ({self.seconds:.2f}s / {self.budget:.0f}s)"

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3), "budget": self.budget}


CHECKS = {}


def criterion(name, budget):
    def wrap(fn):
        def run() -> Criterion:
            start = time.perf_counter()
            ok, detail = fn()
            elapsed = time.perf_counter() - start
            return Criterion(name, bool(ok) and elapsed < budget, detail, elapsed, budget)

        run.__name__ = fn.__name__
        CHECKS[name] = run
        return run

    return wrap


def _random_tensor(rng, p, shape):
    return Tensor.from_array(rng.integers(0, p, size=shape), p)


@criterion("d2_equivalence", 5)
def check_d2_equivalence():
    count, bad = 0, []

    def check(M):
        nonlocal count
        count += 1
        b = bias(M)
        K = M.shape[1]
        rk = matrix_rank(M)
        if b.exponent != K or b.numerator != M.p ** (K - rk):
            bad.append((M.entries.tolist(), str(b), rk))

    for n in (2, 3):
        for code in range(2 ** (n * n)):
            check(Tensor.from_array(all_vectors(2, n * n)[code].reshape(n, n), 2))
    rng = np.random.default_rng(20240101)
    for i in range(200):
        p = (3, 5)[i % 2]
        n = int(rng.integers(1, 6))
        check(_random_tensor(rng, p, (n, n)))
    return not bad, f"{count} matrices, {len(bad)} mismatches"


@criterion("restriction_monotonicity", 30)
def check_restriction_monotonicity():
    rng = np.random.default_rng(4)
    bad = 0
    for i in range(100):
        p = (2, 3)[i % 2]
        n = int(rng.integers(2, 6 if p == 2 else 5))
        T = _random_tensor(rng, p, (n, n, n))
        bT = bias(T)
        k = int(rng.integers(1, n + 1))
        S = sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist())
        if not bT <= bias(restrict(T, S)):
            bad += 1
        sets = [sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist()) for _ in range(3)]
        if not bT <= bias(restrict_rect(T, *sets)):
            bad += 1
    return bad == 0, f"100 instances x (principal, rectangular), {bad} violations"


@criterion("lambda_realizability", 60)
def check_lambda_realizability():
    rng = np.random.default_rng(7)
    bad = 0
    for i in range(100):
        p = (2, 3)[i % 2]
        size = int(rng.integers(1, 6))
        rho, _ = c_constant(p, 3)
        R = _random_tensor(rng, p, (size,) * 3)
        a = int(rng.integers(1, p))
        Q = Tensor.unit(p, size, (size,) * 3, a)
        prev = bias(restrict(R, range(1, size)))
        best = min(bias(R + lam * Q).fraction for lam in range(p))
        if not best <= rho.fraction * prev.fraction:
            bad += 1
    return bad == 0, f"100 pairs, {bad} without a witnessing lambda"


def _complement_pair(rng, p, n, k):
    while True:
        B = rng.integers(0, p, size=(n, n))
        if rank_mod_p(B, p) == n:
            return B[:k], B[k:]


@criterion("coset_bias_bound", 30)
def check_coset_bias():
    rng = np.random.default_rng(6)
    bad, worst = 0, 0.0
    for i in range(100):
        p = (2, 3, 5)[i % 3]
        d = int(rng.integers(2, 4))
        n = int(rng.integers(2, 5 if p < 5 else 4))
        k = int(rng.integers(1, n))
        if p == 5 and d == 3:
            k = 1
        T = _random_tensor(rng, p, (n,) * d)
        U, V = _complement_pair(rng, p, n, k)
        shifts = [(rng.integers(0, p, size=V.shape[0]) @ V) % p for _ in range(d)]
        lhs = coset_bias(T, U, V, shifts)
        rhs = coset_bias(T, U, V, [np.zeros(n, dtype=np.int64)] * d)
        if p == 2:
            ok = lhs.exact <= rhs.exact
        else:
            ok = lhs.magnitude <= rhs.magnitude + COSET_TOL
            worst = max(worst, lhs.magnitude - rhs.magnitude)
        bad += not ok
    return bad == 0, f"100 instances, {bad} violations, max excess (p>2) {worst:.2e}"


@criterion("prank_ge_arank", 60)
def check_prank_ge_arank():
    bad = 0
    for code in range(256):
        T = Tensor.from_array(all_vectors(2, 8)[code].reshape(2, 2, 2), 2)
        r = prank_oracle(T, 8)
        b = bias(T)
        # bias >= 2^-r  <=>  M * 2^r >= 2^K
        if r is None or b.numerator * 2**r < 2**b.exponent:
            bad += 1
    return bad == 0, f"256 tensors, {bad} violations"


def _random_subspace(rng, p, n, d, dim):
    N = n**d
    while True:
        A = rng.integers(0, p, size=(dim, N))
        if rank_mod_p(A, p) == dim:
            break
    return SubspaceBasis(tuple(Tensor.from_array(row.reshape((n,) * d), p) for row in A))


def _extract_and_verify(V, t, r, d):
    cert = extract_subspace(V, t, r)
    ok, rep = verify_certificate(cert)
    s = cert.s
    dim_ok = s == t // (d * r) and s >= t / (d * r) - 1
    return ok and dim_ok, cert


@criterion("extraction_end_to_end", 300)
def check_extraction():
    fixed = [(2, 3, 6, 6, 1), (2, 2, 6, 6, 2), (3, 3, 4, 4, 1)]
    fails = []
    for p, d, n, t, r in fixed:
        ok, _ = _extract_and_verify(full_space_basis(p, n, d), t, r, d)
        if not ok:
            fails.append((p, d, n, t, r))
    rng = np.random.default_rng(2)
    for i in range(25):
        p = (2, 3)[i % 2]
        d = (2, 3)[(i // 2) % 2]
        n = int(rng.integers(d, (7 if p == 2 else 6)))
        t = int(rng.integers(d, n + 1))
        r = int(rng.integers(1, t // d + 1))
        dim = min(n**d, t * n ** (d - 1) + int(rng.integers(0, n ** (d - 1) + 1)))
        V = _random_subspace(rng, p, n, d, dim)
        ok, _ = _extract_and_verify(V, t, r, d)
        if not ok:
            fails.append((p, d, n, t, r, dim))
    return not fails, f"3 fixed + 25 random instances, failures: {fails or 'none'}"


@criterion("cover_correctness", 5)
def check_cover():
    problems = []
    for d in range(1, 5):
        for n in range(1, 5):
            ids = all_matchings(n, d)
            if len(ids) != d * n ** (d - 1):
                problems.append(("id count", n, d))
            distinct = {m.canonical() for m in ids}
            if len(distinct) > d * n ** (d - 1) or len(distinct) != n**d - (n - 1) ** d:
                problems.append(("distinct count", n, d))
            covered = set()
            for m in distinct:
                cells = matching_cells(m, n, d)
                for j in range(d):
                    if len({c[j] for c in cells}) != len(cells):
                        problems.append(("not a matching", m, n, d))
                covered.update(cells)
            for coord in itertools.product(range(1, n + 1), repeat=d):
                if coord not in matching_cells(cover_assign(coord, n, d), n, d):
                    problems.append(("cover", coord))
            if len(covered) != n**d:
                problems.append(("union", n, d))
    return not problems, f"n, d in 1..4, problems: {problems[:3] or 'none'}"


def _blocker_trials(p, k, ns, trials, seed):
    independent, bad = 0, []
    d = k - 1
    for i in range(trials):
        rng = trial_rng(seed, i)
        n = ns[i % len(ns)]
        m = SimParams(p, k, n).m
        s = int(rng.integers(1, m + 1))
        S = sample_points(n, p, s, rng)
        if not veronese_independent(S, d, p):
            continue
        independent += 1
        A = ap_free_set(construct_blocker(S, k, p), k, n)
        ok, cex, mode = verify_no_ap(A, S, k, n, p, mode="exhaustive")
        cw = chevalley_warning_check(A, k, n, p)
        if not ok or (cw["applicable"] and not cw["passed"]):
            bad.append((p, k, n, i, cex, cw))
    return independent, bad


@criterion("blocker_ap_free", 300)
def check_blockers():
    ind1, bad1 = _blocker_trials(5, 3, (2, 3, 4), 50, seed=10)
    ind2, bad2 = _blocker_trials(7, 4, (3,), 50, seed=11)
    bad = bad1 + bad2
    enough = ind1 >= 10 and ind2 >= 10
    return not bad and enough, (
        f"independent trials {ind1}/50 (p=5,k=3) and {ind2}/50 (p=7,k=4); {len(bad)} failures"
    )


@criterion("independence_trend", 120)
def check_independence():
    n, p, k = 4, 5, 3
    m = SimParams(p, k, n).m
    lo = independence_experiment(SimParams(p, k, n, s=m - 5, trials=200, seed=0))
    hi = independence_experiment(SimParams(p, k, n, s=m + 1, trials=200, seed=0))
    prob = lo.aggregate["probability"]
    floor = independence_floor(m, m - 5)
    ok = prob >= floor - 0.05 and hi.aggregate["probability"] == 0.0
    return ok, (
        f"m={m}: s={m - 5} empirical {prob:.3f} vs floor {floor:.3f} (tol 0.05); "
        f"s={m + 1} empirical {hi.aggregate['probability']}"
    )


@criterion("tail_bound_links", 120)
def check_tail_links():
    results = []
    cert = extract_subspace(full_space_basis(2, 6, 3), 6, 1)
    rep = tail_bound_check(cert.W_basis, 3, mode="exact", threshold=cert.threshold)
    results.append(("p2d3n6", rep["link_a"] and rep["link_b"]))
    cert2 = extract_subspace(full_space_basis(3, 4, 2), 4, 2)
    rep2 = tail_bound_check(cert2.W_basis, 2, mode="exact", threshold=cert2.threshold)
    results.append(("p3d2n4", rep2["link_a"] and rep2["link_b"]))
    eye = Tensor.from_array(np.eye(3, dtype=np.int64), 3)
    rep3 = tail_bound_check([eye], 2, mode="exact")
    results.append(("identity p3n3", rep3["link_a"] and rep3["link_b"]))
    return all(ok for _, ok in results), ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in results)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "wall_clock"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


@criterion("determinism", 60)
def check_determinism():
    from .cli import main

    runs = [
        ["sz-demo", "-p", "5", "-k", "3", "-n", "3", "-s", "4", "--trials", "12", "--seed", "3"],
        ["sz-independence", "-p", "5", "-k", "3", "-n", "4", "-s", "6", "--trials", "40", "--seed", "3"],
        ["extract", "--full-space", "-p", "2", "-d", "3", "-n", "6", "-t", "6", "-r", "1"],
    ]
    mismatches = []
    with tempfile.TemporaryDirectory() as tmp:
        for args in runs:
            blobs = []
            for workers in (1, 2, 3, 1):
                out = os.path.join(tmp, f"out{workers}.json")
                with contextlib.redirect_stdout(io.StringIO()):
                    code = main(args + ["--workers", str(workers), "--out", out])
                with open(out, "rb") as fh:
                    raw = fh.read()
                cleaned = json.dumps(_strip_timing(json.loads(raw)), sort_keys=True).encode()
                blobs.append((code, cleaned))
            if len(set(blobs)) != 1:
                mismatches.append(args[0])
    return not mismatches, f"{len(runs)} commands x workers 1,2,3,1; mismatches: {mismatches or 'none'}"


def run_all(names=None) -> list:
    selected = names or list(CHECKS)
    return [CHECKS[name]() for name in selected]
