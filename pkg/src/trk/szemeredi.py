"""Random-difference Szemeredi experiments over F_p^n.

The pieces: random points and the independence of their Veronese images,
the blocker tensor whose quadric/cubic/... zero set avoids k-APs with
differences in S, exhaustive or sampled AP checks, Chevalley-Warning
sanity checks, and numeric checks of the tail bound for ``phi_d(x)``
landing in the annihilator of a high-rank subspace.

Every trial draws from its own PCG64 stream keyed by ``(seed, trial)``,
so reports do not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import functools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .algebra import (
    Tensor,
    combine,
    is_symmetric,
    monomial_matrix,
    monomials,
    multinomial,
    symmetric_from_monomials,
    tensor_to_json,
)
from .errors import (
    InternalInvariantError,
    PreconditionError,
    UnsupportedParametersError,
)
from .extract import projective_points
from .field import all_vectors, encode, is_prime, rank_mod_p, solve_mod_p
from .rank import bias

__all__ = [
    "SimParams",
    "SimReport",
    "APFreeSet",
    "GENERATOR",
    "trial_rng",
    "sample_points",
    "veronese_independent",
    "construct_blocker",
    "diagonal_form",
    "ap_free_set",
    "verify_no_ap",
    "chevalley_warning_check",
    "independence_experiment",
    "randomized_szemeredi_demo",
    "tail_bound_check",
]

GENERATOR = "numpy.random.PCG64"
EXPLICIT_LIMIT = 10**6
EXHAUSTIVE_LIMIT = 10**7
SAMPLED_PAIRS = 10**5


@dataclass(frozen=True)
class SimParams:
    p: int
    k: int
    n: int
    s: int | None = None
    trials: int = 100
    seed: int = 0
    C_knob: float = 0.0

    def __post_init__(self):
        if not is_prime(self.p):
            raise PreconditionError(f"p={self.p} is not prime")
        if self.k < 3:
            raise PreconditionError("progression length k must be at least 3")
        if self.p < self.k:
            raise PreconditionError(f"need p >= k (p={self.p}, k={self.k})")
        if self.n < 1 or self.trials < 0:
            raise PreconditionError("n must be positive and trials nonnegative")
        if self.s is not None and self.s < 0:
            raise PreconditionError("s must be nonnegative")

    @property
    def d(self) -> int:
        return self.k - 1

    @property
    def m(self) -> int:
        return math.comb(self.n + self.d - 1, self.d)

    def sample_size(self) -> int:
        """``s`` if given, else ``m - C (log_p n)^2 n^(k-2)`` rounded down, at least 0."""
        if self.s is not None:
            return self.s
        slack = self.C_knob * math.log(self.n, self.p) ** 2 * self.n ** (self.k - 2)
        return max(0, math.floor(self.m - slack))


@dataclass
class SimReport:
    kind: str
    params: dict
    generator: str
    trials: list
    aggregate: dict
    wall_clock: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        out = asdict(self)
        if not timing:
            out.pop("wall_clock")
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=1)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def sample_points(n: int, p: int, s: int, seed) -> np.ndarray:
    """``s`` uniform vectors of F_p^n as rows.  ``seed`` may be a Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.integers(0, p, size=(s, n), dtype=np.int64)


def veronese_independent(points, d: int, p: int) -> bool:
    """Whether ``phi_d(x_1), ..., phi_d(x_s)`` are linearly independent."""
    if p <= d:
        raise UnsupportedParametersError(f"need p > d (p={p}, d={d})")
    points = np.asarray(points, dtype=np.int64)
    if points.shape[0] == 0:
        return True
    M = monomial_matrix(points, d, p)
    if M.shape[0] > M.shape[1]:
        return False
    return rank_mod_p(M, p) == M.shape[0]


def construct_blocker(S, k: int, p: int) -> Tensor:
    """A nonzero symmetric (k-1)-tensor with ``<T, phi_{k-1}(s)> = 1`` on S.

    In monomial coordinates the pairing reads ``sum_alpha c_alpha s^alpha``
    with ``c_alpha = multinomial(alpha) * T_alpha``; we solve for ``c`` and
    divide, which needs ``p > k - 1``.
    """
    d = k - 1
    if p < k:
        raise UnsupportedParametersError(f"need p >= k (p={p}, k={k})")
    S = np.asarray(S, dtype=np.int64)
    n = S.shape[1]
    mons = monomials(n, d)
    if S.shape[0] == 0:
        coeffs = np.zeros(len(mons), dtype=np.int64)
        coeffs[0] = 1
        return symmetric_from_monomials(coeffs, n, d, p)
    if not veronese_independent(S, d, p):
        raise PreconditionError("phi_{k-1}(S) is linearly dependent")
    M = monomial_matrix(S, d, p)
    c = solve_mod_p(M, np.ones(len(S), dtype=np.int64), p)
    if c is None:
        raise InternalInvariantError("construct_blocker", "system inconsistent despite independence")
    coeffs = [int(ci) * pow(multinomial(a), -1, p) % p for ci, a in zip(c, mons)]
    T = symmetric_from_monomials(coeffs, n, d, p)
    vals = diagonal_form(T, S)
    if T.is_zero() or (vals != 1).any():
        raise InternalInvariantError("construct_blocker", "resubstitution check failed")
    return T


@functools.lru_cache(maxsize=64)
def _orbit_index(n: int, d: int) -> np.ndarray:
    """For each flat position of ``[n]^d``, the index of its monomial."""
    lookup = {a: i for i, a in enumerate(monomials(n, d))}
    return np.array([lookup[tuple(sorted(idx))] for idx in np.ndindex((n,) * d)], dtype=np.int64)


def diagonal_form(T: Tensor, points) -> np.ndarray:
    """``<T, phi_d(x)> = T(x, ..., x)`` for each row ``x`` of ``points``."""
    n, d, p = T.shape[0], T.order, T.p
    c = np.bincount(_orbit_index(n, d), weights=T.flat(), minlength=math.comb(n + d - 1, d))
    c = c.astype(np.int64) % p
    return monomial_matrix(points, d, p) @ c % p


@dataclass
class APFreeSet:
    """Zero set of ``x -> <T, phi_{k-1}(x)>``.

    ``points`` (and ``mask`` over the codes of F_p^n) are filled in when
    ``p^n`` is at most one million.
    """

    T: Tensor
    k: int
    n: int
    points: np.ndarray | None = None
    mask: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.T.p

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.int64))
        return diagonal_form(self.T, x) == 0

    def __contains__(self, x) -> bool:
        return bool(self.contains(x)[0])

    @property
    def size(self):
        return None if self.points is None else len(self.points)


def ap_free_set(T: Tensor, k: int, n: int) -> APFreeSet:
    if T.order != k - 1 or T.shape[0] != n:
        raise PreconditionError(f"tensor shape {T.shape} does not match k={k}, n={n}")
    A = APFreeSet(T, k, n)
    if T.p**n <= EXPLICIT_LIMIT:
        X = all_vectors(T.p, n)
        A.mask = diagonal_form(T, X) == 0
        A.points = X[A.mask]
    return A


def _membership(A, n, p):
    if isinstance(A, APFreeSet):
        return A.contains
    if callable(A):
        return lambda X: np.asarray(A(X), dtype=bool)
    pts = np.asarray(list(A), dtype=np.int64).reshape(-1, n)
    codes = set(encode(pts, p).tolist())
    return lambda X: np.isin(encode(X, p), list(codes)) if codes else np.zeros(len(X), dtype=bool)


def verify_no_ap(A, S, k: int, n: int, p: int, mode: str = "auto", seed: int = 0):
    """Look for ``x, x+s, ..., x+(k-1)s`` all in A with ``s`` in S nonzero.

    ``A`` is an :class:`APFreeSet`, a vectorised predicate on rows, or a
    collection of points.  Returns ``(ok, counterexample, mode_used)`` with
    the counterexample as ``{"x": ..., "s": ...}``.
    """
    S = np.asarray(S, dtype=np.int64).reshape(-1, n) % p
    S = np.unique(S[S.any(axis=1)], axis=0)
    if mode == "auto":
        mode = "exhaustive" if p**n * max(1, len(S)) <= EXHAUSTIVE_LIMIT else "sampled"
    if len(S) == 0:
        return True, None, mode
    member = _membership(A, n, p)
    if mode == "exhaustive":
        X = all_vectors(p, n)
        mask = A.mask if isinstance(A, APFreeSet) and A.mask is not None else member(X)
        for s in S:
            hit = mask.copy()
            for j in range(1, k):
                hit &= mask[encode((X + j * s) % p, p)]
            if hit.any():
                x = X[int(np.flatnonzero(hit)[0])]
                return False, {"x": x.tolist(), "s": s.tolist()}, mode
        return True, None, mode
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        X = rng.integers(0, p, size=(SAMPLED_PAIRS, n), dtype=np.int64)
        D = S[rng.integers(0, len(S), size=SAMPLED_PAIRS)]
        hit = member(X)
        for j in range(1, k):
            hit &= member((X + j * D) % p)
        if hit.any():
            i = int(np.flatnonzero(hit)[0])
            return False, {"x": X[i].tolist(), "s": D[i].tolist()}, mode
        return True, None, mode
    raise ValueError(f"unknown mode {mode!r}")


def chevalley_warning_check(A, k: int, n: int, p: int) -> dict:
    """Divisibility of ``|A|`` by p for a degree-(k-1) zero set in n > k-1 variables."""
    pts = A.points if isinstance(A, APFreeSet) else np.asarray(A).reshape(-1, n)
    if pts is None:
        raise PreconditionError("Chevalley-Warning check needs an explicit set")
    size = int(len(pts))
    report = {"size": size, "density": size / p**n, "applicable": n > k - 1}
    if not report["applicable"]:
        report.update(passed=None, reason="n <= k-1: hypothesis not met, check skipped")
        return report
    report["divisible"] = size % p == 0
    report["at_least_p"] = size >= p
    report["passed"] = report["divisible"] and report["at_least_p"]
    return report


# ---------------------------------------------------------------------------
# experiments


def _run_trials(fn, trials, workers):
    if workers and workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(i) for i in range(trials)]


def _independence_trial(i, params):
    s = params.sample_size()
    pts = sample_points(params.n, params.p, s, trial_rng(params.seed, i))
    return {"trial": i, "independent": veronese_independent(pts, params.d, params.p)}


def independence_floor(m: int, s: int) -> float:
    """``(1 - 2/m^2)^s``, the lower bound for independence when ``s <= m``."""
    if s > m:
        return 0.0
    return (1 - 2 / m**2) ** s


def independence_experiment(params: SimParams, workers: int = 1) -> SimReport:
    start = time.perf_counter()
    s = params.sample_size()
    rows = _run_trials(functools.partial(_independence_trial, params=params), params.trials, workers)
    hits = sum(r["independent"] for r in rows)
    agg = {
        "d": params.d,
        "m": params.m,
        "s": s,
        "independent": hits,
        "probability": hits / params.trials if params.trials else None,
        "floor": independence_floor(params.m, s),
    }
    return SimReport(
        "independence", asdict(params), GENERATOR, rows, agg, time.perf_counter() - start
    )


def _demo_trial(i, params, dump_blockers=False):
    p, k, n = params.p, params.k, params.n
    s = params.sample_size()
    S = sample_points(n, p, s, trial_rng(params.seed, i))
    rec = {"trial": i, "s": s, "independent": veronese_independent(S, params.d, p)}
    if not rec["independent"]:
        rec.update(blocker_found=False, ap_free=None)
        return rec
    T = construct_blocker(S, k, p)
    A = ap_free_set(T, k, n)
    ok, cex, mode = verify_no_ap(A, S, k, n, p, seed=params.seed + i)
    rec.update(blocker_found=True, ap_free=ok, verify_mode=mode, counterexample=cex)
    if A.points is not None:
        rec["size"] = int(A.size)
        rec["density"] = A.size / p**n
        rec["chevalley_warning"] = chevalley_warning_check(A, k, n, p)
    if dump_blockers:
        rec["blocker"] = tensor_to_json(T)
    return rec


def randomized_szemeredi_demo(params: SimParams, workers: int = 1, dump_blockers: bool = False) -> SimReport:
    start = time.perf_counter()
    fn = functools.partial(_demo_trial, params=params, dump_blockers=dump_blockers)
    rows = _run_trials(fn, params.trials, workers)
    indep = [r for r in rows if r["independent"]]
    free = [r for r in indep if r["ap_free"]]
    dens = [r["density"] for r in indep if "density" in r]
    cw = [r["chevalley_warning"]["passed"] for r in indep if "chevalley_warning" in r]
    agg = {
        "d": params.d,
        "m": params.m,
        "s": params.sample_size(),
        "independent": len(indep),
        "ap_free_verified": len(free),
        "success_rate": len(free) / params.trials if params.trials else None,
        "all_blockers_ap_free": len(free) == len(indep),
        "min_density": min(dens) if dens else None,
        "mean_density": sum(dens) / len(dens) if dens else None,
        "chevalley_warning_all_passed": all(c for c in cw if c is not None),
    }
    return SimReport("szemeredi_demo", asdict(params), GENERATOR, rows, agg, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# tail bound


def _frac_json(x: Fraction) -> dict:
    return {"exact": f"{x.numerator}/{x.denominator}", "value": float(x)}


def tail_bound_check(W_basis, d=None, mode: str = "auto", threshold=None,
                     samples: int = 20000, seed: int = 0, workers=None) -> dict:
    """Check the two quantitative steps of the tail bound on ``W``.

    (a) ``Pr_x[phi_d(x) in W^perp] ** 2^(d-1) <= E_{T in W} bias(T)``
    (b) ``E_{T in W} bias(T) <= 1/p^m + (1 - 1/p^m) * beta`` where ``beta``
        bounds the bias of every nonzero element: ``threshold`` if given
        (e.g. a certificate's ``rho^r``), else the exact maximum.

    Exact mode enumerates all of F_p^n and all of W; sampled mode
    estimates both sides and is reported as such.
    """
    W = list(W_basis)
    if not W:
        raise PreconditionError("tail_bound_check needs a nonempty basis")
    T0 = W[0]
    p, n = T0.p, T0.shape[0]
    d = T0.order if d is None else d
    if T0.order != d or not T0.is_principal():
        raise PreconditionError("basis must consist of principal d-tensors")
    m = len(W)
    if rank_mod_p(np.stack([T.flat() for T in W]), p) != m:
        raise PreconditionError("basis tensors are linearly dependent")
    if mode == "auto":
        mode = "exact" if p**n <= EXPLICIT_LIMIT and p**m <= 4096 else "sampled"
    report = {
        "mode": mode,
        "p": p, "d": d, "n": n, "m": m,
        "symmetric": all(is_symmetric(T) for T in W),
        "p_gt_d": p > d,
    }
    power = 2 ** (d - 1)
    if mode == "exact":
        X = all_vectors(p, n)
        zero = np.ones(len(X), dtype=bool)
        for T in W:
            zero &= diagonal_form(T, X) == 0
        lhs = Fraction(int(zero.sum()), p**n)
        biases = [bias(combine(lam, W), workers=workers) for lam in projective_points(p, m)]
        total = 1 + (p - 1) * sum(b.fraction for b in biases)
        ebias = Fraction(total, p**m)
        beta = threshold.fraction if threshold is not None else max(b.fraction for b in biases)
        if threshold is not None and any(b.fraction > beta for b in biases):
            report["threshold_violated"] = True
        rhs_b = Fraction(1, p**m) + (1 - Fraction(1, p**m)) * beta
        report.update(
            prob_in_annihilator=_frac_json(lhs),
            expected_bias=_frac_json(ebias),
            link_a_lhs=_frac_json(lhs**power),
            beta=_frac_json(beta),
            link_b_rhs=_frac_json(rhs_b),
            link_a=lhs**power <= ebias,
            link_b=ebias <= rhs_b and not report.get("threshold_violated", False),
        )
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        X = rng.integers(0, p, size=(samples, n), dtype=np.int64)
        zero = np.ones(samples, dtype=bool)
        for T in W:
            zero &= diagonal_form(T, X) == 0
        lhs = float(zero.mean())
        n_el = min(samples, 256)
        coeffs = rng.integers(0, p, size=(n_el, m))
        ebias = float(np.mean([float(bias(combine(c, W), workers=workers)) for c in coeffs]))
        beta = float(threshold.fraction) if threshold is not None else None
        report.update(prob_in_annihilator={"value": lhs}, expected_bias={"value": ebias},
                      link_a_lhs={"value": lhs**power}, link_a=lhs**power <= ebias, certified=False)
        if beta is not None:
            rhs_b = p**-m + (1 - p**-m) * beta
            report.update(beta={"value": beta}, link_b_rhs={"value": rhs_b}, link_b=ebias <= rhs_b)
        else:
            report["link_b"] = None
    else:
        raise ValueError(f"unknown mode {mode!r}")
    report["passed"] = bool(report["link_a"]) and report["link_b"] is not False
    return report
