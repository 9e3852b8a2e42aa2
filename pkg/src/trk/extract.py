"""Constructive extraction of a high-analytic-rank subspace.

Given a basis of a subspace ``V`` of d-tensors on ``[n]^d`` with
``dim V >= t n^(d-1)``, :func:`extract_subspace` returns a subspace
``W <= V`` of dimension ``floor(t/(d r))`` in which every nonzero element
has bias at most ``rho^r`` (analytic rank at least ``c r``), where
``rho = 1 - ((p-1)/p)^d``.  The pipeline:

1. reduce the basis so the lex leads are distinct;
2. cover ``[n]^d`` by diagonal matchings and pick one holding many leads;
3. read off the square sub-tensors ``Q_i`` on the rectangle spanned by
   those leads; ``Q_i`` restricted to ``[i]`` is a multiple of ``E_i``;
4. cut ``[rs]`` into ``s`` runs of length ``r`` and, run by run, grow a
   combination ``R`` one diagonal cell at a time, choosing the scalar that
   minimises the exact bias of the grown corner;
5. lift each ``R_j`` back to ``T*_j`` in ``V``.

Each step asserts the property the next one depends on; the certificate
carries enough data for :func:`verify_certificate` to recheck the result
from the input basis alone.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    SubspaceBasis,
    Tensor,
    basis_from_json,
    basis_to_json,
    combine,
    echelon,
    lex_lead,
    restrict,
    restrict_rect,
)
from .errors import InternalInvariantError, PreconditionError, ShapeError
from .field import rank_mod_p, solve_mod_p
from .rank import BiasValue, RankThreshold, bias, bias_leq_threshold, c_constant

__all__ = [
    "MatchingId",
    "PivotInfo",
    "ExtractionCertificate",
    "all_matchings",
    "matching_cells",
    "cover_assign",
    "pigeonhole_select",
    "build_Q",
    "lambda_boost",
    "extract_subspace",
    "verify_certificate",
    "projective_points",
]


@dataclass(frozen=True, order=True)
class MatchingId:
    """A diagonal matching ``{base + (i, ..., i) : i in [n - max(base)]}``.

    ``zero_axis`` (1-based) is the slot whose offset is 0 and ``offsets``
    are the other ``d - 1`` offsets in axis order.  Several ids name the
    same matching when ``base`` has more than one zero; :meth:`canonical`
    picks the first zero.
    """

    zero_axis: int
    offsets: tuple

    @property
    def base(self) -> tuple:
        off = list(self.offsets)
        off.insert(self.zero_axis - 1, 0)
        return tuple(off)

    @classmethod
    def from_base(cls, base) -> "MatchingId":
        base = tuple(int(b) for b in base)
        if 0 not in base:
            raise ShapeError(f"matching base {base} has no zero offset")
        z = base.index(0)
        return cls(z + 1, base[:z] + base[z + 1 :])

    def canonical(self) -> "MatchingId":
        return MatchingId.from_base(self.base)

    def to_json(self) -> dict:
        return {"zero_axis": self.zero_axis, "offsets": list(self.offsets)}

    @classmethod
    def from_json(cls, obj) -> "MatchingId":
        return cls(int(obj["zero_axis"]), tuple(int(o) for o in obj["offsets"]))


def all_matchings(n: int, d: int) -> list:
    """Every ``(zero_axis, offsets)`` pair: ``d * n^(d-1)`` ids, with repeats."""
    return [
        MatchingId(z, off)
        for z in range(1, d + 1)
        for off in itertools.product(range(n), repeat=d - 1)
    ]


def matching_cells(mid: MatchingId, n: int, d: int) -> list:
    base = mid.base
    if len(base) != d or any(not 0 <= b < n for b in base):
        raise ShapeError(f"{mid} is not a matching of [{n}]^{d}")
    return [tuple(b + i for b in base) for i in range(1, n - max(base) + 1)]


def cover_assign(coord, n: int, d: int) -> MatchingId:
    """The matching containing ``coord``: shift by ``min(coord) - 1``."""
    coord = tuple(int(c) for c in coord)
    if len(coord) != d or any(not 1 <= c <= n for c in coord):
        raise ShapeError(f"{coord} is not a coordinate of [{n}]^{d}")
    j = min(coord) - 1
    return MatchingId.from_base(tuple(c - j - 1 for c in coord))


@dataclass(frozen=True)
class PivotInfo:
    """``selected[i-1]`` is the basis index whose lead is ``base + f(i)(1, ..., 1)``."""

    matching: MatchingId
    selected: tuple
    f: tuple

    @property
    def rs(self) -> int:
        return len(self.selected)


def pigeonhole_select(leads, n: int, d: int, t: int, r: int) -> PivotInfo:
    leads = [tuple(l) for l in leads]
    if len(leads) < t * n ** (d - 1):
        raise PreconditionError(
            f"{len(leads)} leads < t n^(d-1) = {t * n ** (d - 1)}"
        )
    if len(set(leads)) != len(leads):
        raise PreconditionError("leads are not pairwise distinct")
    s = t // (d * r)
    if s == 0:
        raise PreconditionError(f"floor(t/(d r)) = 0 for t={t}, d={d}, r={r}")
    groups = defaultdict(list)
    for idx, lead in enumerate(leads):
        groups[cover_assign(lead, n, d)].append(idx)
    best = max(len(v) for v in groups.values())
    if d * best < t:
        raise InternalInvariantError("pigeonhole", f"largest matching holds {best} < t/d leads")
    mid = min(m for m, v in groups.items() if len(v) == best)
    base = mid.base
    on = sorted(groups[mid], key=lambda idx: leads[idx][0] - base[0])
    rs = r * s
    chosen = on[:rs]
    f = tuple(leads[idx][0] - base[0] for idx in chosen)
    return PivotInfo(mid, tuple(chosen), f)


def build_Q(T: Tensor, pivot: PivotInfo, position: int) -> Tensor:
    """``Q(a_1..a_d) = T(base + (f(a_1), ..., f(a_d)))`` on ``[rs]^d``.

    ``position`` is the 1-based index of ``T`` in the selection; the lead of
    ``Q`` must sit at ``(position, ..., position)``.
    """
    base = pivot.matching.base
    n = T.shape[0]
    if not T.is_principal() or T.axes[0] != tuple(range(1, n + 1)):
        raise ShapeError("build_Q needs a tensor on [n]^d")
    f = np.array(pivot.f, dtype=np.int64)
    if f.size and (base_max := max(base) + int(f.max())) > n:
        raise ShapeError(f"rectangle index {base_max} exceeds n={n}")
    idx = [b + f - 1 for b in base]
    Q = Tensor.from_array(T.entries[np.ix_(*idx)], T.p)
    diag = (position,) * T.order
    if lex_lead(Q) != diag:
        raise InternalInvariantError("build_Q", f"lead of Q_{position} is {lex_lead(Q)}, not {diag}")
    corner = restrict(Q, range(1, position + 1))
    if set(corner.nonzero()) != {diag}:
        raise InternalInvariantError("build_Q", f"Q_{position} restricted to [{position}] is not a multiple of E")
    return Q


def lambda_boost(R: Tensor, Q_next: Tensor, labels, thr_base: RankThreshold, workers=None):
    """Grow the corner of ``R`` by one diagonal cell.

    ``labels`` are the ``i + 1`` labels of the grown corner, the last being
    the new cell.  Returns ``(lam, R + lam Q_next, bias of the grown corner)``
    for the scalar minimising that bias (smallest on ties).
    """
    labels = list(labels)
    i = len(labels) - 1
    new = (labels[-1],) * R.order
    Qc = restrict(Q_next, labels)
    if set(Qc.nonzero()) != {new}:
        raise PreconditionError("Q_next restricted to the corner is not a nonzero multiple of E")
    if i > 0:
        prev = bias(restrict(R, labels[:-1]), workers=workers)
        if not bias_leq_threshold(prev, thr_base.raised(i)):
            raise PreconditionError(f"bias {prev} of the current corner exceeds rho^{i}")
    Rc = restrict(R, labels)
    best = None
    for lam in range(R.p):
        b = bias(Rc + lam * Qc, workers=workers)
        if best is None or b < best[1]:
            best = (lam, b)
    lam, b = best
    if not bias_leq_threshold(b, thr_base.raised(i + 1)):
        raise InternalInvariantError("lambda_boost", f"best bias {b} exceeds rho^{i + 1}")
    return lam, R + lam * Q_next, b


def projective_points(p: int, s: int):
    """Nonzero vectors of F_p^s whose first nonzero coordinate is 1."""
    for j in range(s):
        for tail in itertools.product(range(p), repeat=s - j - 1):
            yield (0,) * j + (1,) + tail


@dataclass
class ExtractionCertificate:
    p: int
    d: int
    n: int
    t: int
    r: int
    input_basis: SubspaceBasis
    matching: MatchingId
    f: tuple
    selected: tuple
    intervals: list
    lambdas: list
    R_coeffs: list  # per interval, coefficients on Q_i, i in I_j
    W_coeffs: list  # per T*_j, coefficients on the input basis
    W_basis: SubspaceBasis
    threshold: RankThreshold
    element_biases: list = field(default_factory=list)  # (coeff tuple, BiasValue)

    @property
    def s(self) -> int:
        return len(self.W_basis)

    def to_json(self) -> dict:
        return {
            "parameters": {"p": self.p, "d": self.d, "n": self.n, "t": self.t, "r": self.r},
            "matching": self.matching.to_json(),
            "f": list(self.f),
            "selected": list(self.selected),
            "intervals": [list(I) for I in self.intervals],
            "lambdas": [list(l) for l in self.lambdas],
            "R_coeffs": [list(map(int, c)) for c in self.R_coeffs],
            "W_coeffs": [list(map(int, c)) for c in self.W_coeffs],
            "threshold": self.threshold.to_json(),
            "element_biases": [
                {"coeffs": list(c), "bias": b.to_json()} for c, b in self.element_biases
            ],
            "W": basis_to_json(self.W_basis),
            "input_basis": basis_to_json(self.input_basis),
        }

    @classmethod
    def from_json(cls, obj) -> "ExtractionCertificate":
        par = obj["parameters"]
        return cls(
            p=int(par["p"]),
            d=int(par["d"]),
            n=int(par["n"]),
            t=int(par["t"]),
            r=int(par["r"]),
            input_basis=basis_from_json(obj["input_basis"]),
            matching=MatchingId.from_json(obj["matching"]),
            f=tuple(obj["f"]),
            selected=tuple(obj["selected"]),
            intervals=[tuple(I) for I in obj["intervals"]],
            lambdas=[tuple(l) for l in obj["lambdas"]],
            R_coeffs=[tuple(c) for c in obj["R_coeffs"]],
            W_coeffs=[tuple(c) for c in obj["W_coeffs"]],
            W_basis=basis_from_json(obj["W"]),
            threshold=RankThreshold.from_json(obj["threshold"]),
            element_biases=[
                (tuple(e["coeffs"]), BiasValue.from_json(e["bias"]))
                for e in obj["element_biases"]
            ],
        )


def _check_input(V, t, r):
    tensors = list(V)
    if not tensors:
        raise PreconditionError("empty basis")
    T0 = tensors[0]
    d, n = T0.order, T0.shape[0]
    if d < 2:
        raise PreconditionError("extraction needs d >= 2")
    if not T0.is_principal() or T0.axes[0] != tuple(range(1, n + 1)):
        raise PreconditionError("basis tensors must live on [n]^d")
    if not n >= t >= r >= 1:
        raise PreconditionError(f"need n >= t >= r >= 1, got n={n}, t={t}, r={r}")
    if t // (d * r) == 0:
        raise PreconditionError(f"floor(t/(d r)) = 0: t={t} < d r = {d * r}")
    if len(tensors) < t * n ** (d - 1):
        raise PreconditionError(f"dim V = {len(tensors)} < t n^(d-1) = {t * n ** (d - 1)}")
    return T0.p, d, n


def extract_subspace(V_basis, t: int, r: int, workers=None) -> ExtractionCertificate:
    p, d, n = _check_input(V_basis, t, r)
    V_basis = V_basis if isinstance(V_basis, SubspaceBasis) else SubspaceBasis(tuple(V_basis))
    ech = echelon(V_basis)
    if ech.basis.deficient:
        raise PreconditionError("input tensors are linearly dependent")
    E = ech.basis.tensors
    if len(set(ech.leads)) != len(ech.leads):
        raise InternalInvariantError("gaussian_eliminate", "lex leads are not distinct")

    pivot = pigeonhole_select(ech.leads, n, d, t, r)
    base = pivot.matching.base
    for pos, idx in enumerate(pivot.selected, start=1):
        want = tuple(b + pivot.f[pos - 1] for b in base)
        if ech.leads[idx] != want:
            raise InternalInvariantError("pigeonhole", f"lead {ech.leads[idx]} off matching cell {want}")
    if any(b <= a for a, b in zip(pivot.f, pivot.f[1:])):
        raise InternalInvariantError("pigeonhole", "f is not strictly increasing")

    Qs = [build_Q(E[idx], pivot, pos) for pos, idx in enumerate(pivot.selected, start=1)]
    rho, _ = c_constant(p, d)
    s = pivot.rs // r
    intervals = [tuple(range(j * r + 1, (j + 1) * r + 1)) for j in range(s)]

    lambdas, R_coeffs, W_tensors, W_coeffs = [], [], [], []
    for j, I in enumerate(intervals):
        # later Q's vanish on I_j x ... x I_j
        for i in range(I[-1] + 1, pivot.rs + 1):
            if not restrict(Qs[i - 1], I).is_zero():
                raise InternalInvariantError("block_triangular", f"Q_{i} restricted to I_{j + 1} is nonzero")
        R = Tensor.zeros(p, Qs[0].shape)
        lams = []
        for step in range(r):
            lam, R, b = lambda_boost(R, Qs[I[step] - 1], I[: step + 1], rho, workers)
            lams.append(lam)
        final = bias(restrict(R, I), workers=workers)
        if not bias_leq_threshold(final, rho.raised(r)):
            raise InternalInvariantError("interval", f"R_{j + 1} on I_{j + 1} has bias {final}")
        Tstar = combine(lams, [E[pivot.selected[i - 1]] for i in I])
        sides = [[b + pivot.f[a - 1] for a in range(1, pivot.rs + 1)] for b in base]
        if not np.array_equal(restrict_rect(Tstar, *sides).entries, R.entries):
            raise InternalInvariantError("lift", f"T*_{j + 1} does not restrict to R_{j + 1}")
        coeffs = np.zeros(len(E), dtype=np.int64)
        for lam, i in zip(lams, I):
            coeffs[pivot.selected[i - 1]] = lam
        lambdas.append(tuple(lams))
        R_coeffs.append(tuple(lams))
        W_tensors.append(Tstar)
        W_coeffs.append(tuple(int(c) for c in (coeffs @ ech.transform) % p))

    if rank_mod_p(np.stack([T.flat() for T in W_tensors]), p) != s:
        raise InternalInvariantError("independence", "T*_j are linearly dependent")
    W = SubspaceBasis(tuple(W_tensors))
    threshold = rho.raised(r)
    element_biases = []
    for lam in projective_points(p, s):
        b = bias(combine(lam, W.tensors), workers=workers)
        if not bias_leq_threshold(b, threshold):
            raise InternalInvariantError("final", f"element {lam} has bias {b} > rho^{r}")
        element_biases.append((lam, b))
    return ExtractionCertificate(
        p=p, d=d, n=n, t=t, r=r,
        input_basis=V_basis,
        matching=pivot.matching,
        f=pivot.f,
        selected=pivot.selected,
        intervals=intervals,
        lambdas=lambdas,
        R_coeffs=R_coeffs,
        W_coeffs=W_coeffs,
        W_basis=W,
        threshold=threshold,
        element_biases=element_biases,
    )


def verify_certificate(cert: ExtractionCertificate, workers=None):
    """Recheck a certificate from scratch.

    Returns ``(ok, report)``; ``report["counterexample"]`` holds the first
    coefficient vector whose element fails the bias bound.
    """
    report = {"checks": {}, "counterexample": None}
    checks = report["checks"]
    p, d, r, t = cert.p, cert.d, cert.r, cert.t
    V = list(cert.input_basis)
    W = list(cert.W_basis)
    s = len(W)

    checks["dimension"] = s == t // (d * r) and s >= 1
    rho, _ = c_constant(p, d)
    checks["threshold"] = cert.threshold == rho.raised(r)

    Vm = np.stack([T.flat() for T in V])
    checks["input_independent"] = rank_mod_p(Vm, p) == len(V)
    checks["input_dimension"] = len(V) >= t * cert.n ** (d - 1)
    in_V = len(cert.W_coeffs) == s
    for Tstar, coeffs in zip(W, cert.W_coeffs):
        if len(coeffs) != len(V) or combine(coeffs, V) != Tstar:
            in_V = False
        if solve_mod_p(Vm.T, Tstar.flat(), p) is None:
            in_V = False
    checks["W_in_V"] = in_V
    checks["W_independent"] = s > 0 and rank_mod_p(np.stack([T.flat() for T in W]), p) == s

    stored = {tuple(c): b for c, b in cert.element_biases}
    bias_ok, stored_ok = True, True
    for lam in projective_points(p, s):
        b = bias(combine(lam, W), workers=workers)
        if stored.get(lam) is None or stored[lam] != b:
            stored_ok = False
        if not bias_leq_threshold(b, rho.raised(r)):
            bias_ok = False
            if report["counterexample"] is None:
                report["counterexample"] = {"coeffs": list(lam), "bias": b.to_json()}
    checks["bias_bound"] = bias_ok
    checks["stored_biases"] = stored_ok
    ok = all(checks.values())
    report["ok"] = ok
    return ok, report
