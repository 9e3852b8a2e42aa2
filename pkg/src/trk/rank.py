"""Exact bias and analytic rank, plus the rank notions used to check them.

Bias is computed by counting: averaging a nontrivial character over the
free slot turns ``E chi(T(x_1, ..., x_d))`` into the probability that the
contracted linear functional ``T(., x_2, ..., x_d)`` vanishes.  Every bias
is therefore a rational ``M / p^K`` and all comparisons are done on
integers; floats appear only in reports.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .algebra import Tensor
from .errors import DomainError, ResourceGuardError, ShapeError
from .field import all_vectors, encode, rank_mod_p

__all__ = [
    "BiasValue",
    "RankThreshold",
    "CosetBias",
    "bias",
    "arank",
    "bias_leq_threshold",
    "c_constant",
    "matrix_rank",
    "enumerate_prank1",
    "prank_oracle",
    "coset_bias",
    "default_workers",
]

# elements per intermediate array in the counting engine
_CHUNK = 1 << 22


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("TRK_THREADS", "1")))
    except ValueError:
        return 1


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class BiasValue:
    """The exact rational ``numerator / p**exponent``.

    Equality and ordering compare rational values, so ``3/4`` and
    ``12/16`` (p=2) are equal even though their fields differ.
    """

    numerator: int
    p: int
    exponent: int

    def __post_init__(self):
        if self.numerator < 0 or self.numerator > self.p**self.exponent:
            raise DomainError(f"bias numerator {self.numerator} outside [0, p^K]")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.p**self.exponent)

    @property
    def arank(self) -> float:
        if self.numerator == 0:
            return math.inf
        # split off the exact power of p so integral ranks come out exact
        m, e = self.numerator, 0
        while m % self.p == 0:
            m //= self.p
            e += 1
        return (self.exponent - e) - (math.log(m) / math.log(self.p) if m > 1 else 0.0)

    def __eq__(self, other):
        if isinstance(other, BiasValue):
            return self.fraction == other.fraction
        if isinstance(other, (int, Fraction)):
            return self.fraction == other
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, BiasValue):
            return self.fraction < other.fraction
        if isinstance(other, (int, Fraction)):
            return self.fraction < other
        return NotImplemented

    def __hash__(self):
        return hash(self.fraction)

    def __float__(self):
        return float(self.fraction)

    def __repr__(self):
        return f"BiasValue({self.numerator}/{self.p}^{self.exponent})"

    def to_json(self) -> dict:
        arank_value = self.arank
        return {
            "num": str(self.numerator),
            "p": self.p,
            "exp": self.exponent,
            "arank": arank_value if math.isfinite(arank_value) else None,
        }

    @classmethod
    def from_json(cls, obj) -> "BiasValue":
        return cls(int(obj["num"]), int(obj["p"]), int(obj["exp"]))


@dataclass(frozen=True)
class RankThreshold:
    """The bias threshold ``(base_num / base_den) ** power``."""

    base_num: int
    base_den: int
    power: int = 1

    def __post_init__(self):
        if self.base_num <= 0 or self.base_den <= 0 or self.base_num > self.base_den:
            raise DomainError("threshold base must be a rational in (0, 1]")
        if self.power < 0:
            raise DomainError("threshold power must be nonnegative")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.base_num, self.base_den) ** self.power

    def raised(self, power: int) -> "RankThreshold":
        return RankThreshold(self.base_num, self.base_den, power)

    def arank_floor(self, p: int) -> float:
        """The analytic rank guaranteed by ``bias <= threshold``."""
        return -self.power * math.log(self.base_num / self.base_den, p)

    def to_json(self) -> dict:
        return {"base_num": self.base_num, "base_den": self.base_den, "power": self.power}

    @classmethod
    def from_json(cls, obj) -> "RankThreshold":
        return cls(int(obj["base_num"]), int(obj["base_den"]), int(obj["power"]))


def bias_leq_threshold(b: BiasValue, thr: RankThreshold) -> bool:
    """``M / p^K <= (num / den)^i`` by cross-multiplication."""
    i = thr.power
    return b.numerator * thr.base_den**i <= thr.base_num**i * b.p**b.exponent


def c_constant(p: int, d: int):
    """Per-step rank increment for d-tensors over F_p.

    Returns ``(RankThreshold(rho), c)`` with ``rho = 1 - ((p-1)/p)^d`` in
    lowest terms and ``c = -log_p(rho)``.
    """
    if d < 1:
        raise DomainError("d must be positive")
    num, den = p**d - (p - 1) ** d, p**d
    g = math.gcd(num, den)
    thr = RankThreshold(num // g, den // g, 1)
    return thr, -math.log(num / den, p)


# ---------------------------------------------------------------------------
# the counting engine


def _count_zero_rows(batch: np.ndarray, p: int) -> int:
    """``batch`` has shape ``(B, n_free, m_1, ..., m_k)``; count the pairs
    (b, y_1..y_k) with ``batch[b](., y_1, ..., y_k) == 0``."""
    if batch.ndim == 2:
        return int(np.count_nonzero(~batch.any(axis=1)))
    m = batch.shape[-1]
    vecs = all_vectors(p, m)
    rest = int(np.prod(batch.shape[1:-1]))
    step = max(1, _CHUNK // max(1, vecs.shape[0] * rest))
    total = 0
    for lo in range(0, batch.shape[0], step):
        part = batch[lo : lo + step]
        nxt = np.tensordot(part, vecs, axes=([part.ndim - 1], [1])) % p
        nxt = np.moveaxis(nxt, -1, 1)
        nxt = nxt.reshape((-1,) + nxt.shape[2:])
        total += _count_zero_rows(nxt, p)
    return total


def _count_annihilating(arr: np.ndarray, p: int, workers: int) -> int:
    """Number of ``(x_2..x_d)`` killing the functional on axis 0 of ``arr``."""
    if arr.ndim == 1:
        return 0 if arr.any() else 1
    if arr.size == 0:
        # some free axis is empty: the functional lives on a zero space,
        # or some enumerated axis contributes the single empty vector
        return int(np.prod([p ** k for k in arr.shape[1:]]))
    m = arr.shape[-1]
    vecs = all_vectors(p, m)
    first = np.tensordot(arr, vecs, axes=([arr.ndim - 1], [1])) % p
    first = np.moveaxis(first, -1, 0)  # (P, n_free, m_1, ..., m_{k-1})
    if first.ndim == 2:
        return int(np.count_nonzero(~first.any(axis=1)))
    if workers <= 1 or first.shape[0] < 2 * workers:
        return _count_zero_rows(first, p)
    parts = np.array_split(first, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(lambda b: _count_zero_rows(b, p), parts))


def bias(T: Tensor, contract_axis: int = 0, workers: int | None = None) -> BiasValue:
    """Exact bias of ``T``.

    The functional on ``contract_axis`` (0-based) is left free; the other
    axes are enumerated, so ``K = sum of their sizes``.  The value does not
    depend on the choice of axis.
    """
    if not 0 <= contract_axis < T.order:
        raise ShapeError(f"no axis {contract_axis} in an order-{T.order} tensor")
    workers = default_workers() if workers is None else max(1, int(workers))
    arr = np.moveaxis(T.entries, contract_axis, 0)
    K = sum(T.shape) - T.shape[contract_axis]
    return BiasValue(_count_annihilating(arr, T.p, workers), T.p, K)


def arank(T: Tensor, workers: int | None = None) -> float:
    return bias(T, workers=workers).arank


def matrix_rank(M: Tensor) -> int:
    if M.order != 2:
        raise DomainError(f"matrix_rank needs an order-2 tensor, got order {M.order}")
    return rank_mod_p(M.entries, M.p)


# ---------------------------------------------------------------------------
# partition rank on micro instances

MAX_PRANK_ENTRIES = 12
MAX_PRANK_STATES = 1 << 16


def _guard(shape, p):
    size = int(np.prod(shape))
    if len(shape) < 2:
        raise DomainError("partition rank needs order >= 2")
    if size > MAX_PRANK_ENTRIES or p**size > MAX_PRANK_STATES:
        raise ResourceGuardError(
            f"shape {tuple(shape)} over F_{p} is too large for the exhaustive oracle"
        )


def _bipartitions(d):
    # unordered {A, B}: fix axis 0 in A
    rest = list(range(1, d))
    for k in range(0, d - 1):
        for extra in itertools.combinations(rest, k):
            A = (0, *extra)
            B = tuple(j for j in range(d) if j not in A)
            yield A, B


def _nonzero_forms(shape, p):
    size = int(np.prod(shape)) if shape else 1
    for code in range(1, p**size):
        yield all_vectors(p, size)[code].reshape(shape)


@functools.lru_cache(maxsize=32)
def _prank1_codes(shape: tuple, p: int) -> np.ndarray:
    d = len(shape)
    seen = set()
    for A, B in _bipartitions(d):
        sa = tuple(shape[j] for j in A)
        sb = tuple(shape[j] for j in B)
        perm = np.argsort(A + B)
        for f1 in _nonzero_forms(sa, p):
            for f2 in _nonzero_forms(sb, p):
                arr = np.transpose(np.multiply.outer(f1, f2) % p, perm)
                seen.add(int(encode(arr.reshape(-1), p)))
    return np.array(sorted(seen), dtype=np.int64)


def enumerate_prank1(shape, p):
    """Yield every partition-rank-1 tensor of the given shape, once each."""
    shape = tuple(int(k) for k in shape)
    _guard(shape, p)
    size = int(np.prod(shape))
    vecs = all_vectors(p, size)
    for code in _prank1_codes(shape, p):
        yield Tensor.from_array(vecs[code].reshape(shape), p)


@functools.lru_cache(maxsize=16)
def _prank_table(shape: tuple, p: int) -> np.ndarray:
    """Breadth-first distances from 0 in the Cayley graph of the rank-1 set."""
    size = int(np.prod(shape))
    vecs = all_vectors(p, size)
    gens = vecs[_prank1_codes(shape, p)]
    powers = p ** np.arange(size - 1, -1, -1, dtype=np.int64)
    dist = np.full(p**size, -1, dtype=np.int64)
    dist[0] = 0
    frontier = np.array([0], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        nbrs = (vecs[frontier][:, None, :] + gens[None, :, :]) % p
        codes = np.unique(nbrs.reshape(-1, size) @ powers)
        new = codes[dist[codes] < 0]
        dist[new] = level
        frontier = new
    return dist


def prank_oracle(T: Tensor, r_max: int = 8):
    """Exact partition rank, or ``None`` when it exceeds ``r_max``."""
    _guard(T.shape, T.p)
    dist = _prank_table(tuple(T.shape), T.p)
    r = int(dist[int(encode(T.flat(), T.p))])
    return r if r <= r_max else None


# ---------------------------------------------------------------------------
# shifted character averages over a subspace


@dataclass(frozen=True)
class CosetBias:
    """``|E_{u in U^d} chi(T(u_1 + v_1, ..., u_d + v_d))|``.

    ``histogram[a]`` counts the tuples where the form takes value ``a``.
    For p = 2 the magnitude is the exact rational ``exact``; otherwise
    ``magnitude`` is accurate to far better than 1e-9.
    """

    histogram: tuple
    p: int
    exponent: int
    magnitude: float
    exact: Fraction | None = None

    @property
    def value(self):
        return self.exact if self.exact is not None else self.magnitude


def _as_rows(vectors, n, p, what):
    rows = np.array(vectors, dtype=np.int64).reshape(-1, n) % p if len(vectors) else np.zeros((0, n), dtype=np.int64)
    return rows


def coset_bias(T: Tensor, U_basis, V_basis, shifts) -> CosetBias:
    if not T.is_principal():
        raise ShapeError("coset_bias needs a principal-shape tensor")
    p, d, n = T.p, T.order, T.shape[0]
    U = _as_rows(U_basis, n, p, "U")
    V = _as_rows(V_basis, n, p, "V")
    if U.shape[0] + V.shape[0] != n or rank_mod_p(np.vstack([U, V]), p) != n:
        raise DomainError("U and V are not complementary subspaces of F_p^n")
    if len(shifts) != d:
        raise ShapeError(f"need {d} shift vectors")
    shifts = [np.asarray(v, dtype=np.int64).reshape(n) % p for v in shifts]
    for v in shifts:
        if V.shape[0] == 0:
            if v.any():
                raise DomainError("shift vector not in V")
        elif rank_mod_p(np.vstack([V, v]), p) != V.shape[0]:
            raise DomainError("shift vector not in V")
    k = U.shape[0]
    coeffs = all_vectors(p, k)
    pts = (coeffs @ U) % p if k else np.zeros((1, n), dtype=np.int64)
    # contract from the last axis, keeping one batch axis per slot
    arr = T.entries
    for j in range(d - 1, -1, -1):
        Y = (pts + shifts[j]) % p
        arr = np.tensordot(arr, Y, axes=([j], [1])) % p
    hist = np.bincount(arr.reshape(-1), minlength=p)
    K = d * k
    if p == 2:
        exact = Fraction(abs(int(hist[0]) - int(hist[1])), 2**K)
        return CosetBias(tuple(int(h) for h in hist), p, K, float(exact), exact)
    with mpmath.workdps(50):
        total = mpmath.fsum(int(h) * mpmath.expjpi(mpmath.mpf(2 * a) / p) for a, h in enumerate(hist))
        mag = mpmath.fabs(total) / mpmath.mpf(p) ** K
        return CosetBias(tuple(int(h) for h in hist), p, K, float(mag))
