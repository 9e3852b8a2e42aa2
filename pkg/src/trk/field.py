"""Prime-field arithmetic and dense linear algebra over F_p."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ShapeError


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    f = 2
    while f * f <= p:
        if p % f == 0:
            return False
        f += 1
    return True


@dataclass(frozen=True)
class PrimeField:
    """The field F_p.  Elements are the residues 0..p-1."""

    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or not is_prime(int(self.p)):
            raise DomainError(f"field modulus must be prime, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))

    def __repr__(self):
        return f"F_{self.p}"

    def elements(self):
        return range(self.p)

    def inv(self, a: int) -> int:
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, -1, self.p)


def as_field(field) -> PrimeField:
    return field if isinstance(field, PrimeField) else PrimeField(int(field))


@lru_cache(maxsize=64)
def _all_vectors(p: int, n: int) -> np.ndarray:
    codes = np.arange(p**n, dtype=np.int64)
    powers = p ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = (codes[:, None] // powers[None, :]) % p
    out.setflags(write=False)
    return out


def all_vectors(p: int, n: int) -> np.ndarray:
    """Every vector of F_p^n as rows of a ``(p**n, n)`` array.

    Rows are in lexicographic order with the first coordinate most
    significant, so row ``c`` is the base-p expansion of ``c``.
    """
    return _all_vectors(int(p), int(n))


def encode(points: np.ndarray, p: int) -> np.ndarray:
    """Inverse of :func:`all_vectors`: row vectors -> integer codes."""
    points = np.asarray(points, dtype=np.int64)
    n = points.shape[-1]
    powers = p ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (points % p) @ powers


def rref(A, p: int, transform: bool = False):
    """Reduced row echelon form of ``A`` over F_p.

    Returns ``(R, pivots)`` or, with ``transform=True``, ``(R, pivots, X)``
    where ``X`` is invertible and ``R = X @ A (mod p)``.  Pivot entries are 1.
    Rows of ``X`` past ``len(pivots)`` are dependency relations among the
    rows of ``A``.
    """
    A = np.array(A, dtype=np.int64) % p
    if A.ndim != 2:
        raise ShapeError("rref expects a 2-d array")
    rows, cols = A.shape
    M = np.hstack([A, np.eye(rows, dtype=np.int64)]) if transform else A
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(M[r:, c])
        if nz.size == 0:
            continue
        k = r + int(nz[0])
        if k != r:
            M[[r, k]] = M[[k, r]]
        M[r] = (M[r] * pow(int(M[r, c]), -1, p)) % p
        col = M[:, c].copy()
        col[r] = 0
        nzr = np.flatnonzero(col)
        if nzr.size:
            M[nzr] = (M[nzr] - np.outer(col[nzr], M[r])) % p
        pivots.append(c)
        r += 1
    if transform:
        return M[:, :cols], pivots, M[:, cols:]
    return M, pivots


def rank_mod_p(A, p: int) -> int:
    A = np.asarray(A)
    if A.size == 0:
        return 0
    return len(rref(A, p)[1])


def solve_mod_p(A, b, p: int):
    """One solution ``x`` of ``A x = b`` over F_p, or ``None`` if inconsistent.

    Free variables are set to zero, so the answer is deterministic.
    """
    A = np.array(A, dtype=np.int64) % p
    b = np.array(b, dtype=np.int64).reshape(-1) % p
    rows, cols = A.shape
    if b.shape[0] != rows:
        raise ShapeError("right-hand side length does not match the system")
    R, pivots = rref(np.hstack([A, b[:, None]]), p)
    if pivots and pivots[-1] == cols:
        return None
    x = np.zeros(cols, dtype=np.int64)
    for i, c in enumerate(pivots):
        x[c] = R[i, cols]
    return x


def in_row_span(v, rows, p: int) -> bool:
    rows = np.asarray(rows, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64).reshape(1, -1)
    if rows.size == 0:
        return not (v % p).any()
    return rank_mod_p(np.vstack([rows, v]), p) == rank_mod_p(rows, p)
