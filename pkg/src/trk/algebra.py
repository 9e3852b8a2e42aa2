"""Dense tensors over prime fields and the linear algebra around them.

A :class:`Tensor` carries one sorted list of positive integer labels per
axis, so that restricting to a non-contiguous label set such as
``{4, 5, 6}`` yields a tensor that still knows where it came from.
Coordinates are always given as label tuples, never as array positions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError, UnsupportedParametersError
from .field import as_field, rref

__all__ = [
    "Tensor",
    "SubspaceBasis",
    "evaluate",
    "restrict",
    "restrict_rect",
    "permute_legs",
    "lex_lead",
    "gaussian_eliminate",
    "echelon",
    "veronese",
    "monomial_vector",
    "monomials",
    "inner_product",
    "symmetrize",
    "is_symmetric",
    "full_space_basis",
    "tensor_to_json",
    "tensor_from_json",
    "basis_to_json",
    "basis_from_json",
]


def _check_labels(axis) -> tuple:
    labels = tuple(int(a) for a in axis)
    if any(a < 1 for a in labels):
        raise DomainError(f"axis labels must be positive, got {labels}")
    if any(b <= a for a, b in zip(labels, labels[1:])):
        raise DomainError(f"axis labels must be strictly increasing, got {labels}")
    return labels


class Tensor:
    """An order-d array over F_p with labelled axes.  Immutable."""

    __slots__ = ("field", "axes", "entries")

    def __init__(self, field, axes, entries):
        field = as_field(field)
        axes = tuple(_check_labels(a) for a in axes)
        arr = np.array(entries, dtype=np.int64)
        if arr.shape != tuple(len(a) for a in axes):
            raise ShapeError(
                f"entries shape {arr.shape} does not match axis sizes "
                f"{tuple(len(a) for a in axes)}"
            )
        arr %= field.p
        arr.setflags(write=False)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Tensor is immutable")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_array(cls, array, p, axes=None) -> "Tensor":
        arr = np.asarray(array, dtype=np.int64)
        if axes is None:
            axes = [range(1, k + 1) for k in arr.shape]
        return cls(p, axes, arr)

    @classmethod
    def zeros(cls, p, shape, axes=None) -> "Tensor":
        return cls.from_array(np.zeros(tuple(shape), dtype=np.int64), p, axes)

    @classmethod
    def unit(cls, p, n: int, coord: Sequence[int], value: int = 1) -> "Tensor":
        """Single-entry tensor on ``[n]^d`` with ``value`` at label tuple ``coord``."""
        arr = np.zeros((n,) * len(coord), dtype=np.int64)
        arr[tuple(c - 1 for c in coord)] = value
        return cls.from_array(arr, p)

    # -- basic structure --------------------------------------------------

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def order(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    def same_shape(self, other: "Tensor") -> bool:
        return self.p == other.p and self.axes == other.axes

    def is_zero(self) -> bool:
        return not self.entries.any()

    def is_principal(self) -> bool:
        return all(a == self.axes[0] for a in self.axes)

    def __getitem__(self, coord):
        return int(self.entries[self._positions(coord)])

    def _positions(self, coord):
        if len(coord) != self.order:
            raise ShapeError(f"coordinate {coord} has wrong length for order {self.order}")
        try:
            return tuple(ax.index(c) for ax, c in zip(self.axes, coord))
        except ValueError:
            raise DomainError(f"coordinate {coord} not in tensor axes") from None

    def nonzero(self):
        """Label tuples of nonzero entries, in lex order."""
        for pos in zip(*np.nonzero(self.entries)):
            yield tuple(ax[i] for ax, i in zip(self.axes, pos))

    def with_entries(self, entries) -> "Tensor":
        return Tensor(self.field, self.axes, entries)

    def flat(self) -> np.ndarray:
        return self.entries.reshape(-1)

    # -- linear structure -------------------------------------------------

    def _check_compatible(self, other):
        if not isinstance(other, Tensor) or not self.same_shape(other):
            raise ShapeError("tensors differ in field or axes")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_entries(self.entries + other.entries)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_entries(self.entries - other.entries)

    def __neg__(self):
        return self.with_entries(-self.entries)

    def __mul__(self, scalar):
        return self.with_entries(self.entries * (int(scalar) % self.p))

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, Tensor)
            and self.same_shape(other)
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash((self.p, self.axes, self.entries.tobytes()))

    def __repr__(self):
        dims = "x".join(str(len(a)) for a in self.axes)
        return f"Tensor(F_{self.p}, {dims}, nnz={int(np.count_nonzero(self.entries))})"


def combine(coeffs: Sequence[int], tensors: Sequence[Tensor]) -> Tensor:
    """``sum(c * T)`` over F_p; needs at least one tensor for the shape."""
    if not tensors:
        raise ShapeError("cannot combine an empty list of tensors")
    first = tensors[0]
    acc = np.zeros(first.shape, dtype=np.int64)
    for c, t in zip(coeffs, tensors, strict=True):
        first._check_compatible(t)
        if c % first.p:
            acc += int(c) * t.entries
    return first.with_entries(acc)


@dataclass(frozen=True)
class SubspaceBasis:
    """An ordered list of same-shape tensors spanning a subspace.

    ``normalized`` means the lex leads are pairwise distinct, sorted and
    scaled to 1.  ``deficient`` is set when elimination found the input
    to be linearly dependent (the basis then has fewer members).
    """

    tensors: tuple
    normalized: bool = False
    deficient: bool = False

    def __post_init__(self):
        ts = tuple(self.tensors)
        object.__setattr__(self, "tensors", ts)
        for t in ts[1:]:
            if not t.same_shape(ts[0]):
                raise ShapeError("basis members must share field and axes")

    def __len__(self):
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)

    def __getitem__(self, i):
        return self.tensors[i]

    @property
    def dim(self) -> int:
        return len(self.tensors)

    @property
    def p(self) -> int:
        return self.tensors[0].p

    def matrix(self) -> np.ndarray:
        """Members flattened (lex order) as rows."""
        if not self.tensors:
            return np.zeros((0, 0), dtype=np.int64)
        return np.stack([t.flat() for t in self.tensors])


# ---------------------------------------------------------------------------
# multilinear evaluation, restriction, permutation


def _mod_contract(arr, x, p):
    return np.tensordot(arr, x, axes=([arr.ndim - 1], [0])) % p


def evaluate(T: Tensor, *xs) -> int:
    """``T(x_1, ..., x_d) = sum T[i_1..i_d] x_1[i_1] ... x_d[i_d] mod p``."""
    if len(xs) != T.order:
        raise ShapeError(f"need {T.order} vectors, got {len(xs)}")
    arr = T.entries
    for j in range(T.order - 1, -1, -1):
        x = np.asarray(xs[j], dtype=np.int64) % T.p
        if x.shape != (T.shape[j],):
            raise ShapeError(f"vector {j + 1} has shape {x.shape}, axis size {T.shape[j]}")
        arr = _mod_contract(arr, x, T.p)
    return int(arr)


def _label_positions(axis, labels, j):
    index = {lab: i for i, lab in enumerate(axis)}
    try:
        return [index[int(s)] for s in labels]
    except KeyError as e:
        raise DomainError(f"label {e.args[0]} not in axis {j + 1}") from None


def restrict_rect(T: Tensor, *sets) -> Tensor:
    """Sub-tensor on ``S_1 x ... x S_d`` (each ``S_j`` a subset of axis j)."""
    if len(sets) != T.order:
        raise ShapeError(f"need {T.order} index sets, got {len(sets)}")
    sets = [sorted({int(s) for s in S}) for S in sets]
    pos = [_label_positions(ax, S, j) for j, (ax, S) in enumerate(zip(T.axes, sets))]
    return Tensor(T.field, sets, T.entries[np.ix_(*pos)])


def restrict(T: Tensor, S) -> Tensor:
    """Principal restriction ``T|_S`` on ``S x ... x S``."""
    return restrict_rect(T, *([S] * T.order))


def permute_legs(T: Tensor, perms) -> Tensor:
    """Relabel each leg: ``Q[pi_1(i_1), ..., pi_d(i_d)] = T[i_1, ..., i_d]``.

    ``perms[j]`` is a mapping label -> label on axis j, or ``None`` for
    the identity.
    """
    if len(perms) != T.order:
        raise ShapeError(f"need {T.order} permutations, got {len(perms)}")
    arr = T.entries
    for j, (ax, pi) in enumerate(zip(T.axes, perms)):
        if pi is None:
            continue
        pi = {int(k): int(v) for k, v in dict(pi).items()}
        if set(pi) != set(ax) or set(pi.values()) != set(ax):
            raise DomainError(f"map on axis {j + 1} is not a bijection of its labels")
        pos = {lab: i for i, lab in enumerate(ax)}
        # out[pos[pi[lab]]] = in[pos[lab]]
        src = np.empty(len(ax), dtype=np.int64)
        for lab in ax:
            src[pos[pi[lab]]] = pos[lab]
        arr = np.take(arr, src, axis=j)
    return T.with_entries(arr)


def lex_lead(T: Tensor):
    """First nonzero coordinate in lex order (leftmost index most
    significant), or ``None`` for the zero tensor."""
    flat = np.flatnonzero(T.entries)
    if flat.size == 0:
        return None
    pos = np.unravel_index(int(flat[0]), T.shape)
    return tuple(ax[int(i)] for ax, i in zip(T.axes, pos))


# ---------------------------------------------------------------------------
# Gaussian elimination of tensors viewed as vectors


@dataclass(frozen=True)
class Echelon:
    basis: SubspaceBasis
    transform: np.ndarray  # rows: coefficients of each echelon member in the input
    leads: tuple
    dependencies: np.ndarray  # rows: relations among the inputs


def echelon(basis) -> Echelon:
    """Eliminate ``basis`` to reduced echelon form, keeping the change of basis."""
    tensors = list(basis)
    if not tensors:
        raise ShapeError("empty basis")
    t0 = tensors[0]
    p = t0.p
    A = np.stack([t.flat() for t in tensors])
    R, pivots, X = rref(A, p, transform=True)
    k = len(pivots)
    out = tuple(t0.with_entries(R[i].reshape(t0.shape)) for i in range(k))
    leads = tuple(lex_lead(t) for t in out)
    sb = SubspaceBasis(out, normalized=True, deficient=k < len(tensors))
    return Echelon(sb, X[:k], leads, X[k:])


def gaussian_eliminate(basis) -> SubspaceBasis:
    """Same span, pairwise-distinct lex leads in increasing order, leads scaled to 1.

    Dependent input yields a smaller basis with ``deficient=True``.
    """
    return echelon(basis).basis


# ---------------------------------------------------------------------------
# Veronese and symmetric tensors


def veronese(x, d: int, p) -> Tensor:
    """``x (x) x (x) ... (x) x`` (d factors)."""
    if d < 1:
        raise DomainError("order must be at least 1")
    p = as_field(p).p
    x = np.asarray(x, dtype=np.int64) % p
    arr = np.ones((), dtype=np.int64)
    for _ in range(d):
        arr = np.multiply.outer(arr, x) % p
    return Tensor.from_array(arr, p)


def monomials(n: int, d: int) -> list:
    """Degree-d multisets of ``0..n-1`` in lex order (there are C(n+d-1, d))."""
    return list(itertools.combinations_with_replacement(range(n), d))


def monomial_vector(x, d: int, p) -> np.ndarray:
    """Coordinates ``x^alpha`` over all degree-d monomials ``alpha``."""
    p = as_field(p).p
    if p <= d:
        raise UnsupportedParametersError(
            f"monomial coordinates need p > d (p={p}, d={d}); use veronese() instead"
        )
    x = np.asarray(x, dtype=np.int64) % p
    return monomial_matrix(x[None, :], d, p)[0]


def monomial_matrix(points, d: int, p: int) -> np.ndarray:
    """Rows ``monomial_vector(x)`` for each row ``x`` of ``points``."""
    points = np.asarray(points, dtype=np.int64) % p
    if points.ndim != 2:
        raise ShapeError("points must be a 2-d array")
    n = points.shape[1]
    idx = np.array(monomials(n, d), dtype=np.int64).reshape(-1, d)
    out = np.ones((points.shape[0], idx.shape[0]), dtype=np.int64)
    for j in range(d):
        out = out * points[:, idx[:, j]] % p
    return out


def inner_product(T: Tensor, Q: Tensor) -> int:
    T._check_compatible(Q)
    return int((T.entries * Q.entries).sum() % T.p)


def symmetrize(T: Tensor) -> Tensor:
    """Entry ``(i_1..i_d)`` becomes ``sum over pi in S_d of T[i_pi(1), ..., i_pi(d)]``."""
    if not T.is_principal():
        raise ShapeError("symmetrize needs equal axes")
    acc = np.zeros(T.shape, dtype=np.int64)
    for perm in itertools.permutations(range(T.order)):
        acc += np.transpose(T.entries, perm)
    return T.with_entries(acc)


def is_symmetric(T: Tensor) -> bool:
    if not T.is_principal():
        return False
    return all(
        np.array_equal(T.entries, np.transpose(T.entries, perm))
        for perm in itertools.permutations(range(T.order))
    )


def symmetric_from_monomials(coeffs, n: int, d: int, p: int) -> Tensor:
    """The symmetric tensor whose entries on each monomial orbit equal ``coeffs``."""
    arr = np.zeros((n,) * d, dtype=np.int64)
    for c, alpha in zip(coeffs, monomials(n, d), strict=True):
        for idx in set(itertools.permutations(alpha)):
            arr[idx] = c
    return Tensor.from_array(arr, p)


def multinomial(alpha) -> int:
    """Number of distinct orderings of the multiset ``alpha``."""
    out = math.factorial(len(alpha))
    for _, grp in itertools.groupby(sorted(alpha)):
        out //= math.factorial(len(list(grp)))
    return out


def full_space_basis(p, n: int, d: int) -> SubspaceBasis:
    """The unit tensors of ``F_p^{n x ... x n}`` in lex order."""
    tensors = []
    for coord in itertools.product(range(1, n + 1), repeat=d):
        tensors.append(Tensor.unit(p, n, coord))
    return SubspaceBasis(tuple(tensors), normalized=True)


# ---------------------------------------------------------------------------
# JSON


def tensor_to_json(T: Tensor) -> dict:
    entries = [[*coord, T[coord]] for coord in T.nonzero()]
    return {"p": T.p, "axes": [list(a) for a in T.axes], "entries": entries}


def _nested_depth(x):
    depth = 0
    while isinstance(x, list):
        depth += 1
        x = x[0] if x else None
    return depth


def tensor_from_json(obj, p=None) -> Tensor:
    """Parse a tensor document.

    The canonical form is sparse, ``{"p", "axes", "entries": [[i_1..i_d, v], ...]}``
    with omitted coordinates zero.  A dense nested list (order <= 3) is
    accepted under ``"dense"``, or under ``"entries"`` when ``axes`` is absent.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    p = obj.get("p", p)
    if p is None:
        raise DomainError("tensor JSON needs a field modulus 'p'")
    axes = obj.get("axes")
    if "dense" in obj or axes is None:
        dense = obj.get("dense", obj.get("entries"))
        if dense is None:
            raise DomainError("tensor JSON needs 'entries' or 'dense'")
        if _nested_depth(dense) > 3:
            raise DomainError("dense tensor form is accepted for order <= 3 only")
        return Tensor.from_array(dense, p, axes)
    axes = [_check_labels(a) for a in axes]
    arr = np.zeros(tuple(len(a) for a in axes), dtype=np.int64)
    probe = Tensor(p, axes, arr)
    for e in obj.get("entries", []):
        if len(e) != len(axes) + 1:
            raise ShapeError(f"sparse entry {e} should have {len(axes)} labels and a value")
        arr[probe._positions(tuple(e[:-1]))] = e[-1]
    return Tensor(p, axes, arr)


def basis_to_json(basis: Iterable[Tensor]) -> dict:
    tensors = list(basis)
    p = tensors[0].p if tensors else None
    return {"p": p, "tensors": [tensor_to_json(t) for t in tensors]}


def basis_from_json(obj) -> SubspaceBasis:
    if isinstance(obj, str):
        obj = json.loads(obj)
    p = obj.get("p")
    return SubspaceBasis(tuple(tensor_from_json(t, p) for t in obj["tensors"]))
