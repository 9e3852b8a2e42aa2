import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import diag222
from trk.algebra import (
    SubspaceBasis,
    Tensor,
    basis_from_json,
    basis_to_json,
    combine,
    echelon,
    evaluate,
    full_space_basis,
    gaussian_eliminate,
    inner_product,
    is_symmetric,
    lex_lead,
    monomial_vector,
    permute_legs,
    restrict,
    restrict_rect,
    symmetrize,
    tensor_from_json,
    tensor_to_json,
    veronese,
)
from trk.errors import DomainError, ShapeError, UnsupportedParametersError
from trk.field import solve_mod_p

EYE2 = Tensor.from_array(np.eye(2, dtype=np.int64), 2)


@st.composite
def tensors(draw, max_d=3, max_n=3, primes=(2, 3, 5)):
    p = draw(st.sampled_from(primes))
    d = draw(st.integers(1, max_d))
    n = draw(st.integers(1, max_n))
    flat = draw(st.lists(st.integers(0, p - 1), min_size=n**d, max_size=n**d))
    return Tensor.from_array(np.array(flat).reshape((n,) * d), p)


def test_tensor_validation():
    with pytest.raises(ShapeError):
        Tensor(2, [[1, 2]], [1, 0, 1])
    with pytest.raises(DomainError):
        Tensor(2, [[2, 1]], [1, 0])
    T = Tensor(3, [[1, 4]], [5, -1])
    assert T.entries.tolist() == [2, 2]
    with pytest.raises(ValueError):
        T.entries[0] = 1


def test_evaluate_examples():
    assert evaluate(EYE2, [1, 0], [1, 1]) == 1
    assert evaluate(diag222(), [1, 1], [1, 1], [1, 1]) == 0
    assert evaluate(diag222(), [0, 0], [1, 1], [1, 1]) == 0
    with pytest.raises(ShapeError):
        evaluate(EYE2, [1, 0, 0], [1, 1])


@settings(max_examples=60, deadline=None)
@given(tensors(), st.data())
def test_evaluate_multilinear(T, data):
    vec = lambda: data.draw(st.lists(st.integers(0, T.p - 1), min_size=T.shape[0], max_size=T.shape[0]))
    xs = [vec() for _ in range(T.order)]
    y = vec()
    slot = data.draw(st.integers(0, T.order - 1))
    xy = list(xs)
    xy[slot] = [(a + b) % T.p for a, b in zip(xs[slot], y)]
    only_y = list(xs)
    only_y[slot] = y
    assert evaluate(T, *xy) == (evaluate(T, *xs) + evaluate(T, *only_y)) % T.p


def test_restrict_examples():
    assert restrict(EYE2, [1, 2]) == EYE2
    assert restrict(EYE2, [1]).entries.tolist() == [[1]]
    R = restrict(diag222(), [2])
    assert R.axes == ((2,),) * 3 and R[(2, 2, 2)] == 1
    with pytest.raises(DomainError):
        restrict(EYE2, [3])


def test_restrict_rect_examples():
    assert restrict_rect(EYE2, [1, 2], [1, 2]) == EYE2
    assert restrict_rect(EYE2, [1], [2]).entries.tolist() == [[0]]
    assert restrict_rect(diag222(), [2], [2], [2]).entries.tolist() == [[[1]]]


@settings(max_examples=50, deadline=None)
@given(tensors(max_n=4), st.data())
def test_restrict_composition(T, data):
    labels = list(range(1, T.shape[0] + 1))
    S1 = data.draw(st.sets(st.sampled_from(labels)))
    S2 = data.draw(st.sets(st.sampled_from(sorted(S1)))) if S1 else set()
    assert restrict(restrict(T, S1), S2) == restrict(T, S1 & S2)


def test_permute_legs():
    M = Tensor.from_array([[0, 1], [0, 0]], 2)
    assert permute_legs(M, [None, None]) == M
    assert permute_legs(M, [None, {1: 2, 2: 1}]).entries.tolist() == [[1, 0], [0, 0]]
    with pytest.raises(DomainError):
        permute_legs(M, [None, {1: 1, 2: 1}])


@settings(max_examples=40, deadline=None)
@given(tensors(), st.randoms(use_true_random=False))
def test_permute_inverse(T, rnd):
    perms, inv = [], []
    for ax in T.axes:
        img = list(ax)
        rnd.shuffle(img)
        pi = dict(zip(ax, img))
        perms.append(pi)
        inv.append({v: k for k, v in pi.items()})
    assert permute_legs(permute_legs(T, perms), inv) == T


def test_lex_lead():
    assert lex_lead(Tensor.zeros(2, (2, 2))) is None
    assert lex_lead(Tensor.unit(3, 4, (4, 4, 4))) == (4, 4, 4)
    assert lex_lead(Tensor.from_array([[0, 1], [1, 0]], 2)) == (1, 2)


def test_gaussian_eliminate_examples():
    a = Tensor.from_array([[1, 0], [0, 0]], 2)
    b = Tensor.from_array([[1, 1], [0, 0]], 2)
    out = gaussian_eliminate([a, b])
    assert [lex_lead(t) for t in out] == [(1, 1), (1, 2)]
    assert out.normalized and not out.deficient
    full = full_space_basis(3, 2, 2)
    out = gaussian_eliminate(full)
    assert [lex_lead(t) for t in out] == list(itertools.product((1, 2), repeat=2))
    dep = gaussian_eliminate([a, b, a + b])
    assert dep.deficient and len(dep) == 2


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_elimination_preserves_span(p, k, seed):
    rng = np.random.default_rng(seed)
    tensors_in = [Tensor.from_array(rng.integers(0, p, size=(2, 2, 2)), p) for _ in range(k)]
    ech = echelon(tensors_in)
    out = ech.basis
    leads = [lex_lead(t) for t in out]
    assert leads == sorted(set(leads))
    assert all(t[l] == 1 for t, l in zip(out, leads))
    # each input is an explicit combination of the outputs, and vice versa
    A = np.stack([t.flat() for t in out]).T if len(out) else np.zeros((8, 0), dtype=np.int64)
    for t in tensors_in:
        if len(out):
            c = solve_mod_p(A, t.flat(), p)
            assert c is not None and combine(c, out.tensors) == t
        else:
            assert t.is_zero()
    for row, t in zip(ech.transform, out):
        assert combine(row, tensors_in) == t


def test_veronese_examples():
    assert veronese([1, 1], 2, 2).entries.tolist() == [[1, 1], [1, 1]]
    assert veronese([0, 0, 0], 3, 5).is_zero()
    assert veronese([1, 2], 2, 3).entries.tolist() == [[1, 2], [2, 1]]


@settings(max_examples=50, deadline=None)
@given(tensors(max_d=3, max_n=3), st.data())
def test_veronese_pairing(T, data):
    if not T.is_principal():
        return
    x = data.draw(st.lists(st.integers(0, T.p - 1), min_size=T.shape[0], max_size=T.shape[0]))
    assert inner_product(T, veronese(x, T.order, T.p)) == evaluate(T, *([x] * T.order))


def test_monomial_vector():
    assert len(monomial_vector([1, 2, 3], 2, 5)) == 6
    assert not monomial_vector([0, 0, 0], 2, 5).any()
    assert monomial_vector([1, 1], 2, 3).tolist() == [1, 1, 1]
    with pytest.raises(UnsupportedParametersError):
        monomial_vector([1, 1], 2, 2)


def test_inner_product_examples():
    T = Tensor.from_array(np.arange(8).reshape(2, 2, 2), 5)
    assert inner_product(T, Tensor.unit(5, 2, (2, 2, 2))) == T[(2, 2, 2)]
    assert inner_product(T, Tensor.zeros(5, (2, 2, 2))) == 0
    sym = symmetrize(Tensor.unit(3, 2, (1, 2)))
    assert inner_product(sym, Tensor.unit(3, 2, (1, 2))) == 1
    with pytest.raises(ShapeError):
        inner_product(T, EYE2)


def test_symmetrize_examples():
    S = Tensor.from_array([[1, 2], [2, 0]], 3)
    assert symmetrize(S) == 2 * S
    assert symmetrize(Tensor.unit(3, 2, (1, 2))).entries.tolist() == [[0, 1], [1, 0]]
    # each arrangement of (1,1,2) is reached by 2 of the 6 permutations
    slots = {(1, 1, 2), (1, 2, 1), (2, 1, 1)}
    counts = {c: sum(tuple(c[i] for i in pi) == (1, 1, 2) for pi in itertools.permutations(range(3))) for c in slots}
    assert set(counts.values()) == {2}
    assert symmetrize(Tensor.unit(2, 2, (1, 1, 2))).is_zero()
    out = symmetrize(Tensor.unit(3, 2, (1, 1, 2)))
    assert set(out.nonzero()) == slots and all(out[c] == 2 for c in slots)
    assert is_symmetric(out)


def _sym_nonzero_witness(T):
    coord = next(T.nonzero())
    return symmetrize(Tensor.unit(T.p, T.shape[0], coord))


def test_nondegenerate_on_symmetric_exhaustive():
    # every nonzero symmetric 2x2 over F_3
    for a, b, c in itertools.product(range(3), repeat=3):
        T = Tensor.from_array([[a, b], [b, c]], 3)
        if T.is_zero():
            continue
        assert inner_product(T, _sym_nonzero_witness(T)) != 0


def test_nondegenerate_on_symmetric_random(rng):
    for p, d, n in [(5, 3, 3), (5, 4, 2), (7, 3, 3), (3, 2, 4)]:
        for _ in range(20):
            T = symmetrize(Tensor.from_array(rng.integers(0, p, size=(n,) * d), p))
            if T.is_zero():
                continue
            assert inner_product(T, _sym_nonzero_witness(T)) != 0


def test_json_round_trip(rng):
    T = Tensor(3, [[1, 3, 4], [2, 5]], rng.integers(0, 3, size=(3, 2)))
    assert tensor_from_json(tensor_to_json(T)) == T
    dense = tensor_from_json({"p": 2, "entries": [[1, 0], [0, 1]]})
    assert dense == EYE2
    sq = tensor_from_json({"p": 2, "axes": [[1, 2, 3]] * 2, "dense": np.eye(3, dtype=int).tolist()})
    assert sq.entries.trace() == 3
    B = SubspaceBasis((EYE2, Tensor.unit(2, 2, (1, 2))))
    assert basis_from_json(basis_to_json(B)).tensors == B.tensors
    with pytest.raises(DomainError):
        tensor_from_json({"p": 2, "entries": [[[[1]]]]})
