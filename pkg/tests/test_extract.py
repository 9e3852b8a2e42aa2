import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import brute_bias
from trk.algebra import SubspaceBasis, Tensor, combine, full_space_basis, restrict
from trk.errors import InternalInvariantError, PreconditionError
from trk.extract import (
    ExtractionCertificate,
    MatchingId,
    PivotInfo,
    all_matchings,
    build_Q,
    cover_assign,
    extract_subspace,
    lambda_boost,
    matching_cells,
    pigeonhole_select,
    projective_points,
    verify_certificate,
)
from trk.field import rank_mod_p
from trk.rank import bias, c_constant, matrix_rank, prank_oracle


def test_matching_cells_examples():
    assert matching_cells(MatchingId(1, (0,)), 2, 2) == [(1, 1), (2, 2)]
    assert matching_cells(MatchingId(1, (1,)), 2, 2) == [(1, 2)]
    assert matching_cells(MatchingId(1, (1, 0)), 3, 3) == [(1, 2, 1), (2, 3, 2)]


def test_cover_assign_examples():
    assert cover_assign((1, 1, 1, 1), 4, 4) == MatchingId(1, (0, 0, 0))
    m = cover_assign((2, 3, 2), 3, 3)
    assert m.base == (0, 1, 0)
    assert (2, 3, 2) in matching_cells(m, 3, 3)


@pytest.mark.parametrize("n,d", [(n, d) for n in range(1, 5) for d in range(2, 5)])
def test_cover_exhaustive(n, d):
    for coord in itertools.product(range(1, n + 1), repeat=d):
        assert coord in matching_cells(cover_assign(coord, n, d), n, d)
    ids = all_matchings(n, d)
    assert len(ids) == d * n ** (d - 1)
    assert len({m.canonical() for m in ids}) == n**d - (n - 1) ** d <= d * n ** (d - 1)


def test_pigeonhole_full_space():
    n, d = 4, 3
    leads = list(itertools.product(range(1, n + 1), repeat=d))
    piv = pigeonhole_select(leads, n, d, t=n, r=1)
    assert piv.matching.base == (0, 0, 0)
    assert piv.f == (1,)  # rs = floor(4/3) = 1
    assert leads[piv.selected[0]] == (1, 1, 1)


def test_pigeonhole_rs_and_order():
    n, d = 6, 2
    leads = list(itertools.product(range(1, n + 1), repeat=d))
    piv = pigeonhole_select(leads, n, d, t=6, r=1)
    assert piv.rs == 3 and piv.f == (1, 2, 3)
    assert [leads[i] for i in piv.selected] == [(1, 1), (2, 2), (3, 3)]


def test_pigeonhole_t_equals_d():
    leads = list(itertools.product(range(1, 4), repeat=2))
    piv = pigeonhole_select(leads, 3, 2, t=2, r=1)
    assert piv.rs == 1


def test_pigeonhole_tie_break():
    # n=2, d=2, t=1: two leads on different one-cell matchings
    leads = [(2, 1), (1, 2)]
    with pytest.raises(PreconditionError):
        pigeonhole_select(leads, 2, 2, t=1, r=1)  # floor(1/2) = 0
    n, d = 3, 2
    leads = [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)]
    piv = pigeonhole_select(leads, n, d, t=2, r=1)
    assert piv.matching == MatchingId(1, (1,))
    assert [leads[i] for i in piv.selected] == [(1, 2)]
    again = pigeonhole_select(list(reversed(leads)), n, d, t=2, r=1)
    assert again.matching == piv.matching


def test_pigeonhole_preconditions():
    with pytest.raises(PreconditionError):
        pigeonhole_select([(1, 1)], 2, 2, t=2, r=1)
    with pytest.raises(PreconditionError):
        pigeonhole_select([(1, 1)] * 4, 2, 2, t=2, r=1)


def test_build_Q_single_entry():
    piv = PivotInfo(MatchingId(1, (0, 0)), (0, 1), (2, 4))
    T = Tensor.unit(3, 4, (4, 4, 4), 2)
    Q = build_Q(T, piv, 2)
    assert Q.shape == (2, 2, 2) and Q[(2, 2, 2)] == 2 and set(Q.nonzero()) == {(2, 2, 2)}


def test_build_Q_reads_rectangle():
    n = 4
    piv = PivotInfo(MatchingId(1, (1,)), (0, 1), (1, 3))  # cells (1,2), (3,4)
    arr = np.zeros((n, n), dtype=int)
    arr[2, 3] = 1  # lead (3,4)
    arr[3, 1] = 2
    arr[2, 1] = 1  # (3,2) -> Q(2,1), ahead of the claimed lead
    T = Tensor.from_array(arr, 3)
    with pytest.raises(InternalInvariantError):
        build_Q(T, piv, 2)
    arr[2, 1] = 0
    Q = build_Q(Tensor.from_array(arr, 3), piv, 2)
    assert Q.entries.tolist() == [[0, 0], [0, 1]]  # (4,2) lies outside the rectangle


def test_lambda_boost_base_case():
    p, d = 2, 3
    rho, _ = c_constant(p, d)
    Q1 = Tensor.unit(p, 2, (1, 1, 1))
    lam, R, b = lambda_boost(Tensor.zeros(p, (2, 2, 2)), Q1, [1], rho)
    assert lam == 1 and R == Q1 and b.fraction == Fraction(3, 4)


def test_lambda_boost_tie_smallest():
    p = 3
    rho, _ = c_constant(p, 2)
    lam, _, b = lambda_boost(Tensor.zeros(p, (1, 1)), Tensor.unit(p, 1, (1, 1)), [1], rho)
    assert lam == 1  # lambda = 1 and 2 tie
    assert b.fraction == Fraction(1, 3)


def test_lambda_boost_extends_diagonal():
    p, d = 2, 3
    rho, _ = c_constant(p, d)
    n = 4
    R = Tensor.zeros(p, (n,) * d)
    for i in range(1, n + 1):
        lam, R, b = lambda_boost(R, Tensor.unit(p, n, (i,) * d), list(range(1, i + 1)), rho)
        assert lam == 1
        corner = restrict(R, range(1, i + 1))
        assert b.fraction == brute_bias(corner) == Fraction(3, 4) ** i
        assert b.fraction <= Fraction(7, 8) ** i


def test_lambda_boost_rejects_bad_pattern():
    rho, _ = c_constant(2, 2)
    Q = Tensor.from_array([[1, 0], [1, 1]], 2)  # (2,1) entry below the corner diagonal
    with pytest.raises(PreconditionError):
        lambda_boost(Tensor.zeros(2, (2, 2)), Q, [1, 2], rho)


def test_extract_full_space_p2_d3():
    cert = extract_subspace(full_space_basis(2, 6, 3), t=6, r=1)
    assert cert.s == 2
    assert len(cert.element_biases) == 3
    assert all(b.fraction <= Fraction(7, 8) for _, b in cert.element_biases)
    ok, rep = verify_certificate(cert)
    assert ok, rep


def test_extract_matrices():
    cert = extract_subspace(full_space_basis(2, 4, 2), t=4, r=2)
    assert cert.s == 1
    M = cert.W_basis[0]
    assert matrix_rank(M) >= 1
    assert bias(M).fraction <= Fraction(9, 16)
    assert verify_certificate(cert)[0]


def test_extract_vacuous():
    with pytest.raises(PreconditionError):
        extract_subspace(full_space_basis(2, 4, 3), t=4, r=2)


def test_extract_dimension_precondition(rng):
    V = full_space_basis(2, 3, 2).tensors[:5]
    with pytest.raises(PreconditionError):
        extract_subspace(SubspaceBasis(V), t=2, r=1)


def test_verify_detects_low_rank_member():
    cert = extract_subspace(full_space_basis(2, 6, 2), t=6, r=3)
    assert cert.s == 1 and verify_certificate(cert)[0]
    # swap in e_1 (x) e_1: partition rank 1, bias 1/2 > (3/4)^3
    low = Tensor.unit(2, 6, (1, 1))
    coeffs = [int(t == low) for t in cert.input_basis]
    cert.W_basis = SubspaceBasis((low,))
    cert.W_coeffs = [tuple(coeffs)]
    ok, rep = verify_certificate(cert)
    assert not ok
    assert rep["counterexample"]["coeffs"] == [1]
    assert not rep["checks"]["bias_bound"]


def test_verify_detects_tensor_outside_V():
    n, p = 3, 2
    V = SubspaceBasis(tuple(Tensor.unit(p, n, (i, j)) for i in (1, 2) for j in (1, 2, 3)))
    cert = extract_subspace(V, t=2, r=1)
    assert verify_certificate(cert)[0]
    cert.W_basis = SubspaceBasis((Tensor.unit(p, n, (3, 3)),))
    assert not verify_certificate(cert)[1]["checks"]["W_in_V"]


def test_projective_points():
    pts = list(projective_points(3, 2))
    assert len(pts) == (3**2 - 1) // 2
    assert all(next(x for x in pt if x) == 1 for pt in pts)
    assert list(projective_points(2, 1)) == [(1,)]


def test_certificate_json_round_trip():
    cert = extract_subspace(full_space_basis(3, 4, 3), t=4, r=1)
    doc = json.loads(json.dumps(cert.to_json()))
    back = ExtractionCertificate.from_json(doc)
    assert back.W_basis.tensors == cert.W_basis.tensors
    assert verify_certificate(back)[0]
    for (_, b), e in zip(cert.element_biases, doc["element_biases"]):
        T = combine(e["coeffs"], back.W_basis.tensors)
        assert bias(T) == b


def _random_subspace(rng, p, n, d, dim):
    while True:
        A = rng.integers(0, p, size=(dim, n**d))
        if rank_mod_p(A, p) == dim:
            return SubspaceBasis(tuple(Tensor.from_array(r.reshape((n,) * d), p) for r in A))


@pytest.mark.parametrize("seed", range(25))
def test_end_to_end_random(seed):
    rng = np.random.default_rng(1000 + seed)
    p = int(rng.choice([2, 3]))
    d = int(rng.choice([2, 3]))
    n = int(rng.integers(d, 7 if p == 2 else 6))
    t = int(rng.integers(d, n + 1))
    r = int(rng.integers(1, t // d + 1))
    V = _random_subspace(rng, p, n, d, t * n ** (d - 1))
    cert = extract_subspace(V, t, r)
    assert cert.s == t // (d * r)
    ok, rep = verify_certificate(cert)
    assert ok, rep
    # T*_j live on disjoint parts of the echelon basis
    assert rank_mod_p(np.stack([T.flat() for T in cert.W_basis]), p) == cert.s


def test_tightness_reference(rng):
    # V = U (x) F^3 with dim U = 2: every element has partition rank <= 2
    p, n, t = 2, 3, 2
    U = [np.array([1, 0, 1]), np.array([0, 1, 1])]
    V = SubspaceBasis(tuple(Tensor.from_array(np.outer(u, e), p) for u in U for e in np.eye(n, dtype=int)))
    cert = extract_subspace(V, t=t, r=1)
    assert verify_certificate(cert)[0]
    for lam in projective_points(p, cert.s):
        assert prank_oracle(combine(lam, cert.W_basis.tensors)) <= t
