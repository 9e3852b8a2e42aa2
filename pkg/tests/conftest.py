import cmath
import itertools
from fractions import Fraction

import numpy as np
import pytest

from trk.algebra import Tensor


def brute_bias(T: Tensor):
    """Character average over every (x_1, ..., x_d), no contraction trick.

    Exact Fraction for p = 2 (characters are +-1), complex float otherwise.
    """
    p = T.p
    spaces = [list(itertools.product(range(p), repeat=k)) for k in T.shape]
    hist = [0] * p
    for xs in itertools.product(*spaces):
        arr = T.entries
        for x in reversed(xs):
            arr = np.tensordot(arr, np.array(x, dtype=np.int64), axes=([arr.ndim - 1], [0])) % p
        hist[int(arr)] += 1
    total = sum(hist)
    if p == 2:
        return Fraction(hist[0] - hist[1], total)
    return sum(h * cmath.exp(2j * cmath.pi * a / p) for a, h in enumerate(hist)) / total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def diag222():
    a = np.zeros((2, 2, 2), dtype=np.int64)
    a[0, 0, 0] = a[1, 1, 1] = 1
    return Tensor.from_array(a, 2)
