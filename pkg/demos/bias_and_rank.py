"""Bias, analytic rank and partition rank on small tensors.

Run with ``python3 demos/bias_and_rank.py``.
"""
import numpy as np

from trk import Tensor, arank, bias, matrix_rank, prank_oracle

# the diagonal 2x2x2 tensor over F_2
E = Tensor.zeros(2, (2, 2, 2))
E = E + Tensor.unit(2, 2, (1, 1, 1)) + Tensor.unit(2, 2, (2, 2, 2))
b = bias(E)
print("bias(diag 2x2x2) =", b.fraction, " arank =", round(b.arank, 4))

# bias is multiplicative over direct sums, so each extra diagonal cell
# multiplies it by 3/4
for n in range(1, 5):
    D = Tensor.zeros(2, (n, n, n))
    for i in range(1, n + 1):
        D = D + Tensor.unit(2, n, (i, i, i))
    print(f"  n={n}: bias {bias(D).fraction}")

# for matrices, arank is exactly the matrix rank
rng = np.random.default_rng(0)
for _ in range(3):
    M = Tensor.from_array(rng.integers(0, 3, size=(4, 4)), 3)
    print("matrix rank", matrix_rank(M), " arank", round(arank(M), 6))

# partition rank by exhaustive search (tiny shapes only); never below arank
T = Tensor.from_array(rng.integers(0, 2, size=(2, 2, 2)), 2)
print("random 2x2x2: prank", prank_oracle(T), " arank", round(arank(T), 4))
