"""Extract a subspace of high-rank tensors and check the certificate.

Run with ``python3 demos/extraction.py``.
"""
import json

from trk import extract_subspace, full_space_basis, verify_certificate
from trk.extract import projective_points
from trk.algebra import combine
from trk.rank import bias

# all 3-tensors on F_2^6; ask for r = 1, so s = floor(6 / 3) = 2
V = full_space_basis(2, 6, 3)
cert = extract_subspace(V, t=6, r=1)
print("dim V =", V.dim, " s =", cert.s, " threshold =", cert.threshold.fraction)
print("pivot matching", cert.matching, " f =", cert.f, " lambdas =", cert.lambdas)

# every nonzero element of W, up to scaling, stays under the threshold
for lam in projective_points(2, cert.s):
    T = combine(lam, cert.W_basis.tensors)
    print("  ", lam, bias(T).fraction)

ok, report = verify_certificate(cert)
print("certificate ok:", ok)
print(json.dumps(report["checks"], indent=1))

# matrices over F_3, asking for rank-2 blocks
cert = extract_subspace(full_space_basis(3, 4, 2), t=4, r=2)
print("p=3 d=2: s =", cert.s, " biases", [str(b.fraction) for _, b in cert.element_biases])
