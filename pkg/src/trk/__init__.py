"""Analytic rank of tensors over prime fields.

Exact bias and analytic rank, extraction of subspaces whose nonzero
elements all have large analytic rank (with re-checkable certificates),
and random-difference Szemeredi experiments over F_p^n.
"""

from .algebra import (
    SubspaceBasis,
    Tensor,
    evaluate,
    full_space_basis,
    gaussian_eliminate,
    inner_product,
    lex_lead,
    monomial_vector,
    permute_legs,
    restrict,
    restrict_rect,
    symmetrize,
    veronese,
)
from .extract import ExtractionCertificate, extract_subspace, verify_certificate
from .field import PrimeField
from .rank import (
    BiasValue,
    RankThreshold,
    arank,
    bias,
    bias_leq_threshold,
    c_constant,
    coset_bias,
    matrix_rank,
    prank_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "BiasValue",
    "ExtractionCertificate",
    "PrimeField",
    "RankThreshold",
    "SubspaceBasis",
    "Tensor",
    "arank",
    "bias",
    "bias_leq_threshold",
    "c_constant",
    "coset_bias",
    "evaluate",
    "extract_subspace",
    "full_space_basis",
    "gaussian_eliminate",
    "inner_product",
    "lex_lead",
    "matrix_rank",
    "monomial_vector",
    "permute_legs",
    "prank_oracle",
    "restrict",
    "restrict_rect",
    "symmetrize",
    "verify_certificate",
    "veronese",
]
