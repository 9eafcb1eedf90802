"""
Search-space parametrizations: unitaries U = exp(i sum_j a_j lambda_j) over a
generator set, the states and projective measurements they induce, and the
copy-permutation-invariant generator subset used for k-copy measurements.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb
from typing import Optional, Tuple

import numpy as np

from magbound.errors import DimensionError
from magbound.services.fisher import Measurement
from magbound.utils.linalg import GeneratorSet, generator_set, herm_exp, pauli_string


def _elements(gens: GeneratorSet | np.ndarray) -> np.ndarray:
    return gens.elements if isinstance(gens, GeneratorSet) else np.asarray(gens)


def unitary_from_coeffs(coeffs: np.ndarray, gens: GeneratorSet | np.ndarray) -> np.ndarray:
    elements = _elements(gens)
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.size != elements.shape[0]:
        raise DimensionError(f"Expected {elements.shape[0]} coefficients, got {coeffs.size}")
    return herm_exp(np.tensordot(coeffs, elements, axes=1), 1.0)


def perm_invariant_dimension(q: int, k: int) -> int:
    """Number of k-multisets of the 4^q single-block labels, identity included."""
    return comb(4**q + k - 1, k)


def perm_invariant_labels(q: int, k: int) -> Tuple[Tuple[str, ...], ...]:
    """Block-label multisets, each as a sorted tuple of q-qubit base-4 labels."""
    if q not in (1, 2) or k not in (1, 2, 3):
        raise DimensionError(f"Permutation-invariant basis supports q in (1, 2), k in (1, 2, 3), got q={q}, k={k}")
    blocks = ["".join(map(str, digits)) for digits in itertools.product(range(4), repeat=q)]
    return tuple(itertools.combinations_with_replacement(blocks, k))


@lru_cache(maxsize=None)
def perm_invariant_basis(q: int, k: int) -> GeneratorSet:
    """
    Symmetrized Pauli products on k blocks of q qubits.

    Each element sums the distinct block orderings of one multiset and is
    scaled by 1/sqrt(#orderings). The all-identity multiset is dropped, so
    ``len(result) == perm_invariant_dimension(q, k) - 1``.
    """
    identity = "0" * q
    labels = []
    elements = []
    for multiset in perm_invariant_labels(q, k):
        if all(block == identity for block in multiset):
            continue
        orderings = sorted(set(itertools.permutations(multiset)))
        total = sum(pauli_string("".join(order)) for order in orderings)
        labels.append("|".join(multiset))
        elements.append(total / np.sqrt(len(orderings)))
    stacked = np.stack(elements)
    stacked.setflags(write=False)
    return GeneratorSet(n_qubits=q * k, labels=tuple(labels), elements=stacked)


def measurement_generators(n_qubits_per_copy: int, k: int, symmetric: bool = True) -> GeneratorSet:
    if symmetric:
        return perm_invariant_basis(n_qubits_per_copy, k)
    return generator_set(n_qubits_per_copy * k)


def param_state(coeffs: np.ndarray, n_qubits: int = 2, gens: Optional[GeneratorSet] = None) -> np.ndarray:
    """U(coeffs)|0...0>."""
    gens = gens or generator_set(n_qubits)
    return unitary_from_coeffs(coeffs, gens)[:, 0]


def param_projective(coeffs: np.ndarray, gens: GeneratorSet) -> Measurement:
    """Projective measurement onto the columns of U(coeffs)."""
    return Measurement.projective(unitary_from_coeffs(coeffs, gens))


def swap_copy_blocks(matrix: np.ndarray, n_qubits_per_copy: int, k: int, order: Tuple[int, ...]) -> np.ndarray:
    """Conjugate by the permutation that reorders the k copy blocks."""
    dims = [2**n_qubits_per_copy] * k
    tensor = np.asarray(matrix).reshape(dims + dims)
    perm = list(order) + [k + o for o in order]
    d = int(np.prod(dims))
    return tensor.transpose(perm).reshape(d, d)
