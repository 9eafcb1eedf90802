"""
Dense complex linear algebra and quantum primitives for 1 to 6 qubits.

Conventions
-----------
- Qubit ordering is big-endian: qubit 0 is the most significant index block,
  so ``np.kron(a, b)`` puts ``a`` on qubit 0.
- Kets, density matrices and Hermitian operators are plain ``numpy`` arrays.
  The ``as_*`` helpers validate them at the boundary of the library.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Iterable, Sequence, Tuple

import numpy as np

from magbound.errors import DimensionError

MAX_QUBITS = 6
CONSTRUCTION_TOL = 1e-12
VERIFY_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS: Tuple[np.ndarray, ...] = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Pauli tensor products over ``n_qubits`` without the global identity."""

    n_qubits: int
    labels: Tuple[str, ...]
    elements: np.ndarray  # shape (4**n - 1, d, d)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def n_qubits_for_dim(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if dim < 2 or 2**n != dim:
        raise DimensionError(f"Dimension {dim} is not a power of two >= 2")
    return n


def as_ket(amplitudes: Sequence[complex] | np.ndarray, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n_qubits_for_dim(psi.size)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > tol:
        raise ValueError(f"Ket is not normalized (squared norm {norm:.3e})")
    return psi


def normalized_ket(amplitudes: Sequence[complex] | np.ndarray) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("Cannot normalize the zero vector")
    return as_ket(psi / norm)


def as_hermitian(matrix: np.ndarray, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    h = np.asarray(matrix, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(h), initial=0.0)):
        raise ValueError("Operator is not Hermitian")
    return h


def as_density_matrix(matrix: np.ndarray, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    rho = as_hermitian(matrix, tol)
    n_qubits_for_dim(rho.shape[0])
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("Density matrix does not have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -VERIFY_TOL:
        raise ValueError("Density matrix has negative eigenvalues")
    return rho


def projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, factors)


def pauli_string(label: str) -> np.ndarray:
    """Tensor product for a base-4 label, e.g. ``"30"`` is σz ⊗ I."""
    return kron_all(PAULIS[int(ch)] for ch in label)


@lru_cache(maxsize=None)
def generator_set(n_qubits: int) -> GeneratorSet:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise DimensionError(f"generator_set supports 1..{MAX_QUBITS} qubits, got {n_qubits}")
    labels = tuple(
        "".join(str(digit) for digit in digits)
        for digits in itertools.product(range(4), repeat=n_qubits)
        if any(digits)
    )
    elements = np.stack([pauli_string(label) for label in labels])
    elements.setflags(write=False)
    return GeneratorSet(n_qubits=n_qubits, labels=labels, elements=elements)


def herm_exp(h: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """exp(i * scale * H) through the eigendecomposition of H."""
    h = as_hermitian(h, tol=1e-10)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(1j * scale * evals)) @ evecs.conj().T


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def is_unitary(u: np.ndarray, tol: float = VERIFY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def concurrence(r) -> float:
    """2|r1 r4 - r2 r3| for a real two-qubit state or its amplitude vector."""
    r1, r2, r3, r4 = (float(x) for x in getattr(r, "r", r))
    return 2.0 * abs(r1 * r4 - r2 * r3)


def partial_trace(rho: np.ndarray, keep: Sequence[int], n_qubits: int) -> np.ndarray:
    """Reduced state on the qubits listed in ``keep`` (big-endian order)."""
    keep = sorted(keep)
    traced = [q for q in range(n_qubits) if q not in keep]
    tensor = np.asarray(rho).reshape([2] * (2 * n_qubits))
    for offset, q in enumerate(traced):
        axis = q - offset
        tensor = np.trace(tensor, axis1=axis, axis2=axis + tensor.ndim // 2)
    d = 2 ** len(keep)
    return tensor.reshape(d, d)


def cnot(n_qubits: int, control: int, target: int) -> np.ndarray:
    """Permutation matrix of a CNOT on ``n_qubits`` (big-endian)."""
    dim = 2**n_qubits
    matrix = np.zeros((dim, dim), dtype=complex)
    control_bit = 1 << (n_qubits - 1 - control)
    target_bit = 1 << (n_qubits - 1 - target)
    for b in range(dim):
        image = b ^ target_bit if b & control_bit else b
        matrix[image, b] = 1.0
    return matrix


def real_embedding(vectors: np.ndarray) -> np.ndarray:
    """Map complex column vectors to real ones so that Re<u|v> becomes a dot product."""
    vectors = np.asarray(vectors)
    return np.concatenate([vectors.real, vectors.imag], axis=0)


def from_real_embedding(vectors: np.ndarray) -> np.ndarray:
    half = vectors.shape[0] // 2
    return vectors[:half] + 1j * vectors[half:]


@lru_cache(maxsize=8)
def hermitian_basis(dim: int) -> np.ndarray:
    """
    Orthonormal basis of d x d Hermitian matrices under Tr[A B].

    Diagonal units E_kk first, then (E_kl + E_lk)/sqrt(2) and
    (-i E_kl + i E_lk)/sqrt(2) for k < l. Shape (d*d, d, d).
    """
    basis = np.zeros((dim * dim, dim, dim), dtype=complex)
    for k in range(dim):
        basis[k, k, k] = 1.0
    idx = dim
    for k in range(dim):
        for l in range(k + 1, dim):
            basis[idx, k, l] = basis[idx, l, k] = 1.0 / np.sqrt(2.0)
            basis[idx + 1, k, l] = -1j / np.sqrt(2.0)
            basis[idx + 1, l, k] = 1j / np.sqrt(2.0)
            idx += 2
    basis.setflags(write=False)
    return basis


def psd_sqrt(matrix: np.ndarray, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    """Principal square root of a real symmetric PSD matrix."""
    m = np.asarray(matrix, dtype=float)
    if np.max(np.abs(m - m.T), initial=0.0) > tol * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise ValueError("Weight matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (m + m.T))
    if np.min(evals) < -VERIFY_TOL:
        raise ValueError("Weight matrix is not positive semidefinite")
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
