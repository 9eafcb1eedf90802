from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from magbound.errors import DimensionError
from magbound.utils.linalg import (
    MAX_QUBITS,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    as_hermitian,
    as_ket,
    herm_exp,
    kron_all,
    n_qubits_for_dim,
    projector,
)

WORKING_POINT = (0.0, 0.0, 0.0)
_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class FieldParams:
    phi: Tuple[float, float, float] = WORKING_POINT

    def __post_init__(self) -> None:
        values = tuple(float(x) for x in self.phi)
        if len(values) != 3 or not np.all(np.isfinite(values)):
            raise ValueError(f"Field must be a finite 3-vector, got {self.phi}")
        object.__setattr__(self, "phi", values)


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"Dephasing strength must lie in [0, 1], got {gamma}")
    return gamma


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    kraus: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        completeness = sum(e.conj().T @ e for e in self.kraus)
        if np.max(np.abs(completeness - np.eye(completeness.shape[0]))) > 1e-12:
            raise ValueError("Kraus operators are not trace preserving")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(e @ rho @ e.conj().T for e in self.kraus)


def dephasing_channel(gamma: float, n_qubits: int = 1) -> QuantumChannel:
    """Independent z-dephasing on every qubit, E0 = diag(1, sqrt(1-g)), E1 = diag(0, sqrt(g))."""
    gamma = check_gamma(gamma)
    e0 = np.diag([1.0, np.sqrt(1.0 - gamma)]).astype(complex)
    e1 = np.diag([0.0, np.sqrt(gamma)]).astype(complex)
    if n_qubits == 1:
        return QuantumChannel(kraus=(e0, e1))
    kraus = tuple(kron_all(combo) for combo in itertools.product((e0, e1), repeat=n_qubits))
    return QuantumChannel(kraus=kraus)


@lru_cache(maxsize=64)
def dephasing_mask(gamma: float, n_qubits: int) -> np.ndarray:
    """Entrywise factor of the n-qubit dephasing map: sqrt(1-g) per differing bit."""
    gamma = check_gamma(gamma)
    dim = 2**n_qubits
    idx = np.arange(dim)
    differing = np.zeros((dim, dim), dtype=int)
    for q in range(n_qubits):
        bit = (idx >> q) & 1
        differing += bit[:, None] != bit[None, :]
    mask = np.sqrt(1.0 - gamma) ** differing
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=None)
def collective_generators(n_qubits: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H_i = sum over qubits of sigma_i acting on that qubit."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise DimensionError(f"Encoding supports 1..{MAX_QUBITS} qubits, got {n_qubits}")
    gens = []
    for pauli in (PAULI_X, PAULI_Y, PAULI_Z):
        total = np.zeros((2**n_qubits,) * 2, dtype=complex)
        for m in range(n_qubits):
            total += kron_all(pauli if q == m else PAULI_I for q in range(n_qubits))
        total.setflags(write=False)
        gens.append(total)
    return tuple(gens)


def hamiltonian(phi: FieldParams | Sequence[float], n_qubits: int) -> np.ndarray:
    phi = phi if isinstance(phi, FieldParams) else FieldParams(tuple(phi))
    gens = collective_generators(n_qubits)
    return sum(p * g for p, g in zip(phi.phi, gens))


def _phase_integral(x: np.ndarray) -> np.ndarray:
    """f(x) = (1 - exp(-ix)) / (ix) with f(0) = 1."""
    out = np.empty_like(x, dtype=complex)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    out[small] = 1.0 - 0.5j * xs - xs**2 / 6.0 + 1j * xs**3 / 24.0
    xl = x[~small]
    out[~small] = (1.0 - np.exp(-1j * xl)) / (1j * xl)
    return out


def encode_derivative_operator(phi: FieldParams | Sequence[float], i: int, n_qubits: int = 2) -> np.ndarray:
    """
    Hermitian A_i with d/dphi_i exp(-iH) = -i exp(-iH) A_i.

    Evaluated exactly in the eigenbasis of H(phi): element (a, b) is
    <a|H_i|b> f(lambda_b - lambda_a). At phi = 0 this is H_i itself.
    """
    if i not in (1, 2, 3):
        raise ValueError(f"Parameter index must be 1, 2 or 3, got {i}")
    h = hamiltonian(phi, n_qubits)
    gen = collective_generators(n_qubits)[i - 1]
    evals, evecs = np.linalg.eigh(h)
    gen_eig = evecs.conj().T @ gen @ evecs
    weights = _phase_integral(evals[None, :] - evals[:, None])
    return evecs @ (gen_eig * weights) @ evecs.conj().T


@dataclass(frozen=True, eq=False)
class StatisticalModel:
    rho: np.ndarray
    d_rho: Tuple[np.ndarray, np.ndarray, np.ndarray]
    n_qubits: int
    # encoded ket and its derivative columns, kept only for noiseless models
    psi: Optional[np.ndarray] = None
    d_psi: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        for d in self.d_rho:
            as_hermitian(d, tol=tol)
            if abs(np.trace(d)) > tol:
                raise ValueError("Model derivatives must be traceless")


def encode_pure(psi0: np.ndarray, phi: FieldParams | Sequence[float] = WORKING_POINT) -> Tuple[np.ndarray, np.ndarray]:
    """Encoded ket exp(-iH)|psi0> and its three derivatives as columns."""
    psi0 = as_ket(psi0)
    n = n_qubits_for_dim(psi0.size)
    phi = phi if isinstance(phi, FieldParams) else FieldParams(tuple(phi))
    u = herm_exp(hamiltonian(phi, n), -1.0)
    psi = u @ psi0
    derivs = np.stack(
        [-1j * (u @ (encode_derivative_operator(phi, i, n) @ psi0)) for i in (1, 2, 3)],
        axis=1,
    )
    return psi, derivs


def build_model(
    psi0: np.ndarray,
    gamma: float = 0.0,
    phi: FieldParams | Sequence[float] = WORKING_POINT,
) -> StatisticalModel:
    """rho = dephasing^{(x)N}[U rho0 U^dag] and its derivatives at phi."""
    gamma = check_gamma(gamma)
    psi, derivs = encode_pure(psi0, phi)
    n = n_qubits_for_dim(psi.size)
    mask = dephasing_mask(gamma, n)
    rho = mask * projector(psi)
    d_rho = tuple(
        mask * (np.outer(derivs[:, i], psi.conj()) + np.outer(psi, derivs[:, i].conj()))
        for i in range(3)
    )
    if gamma == 0.0:
        return StatisticalModel(rho=rho, d_rho=d_rho, n_qubits=n, psi=psi, d_psi=derivs)
    return StatisticalModel(rho=rho, d_rho=d_rho, n_qubits=n)


def kcopy_model(model: StatisticalModel, k: int) -> StatisticalModel:
    """rho^{(x)k} with Leibniz-rule derivatives."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k == 1:
        return model
    if model.n_qubits * k > MAX_QUBITS:
        raise DimensionError(f"{k} copies of a {model.dim}-dimensional model exceed dimension 64")
    rho = kron_all([model.rho] * k)
    d_rho = []
    for d in model.d_rho:
        total = np.zeros_like(rho)
        for m in range(k):
            total += kron_all([d if j == m else model.rho for j in range(k)])
        d_rho.append(total)
    return StatisticalModel(rho=rho, d_rho=tuple(d_rho), n_qubits=model.n_qubits * k)
