"""
Classical and quantum Fisher information for the three-parameter field model.

- Measurement: a POVM, or a rank-1 projective measurement given by the columns
  of a unitary.
- cfi_matrix / scalar_crb: classical Fisher matrix of the outcome distribution
  and the k-copy scalar bound k * Tr[W F^-1].
- sld_set / qfi_matrix / sld_crb: symmetric logarithmic derivatives, the SLD
  quantum Fisher matrix J and the bound Tr[W J^-1].
- classicality_check: the D matrix Im Tr[L_i L_j rho] and the single-qubit
  marginal test for asymptotic classicality.

A singular Fisher matrix raises SingularModelError. Searches that need a finite
number instead call ``crb_or_penalty``, which maps it to SINGULAR_PENALTY.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from magbound.errors import DimensionError, SingularModelError
from magbound.models.encoding import StatisticalModel
from magbound.schemas import BoundKind, BoundResult
from magbound.utils.linalg import VERIFY_TOL, is_unitary, kron_all, partial_trace

logger = logging.getLogger(__name__)

PROBABILITY_CUTOFF = 1e-12
SLD_RANK_CUTOFF = 1e-10
SINGULAR_EIGENVALUE = 1e-9
SINGULAR_PENALTY = 1e6


@dataclass(frozen=True, eq=False)
class Measurement:
    """
    Either ``povm`` (a tuple of PSD elements) or ``unitary`` (projective
    measurement onto its columns) is set, never both.
    """

    povm: Optional[Tuple[np.ndarray, ...]] = None
    unitary: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if (self.povm is None) == (self.unitary is None):
            raise ValueError("Measurement needs exactly one of povm or unitary")
        if self.unitary is not None:
            if not is_unitary(self.unitary):
                raise ValueError("Projective measurement basis is not unitary")
            return
        total = sum(self.povm)
        if np.max(np.abs(total - np.eye(total.shape[0]))) > VERIFY_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        for element in self.povm:
            if np.min(np.linalg.eigvalsh(element)) < -VERIFY_TOL:
                raise ValueError("POVM element is not positive semidefinite")

    @classmethod
    def projective(cls, unitary: np.ndarray) -> "Measurement":
        return cls(unitary=np.asarray(unitary, dtype=complex))

    @classmethod
    def from_povm(cls, elements: Sequence[np.ndarray]) -> "Measurement":
        return cls(povm=tuple(np.asarray(e, dtype=complex) for e in elements))

    @property
    def is_projective(self) -> bool:
        return self.unitary is not None

    @property
    def dim(self) -> int:
        return self.unitary.shape[0] if self.is_projective else self.povm[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.unitary.shape[1] if self.is_projective else len(self.povm)

    def elements(self) -> Tuple[np.ndarray, ...]:
        if self.is_projective:
            return tuple(np.outer(col, col.conj()) for col in self.unitary.T)
        return self.povm

    def tensor(self, other: "Measurement") -> "Measurement":
        """Independent product measurement on the joint system."""
        if self.is_projective and other.is_projective:
            return Measurement.projective(np.kron(self.unitary, other.unitary))
        return Measurement.from_povm([np.kron(a, b) for a in self.elements() for b in other.elements()])

    def power(self, k: int) -> "Measurement":
        out = self
        for _ in range(k - 1):
            out = out.tensor(self)
        return out


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    entries: np.ndarray
    kind: Literal["classical", "quantum"]

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.entries)))


@dataclass(frozen=True, eq=False)
class ClassicalityReport:
    d_matrix: np.ndarray
    marginal_condition: bool
    asymptotically_classical: bool


def outcome_distribution(model: StatisticalModel, measurement: Measurement) -> Tuple[np.ndarray, np.ndarray]:
    """
    Born-rule probabilities and their parameter derivatives.

    Returns
    -------
    p : (n_outcomes,) array, clamped at 0
    dp : (3, n_outcomes) array
    """
    if measurement.dim != model.dim:
        raise DimensionError(f"Measurement acts on dimension {measurement.dim}, model on {model.dim}")
    if measurement.is_projective:
        u = measurement.unitary
        p = np.real(np.einsum("ax,ab,bx->x", u.conj(), model.rho, u))
        dp = np.stack([np.real(np.einsum("ax,ab,bx->x", u.conj(), d, u)) for d in model.d_rho])
    else:
        elements = np.stack(measurement.povm)
        p = np.real(np.einsum("ab,xba->x", model.rho, elements))
        dp = np.stack([np.real(np.einsum("ab,xba->x", d, elements)) for d in model.d_rho])
    return np.clip(p, 0.0, None), dp


def cfi_matrix(p: np.ndarray, dp: np.ndarray) -> FisherMatrix:
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    keep = p > PROBABILITY_CUTOFF
    scaled = dp[:, keep] / np.sqrt(p[keep])
    return FisherMatrix(entries=scaled @ scaled.T, kind="classical")


def _inverse_trace(fisher: FisherMatrix, weights: Optional[np.ndarray]) -> float:
    if fisher.min_eigenvalue() <= SINGULAR_EIGENVALUE:
        raise SingularModelError(f"{fisher.kind} Fisher matrix is singular (min eigenvalue {fisher.min_eigenvalue():.3e})")
    inverse = np.linalg.inv(fisher.entries)
    if weights is None:
        return float(np.trace(inverse))
    return float(np.trace(np.asarray(weights, dtype=float) @ inverse))


def scalar_crb(
    fisher: FisherMatrix,
    k_copies: int = 1,
    weights: Optional[np.ndarray] = None,
    bound_kind: Optional[BoundKind] = None,
) -> BoundResult:
    """
    k * Tr[W F^-1] for the Fisher matrix of a k-copy model.

    Raises SingularModelError when F has an eigenvalue <= 1e-9.
    """
    kind = bound_kind or ("CC" if fisher.kind == "classical" else "CS")
    value = k_copies * _inverse_trace(fisher, weights)
    return BoundResult(bound_kind=kind, value=value, k=k_copies)


def crb_or_penalty(fisher: FisherMatrix, k_copies: int = 1) -> float:
    try:
        return k_copies * _inverse_trace(fisher, None)
    except SingularModelError:
        return SINGULAR_PENALTY


def classical_bound(model: StatisticalModel, measurement: Measurement, k_copies: int = 1) -> BoundResult:
    p, dp = outcome_distribution(model, measurement)
    return scalar_crb(cfi_matrix(p, dp), k_copies=k_copies)


def sld_set(model: StatisticalModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve d_i rho = (L_i rho + rho L_i) / 2 in the eigenbasis of rho."""
    evals, evecs = np.linalg.eigh(model.rho)
    denom = evals[:, None] + evals[None, :]
    support = denom > SLD_RANK_CUTOFF
    factor = np.zeros_like(denom)
    factor[support] = 2.0 / denom[support]
    slds = []
    for d in model.d_rho:
        d_eig = evecs.conj().T @ d @ evecs
        sld = evecs @ (d_eig * factor) @ evecs.conj().T
        slds.append(0.5 * (sld + sld.conj().T))
    return tuple(slds)


def _sld_products(model: StatisticalModel, slds: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of Tr[L_i L_j rho]."""
    return np.array([[np.trace(li @ lj @ model.rho) for lj in slds] for li in slds])


def qfi_matrix(model: StatisticalModel, slds: Optional[Sequence[np.ndarray]] = None) -> FisherMatrix:
    slds = sld_set(model) if slds is None else slds
    j = np.real(_sld_products(model, slds))
    return FisherMatrix(entries=0.5 * (j + j.T), kind="quantum")


def sld_crb(model: StatisticalModel, k_copies: int = 1, weights: Optional[np.ndarray] = None) -> BoundResult:
    return scalar_crb(qfi_matrix(model), k_copies=k_copies, weights=weights)


def d_matrix(model: StatisticalModel, slds: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    slds = sld_set(model) if slds is None else slds
    d = np.imag(_sld_products(model, slds))
    return 0.5 * (d - d.T)


def marginals_maximally_mixed(model: StatisticalModel, tol: float = VERIFY_TOL) -> bool:
    half_identity = np.eye(2) / 2.0
    return all(
        np.max(np.abs(partial_trace(model.rho, [q], model.n_qubits) - half_identity)) <= tol
        for q in range(model.n_qubits)
    )


def classicality_check(model: StatisticalModel, tol: float = VERIFY_TOL) -> ClassicalityReport:
    d = d_matrix(model)
    report = ClassicalityReport(
        d_matrix=d,
        marginal_condition=marginals_maximally_mixed(model, tol),
        asymptotically_classical=bool(np.max(np.abs(d)) <= tol),
    )
    logger.debug("classicality check: |D|max=%.3e marginal=%s", np.max(np.abs(d)), report.marginal_condition)
    return report


def product_povm(measurement: Measurement, k: int) -> Measurement:
    """Pi^{(x)k}: the same measurement applied independently to k copies."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return measurement.power(k)


def computational_basis(n_qubits: int) -> Measurement:
    return Measurement.projective(kron_all([np.eye(2, dtype=complex)] * n_qubits))
