"""
Holevo Cramér-Rao bound for the three-parameter field model.

Both solvers reduce the Holevo problem to the same real minimization

    f(B) = Tr[W C^T Qr C] + || S C^T Qi C S ||_1,    C = C0 + N B,

where Q = Qr + i Qi is the Gram matrix of the parametrizing family, C0 solves
the unbiasedness constraints, N spans their null space and S = sqrt(W).

- Pure models: the family is [x~, V] with x~ = l J^-1 and V the
  Re-orthogonal complement of span_R{l} inside span_C{l}, l_i = L_i |psi>.
- Mixed models: an orthonormal Hermitian operator basis with
  Q_ab = Tr[rho G_a G_b], constraints Tr[X_i d_j rho] = delta_ij and
  Tr[X_i rho] = 0.

The trace norm is smoothed on its singular values (Huber, parameter mu) and mu
is decreased geometrically; every stage is an L-BFGS-B solve with the analytic
gradient. The reported value always uses the exact trace norm.

For real two-qubit pure states the bound has the closed form
``closed_form_hcrb``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from magbound.errors import NonConvergenceError, SingularModelError
from magbound.models.encoding import StatisticalModel, build_model
from magbound.models.states import RealTwoQubitState
from magbound.schemas import BoundResult, HolevoSolverConfig
from magbound.services.fisher import SINGULAR_EIGENVALUE, qfi_matrix, sld_set
from magbound.utils.linalg import (
    from_real_embedding,
    hermitian_basis,
    psd_sqrt,
    real_embedding,
    trace_norm,
)

logger = logging.getLogger(__name__)

CLOSED_FORM_GUARD = 1e-9
RANK_TOL = 1e-10
HESSIAN_STEP = 1e-4


@dataclass
class HolevoSolution:
    value: float
    z_matrix: np.ndarray
    alpha: np.ndarray
    x_vectors: Optional[np.ndarray] = None  # (d, 3) for pure models
    x_operators: Optional[Tuple[np.ndarray, ...]] = None  # three Hermitian X_i for mixed models
    constraint_residual: float = 0.0
    iterations: int = 0
    restart_values: List[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Closed forms for real two-qubit pure states
# ---------------------------------------------------------------------------


def _closed_form_terms(state: RealTwoQubitState) -> Tuple[float, float, float]:
    r14p, r14m, r23p = state.r14p, state.r14m, state.r23p
    first = r14p**2 + r14m**2 - 2.0 * (r14m * r14p) ** 2 + r23p**2 * (1.0 - 2.0 * r14p**2)
    second = r14m**2 + r23p**2
    if first <= CLOSED_FORM_GUARD or abs(r14p) <= CLOSED_FORM_GUARD or second <= CLOSED_FORM_GUARD:
        raise SingularModelError(f"State {state.r.tolist()} gives a singular model")
    return first, second, abs(r14p)


def closed_form_sld(state: RealTwoQubitState) -> float:
    first, second, r14p = _closed_form_terms(state)
    return (1.0 / first + 1.0 / second + 1.0 / r14p**2) / 8.0


def closed_form_hcrb(state: RealTwoQubitState) -> BoundResult:
    first, second, r14p = _closed_form_terms(state)
    value = (1.0 / first + (1.0 / np.sqrt(second) + 1.0 / r14p) ** 2) / 8.0
    return BoundResult(bound_kind="CH", value=float(value), strategy="HCRB")


def coherent_bound(j: np.ndarray, d: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """Tr[W J^-1] + ||sqrt(W) J^-1 D J^-1 sqrt(W)||_1, the value of the SLD-spanned candidate."""
    j_inv = np.linalg.inv(j)
    w = np.eye(j.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    s = psd_sqrt(w)
    return float(np.trace(w @ j_inv) + trace_norm(s @ j_inv @ d @ j_inv @ s))


# ---------------------------------------------------------------------------
# Shared smoothed problem
# ---------------------------------------------------------------------------


def _huber_grad(m: np.ndarray, mu: float) -> Tuple[float, np.ndarray]:
    u, sigma, vt = np.linalg.svd(m)
    small = sigma <= mu
    value = np.sum(np.where(small, sigma**2 / (2.0 * mu), sigma - mu / 2.0))
    slope = np.where(small, sigma / mu, 1.0)
    return float(value), (u * slope) @ vt


class _HolevoProblem:
    def __init__(self, q: np.ndarray, c0: np.ndarray, n: np.ndarray, weights: Optional[np.ndarray]):
        self.qr = np.real(0.5 * (q + q.conj().T))
        qi = np.imag(0.5 * (q + q.conj().T))
        self.qi = 0.5 * (qi - qi.T)
        self.c0 = c0
        self.n = n
        self.w = np.eye(c0.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        self.s = psd_sqrt(self.w)

    @property
    def n_free(self) -> int:
        return self.n.shape[1] * self.c0.shape[1]

    def coefficients(self, b: np.ndarray) -> np.ndarray:
        return self.c0 + self.n @ b.reshape(self.n.shape[1], self.c0.shape[1])

    def z_matrix(self, b: np.ndarray) -> np.ndarray:
        c = self.coefficients(b)
        return c.T @ self.qr @ c + 1j * (c.T @ self.qi @ c)

    def value(self, b: np.ndarray) -> float:
        z = self.z_matrix(b)
        return float(np.trace(self.w @ z.real) + trace_norm(self.s @ z.imag @ self.s))

    def smoothed(self, b: np.ndarray, mu: float) -> Tuple[float, np.ndarray]:
        c = self.coefficients(b)
        qr_c = self.qr @ c
        im = self.s @ c.T @ self.qi @ c @ self.s
        h, g = _huber_grad(im, mu)
        value = float(np.trace(self.w @ c.T @ qr_c)) + h
        grad_c = 2.0 * qr_c @ self.w + self.qi @ c @ self.s @ (g.T - g) @ self.s
        return value, (self.n.T @ grad_c).ravel()

    def solve(self, b0: np.ndarray, cfg: HolevoSolverConfig) -> Tuple[np.ndarray, int]:
        b = np.asarray(b0, dtype=float).ravel()
        if b.size == 0:
            return b, 0
        iterations = 0
        for mu in np.geomspace(cfg.mu_start, cfg.mu_end, cfg.mu_stages):
            res = minimize(
                self.smoothed,
                b,
                args=(mu,),
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": cfg.max_iter, "ftol": 1e-15, "gtol": 1e-11},
            )
            b = res.x
            iterations += int(res.nit)
        return b, iterations


# ---------------------------------------------------------------------------
# Pure models
# ---------------------------------------------------------------------------


def _l_vectors(psi: np.ndarray, d_psi: np.ndarray) -> np.ndarray:
    """l_i = L_i |psi> = 2(|d_i psi> - <psi|d_i psi>|psi>), as columns."""
    overlaps = psi.conj() @ d_psi
    return 2.0 * (d_psi - np.outer(psi, overlaps))


def _span_complement(l: np.ndarray) -> np.ndarray:
    """Columns spanning {v in span_C(l) : Re<v|l_j> = 0 for all j}, Re-orthonormal."""
    u, s, _ = np.linalg.svd(l, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    q = u[:, :rank]
    frame = real_embedding(np.concatenate([q, 1j * q], axis=1))
    coords = frame.T @ real_embedding(l)
    free = null_space(coords.T)
    return from_real_embedding(frame @ free)


class _PureProblem:
    def __init__(self, psi: np.ndarray, d_psi: np.ndarray, weights: Optional[np.ndarray] = None):
        self.l = _l_vectors(psi, d_psi)
        gram = self.l.conj().T @ self.l
        self.j = np.real(gram)
        self.d = np.imag(gram)
        if np.min(np.linalg.eigvalsh(self.j)) <= SINGULAR_EIGENVALUE:
            raise SingularModelError("Quantum Fisher matrix of the pure model is singular")
        self.x_tilde = self.l @ np.linalg.inv(self.j)
        self.v = _span_complement(self.l)
        y = np.concatenate([self.x_tilde, self.v], axis=1)
        n_v = self.v.shape[1]
        c0 = np.vstack([np.eye(3), np.zeros((n_v, 3))])
        n = np.vstack([np.zeros((3, n_v)), np.eye(n_v)])
        self.y = y
        self.problem = _HolevoProblem(y.conj().T @ y, c0, n, weights)

    def x_vectors(self, b: np.ndarray) -> np.ndarray:
        return self.y @ self.problem.coefficients(b)

    def residual(self, x: np.ndarray) -> float:
        return float(np.max(np.abs(np.real(x.conj().T @ self.l) - np.eye(3))))


def pure_vector_hcrb(
    psi: np.ndarray,
    d_psi: np.ndarray,
    weights: Optional[np.ndarray] = None,
    cfg: Optional[HolevoSolverConfig] = None,
) -> HolevoSolution:
    """
    HCRB of a pure model from its ket and derivative columns.

    The free coefficients alpha (one row per complement direction) start at 0,
    which is optimal for real states.
    """
    cfg = cfg or HolevoSolverConfig()
    pure = _PureProblem(np.asarray(psi, dtype=complex), np.asarray(d_psi, dtype=complex), weights)
    b0 = np.zeros(pure.problem.n_free)
    b, iterations = pure.problem.solve(b0, cfg)
    if b.size and pure.problem.value(b0) <= pure.problem.value(b):
        b = b0
    x = pure.x_vectors(b)
    return HolevoSolution(
        value=pure.problem.value(b),
        z_matrix=pure.problem.z_matrix(b),
        alpha=b.reshape(-1, 3) if b.size else np.zeros((0, 3)),
        x_vectors=x,
        constraint_residual=pure.residual(x),
        iterations=iterations,
    )


def pure_model_hcrb(model: StatisticalModel, weights: Optional[np.ndarray] = None) -> HolevoSolution:
    if model.psi is None or model.d_psi is None:
        raise ValueError("pure_model_hcrb needs a noiseless model carrying its ket")
    return pure_vector_hcrb(model.psi, model.d_psi, weights)


def real_state_hcrb(state: RealTwoQubitState, weights: Optional[np.ndarray] = None) -> HolevoSolution:
    return pure_model_hcrb(build_model(state.ket()), weights)


def holevo_objective(state: RealTwoQubitState, alpha: Sequence[float], imaginary_only: bool = False) -> float:
    """Tr Re Z + ||Im Z||_1 (or the trace-norm term alone) at free coefficients alpha."""
    model = build_model(state.ket())
    pure = _PureProblem(model.psi, model.d_psi)
    b = np.asarray(alpha, dtype=float).ravel()
    if b.size != pure.problem.n_free:
        raise ValueError(f"Expected {pure.problem.n_free} free coefficients, got {b.size}")
    z = pure.problem.z_matrix(b)
    if imaginary_only:
        return trace_norm(z.imag)
    return float(np.trace(z.real) + trace_norm(z.imag))


def hessian_check(state: RealTwoQubitState, alpha: Sequence[float], step: float = HESSIAN_STEP) -> np.ndarray:
    """Eigenvalues of the central-difference Hessian of ||Im Z(alpha)||_1."""
    alpha = np.asarray(alpha, dtype=float)
    n = alpha.size
    f = lambda a: holevo_objective(state, a, imaginary_only=True)
    hess = np.zeros((n, n))
    eye = np.eye(n) * step
    for i in range(n):
        for j in range(i, n):
            hess[i, j] = hess[j, i] = (
                f(alpha + eye[i] + eye[j])
                - f(alpha + eye[i] - eye[j])
                - f(alpha - eye[i] + eye[j])
                + f(alpha - eye[i] - eye[j])
            ) / (4.0 * step**2)
    return np.linalg.eigvalsh(hess)


# ---------------------------------------------------------------------------
# Mixed models
# ---------------------------------------------------------------------------


def _operator_gram(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Q_ab = Tr[rho G_a G_b]."""
    n = basis.shape[0]
    left = np.einsum("ij,ajk->aik", rho, basis).reshape(n, -1)
    right = np.transpose(basis, (0, 2, 1)).reshape(n, -1)
    return left @ right.T


def mixed_hcrb(
    model: StatisticalModel,
    weights: Optional[np.ndarray] = None,
    cfg: Optional[HolevoSolverConfig] = None,
    seed: Optional[int] = None,
) -> HolevoSolution:
    """
    HCRB of an arbitrary model by convex minimization over Hermitian X_i.

    Starts from the SLD solution X = L J^-1 and certifies the optimum against
    ``cfg.restarts`` randomly perturbed starts. Raises NonConvergenceError if
    their values disagree by more than ``cfg.restart_tol`` (relative).
    """
    cfg = cfg or HolevoSolverConfig()
    fisher = qfi_matrix(model)
    if fisher.min_eigenvalue() <= SINGULAR_EIGENVALUE:
        raise SingularModelError("Quantum Fisher matrix is singular")

    basis = hermitian_basis(model.dim)
    coords = lambda op: np.real(np.einsum("aij,ji->a", basis, op))
    constraints = np.stack([coords(d) for d in model.d_rho] + [coords(model.rho)])
    rhs = np.vstack([np.eye(3), np.zeros((1, 3))])
    c0 = np.linalg.lstsq(constraints, rhs, rcond=None)[0]
    n = null_space(constraints)
    problem = _HolevoProblem(_operator_gram(model.rho, basis), c0, n, weights)

    slds = sld_set(model)
    j_inv = np.linalg.inv(fisher.entries)
    warm = np.stack([coords(sum(j_inv[j, i] * slds[j] for j in range(3))) for i in range(3)], axis=1)
    b_warm = (n.T @ (warm - c0)).ravel()

    rng = np.random.default_rng(seed)
    starts = [b_warm] + [
        b_warm + rng.normal(scale=0.1 * (1.0 + np.max(np.abs(b_warm), initial=0.0)), size=b_warm.size)
        for _ in range(cfg.restarts)
    ]
    solutions = []
    total_iterations = 0
    for b0 in starts:
        b, iterations = problem.solve(b0, cfg)
        total_iterations += iterations
        solutions.append((problem.value(b), b))
    values = [v for v, _ in solutions]
    best_value, best_b = min(solutions, key=lambda item: item[0])
    spread = (max(values) - best_value) / best_value
    logger.debug("mixed_hcrb dim=%d best=%.10f restart spread=%.2e", model.dim, best_value, spread)
    if spread > cfg.restart_tol:
        raise NonConvergenceError(f"Holevo restarts disagree: spread {spread:.2e} exceeds {cfg.restart_tol:.1e}")

    c = problem.coefficients(best_b)
    operators = tuple(np.einsum("a,aij->ij", c[:, i], basis) for i in range(3))
    residual = max(
        abs(np.trace(operators[i] @ model.d_rho[j]).real - float(i == j)) for i in range(3) for j in range(3)
    )
    return HolevoSolution(
        value=best_value,
        z_matrix=problem.z_matrix(best_b),
        alpha=best_b,
        x_operators=operators,
        constraint_residual=float(residual),
        iterations=total_iterations,
        restart_values=values,
    )


# ---------------------------------------------------------------------------
# Entanglement, optimal states and weight matrices
# ---------------------------------------------------------------------------


@dataclass
class EntanglementCurve:
    rows: List[Tuple[float, float, float]]  # (concurrence / 2, C^S, C^H)
    argmin_holevo: Optional[RealTwoQubitState]
    argmin_sld: Optional[RealTwoQubitState]


def entanglement_curve(samples: Sequence[RealTwoQubitState]) -> EntanglementCurve:
    rows = []
    best_h: Tuple[float, Optional[RealTwoQubitState]] = (np.inf, None)
    best_s: Tuple[float, Optional[RealTwoQubitState]] = (np.inf, None)
    for state in samples:
        try:
            sld = closed_form_sld(state)
            holevo = closed_form_hcrb(state).value
        except SingularModelError:
            continue
        rows.append((state.concurrence / 2.0, sld, holevo))
        if holevo < best_h[0]:
            best_h = (holevo, state)
        if sld < best_s[0]:
            best_s = (sld, state)
    rows.sort(key=lambda row: row[0])
    return EntanglementCurve(rows=rows, argmin_holevo=best_h[1], argmin_sld=best_s[1])


def entanglement_family(t: float) -> RealTwoQubitState:
    """cos t |00> + sin t |11>, concurrence |sin 2t|."""
    return RealTwoQubitState(np.array([np.cos(t), 0.0, 0.0, np.sin(t)]))


def _penalized_closed_form(x: np.ndarray, which: str) -> float:
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        return 1e6
    state = RealTwoQubitState(x / norm)
    try:
        return closed_form_hcrb(state).value if which == "holevo" else closed_form_sld(state)
    except SingularModelError:
        return 1e6


def optimal_real_state(
    which: str = "holevo",
    restarts: int = 8,
    seed: Optional[int] = None,
) -> Tuple[RealTwoQubitState, float]:
    """Minimize the closed-form bound ("holevo" or "sld") over real unit 4-vectors."""
    if which not in ("holevo", "sld"):
        raise ValueError(f"which must be 'holevo' or 'sld', got {which!r}")
    rng = np.random.default_rng(seed)
    best: Tuple[float, Optional[np.ndarray]] = (np.inf, None)
    for _ in range(restarts):
        res = minimize(
            _penalized_closed_form,
            rng.normal(size=4),
            args=(which,),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000},
        )
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    state = RealTwoQubitState.from_unnormalized(best[1])
    logger.info("optimal real state for %s: r=%s value=%.8f", which, np.round(state.r, 6).tolist(), best[0])
    return state, best[0]


def random_weight_matrix(rng: np.random.Generator, diagonal: bool = False) -> np.ndarray:
    if diagonal:
        return np.diag(rng.uniform(0.1, 2.0, size=3))
    a = rng.normal(size=(3, 3))
    return a @ a.T + 0.1 * np.eye(3)


def find_weight_counterexample(
    state: RealTwoQubitState,
    trials: int = 50,
    seed: Optional[int] = None,
    tol: float = 1e-6,
) -> Optional[Tuple[np.ndarray, float, float]]:
    """
    Search for a non-diagonal W where the SLD-spanned candidate value exceeds
    the weighted HCRB. Returns (W, candidate, hcrb) or None.
    """
    rng = np.random.default_rng(seed)
    model = build_model(state.ket())
    pure = _PureProblem(model.psi, model.d_psi)
    for _ in range(trials):
        w = random_weight_matrix(rng)
        candidate = coherent_bound(pure.j, pure.d, w)
        holevo = pure_vector_hcrb(model.psi, model.d_psi, weights=w).value
        if candidate - holevo > tol:
            logger.info("weight counterexample: candidate %.8f > hcrb %.8f", candidate, holevo)
            return w, candidate, holevo
    return None
