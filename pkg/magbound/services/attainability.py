"""
Projective attainability of the Holevo bound for real two-qubit pure states.

Two constructions of vectors |y_i> with Re<y_i|l_j> = delta_ij and a real
Z = [<y_i|y_j>]:

- ``printed_recipe``: back-substitution of the constraints with a fixed
  choice of free real parameters. Vectors come out in a convention where the
  derivative ket is -H|psi>; they map to Holevo vectors by y = (i/2) x.
- ``attainability_construction``: the HCRB-optimal SLD-spanned vectors
  completed with a direction u orthogonal to psi and every l_i, which cancels
  Im Z exactly while keeping Tr Z = C^H.

``attaining_measurement`` turns a certificate into the rank-1 projective
measurement whose classical bound equals C^H.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.linalg import null_space, sqrtm

from magbound.errors import DegenerateStateError
from magbound.models.encoding import build_model
from magbound.models.states import RealTwoQubitState
from magbound.services.fisher import Measurement
from magbound.services.hcrb import closed_form_hcrb

logger = logging.getLogger(__name__)

DEGENERACY_GUARD = 1e-6

# Free real parameters of the back-substitution and the values it fixes them to.
RECIPE_FREE_PARAMETERS: Dict[str, float] = {
    "x12i": 0.0,
    "x12r": 0.0,
    "x13i": 0.0,
    "x21r": 0.0,
    "x22i": 0.0,
    "x23i": 0.0,
    "x31r": 0.0,
    "x32r": 0.0,
    "x33i": 1.0,
    "x31i": 1.0,
    "x32i": 1.0,
}


@dataclass
class AttainabilityCertificate:
    state: RealTwoQubitState
    psi: np.ndarray
    vectors: np.ndarray  # (4, 3) Holevo vectors y_i
    z_matrix: np.ndarray
    value: float
    closed_form: float
    constraint_residual: float
    imaginary_residual: float


@dataclass
class RecipeResult:
    printed_vectors: np.ndarray  # (4, 3) in the -H|psi> derivative convention
    vectors: np.ndarray  # (4, 3) Holevo vectors, (i/2) * printed_vectors
    z_matrix: np.ndarray
    trace: float
    closed_form: float
    closure_feasible: bool
    constraint_residual: float
    imaginary_residual: float


def _x11r_denominator(r1: float, r4: float, r23p: float, x31i: float, x32i: float, x33i: float) -> float:
    return -(r1**2) * (x32i + x33i) + r23p * (r4 * x31i - r23p * x33i) + r1 * (r23p * x31i + r4 * (x32i + x33i))


def _check_guards(state: RealTwoQubitState, free: Dict[str, float]) -> None:
    r1, r4, r14p, r23p = state.r[0], state.r[3], state.r14p, state.r23p
    denominator = _x11r_denominator(r1, r4, r23p, free["x31i"], free["x32i"], free["x33i"])
    for name, value in (("r4", r4), ("r14p", r14p), ("r23p", r23p), ("x11r denominator", denominator)):
        if abs(value) <= DEGENERACY_GUARD:
            raise DegenerateStateError(f"{name} = {value:.3e} is too small for the attainability construction")


def _residuals(vectors: np.ndarray, l: np.ndarray) -> tuple[float, float]:
    z = vectors.conj().T @ vectors
    constraint = float(np.max(np.abs(np.real(vectors.conj().T @ l) - np.eye(3))))
    return constraint, float(np.max(np.abs(z.imag)))


def _l_vectors(state: RealTwoQubitState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    model = build_model(state.ket())
    psi, d_psi = model.psi, model.d_psi
    l = 2.0 * (d_psi - np.outer(psi, psi.conj() @ d_psi))
    return psi, d_psi, l


def printed_recipe(state: RealTwoQubitState, free: Optional[Dict[str, float]] = None) -> RecipeResult:
    """
    Solve the nine linear and three bilinear constraints for the dependent
    entries, given the free ones (defaults: RECIPE_FREE_PARAMETERS).

    x22r is then chosen to close Tr Z = C^H when that is reachable, else 0.
    """
    f = dict(RECIPE_FREE_PARAMETERS)
    f.update(free or {})
    _check_guards(state, f)
    r1, r4 = float(state.r[0]), float(state.r[3])
    r14p, r14m, r23p = state.r14p, state.r14m, state.r23p

    x11i = -2.0 * r4 / r14p
    x21i = 1.0 / r23p
    numerator = r23p * r4 * (
        x11i * f["x31r"]
        + ((r23p * x11i - r14m * (f["x12i"] + f["x13i"])) * (1.0 + 2.0 * r1 * f["x31r"])) / (2.0 * r23p * r4)
        - (r23p * f["x13i"] * (1.0 + 2.0 * r14p * f["x31r"])) / (2.0 * r4 * r14p)
        - f["x12r"] * f["x32i"]
        + f["x12i"] * f["x32r"]
        - f["x13i"] * f["x32r"]
        + f["x33i"] / r14p
        + f["x12r"] * f["x33i"]
    )
    x11r = numerator / _x11r_denominator(r1, r4, r23p, f["x31i"], f["x32i"], f["x33i"])

    def columns(x22r: float) -> np.ndarray:
        x13r = -1.0 / r14p - r23p * x11r / r4 - f["x12r"]
        x14r = r1 * x11r / r4
        x14i = x11i - r14m * f["x12i"] / r23p - r14m * f["x13i"] / r23p
        x23r = -r23p * f["x21r"] / r4 - x22r
        x24r = r1 * f["x21r"] / r4
        x24i = -1.0 / r23p + x21i - r14m * f["x22i"] / r23p - r14m * f["x23i"] / r23p
        x33r = -r23p / (2.0 * r4 * r14p) - r23p * f["x31r"] / r4 - f["x32r"]
        x34r = 1.0 / (2.0 * r4) + r1 * f["x31r"] / r4
        x34i = f["x31i"] - r14m * f["x32i"] / r23p - r14m * f["x33i"] / r23p
        x1 = [x11r + 1j * x11i, f["x12r"] + 1j * f["x12i"], x13r + 1j * f["x13i"], x14r + 1j * x14i]
        x2 = [f["x21r"] + 1j * x21i, x22r + 1j * f["x22i"], x23r + 1j * f["x23i"], x24r + 1j * x24i]
        x3 = [f["x31r"] + 1j * f["x31i"], f["x32r"] + 1j * f["x32i"], x33r + 1j * f["x33i"], x34r + 1j * x34i]
        return np.array([x1, x2, x3], dtype=complex).T

    closed_form = closed_form_hcrb(state).value
    base = 0.5j * columns(0.0)
    # x22r = t adds (t^2 + c t) / 2 to Tr Z, c = r23p x21r / r4.
    gap = closed_form - float(np.real(np.trace(base.conj().T @ base)))
    c = r23p * f["x21r"] / r4
    discriminant = c**2 + 8.0 * gap
    feasible = discriminant >= 0.0
    printed = columns((-c + np.sqrt(discriminant)) / 2.0 if feasible else -c / 2.0)
    vectors = 0.5j * printed
    z = vectors.conj().T @ vectors
    # the recipe does not impose <psi|x_i> = 0, so its constraints read 2 Re<y_i|d_j psi>
    _, d_psi, _ = _l_vectors(state)
    constraint, imaginary = _residuals(vectors, 2.0 * d_psi)
    if not feasible:
        logger.warning("printed recipe: norm closure unreachable for r=%s", np.round(state.r, 6).tolist())
    return RecipeResult(
        printed_vectors=printed,
        vectors=vectors,
        z_matrix=z,
        trace=float(np.real(np.trace(z))),
        closed_form=closed_form,
        closure_feasible=bool(feasible),
        constraint_residual=constraint,
        imaginary_residual=imaginary,
    )


def attainability_construction(state: RealTwoQubitState) -> AttainabilityCertificate:
    """
    Holevo vectors with Re<y_i|l_j> = delta_ij, Im Z = 0 and Tr Z = C^H.

    y = x~ + u g^T where x~ = l J^-1, J^-1 D J^-1 = a(e1 e2^T - e2 e1^T),
    g = sqrt(a)(e1 - i e2) and u is a unit vector orthogonal to psi and
    to every l_i.
    """
    _check_guards(state, RECIPE_FREE_PARAMETERS)
    psi, _, l = _l_vectors(state)
    gram = l.conj().T @ l
    j_inv = np.linalg.inv(np.real(gram))
    x_tilde = l @ j_inv
    a_mat = j_inv @ np.imag(gram) @ j_inv

    e3 = null_space(a_mat, rcond=1e-8)[:, 0]
    e1 = null_space(e3[None, :])[:, 0]
    a_e1 = a_mat @ e1
    a = float(np.linalg.norm(a_e1))
    e2 = -a_e1 / a
    g = np.sqrt(a) * (e1 - 1j * e2)

    complement = null_space(np.column_stack([psi, l]).conj().T)
    if complement.shape[1] == 0:
        raise DegenerateStateError("No direction orthogonal to the state and its SLD vectors")
    u = complement[:, 0]
    vectors = x_tilde + np.outer(u, g)
    z = vectors.conj().T @ vectors
    constraint, imaginary = _residuals(vectors, l)
    return AttainabilityCertificate(
        state=state,
        psi=psi,
        vectors=vectors,
        z_matrix=z,
        value=float(np.real(np.trace(z))),
        closed_form=closed_form_hcrb(state).value,
        constraint_residual=constraint,
        imaginary_residual=imaginary,
    )


# Real 4x4 Hadamard: every column has overlap 1/2 with the first basis vector.
_HADAMARD_4 = 0.5 * np.array(
    [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]],
    dtype=float,
)


def attaining_measurement(certificate: AttainabilityCertificate) -> Measurement:
    """Orthonormal basis from [psi, y1, y2, y3], rotated so every outcome has probability 1/4."""
    frame = np.column_stack([certificate.psi, certificate.vectors])
    gram = np.real(frame.conj().T @ frame)
    inv_sqrt = np.linalg.inv(np.real(sqrtm(gram)))
    basis = frame @ inv_sqrt @ _HADAMARD_4
    return Measurement.projective(basis)
