import numpy as np
import numpy.testing as npt
import pytest

from magbound.errors import DimensionError
from magbound.models.encoding import (
    build_model,
    check_gamma,
    dephasing_channel,
    dephasing_mask,
    encode_derivative_operator,
    encode_pure,
    hamiltonian,
    kcopy_model,
)
from magbound.utils.linalg import PAULI_Z, herm_exp, projector
from tests.conftest import random_ket

PHI = (0.3, 0.1, 0.2)
FD_STEP = 1e-5


def _shift(phi, i, h):
    out = list(phi)
    out[i] += h
    return tuple(out)


def test_hamiltonian_examples():
    npt.assert_allclose(hamiltonian((0, 0, 0), 2), np.zeros((4, 4)))
    npt.assert_allclose(hamiltonian((0, 0, 1), 1), PAULI_Z)
    npt.assert_allclose(np.linalg.eigvalsh(hamiltonian((1, 0, 0), 2)), [-2, 0, 0, 2], atol=1e-12)


def test_dephasing_channel_limits(rng):
    psi = random_ket(rng, 2)
    rho = projector(psi)
    npt.assert_allclose(dephasing_channel(0.0).apply(rho), rho)
    plus = projector(np.array([1, 1]) / np.sqrt(2))
    npt.assert_allclose(dephasing_channel(1.0).apply(plus), np.eye(2) / 2, atol=1e-12)
    half = dephasing_channel(0.5).apply(rho)
    assert half[0, 1] == pytest.approx(np.sqrt(0.5) * rho[0, 1])


def test_dephasing_mask_matches_kraus_channel(rng):
    rho = projector(random_ket(rng, 4))
    npt.assert_allclose(dephasing_mask(0.3, 2) * rho, dephasing_channel(0.3, 2).apply(rho), atol=1e-12)


def test_dephasing_commutes_with_z_rotations(rng):
    local_z = {1: 0.83 * PAULI_Z, 2: 0.4 * np.kron(PAULI_Z, np.eye(2)) - 1.1 * np.kron(np.eye(2), PAULI_Z)}
    for n, h in local_z.items():
        channel = dephasing_channel(0.35, n)
        rz = herm_exp(h, -1.0)
        rho = projector(random_ket(rng, 2**n))
        rotated_first = channel.apply(rz @ rho @ rz.conj().T)
        npt.assert_allclose(rotated_first, rz @ channel.apply(rho) @ rz.conj().T, atol=1e-10)


def test_gamma_out_of_range():
    with pytest.raises(ValueError):
        check_gamma(1.5)
    with pytest.raises(ValueError):
        build_model(np.array([1, 0, 0, 0]), -0.1)


def test_derivative_operator_at_origin_is_generator():
    for i in (1, 2, 3):
        expected = hamiltonian(np.eye(3)[i - 1], 2)
        npt.assert_allclose(encode_derivative_operator((0, 0, 0), i), expected, atol=1e-12)


def test_derivative_operator_is_hermitian():
    for i in (1, 2, 3):
        a = encode_derivative_operator(PHI, i)
        npt.assert_allclose(a, a.conj().T, atol=1e-10)


def test_encoded_derivatives_match_finite_differences(rng):
    psi0 = random_ket(rng, 4)
    _, derivs = encode_pure(psi0, PHI)
    for i in range(3):
        plus = herm_exp(hamiltonian(_shift(PHI, i, FD_STEP), 2), -1.0) @ psi0
        minus = herm_exp(hamiltonian(_shift(PHI, i, -FD_STEP), 2), -1.0) @ psi0
        npt.assert_allclose(derivs[:, i], (plus - minus) / (2 * FD_STEP), atol=1e-8)


def test_noiseless_model_is_pure_with_traceless_derivatives(rng):
    model = build_model(random_ket(rng, 4))
    npt.assert_allclose(model.rho @ model.rho, model.rho, atol=1e-10)
    for d in model.d_rho:
        assert abs(np.trace(d)) < 1e-12
    model.validate()


def test_noisy_derivatives_match_finite_differences(rng):
    psi0 = random_ket(rng, 4)
    model = build_model(psi0, 0.3, PHI)
    for i in range(3):
        plus = build_model(psi0, 0.3, _shift(PHI, i, FD_STEP)).rho
        minus = build_model(psi0, 0.3, _shift(PHI, i, -FD_STEP)).rho
        npt.assert_allclose(model.d_rho[i], (plus - minus) / (2 * FD_STEP), atol=1e-8)
        assert abs(np.trace(model.d_rho[i])) < 1e-12


def test_kcopy_model_product_rule(rng):
    psi0 = random_ket(rng, 4)
    model = build_model(psi0, 0.2, PHI)
    assert kcopy_model(model, 1) is model
    two = kcopy_model(model, 2)
    npt.assert_allclose(two.rho, np.kron(model.rho, model.rho))
    for i in range(3):
        expected = np.kron(model.d_rho[i], model.rho) + np.kron(model.rho, model.d_rho[i])
        npt.assert_allclose(two.d_rho[i], expected, atol=1e-12)
        plus = build_model(psi0, 0.2, _shift(PHI, i, FD_STEP)).rho
        minus = build_model(psi0, 0.2, _shift(PHI, i, -FD_STEP)).rho
        fd = (np.kron(plus, plus) - np.kron(minus, minus)) / (2 * FD_STEP)
        npt.assert_allclose(two.d_rho[i], fd, atol=1e-8)


def test_kcopy_model_dimension_limit():
    model = build_model(np.array([1, 0, 0, 0]))
    with pytest.raises(DimensionError):
        kcopy_model(model, 4)
