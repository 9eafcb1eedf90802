import numpy as np
import numpy.testing as npt
import pytest

from magbound.errors import DimensionError
from magbound.utils.linalg import (
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    as_density_matrix,
    cnot,
    concurrence,
    generator_set,
    herm_exp,
    hermitian_basis,
    partial_trace,
    projector,
    psd_sqrt,
    tensor_product,
    trace_norm,
)


def test_tensor_product_of_identities_and_z():
    npt.assert_allclose(tensor_product(PAULI_I, PAULI_I), np.eye(4))
    npt.assert_allclose(tensor_product(PAULI_Z, PAULI_Z), np.diag([1, -1, -1, 1]))


def test_tensor_product_mixed_product_rule(rng):
    a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    npt.assert_allclose(tensor_product(a, b) @ tensor_product(c, d), tensor_product(a @ c, b @ d), atol=1e-12)


@pytest.mark.parametrize("n, count", [(1, 3), (2, 15), (3, 63)])
def test_generator_set_size_and_tracelessness(n, count):
    gens = generator_set(n)
    assert len(gens) == count
    assert gens.dim == 2**n
    npt.assert_allclose(np.trace(gens.elements, axis1=1, axis2=2), 0.0, atol=1e-12)
    npt.assert_allclose(gens.elements, np.conj(np.transpose(gens.elements, (0, 2, 1))))


def test_generator_set_rejects_too_many_qubits():
    with pytest.raises(DimensionError):
        generator_set(7)


def test_herm_exp_special_cases():
    npt.assert_allclose(herm_exp(np.zeros((4, 4))), np.eye(4))
    theta = 0.37
    npt.assert_allclose(herm_exp(PAULI_Z, -theta), np.diag([np.exp(-1j * theta), np.exp(1j * theta)]), atol=1e-12)
    npt.assert_allclose(herm_exp(PAULI_X, -np.pi / 2), -1j * PAULI_X, atol=1e-12)


def test_trace_norm():
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert trace_norm(np.array([[0.0, 0.4], [-0.4, 0.0]])) == pytest.approx(0.8)


def test_trace_norm_matches_eigenvalue_oracle(rng):
    m = rng.normal(size=(3, 3))
    expected = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(m.T @ m), 0.0, None)))
    assert trace_norm(m) == pytest.approx(expected, rel=1e-10)


def test_concurrence_values():
    assert concurrence((1.0, 0.0, 0.0, 0.0)) == 0.0
    assert concurrence(np.array([1, 0, 0, 1]) / np.sqrt(2)) == pytest.approx(1.0)
    assert concurrence((0.8, 0.42426407, 0.42426407, 0.0)) == pytest.approx(0.36, abs=1e-7)


def test_concurrence_matches_schmidt_coefficients(rng):
    r = rng.normal(size=4)
    r /= np.linalg.norm(r)
    s = np.linalg.svd(r.reshape(2, 2), compute_uv=False)
    assert concurrence(r) == pytest.approx(2 * s[0] * s[1])


def test_hermitian_basis_is_orthonormal():
    basis = hermitian_basis(4)
    assert basis.shape == (16, 4, 4)
    gram = np.einsum("aij,bji->ab", basis, basis)
    npt.assert_allclose(gram, np.eye(16), atol=1e-12)
    npt.assert_allclose(basis, np.conj(np.transpose(basis, (0, 2, 1))))


def test_psd_sqrt():
    w = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])
    s = psd_sqrt(w)
    npt.assert_allclose(s @ s, w, atol=1e-12)
    with pytest.raises(ValueError):
        psd_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -1.0]))


def test_partial_trace_of_bell_state_is_maximally_mixed():
    bell = projector(np.array([1, 0, 0, 1]) / np.sqrt(2))
    npt.assert_allclose(partial_trace(bell, [0], 2), np.eye(2) / 2, atol=1e-12)
    npt.assert_allclose(partial_trace(bell, [1], 2), np.eye(2) / 2, atol=1e-12)


def test_cnot_flips_target_when_control_set():
    ket_10 = np.array([0, 0, 1, 0])
    npt.assert_allclose(cnot(2, 0, 1) @ ket_10, [0, 0, 0, 1])
    npt.assert_allclose(cnot(2, 1, 0) @ ket_10, ket_10)


def test_as_density_matrix_rejects_bad_trace():
    with pytest.raises(ValueError):
        as_density_matrix(np.eye(2))
