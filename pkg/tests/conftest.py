import numpy as np
import pytest

from magbound.config import settings
from magbound.errors import SingularModelError
from magbound.models.states import RealTwoQubitState
from magbound.services.hcrb import _closed_form_terms

REFERENCE_R = (0.8, 0.42426407, 0.42426407, 0.0)
REFERENCE_HCRB = 1.0374439


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def reference_state():
    return RealTwoQubitState(np.array(REFERENCE_R))


@pytest.fixture
def bell_state():
    return RealTwoQubitState(np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0))


@pytest.fixture(autouse=True)
def isolated_artifacts(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "artifact_dir", tmp_path / "artifacts")
    monkeypatch.setattr(settings, "n_jobs", 1)


def well_conditioned_states(rng, n, margin=1e-2):
    """Random real states whose closed-form denominators all exceed ``margin``."""
    states = []
    while len(states) < n:
        state = RealTwoQubitState.from_unnormalized(rng.normal(size=4))
        try:
            first, second, r14p = _closed_form_terms(state)
        except SingularModelError:
            continue
        if min(first, second, r14p) > margin:
            states.append(state)
    return states


def random_ket(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))
