import numpy as np
import numpy.testing as npt

from magbound.config import settings
from magbound.models.artifacts import (
    OptimalStateArtifacts,
    load_optimal_state,
    optimal_state_path,
    save_optimal_state,
)
from tests.conftest import random_ket


def test_optimal_state_path_defaults_to_settings():
    path = optimal_state_path(0.1, 7)
    assert path.parent == settings.artifact_dir
    assert path.name == "optimal_state_g0.1000_s7.joblib"


def test_save_and_load_optimal_state(tmp_path, rng):
    artifacts = OptimalStateArtifacts(
        gamma=0.3, seed=5, value=1.25, coefficients=rng.normal(size=15), psi0=random_ket(rng, 4), iterations=17
    )
    path = optimal_state_path(artifacts.gamma, artifacts.seed, tmp_path / "nested")
    save_optimal_state(artifacts, path)
    loaded = load_optimal_state(path)
    assert (loaded.gamma, loaded.seed, loaded.value, loaded.iterations) == (0.3, 5, 1.25, 17)
    npt.assert_array_equal(loaded.coefficients, artifacts.coefficients)
    npt.assert_array_equal(loaded.psi0, artifacts.psi0)
    assert loaded.psi0.dtype == np.complex128
