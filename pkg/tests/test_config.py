from pathlib import Path

import pytest

import magbound
import magbound.models
import magbound.services
import magbound.utils
from magbound.config import load_sweep_config, parse_config_lines, settings
from magbound.errors import InvalidConfigError

SAMPLE = """
# two-point grid
gamma_grid = 0.0, 0.5
copies = 1, 2
restarts = 3
seed = 42   # master seed
out = results/test.csv
reproducible = true
optimizer.pso.n_particles = 12
optimizer.ga.inner_gd.max_steps = 30
optimizer.hcrb.restarts = 1
"""


def test_parse_config_lines_nests_optimizer_keys():
    data = parse_config_lines(SAMPLE.splitlines())
    assert data["gamma_grid"] == ["0.0", "0.5"]
    assert data["optimizer"]["pso"]["n_particles"] == "12"
    assert data["optimizer"]["ga"]["inner_gd"]["max_steps"] == "30"
    assert data["reproducible"] is True


def test_load_sweep_config(tmp_path):
    path = tmp_path / "sweep.cfg"
    path.write_text(SAMPLE)
    config = load_sweep_config(path)
    assert config.gamma_grid == [0.0, 0.5]
    assert config.copies == [1, 2]
    assert config.seed == 42
    assert config.out == Path("results/test.csv")
    assert config.optimizer.pso.n_particles == 12
    assert config.optimizer.ga.inner_gd.max_steps == 30
    assert config.optimizer.hcrb.restarts == 1
    assert load_sweep_config(path, seed=7, out=None).seed == 7


@pytest.mark.parametrize(
    "text",
    [
        "gamma_grid = 0.1\nflux = 3\n",
        "gamma_grid = 1.5\n",
        "gamma_grid = 0.1\ncopies = 4\n",
        "gamma_grid =\n",
        "gamma_grid 0.1\n",
        "gamma_grid = 0.1\noptimizer.pso.n_particles = many\n",
    ],
)
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(InvalidConfigError):
        load_sweep_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidConfigError):
        load_sweep_config(tmp_path / "absent.cfg")


def test_settings_defaults():
    assert settings.project_name == "MagBound"
    assert settings.default_seed > 0
    assert settings.log_level in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def test_unknown_optimizer_field_is_rejected(tmp_path):
    path = tmp_path / "typo.cfg"
    path.write_text("gamma_grid = 0.1\noptimizer.pso.n_particle = 12\n")
    with pytest.raises(InvalidConfigError):
        load_sweep_config(path)


def test_optimizer_master_seed_roots_the_sweep(tmp_path):
    path = tmp_path / "seeded.cfg"
    path.write_text("gamma_grid = 0.1\noptimizer.master_seed = 99\n")
    assert load_sweep_config(path).seed == 99
    assert load_sweep_config(path, seed=5).seed == 5
    path.write_text("gamma_grid = 0.1\nseed = 8\noptimizer.master_seed = 99\n")
    assert load_sweep_config(path).seed == 8


@pytest.mark.parametrize("package", [magbound, magbound.models, magbound.services, magbound.utils])
def test_packages_carry_a_docstring(package):
    assert package.__doc__ and package.__doc__.strip()
