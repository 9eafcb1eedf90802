from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from magbound import cli
from magbound.errors import NonConvergenceError
from magbound.schemas import BoundResult
from magbound.services import experiments
from tests.conftest import REFERENCE_R


def test_pure_hcrb_prints_closed_form(capsys):
    assert cli.main(["pure-hcrb", *map(str, REFERENCE_R)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "holevo_closed_form" in out
    assert "1.037443" in out


def test_pure_hcrb_flags_bell_state(capsys):
    amp = str(2**-0.5)
    assert cli.main(["pure-hcrb", amp, "0", "0", amp]) == cli.EXIT_OK
    assert "True" in capsys.readouterr().out


def test_pure_hcrb_random_rows(capsys):
    assert cli.main(["pure-hcrb", "--random", "3", "--seed", "4"]) == cli.EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["pure-hcrb", "0.8", "0.6"],
        ["pure-hcrb", "1", "1", "1", "1"],
        ["channel-hcrb", "1.5"],
        ["copies-bound", "-0.1", "2"],
        ["sweep"],
    ],
)
def test_invalid_arguments_exit_3(argv):
    assert cli.main(argv) == cli.EXIT_INVALID_CONFIG


def test_bad_config_file_exits_3(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("gamma_grid = 1.5\n")
    assert cli.main(["sweep", "--config", str(path)]) == cli.EXIT_INVALID_CONFIG


def test_non_convergence_exits_2(monkeypatch):
    def diverging(*args, **kwargs):
        raise NonConvergenceError("restarts disagree")

    monkeypatch.setattr(experiments, "channel_hcrb", diverging)
    assert cli.main(["channel-hcrb", "0.1", "--seed", "3"]) == cli.EXIT_NONCONVERGENCE


def test_sweep_passes_config_and_overrides(tmp_path, monkeypatch, capsys):
    path = tmp_path / "sweep.cfg"
    path.write_text("gamma_grid = 0.0, 0.1\ncopies = 1\nseed = 42\n")
    seen = {}

    def fake_run(config, resume=False):
        seen.update(config=config, resume=resume)
        return pd.DataFrame({"gamma": [0.0, 0.1]})

    monkeypatch.setattr(experiments, "run_sweep", fake_run)
    out = tmp_path / "out.csv"
    code = cli.main(["sweep", "--config", str(path), "--out", str(out), "--resume", "--independent-qc-measurements"])
    assert code == cli.EXIT_OK
    config = seen["config"]
    assert seen["resume"] is True
    assert config.gamma_grid == [0.0, 0.1]
    assert config.seed == 42
    assert config.out == Path(out)
    assert config.independent_qc_measurements is True
    assert "2 rows written" in capsys.readouterr().out


def test_channel_hcrb_prints_result(monkeypatch, capsys):
    fake_state = type("State", (), {"psi0": np.array([1.0, 0.0, 0.0, 0.0])})()

    def fake_channel(gamma, optimizer, restarts, restart_tol, seed):
        return BoundResult(bound_kind="CH_channel", value=1.5, gamma=gamma, strategy="HCRB", seed=seed), fake_state

    monkeypatch.setattr(experiments, "channel_hcrb", fake_channel)
    assert cli.main(["channel-hcrb", "0.3", "--seed", "8"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert '"bound_kind": "CH_channel"' in out
    assert '"seed": 8' in out


def test_copies_and_qc_commands_forward_arguments(monkeypatch, capsys):
    seen = {}

    def fake_copies(gamma, k, optimizer, restarts, restart_tol, seed):
        seen["copies"] = (gamma, k, seed)
        return BoundResult(bound_kind="Ck_proj", value=2.0, k=k, gamma=gamma, strategy="CQ", seed=seed)

    def fake_qc(gamma, optimizer, restarts, restart_tol, seed, independent_measurements):
        seen["qc"] = (gamma, independent_measurements)
        return BoundResult(bound_kind="QC2", value=3.0, k=2, gamma=gamma, strategy="QC", seed=seed)

    monkeypatch.setattr(experiments, "copies_bound", fake_copies)
    monkeypatch.setattr(experiments, "qc_bound", fake_qc)
    assert cli.main(["copies-bound", "0.2", "3", "--seed", "5"]) == cli.EXIT_OK
    assert cli.main(["qc-bound", "0.4", "--independent-qc-measurements"]) == cli.EXIT_OK
    assert seen == {"copies": (0.2, 3, 5), "qc": (0.4, True)}
    assert '"bound_kind": "QC2"' in capsys.readouterr().out


def test_entanglement_curve_command(capsys):
    assert cli.main(["entanglement-curve", "--samples", "30", "--seed", "1"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "half_concurrence" in out
    assert "argmin C^H:" in out
