import time

import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest
from joblib import parallel_config

from magbound.errors import NonConvergenceError
from magbound.models.artifacts import load_optimal_state, optimal_state_path
from magbound.schemas import BoundResult, HolevoSolverConfig, OptimizerConfig, PSOConfig, SweepConfig
from magbound.services import experiments
from magbound.services.hcrb import optimal_real_state
from magbound.services.optimizers import OptimizationResult, substream_seed
from magbound.services.parametrization import unitary_from_coeffs
from magbound.utils.linalg import generator_set
from tests.conftest import REFERENCE_HCRB, well_conditioned_states

TINY = OptimizerConfig(
    pso=PSOConfig(n_particles=6, max_iters=5, stagnation_window=5),
    hcrb=HolevoSolverConfig(restarts=0),
)


def _result(value, iterations=1):
    return OptimizationResult(x=np.zeros(1), value=value, trace=[value], iterations=iterations, evaluations=1)


def test_pure_table_reports_reference_state_and_flags_bell(reference_state, bell_state):
    table = experiments.pure_hcrb_table([reference_state, bell_state])
    assert list(table["singular"]) == [False, True]
    assert table.loc[0, "holevo_closed_form"] == pytest.approx(REFERENCE_HCRB, abs=1e-6)
    assert table.loc[0, "holevo_vector"] == pytest.approx(REFERENCE_HCRB, abs=1e-6)
    assert table.loc[0, "sld_bound"] < table.loc[0, "holevo_closed_form"]
    assert table.loc[1, "holevo_vector"] is None or pd.isna(table.loc[1, "holevo_vector"])


def test_closed_form_and_vector_solver_agree(rng):
    table = experiments.pure_hcrb_table(well_conditioned_states(rng, 200))
    assert not table["singular"].any()
    npt.assert_allclose(table["holevo_vector"], table["holevo_closed_form"], rtol=1e-6)
    assert (table["holevo_closed_form"] >= table["sld_bound"] - 1e-9).all()


def test_best_of_restarts_keeps_minimum():
    values = iter([1.2, 1.0, 1.0000001])
    summary = experiments.best_of_restarts(lambda s: _result(next(values), 3), 3, 0.5, seed=1, label="t")
    assert summary.best.value == 1.0
    assert summary.iterations == 9
    assert summary.values == [1.2, 1.0, 1.0000001]


def test_best_of_restarts_raises_on_spread():
    values = iter([1.0, 1.5])
    with pytest.raises(NonConvergenceError):
        experiments.best_of_restarts(lambda s: _result(next(values)), 2, 1e-3, seed=1, label="t")


def test_restart_seeds_are_distinct():
    seeds = []
    experiments.best_of_restarts(lambda s: seeds.append(s) or _result(1.0), 4, 1e-3, seed=9, label="t")
    assert len(set(seeds)) == 4


def test_channel_hcrb_stores_reproducible_state(tmp_path):
    result, artifacts = experiments.channel_hcrb(0.0, TINY, restarts=1, seed=3, artifact_dir=tmp_path)
    assert result.bound_kind == "CH_channel"
    assert result.strategy == "HCRB"
    assert result.value == pytest.approx(artifacts.value)
    assert np.linalg.norm(artifacts.psi0) == pytest.approx(1.0, abs=1e-12)
    assert experiments.state_hcrb(artifacts.psi0, 0.0, TINY) == pytest.approx(result.value, abs=1e-8)

    stored = load_optimal_state(optimal_state_path(0.0, 3, tmp_path))
    npt.assert_allclose(stored.psi0, artifacts.psi0)
    reused = experiments.optimal_state(0.0, TINY, restarts=1, seed=3, artifact_dir=tmp_path)
    assert reused.value == artifacts.value
    rooted = TINY.model_copy(update={"master_seed": 3})
    assert experiments.optimal_state(0.0, rooted, restarts=1, artifact_dir=tmp_path).value == artifacts.value

    one_copy = experiments.copies_bound(0.0, 1, TINY, restarts=1, seed=3, state=artifacts)
    assert one_copy.bound_kind == "Ck_proj"
    assert one_copy.value >= result.value - 1e-6


def test_fully_dephased_channel_is_flagged_singular(tmp_path):
    result, artifacts = experiments.channel_hcrb(1.0, TINY, restarts=1, seed=2, artifact_dir=tmp_path)
    assert result.singular and result.value is None
    assert artifacts.value == np.inf
    one_copy = experiments.copies_bound(1.0, 1, TINY, restarts=1, seed=2, state=artifacts)
    assert one_copy.singular


def test_qc_bound_is_deterministic():
    cfg = OptimizerConfig(pso=PSOConfig(n_particles=4, max_iters=2, stagnation_window=2))
    first = experiments.qc_bound(0.2, cfg, restarts=1, seed=5)
    second = experiments.qc_bound(0.2, cfg, restarts=1, seed=5)
    assert (first.bound_kind, first.k, first.strategy) == ("QC2", 2, "QC")
    assert first.value == second.value


def test_qc_measurement_product_structure(rng):
    coeffs = rng.uniform(-np.pi, np.pi, 30)
    shared = experiments.qc_measurement(coeffs[:15])
    independent = experiments.qc_measurement(coeffs, independent=True)
    assert shared.is_projective and independent.is_projective
    assert shared.n_outcomes == 16
    half = unitary_from_coeffs(coeffs[:15], generator_set(2))
    npt.assert_allclose(shared.unitary, np.kron(half, half))
    npt.assert_allclose(independent.unitary, np.kron(half, unitary_from_coeffs(coeffs[15:], generator_set(2))))


@pytest.fixture
def fake_bounds(monkeypatch):
    calls = []

    def bound(kind, strategy, gamma, k, seed):
        return BoundResult(
            bound_kind=kind,
            value=1.0 + gamma + 0.1 * k,
            k=k,
            gamma=gamma,
            strategy=strategy,
            seed=seed,
            iterations=7,
            wall_time_s=time.perf_counter(),
        )

    def channel(gamma, optimizer, restarts, restart_tol, seed):
        calls.append(gamma)
        return bound("CH_channel", "HCRB", gamma, 1, seed), None

    def copies(gamma, k, optimizer, restarts, restart_tol, seed, state=None):
        return bound("Ck_proj", "CQ", gamma, k, seed)

    def qc(gamma, optimizer, restarts, restart_tol, seed, independent):
        return bound("QC2", "QC", gamma, 2, seed)

    monkeypatch.setattr(experiments, "channel_hcrb", channel)
    monkeypatch.setattr(experiments, "copies_bound", copies)
    monkeypatch.setattr(experiments, "qc_bound", qc)
    return calls


def _sweep_config(tmp_path, grid, **kwargs):
    return SweepConfig(gamma_grid=grid, copies=[1, 2], out=tmp_path / "sweep.csv", **kwargs)


def test_sweep_writes_sorted_csv(tmp_path, fake_bounds):
    config = _sweep_config(tmp_path, [0.5, 0.0])
    frame = experiments.run_sweep(config, n_jobs=1)
    header = config.out.read_text().splitlines()[0]
    assert header == ",".join(experiments.CSV_COLUMNS)
    assert len(frame) == 2 * experiments.expected_rows(config)
    assert list(frame["gamma"]) == sorted(frame["gamma"])
    assert set(frame["strategy"]) == {"HCRB", "CQ", "QC"}
    assert fake_bounds == [0.5, 0.0]


def test_reproducible_sweep_is_byte_identical(tmp_path, fake_bounds):
    config = _sweep_config(tmp_path, [0.0, 0.25], reproducible=True)
    experiments.run_sweep(config, n_jobs=1)
    first = config.out.read_bytes()
    experiments.run_sweep(config, n_jobs=1)
    assert config.out.read_bytes() == first
    assert (experiments.read_sweep(config.out)["wall_time_s"] == 0.0).all()


def test_sweep_seeds_derive_from_optimizer_master_seed(tmp_path, fake_bounds):
    config = _sweep_config(tmp_path, [0.0, 0.5], optimizer=OptimizerConfig(master_seed=77))
    assert config.seed == 77
    frame = experiments.run_sweep(config, n_jobs=1)
    by_gamma = frame.groupby("gamma")["seed"].unique()
    assert list(by_gamma[0.0]) == [substream_seed(77, 0)]
    assert list(by_gamma[0.5]) == [substream_seed(77, 1)]


def test_sweep_resume_skips_complete_points(tmp_path, fake_bounds):
    experiments.run_sweep(_sweep_config(tmp_path, [0.0, 0.5]), n_jobs=1)
    fake_bounds.clear()
    frame = experiments.run_sweep(_sweep_config(tmp_path, [0.0, 0.5, 1.0]), resume=True, n_jobs=1)
    assert fake_bounds == [1.0]
    assert sorted(frame["gamma"].unique()) == [0.0, 0.5, 1.0]


def test_sweep_resume_recomputes_partial_points(tmp_path, fake_bounds):
    config = _sweep_config(tmp_path, [0.0, 0.5])
    frame = experiments.run_sweep(config, n_jobs=1)
    experiments.write_sweep(frame[~((frame["gamma"] == 0.5) & (frame["strategy"] == "QC"))], config.out)
    fake_bounds.clear()
    frame = experiments.run_sweep(config, resume=True, n_jobs=1)
    assert fake_bounds == [0.5]
    assert len(frame) == 2 * experiments.expected_rows(config)


def test_parallel_sweep_keeps_finished_points_when_a_point_fails(tmp_path, monkeypatch):
    def point(config, index, gamma):
        if index == 2:
            time.sleep(0.3)
            raise RuntimeError("worker died")
        result = BoundResult(bound_kind="CH_channel", value=1.0, gamma=gamma, strategy="HCRB", seed=index)
        return [experiments._row(result, config.reproducible)]

    monkeypatch.setattr(experiments, "sweep_point", point)
    config = _sweep_config(tmp_path, [0.0, 0.25, 0.5, 0.75])
    with parallel_config(backend="threading"), pytest.raises(RuntimeError):
        experiments.run_sweep(config, n_jobs=2)
    written = experiments.read_sweep(config.out)
    assert sorted(written["gamma"]) == [0.0, 0.25]


def test_entanglement_table(rng):
    states = well_conditioned_states(rng, 20)
    table = experiments.entanglement_table(states)
    assert list(table.columns) == ["half_concurrence", "sld_bound", "holevo_bound"]
    assert (table["holevo_bound"] >= table["sld_bound"] - 1e-9).all()
    assert len(table.attrs["argmin_holevo"]) == 4


@pytest.mark.slow
def test_noiseless_channel_matches_real_state_optimum():
    _, optimum = optimal_real_state("holevo", seed=0)
    result, _ = experiments.channel_hcrb(0.0, seed=11)
    assert result.value <= optimum * (1 + 1e-3)


@pytest.mark.slow
def test_parallel_sweep_matches_serial(tmp_path):
    cfg = OptimizerConfig(pso=PSOConfig(n_particles=5, max_iters=4, stagnation_window=4))
    serial = SweepConfig(
        gamma_grid=[0.0, 0.3],
        copies=[1],
        include_qc=False,
        restarts=1,
        optimizer=cfg,
        reproducible=True,
        out=tmp_path / "serial.csv",
    )
    parallel = serial.model_copy(update={"out": tmp_path / "parallel.csv"})
    experiments.run_sweep(serial, n_jobs=1)
    experiments.run_sweep(parallel, n_jobs=2)
    assert serial.out.read_bytes() == parallel.out.read_bytes()


@pytest.mark.slow
def test_channel_bound_grows_with_dephasing():
    low, _ = experiments.channel_hcrb(0.1, seed=21)
    high, _ = experiments.channel_hcrb(0.5, seed=21)
    assert high.value >= low.value


def _copy_bounds(gamma, ks, seed):
    channel, state = experiments.channel_hcrb(gamma, seed=seed)
    return channel.value, {k: experiments.copies_bound(gamma, k, seed=seed, state=state).value for k in ks}


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [0.1, 0.5])
def test_copy_bounds_are_ordered(gamma):
    channel, copies = _copy_bounds(gamma, (1, 2), seed=31)
    # slack: restart tolerance
    assert copies[2] <= copies[1] * (1 + 1e-3)
    assert min(copies.values()) >= channel - 1e-6


@pytest.mark.slow
def test_two_copies_nearly_attain_channel_bound_at_high_noise():
    channel, copies = _copy_bounds(0.9, (2, 3), seed=41)
    assert (copies[2] - channel) / channel <= 0.03
    assert (copies[3] - copies[2]) / copies[2] <= 0.02


@pytest.mark.slow
def test_second_copy_barely_helps_at_low_noise():
    channel, copies = _copy_bounds(0.1, (1, 2), seed=41)
    assert (copies[1] - copies[2]) / copies[2] <= 0.02
    assert (copies[2] - channel) / channel >= 0.05


@pytest.mark.slow
@pytest.mark.parametrize("gamma, qc_wins", [(0.2, True), (0.9, False)])
def test_qc_strategy_crossover(gamma, qc_wins):
    _, copies = _copy_bounds(gamma, (2,), seed=51)
    qc = experiments.qc_bound(gamma, seed=51)
    assert (qc.value < copies[2]) is qc_wins
