"""
Experiment services behind the command-line driver.

- pure_hcrb_table: closed-form and solver bounds for given real states.
- channel_hcrb: HCRB minimized over two-qubit input states for the dephased
  channel (PSO over unitary coefficients, inner Holevo solver).
- copies_bound: k-copy projective bound k Tr F^-1 for the HCRB-optimal input,
  PSO over copy-permutation-invariant measurement unitaries.
- qc_bound: entangled four-qubit input with the same (or independent)
  two-qubit projective measurement on both halves.
- run_sweep: all of the above across a gamma grid into one CSV.

Restarted searches are compared; a relative spread above ``restart_tol``
raises NonConvergenceError.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from magbound.config import settings
from magbound.errors import NonConvergenceError, SingularModelError
from magbound.models.artifacts import (
    OptimalStateArtifacts,
    load_optimal_state,
    optimal_state_path,
    save_optimal_state,
)
from magbound.models.encoding import build_model, kcopy_model
from magbound.models.states import RealTwoQubitState
from magbound.schemas import BoundResult, OptimizerConfig, PureHcrbRow, SweepConfig
from magbound.services.fisher import (
    SINGULAR_PENALTY,
    Measurement,
    cfi_matrix,
    crb_or_penalty,
    outcome_distribution,
    sld_crb,
)
from magbound.services.hcrb import closed_form_hcrb, entanglement_curve, mixed_hcrb, pure_model_hcrb
from magbound.services.optimizers import OptimizationResult, SearchSpace, pso_minimize, substream_seed
from magbound.services.parametrization import (
    param_state,
    perm_invariant_basis,
    unitary_from_coeffs,
)
from magbound.utils.linalg import generator_set

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["gamma", "k", "strategy", "bound_kind", "value", "seed", "iterations", "wall_time_s"]
COEFF_BOUND = np.pi


def _coefficient_space(dims: int) -> SearchSpace:
    return SearchSpace.box(dims, -COEFF_BOUND, COEFF_BOUND)


@dataclass
class RestartSummary:
    best: OptimizationResult
    values: List[float]
    iterations: int


def _penalized(value: float) -> dict:
    """BoundResult fields for a search value, flagging the singular penalty."""
    if value >= SINGULAR_PENALTY:
        return {"value": None, "singular": True}
    return {"value": value}


def best_of_restarts(
    run: Callable[[int], OptimizationResult],
    restarts: int,
    restart_tol: float,
    seed: int,
    label: str,
) -> RestartSummary:
    results = [run(substream_seed(seed, r)) for r in range(restarts)]
    values = [r.value for r in results]
    best = min(results, key=lambda r: r.value)
    spread = (max(values) - best.value) / abs(best.value)
    logger.info("%s: best %.8f over %d restarts (spread %.2e)", label, best.value, restarts, spread)
    if spread > restart_tol:
        raise NonConvergenceError(f"{label}: restarts disagree by {spread:.2e} (tolerance {restart_tol:.1e})")
    return RestartSummary(best=best, values=values, iterations=sum(r.iterations for r in results))


# ---------------------------------------------------------------------------
# Pure-state table
# ---------------------------------------------------------------------------


def pure_hcrb_row(state: RealTwoQubitState) -> PureHcrbRow:
    row = PureHcrbRow(r=state.r.tolist(), concurrence=state.concurrence)
    try:
        model = build_model(state.ket())
        row.sld_bound = sld_crb(model).value
        row.holevo_closed_form = closed_form_hcrb(state).value
        row.holevo_vector = pure_model_hcrb(model).value
    except SingularModelError:
        row.singular = True
        row.sld_bound = row.holevo_closed_form = row.holevo_vector = None
    return row


def pure_hcrb_table(states: Sequence[RealTwoQubitState]) -> pd.DataFrame:
    return pd.DataFrame([pure_hcrb_row(s).model_dump() for s in states])


# ---------------------------------------------------------------------------
# Channel HCRB
# ---------------------------------------------------------------------------


def state_hcrb(psi0: np.ndarray, gamma: float, optimizer: OptimizerConfig, seed: Optional[int] = None) -> float:
    model = build_model(psi0, gamma)
    if gamma == 0.0:
        return pure_model_hcrb(model).value
    return mixed_hcrb(model, cfg=optimizer.hcrb, seed=seed).value


def _channel_objective(gamma: float, optimizer: OptimizerConfig) -> Callable[[np.ndarray], float]:
    inner = optimizer.hcrb.model_copy(update={"restarts": 0})
    quick = optimizer.model_copy(update={"hcrb": inner})

    def objective(coeffs: np.ndarray) -> float:
        try:
            return state_hcrb(param_state(coeffs, 2), gamma, quick)
        except SingularModelError:
            return SINGULAR_PENALTY

    return objective


def channel_hcrb(
    gamma: float,
    optimizer: Optional[OptimizerConfig] = None,
    restarts: int = 5,
    restart_tol: float = 1e-3,
    seed: Optional[int] = None,
    artifact_dir: Optional[Path] = None,
) -> Tuple[BoundResult, OptimalStateArtifacts]:
    optimizer = optimizer or OptimizerConfig()
    seed = optimizer.master_seed if seed is None else seed
    start = time.perf_counter()
    objective = _channel_objective(gamma, optimizer)
    space = _coefficient_space(len(generator_set(2)))
    summary = best_of_restarts(
        lambda s: pso_minimize(objective, space, optimizer.pso, seed=s),
        restarts,
        restart_tol,
        seed,
        f"channel HCRB gamma={gamma:.3f}",
    )
    coeffs = summary.best.x
    psi0 = param_state(coeffs, 2)
    try:
        value = state_hcrb(psi0, gamma, optimizer, seed=seed)
    except SingularModelError:
        logger.warning("channel HCRB gamma=%.3f: every searched input gives a singular model", gamma)
        value = None
    artifacts = OptimalStateArtifacts(
        gamma=gamma,
        seed=seed,
        value=np.inf if value is None else value,
        coefficients=coeffs,
        psi0=psi0,
        iterations=summary.iterations,
    )
    save_optimal_state(artifacts, optimal_state_path(gamma, seed, artifact_dir))
    result = BoundResult(
        bound_kind="CH_channel",
        value=value,
        singular=value is None,
        k=1,
        gamma=gamma,
        strategy="HCRB",
        seed=seed,
        iterations=summary.iterations,
        wall_time_s=time.perf_counter() - start,
    )
    return result, artifacts


def optimal_state(
    gamma: float,
    optimizer: Optional[OptimizerConfig] = None,
    restarts: int = 5,
    restart_tol: float = 1e-3,
    seed: Optional[int] = None,
    artifact_dir: Optional[Path] = None,
) -> OptimalStateArtifacts:
    """Stored HCRB-optimal input for (gamma, seed), computed on first use."""
    optimizer = optimizer or OptimizerConfig()
    seed = optimizer.master_seed if seed is None else seed
    path = optimal_state_path(gamma, seed, artifact_dir)
    if path.exists():
        logger.info("reusing optimal state from %s", path)
        return load_optimal_state(path)
    return channel_hcrb(gamma, optimizer, restarts, restart_tol, seed, artifact_dir)[1]


# ---------------------------------------------------------------------------
# k-copy projective bound and QC strategy
# ---------------------------------------------------------------------------


def projective_objective(model, gens, k: int) -> Callable[[np.ndarray], float]:
    def objective(coeffs: np.ndarray) -> float:
        p, dp = outcome_distribution(model, Measurement.projective(unitary_from_coeffs(coeffs, gens)))
        return crb_or_penalty(cfi_matrix(p, dp), k)

    return objective


def copies_bound(
    gamma: float,
    k: int,
    optimizer: Optional[OptimizerConfig] = None,
    restarts: int = 5,
    restart_tol: float = 1e-3,
    seed: Optional[int] = None,
    state: Optional[OptimalStateArtifacts] = None,
    artifact_dir: Optional[Path] = None,
) -> BoundResult:
    optimizer = optimizer or OptimizerConfig()
    seed = optimizer.master_seed if seed is None else seed
    start = time.perf_counter()
    state = state or optimal_state(gamma, optimizer, restarts, restart_tol, seed, artifact_dir)
    model = kcopy_model(build_model(state.psi0, gamma), k)
    gens = perm_invariant_basis(2, k)
    objective = projective_objective(model, gens, k)
    summary = best_of_restarts(
        lambda s: pso_minimize(objective, _coefficient_space(len(gens)), optimizer.pso, seed=s),
        restarts,
        restart_tol,
        substream_seed(seed, k),
        f"{k}-copy bound gamma={gamma:.3f}",
    )
    return BoundResult(
        bound_kind="Ck_proj",
        **_penalized(summary.best.value),
        k=k,
        gamma=gamma,
        strategy="CQ",
        seed=seed,
        iterations=summary.iterations,
        wall_time_s=time.perf_counter() - start,
    )


def qc_measurement(coeffs: np.ndarray, independent: bool = False) -> Measurement:
    gens = generator_set(2)
    n = len(gens)
    first = unitary_from_coeffs(coeffs[:n], gens)
    second = unitary_from_coeffs(coeffs[n : 2 * n], gens) if independent else first
    return Measurement.projective(np.kron(first, second))


def qc_bound(
    gamma: float,
    optimizer: Optional[OptimizerConfig] = None,
    restarts: int = 5,
    restart_tol: float = 1e-3,
    seed: Optional[int] = None,
    independent_measurements: bool = False,
) -> BoundResult:
    """2 Tr F^-1 for a four-qubit input and a product of two-qubit projective measurements."""
    optimizer = optimizer or OptimizerConfig()
    seed = optimizer.master_seed if seed is None else seed
    start = time.perf_counter()
    state_gens = generator_set(4)
    n_state = len(state_gens)
    n_meas = len(generator_set(2)) * (2 if independent_measurements else 1)

    def objective(coeffs: np.ndarray) -> float:
        psi0 = param_state(coeffs[:n_state], 4, state_gens)
        model = build_model(psi0, gamma)
        p, dp = outcome_distribution(model, qc_measurement(coeffs[n_state:], independent_measurements))
        return crb_or_penalty(cfi_matrix(p, dp), 2)

    summary = best_of_restarts(
        lambda s: pso_minimize(objective, _coefficient_space(n_state + n_meas), optimizer.pso, seed=s),
        restarts,
        restart_tol,
        substream_seed(seed, 99),
        f"QC bound gamma={gamma:.3f}",
    )
    return BoundResult(
        bound_kind="QC2",
        **_penalized(summary.best.value),
        k=2,
        gamma=gamma,
        strategy="QC",
        seed=seed,
        iterations=summary.iterations,
        wall_time_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


def _row(result: BoundResult, reproducible: bool) -> dict:
    row = result.model_dump(include=set(CSV_COLUMNS))
    if reproducible:
        row["wall_time_s"] = 0.0
    return row


def expected_rows(config: SweepConfig) -> int:
    return 1 + len(config.copies) + int(config.include_qc)


def sweep_point(config: SweepConfig, index: int, gamma: float) -> List[dict]:
    seed = substream_seed(config.seed, index)
    opt = config.optimizer
    channel, state = channel_hcrb(gamma, opt, config.restarts, config.restart_tol, seed)
    rows = [_row(channel, config.reproducible)]
    for k in config.copies:
        rows.append(
            _row(copies_bound(gamma, k, opt, config.restarts, config.restart_tol, seed, state=state), config.reproducible)
        )
    if config.include_qc:
        qc = qc_bound(gamma, opt, config.restarts, config.restart_tol, seed, config.independent_qc_measurements)
        rows.append(_row(qc, config.reproducible))
    return rows


def read_sweep(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"k": int, "seed": "int64", "iterations": int})


def write_sweep(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = frame[CSV_COLUMNS].sort_values(["gamma", "strategy", "k"], kind="mergesort")
    frame.to_csv(path, index=False)


def run_sweep(config: SweepConfig, resume: bool = False, n_jobs: Optional[int] = None) -> pd.DataFrame:
    """
    Compute every grid point not already complete in ``config.out`` and
    rewrite the CSV after each one.
    """
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    out = Path(config.out)
    done = read_sweep(out) if resume and out.exists() else pd.DataFrame(columns=CSV_COLUMNS)
    complete = {g for g, group in done.groupby("gamma") if len(group) >= expected_rows(config)}
    done = done[done["gamma"].isin(complete)]
    pending = [(i, g) for i, g in enumerate(config.gamma_grid) if not any(np.isclose(g, c) for c in complete)]
    logger.info("sweep: %d grid points pending, %d already complete", len(pending), len(complete))

    frames = [done] if len(done) else []
    if n_jobs == 1:
        batches = (sweep_point(config, index, gamma) for index, gamma in pending)
    else:
        # results arrive in grid order as each point finishes
        parallel = Parallel(n_jobs=n_jobs, return_as="generator")
        batches = parallel(delayed(sweep_point)(config, i, g) for i, g in pending)
    for rows in batches:
        frames.append(pd.DataFrame(rows))
        write_sweep(pd.concat(frames, ignore_index=True), out)
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=CSV_COLUMNS)
    write_sweep(frame, out)
    return read_sweep(out)


# ---------------------------------------------------------------------------
# Entanglement table
# ---------------------------------------------------------------------------


def entanglement_table(states: Sequence[RealTwoQubitState]) -> pd.DataFrame:
    curve = entanglement_curve(states)
    frame = pd.DataFrame(curve.rows, columns=["half_concurrence", "sld_bound", "holevo_bound"])
    frame.attrs["argmin_holevo"] = None if curve.argmin_holevo is None else curve.argmin_holevo.r.tolist()
    frame.attrs["argmin_sld"] = None if curve.argmin_sld is None else curve.argmin_sld.r.tolist()
    return frame
