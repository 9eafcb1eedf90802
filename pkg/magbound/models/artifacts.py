from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import joblib
import numpy as np

from magbound.config import settings


@dataclass
class OptimalStateArtifacts:
    gamma: float
    seed: int
    value: float
    # coefficients over the two-qubit generator set and the ket they prepare
    coefficients: np.ndarray
    psi0: np.ndarray
    iterations: int = 0


def optimal_state_path(gamma: float, seed: int, base_dir: Optional[Path] = None) -> Path:
    base_dir = base_dir or settings.artifact_dir
    return Path(base_dir) / f"optimal_state_g{gamma:.4f}_s{seed}.joblib"


def save_optimal_state(artifacts: OptimalStateArtifacts, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    joblib.dump(
        {
            "gamma": artifacts.gamma,
            "seed": artifacts.seed,
            "value": artifacts.value,
            "coefficients": np.asarray(artifacts.coefficients),
            "psi0": np.asarray(artifacts.psi0),
            "iterations": artifacts.iterations,
        },
        path,
    )


def load_optimal_state(path: Path) -> OptimalStateArtifacts:
    obj = joblib.load(path)
    return OptimalStateArtifacts(
        gamma=float(obj["gamma"]),
        seed=int(obj["seed"]),
        value=float(obj["value"]),
        coefficients=np.asarray(obj["coefficients"], dtype=float),
        psi0=np.asarray(obj["psi0"], dtype=complex),
        iterations=int(obj.get("iterations", 0)),
    )
