from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException

from magbound.config import settings
from magbound.models.encoding import build_model
from magbound.models.states import RealTwoQubitState
from magbound.schemas import (
    HealthResponse,
    ModelBoundsRequest,
    ModelBoundsResponse,
    PureHcrbRequest,
    PureHcrbRow,
)
from magbound.services.experiments import pure_hcrb_row
from magbound.services.fisher import classicality_check, sld_crb
from magbound.services.hcrb import mixed_hcrb, pure_model_hcrb
from magbound.utils.linalg import normalized_ket


app = FastAPI(title=settings.project_name)


def _input_ket(req: ModelBoundsRequest) -> np.ndarray:
    return normalized_ket(np.asarray(req.amplitudes_real) + 1j * np.asarray(req.amplitudes_imag))


def _weights(values: Optional[list]) -> Optional[np.ndarray]:
    return None if values is None else np.diag(np.asarray(values, dtype=float))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", detail=f"artifacts in {settings.artifact_dir}")


@app.post("/bounds/pure-hcrb", response_model=PureHcrbRow)
def pure_hcrb(req: PureHcrbRequest) -> PureHcrbRow:
    try:
        return pure_hcrb_row(RealTwoQubitState(np.asarray(req.r, dtype=float)))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


@app.post("/bounds/model", response_model=ModelBoundsResponse)
def model_bounds(req: ModelBoundsRequest) -> ModelBoundsResponse:
    """SLD and Holevo bounds of one (state, gamma) model at the working point."""
    try:
        model = build_model(_input_ket(req), req.gamma)
        weights = _weights(req.weights)
        if req.gamma == 0.0:
            holevo = pure_model_hcrb(model, weights).value
        else:
            holevo = mixed_hcrb(model, weights, seed=settings.default_seed).value
        report = classicality_check(model)
        return ModelBoundsResponse(
            gamma=req.gamma,
            sld_bound=sld_crb(model, weights=weights).value,
            holevo_bound=holevo,
            d_matrix=report.d_matrix.tolist(),
            marginal_condition=report.marginal_condition,
            asymptotically_classical=report.asymptotically_classical,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
