from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


BoundKind = Literal["CC", "CS", "CH", "CH_channel", "Ck_proj", "QC2"]
Strategy = Literal["single", "HCRB", "CQ", "QC"]
SwitchEncoding = Literal["per_gate", "per_layer"]
GadgetScope = Literal["copy", "global"]


class BoundResult(BaseModel):
    bound_kind: BoundKind
    value: Optional[float] = Field(None, description="Bound value; None only when the model is singular")
    singular: bool = False
    k: int = Field(1, ge=1, description="Number of copies the bound refers to")
    gamma: Optional[float] = Field(None, ge=0.0, le=1.0)
    strategy: Strategy = "single"
    seed: Optional[int] = None
    iterations: int = 0
    wall_time_s: float = 0.0

    @model_validator(mode="after")
    def _value_or_singular(self) -> "BoundResult":
        if self.singular:
            return self
        if self.value is None or not self.value > 0:
            raise ValueError("A non-singular bound needs a positive value")
        return self


class _ConfigSection(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PSOConfig(_ConfigSection):
    omega: float = Field(0.729, description="Inertia factor")
    c1: float = Field(1.49445, description="Local (personal best) bias")
    c2: float = Field(1.49445, description="Swarm (global best) bias")
    n_particles: int = Field(40, ge=1)
    max_iters: int = Field(1000, ge=1)
    stagnation_window: int = Field(100, ge=1)
    velocity_fraction: float = Field(0.1, gt=0.0, description="Initial velocity scale relative to the box width")


class DEConfig(_ConfigSection):
    population_size: int = Field(150, ge=4, description="Np")
    generations: int = Field(600, ge=1, description="T")
    f_scale: float = Field(0.9, ge=0.0, le=2.0)
    crossover_rate: float = Field(0.3, ge=0.0, le=1.0, description="Cr")


class GradientDescentConfig(_ConfigSection):
    step: float = Field(1.0, gt=0.0, description="Initial trial step of the line search")
    max_steps: int = Field(200, ge=1)
    fd_step: float = Field(1e-6, gt=0.0, description="Central finite-difference step")
    tol: float = Field(1e-6, gt=0.0, description="Gradient-norm stopping threshold")


class GAConfig(_ConfigSection):
    pop_size: int = Field(50, ge=2)
    generations: int = Field(200, ge=0)
    crossover_rate: float = Field(0.7, ge=0.0, le=1.0)
    mutation_rate: float = Field(0.02, ge=0.0, le=1.0)
    elitism_count: int = Field(2, ge=0)
    growth_probability: float = Field(0.1, ge=0.0, le=1.0)
    target_value: Optional[float] = Field(None, description="Stop once the best value reaches this")
    inner_gd: GradientDescentConfig = GradientDescentConfig()

    @model_validator(mode="after")
    def _elites_fit(self) -> "GAConfig":
        if self.elitism_count > self.pop_size:
            raise ValueError("elitism_count cannot exceed pop_size")
        return self


class HolevoSolverConfig(_ConfigSection):
    restarts: int = Field(5, ge=0, description="Random restarts used to certify the mixed solver")
    restart_tol: float = Field(1e-5, gt=0.0)
    mu_start: float = Field(1e-2, gt=0.0)
    mu_end: float = Field(1e-8, gt=0.0)
    mu_stages: int = Field(7, ge=1)
    max_iter: int = Field(500, ge=1)


class OptimizerConfig(_ConfigSection):
    pso: PSOConfig = PSOConfig()
    de: DEConfig = DEConfig()
    ga: GAConfig = GAConfig()
    hcrb: HolevoSolverConfig = HolevoSolverConfig()
    master_seed: int = Field(1234, description="Root of every restart and grid-point substream when no seed is given")


class SweepConfig(_ConfigSection):
    gamma_grid: List[float] = Field(..., min_length=1)
    copies: List[int] = Field(default_factory=lambda: [1, 2, 3])
    optimizer: OptimizerConfig = OptimizerConfig()
    restarts: int = Field(5, ge=1, description="Independent optimizer restarts per grid point")
    restart_tol: float = Field(1e-3, gt=0.0)
    out: Path = Path("results/sweep.csv")
    seed: Optional[int] = Field(None, description="Sweep master seed; falls back to optimizer.master_seed")
    reproducible: bool = Field(False, description="Write wall_time_s as 0.0 so reruns are byte-identical")
    independent_qc_measurements: bool = False
    include_qc: bool = True

    @field_validator("gamma_grid")
    @classmethod
    def _gamma_in_range(cls, values: List[float]) -> List[float]:
        for g in values:
            if not 0.0 <= g <= 1.0:
                raise ValueError(f"gamma {g} outside [0, 1]")
        return values

    @field_validator("copies")
    @classmethod
    def _supported_copies(cls, values: List[int]) -> List[int]:
        for k in values:
            if k not in (1, 2, 3):
                raise ValueError(f"copies must be 1, 2 or 3, got {k}")
        return values

    @model_validator(mode="after")
    def _seed_from_optimizer(self) -> "SweepConfig":
        if self.seed is None:
            self.seed = self.optimizer.master_seed
        return self


class HealthResponse(BaseModel):
    status: str
    detail: Optional[str] = None


class PureHcrbRequest(BaseModel):
    r: List[float] = Field(..., min_length=4, max_length=4, description="Real amplitudes r1..r4")


class PureHcrbRow(BaseModel):
    r: List[float]
    concurrence: float
    sld_bound: Optional[float] = None
    holevo_closed_form: Optional[float] = None
    holevo_vector: Optional[float] = None
    singular: bool = False


class ModelBoundsRequest(BaseModel):
    amplitudes_real: List[float] = Field(..., min_length=4, max_length=4)
    amplitudes_imag: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0], min_length=4, max_length=4)
    gamma: float = Field(0.0, ge=0.0, le=1.0)
    weights: Optional[List[float]] = Field(None, min_length=3, max_length=3, description="Diagonal weight matrix")


class ModelBoundsResponse(BaseModel):
    gamma: float
    sld_bound: float
    holevo_bound: float
    d_matrix: List[List[float]]
    marginal_condition: bool
    asymptotically_classical: bool


class GadgetDocument(BaseModel):
    n_qubits: int = Field(..., ge=1)
    rotation_switches: str = Field(..., pattern=r"^[01]*$")
    cnot_switches: str = Field(..., pattern=r"^[01]*$")
    angles: List[List[List[float]]] = Field(..., description="(n+1) x n x 3 rotation angles")


class GenomeDocument(BaseModel):
    encoding: SwitchEncoding = "per_gate"
    k_copies: int = Field(1, ge=1, le=3)
    prep_scope: GadgetScope = "copy"
    meas_scope: GadgetScope = "global"
    prep: List[GadgetDocument] = []
    meas: List[GadgetDocument] = []
