"""
Validated settings models for the [em], [simulation], [baselines], [io] and
[logging] sections of a settings file.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from models.errors import InputDataError
from models.hmm import DEFAULT_P_FLOOR
from processing.em import EmConfig
from simulation.harness import DEFAULT_Q_GRID, SIM_METHODS, SimConfig


def _describe(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in error.errors())


class EmSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iterations: int = Field(default=200, ge=1)
    rel_tol: float = Field(default=1e-6, gt=0.0)
    seed: int = 0
    initializer: Literal["moment", "jittered"] = "moment"
    store_trace: bool = True
    min_features: int = Field(default=100, ge=1)
    density_support: float = Field(default=0.5, gt=0.0, le=1.0)

    def to_config(self, seed: Optional[int] = None) -> EmConfig:
        values = self.model_dump()
        if seed is not None:
            values["seed"] = seed
        return EmConfig(**values)


class SimSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: str = "scenario1"
    m: int = Field(default=10_000, ge=1)
    mu1: float = 2.0
    mu2: float = 2.0
    sigma1: float = Field(default=1.0, gt=0.0)
    sigma2: float = Field(default=1.0, gt=0.0)
    q_grid: tuple[float, ...] = DEFAULT_Q_GRID
    replications: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    methods: tuple[str, ...] = ("rlis", "maxp", "jump")
    mu_grid: tuple[float, ...] = ()
    pi1_grid: tuple[float, ...] = ()

    @field_validator("q_grid")
    @classmethod
    def _levels(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(not 0.0 < q < 1.0 for q in value):
            raise ValueError("every nominal level must lie in (0, 1)")
        return value

    @field_validator("methods")
    @classmethod
    def _methods(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        unknown = [m for m in value if m not in SIM_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        return value


class BaselineSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    jump_lambda1: float = Field(default=0.5, ge=0.0, lt=1.0)
    jump_lambda2: float = Field(default=0.5, ge=0.0, lt=1.0)
    jump_lambda3: float = Field(default=0.5, ge=0.0, lt=1.0)
    radjust_adaptive: bool = True

    @property
    def jump_lambdas(self) -> tuple[float, float, float]:
        return (self.jump_lambda1, self.jump_lambda2, self.jump_lambda3)

    def with_jump_overrides(self, *overrides: Optional[float]) -> "BaselineSettings":
        data = self.model_dump()
        for index, value in enumerate(overrides, start=1):
            if value is not None:
                data[f"jump_lambda{index}"] = value
        try:
            return BaselineSettings.model_validate(data)
        except ValidationError as e:
            raise InputDataError(f"invalid JUMP thresholds: {_describe(e)}") from e


class IoSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_floor: float = Field(default=DEFAULT_P_FLOOR, gt=0.0, lt=1e-3)
    id_column: str = "id"
    p1_column: str = "p1"
    p2_column: str = "p2"


class LoggingSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    level: str = "INFO"
    console_enabled: bool = False
    file_enabled: bool = True
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: str = "logs/replictl.log"
    max_file_size_mb: int = Field(default=10, ge=1)
    backup_count: int = Field(default=5, ge=0)


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    em: EmSettings = EmSettings()
    simulation: SimSettings = SimSettings()
    baselines: BaselineSettings = BaselineSettings()
    io: IoSettings = IoSettings()
    logging: LoggingSettings = LoggingSettings()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Settings":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise InputDataError(f"invalid settings: {_describe(e)}") from e

    def sim_config(self, seed: Optional[int] = None, threads: Optional[int] = None, **overrides: Any) -> SimConfig:
        """SimConfig from the [simulation], [em] and [baselines] sections, with CLI overrides applied."""
        sim = self.simulation
        values = {
            "m": sim.m,
            "scenario": sim.scenario,
            "mu1": sim.mu1,
            "mu2": sim.mu2,
            "sigma1": sim.sigma1,
            "sigma2": sim.sigma2,
            "q_grid": sim.q_grid,
            "replications": sim.replications,
            "seed": sim.seed if seed is None else seed,
            "threads": threads,
            "em": self.em.to_config(),
            "jump_lambdas": self.baselines.jump_lambdas,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return SimConfig(**values)
        except ValidationError as e:
            raise InputDataError(f"invalid simulation settings: {e.errors()[0]['msg']}") from e
