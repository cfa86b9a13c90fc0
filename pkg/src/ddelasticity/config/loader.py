"""
Configuration loading and validation for ddelasticity.
"""
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..fem.assembly import TractionSpec
from ..fem.material import MaterialSpec
from ..mesh.structured import BoundarySpec, Edge, square_most_grid
from ..utils.exceptions import ConfigError


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")


class RunMode(str, Enum):
    """What the CLI run does."""
    SOLVE = "solve"
    TOPOPT = "topopt"
    SWEEP = "sweep"


class InterfacePreconditioner(str, Enum):
    """Choice of S̃ in the block-triangular preconditioner."""
    IDENTITY = "identity"
    HNORM = "hnorm"
    EXACT_SCHUR = "exact-schur"


class LanczosMode(str, Enum):
    """How the fractional power is applied."""
    INVERSE = "inverse"
    TRUNCATED = "truncated"
    DENSE = "dense-oracle"


class NormVariant(str, Enum):
    """``reduced``: M(M⁻¹L)^{1-θ}; ``full``: M + M(M⁻¹L)^{1-θ}."""
    REDUCED = "reduced"
    FULL = "full"


def parse_length(value: Any) -> float:
    """Accept floats or fractions written as ``"1/32"``."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"cannot parse length {value!r}") from e
    return float(value)


class KrylovConfig(StrictModel):
    """Outer/inner Krylov solver settings."""
    tolerance: float = Field(default=1e-6, gt=0.0, lt=1.0)
    max_iterations: int = Field(default=500, ge=1)
    restart: Optional[int] = Field(default=None, ge=1)
    keep_basis: bool = False


class FractionalNormConfig(StrictModel):
    """Interface fractional norm Ĥ_θ settings."""
    theta: float = Field(default=0.5, ge=0.0, le=1.0)
    lanczos_vectors: int = Field(default=10, ge=1)
    inner_pcg_tolerance: float = Field(default=1e-3, gt=0.0, lt=1.0)
    inner_pcg_max_iterations: int = Field(default=200, ge=1)
    mode: LanczosMode = LanczosMode.INVERSE
    variant: NormVariant = NormVariant.REDUCED
    floating_shift: float = Field(default=1.0, gt=0.0)


class AdaptiveToleranceConfig(StrictModel):
    """GMRES tolerance driven by successive compliance values."""
    enabled: bool = True
    tol_min: float = Field(default=1e-8, gt=0.0, lt=1.0)
    tol_max: float = Field(default=1e-4, gt=0.0, lt=1.0)
    scale: float = Field(default=0.1, gt=0.0)

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.tol_min > self.tol_max:
            raise ValueError("tol_min must not exceed tol_max")
        return self


class OcConfig(StrictModel):
    """Optimality Criteria density update and fixed-point loop settings."""
    move_limit: float = Field(default=0.2, gt=0.0)
    damping: float = Field(default=0.5, gt=0.0, le=1.0)
    bisection_tolerance: float = Field(default=1e-6, gt=0.0, lt=1.0)
    change_tolerance: float = Field(default=1e-2, gt=0.0)
    max_iterations: int = Field(default=100, ge=1)
    rho_min: float = Field(default=1e-3, gt=0.0)
    rho_max: float = Field(default=1.0, gt=0.0)
    volume_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    initial_density: Optional[float] = Field(default=None, gt=0.0)
    write_history: bool = False

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.rho_min >= self.rho_max:
            raise ValueError("rho_min must be below rho_max")
        if self.move_limit > self.rho_max - self.rho_min:
            raise ValueError("move_limit must not exceed rho_max - rho_min")
        return self


class SolverConfig(StrictModel):
    """Decomposed solve settings."""
    precond: InterfacePreconditioner = InterfacePreconditioner.HNORM
    krylov: KrylovConfig = Field(default_factory=KrylovConfig)
    interface: FractionalNormConfig = Field(default_factory=FractionalNormConfig)
    adaptive_tolerance: AdaptiveToleranceConfig = Field(default_factory=AdaptiveToleranceConfig)
    schur_oracle_cap: int = Field(default=2000, ge=1)


class LoadConfig(StrictModel):
    """Body force, tractions and clamped sides."""
    body_force: Tuple[float, float] = (0.0, -0.75)
    tractions: List[TractionSpec] = Field(default_factory=lambda: [TractionSpec()])
    clamped_edges: List[Edge] = Field(default_factory=lambda: [Edge.RIGHT])

    @field_validator("clamped_edges")
    @classmethod
    def validate_clamped(cls, v):
        if not v:
            raise ValueError("at least one clamped edge is required")
        return v

    def boundary_spec(self) -> BoundarySpec:
        return BoundarySpec.clamped(self.clamped_edges)


class ProblemConfig(StrictModel):
    """Geometry, discretisation and partition of the cantilever problem."""
    extents: Tuple[float, float] = (2.0, 1.0)
    h: float = 1.0 / 32
    domains: int = Field(default=4, ge=1)
    px: Optional[int] = Field(default=None, ge=1)
    py: Optional[int] = Field(default=None, ge=1)
    material: MaterialSpec = Field(default_factory=MaterialSpec)
    load: LoadConfig = Field(default_factory=LoadConfig)

    @field_validator("h", mode="before")
    @classmethod
    def validate_h(cls, v):
        h = parse_length(v)
        if h <= 0:
            raise ValueError("h must be positive")
        return h

    def grid(self) -> Tuple[int, int]:
        """Subdomain grid; explicit px/py win over ``domains``."""
        if self.px is not None and self.py is not None:
            return self.px, self.py
        return square_most_grid(self.domains, *self.extents)


class SweepConfig(StrictModel):
    """Experiment grid; ``thetas`` pairs one θ with each entry of ``domains``."""
    task: RunMode = RunMode.SOLVE
    h: List[float] = Field(default_factory=lambda: [1 / 32, 1 / 64, 1 / 128])
    domains: List[int] = Field(default_factory=lambda: [4, 16, 64])
    thetas: Optional[List[float]] = None
    preconds: List[InterfacePreconditioner] = Field(
        default_factory=lambda: [InterfacePreconditioner.HNORM]
    )

    @field_validator("h", mode="before")
    @classmethod
    def validate_h(cls, v):
        return [parse_length(x) for x in v]

    @field_validator("thetas")
    @classmethod
    def validate_thetas(cls, v):
        if v is not None and any(not 0.0 <= t <= 1.0 for t in v):
            raise ValueError("every theta must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def validate_pairing(self):
        if self.task is RunMode.SWEEP:
            raise ValueError("sweep task must be 'solve' or 'topopt'")
        if self.thetas is not None and len(self.thetas) != len(self.domains):
            raise ValueError("thetas must have one entry per domain count")
        return self

    def cells(self) -> List[Tuple[float, int, Optional[float], InterfacePreconditioner]]:
        """All (h, N, θ, S̃) combinations in table order."""
        out = []
        for precond in self.preconds:
            for h in self.h:
                for k, n in enumerate(self.domains):
                    theta = self.thetas[k] if self.thetas is not None else None
                    out.append((h, n, theta, precond))
        return out


class ExecutionConfig(StrictModel):
    """Execution settings."""
    max_workers: int = Field(default=1, ge=1)


class LoggingConfig(StrictModel):
    """Logging configuration."""
    level: str = "INFO"
    file: Optional[str] = None
    console: bool = True
    console_iterations: bool = True

    @field_validator("level")
    @classmethod
    def validate_level(cls, v):
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown logging level {v!r}")
        return level


class RunConfig(StrictModel):
    """Main configuration object."""
    mode: RunMode = RunMode.SOLVE
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    oc: OcConfig = Field(default_factory=OcConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    execution: ExecutionConfig = Field(default_factory=ExecutionConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    output_dir: str = "results"
    write_vtk: bool = True
    check_monolithic: bool = False


def load_yaml_file(file_path: Path) -> Dict[str, Any]:
    """
    Load and parse a YAML file.

    Args:
        file_path: Path to YAML file

    Returns:
        Parsed YAML content as dictionary

    Raises:
        ConfigError: If file doesn't exist or is invalid
    """
    if not file_path.exists():
        raise ConfigError(f"Configuration file not found: {file_path}")

    try:
        with open(file_path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {file_path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"Error reading {file_path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Top level of {file_path} must be a mapping")
    return data


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = ".".join(str(p) for p in item.get("loc", ()))
        parts.append(f"{key}: {item.get('msg')}")
    return "; ".join(parts)


def build_run_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Validate a raw mapping (plus nested overrides) into a RunConfig.

    Raises:
        ConfigError: Naming every offending key
    """
    merged = _merge(data, overrides or {})
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_describe(e)}") from e
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def load_run_config(config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load a run configuration: defaults ← YAML file ← overrides.

    Args:
        config_path: Optional YAML file
        overrides: Nested mapping of values that win over the file (CLI flags)

    Returns:
        Validated RunConfig
    """
    from ..utils.logging import logger

    data: Dict[str, Any] = {}
    if config_path is not None:
        logger.info(f"Loading configuration from YAML: {config_path}")
        data = load_yaml_file(Path(config_path))
    return build_run_config(data, overrides)


def save_run_config(config: RunConfig, config_path: Path) -> None:
    """
    Save configuration to YAML file.

    Raises:
        ConfigError: If unable to save configuration
    """
    try:
        config_dict = config.model_dump(mode="json", exclude_none=True)
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w") as f:
            yaml.dump(config_dict, f, default_flow_style=False, sort_keys=False)
    except OSError as e:
        raise ConfigError(f"Error saving configuration: {e}") from e
