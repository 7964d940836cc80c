"""
config.py - Typed configuration for experiments and flows

All records are strict pydantic models: unknown keys are rejected with the
offending key named, numeric ranges are validated before anything runs.
Precedence is CLI flag > config file > model default.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from bolax.errors import ConfigError


class StrictModel(BaseModel):
    """Frozen model that refuses unknown keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)


# =============================================================================
# Lattice and flow records
# =============================================================================


class LatticeSpec(StrictModel):
    """Truncation radius N, analyticity radius rho and smoothness index s."""

    n_max: int = Field(ge=1)
    rho: float = Field(default=0.5, ge=0.0)
    s: float = Field(default=1.0, ge=0.0)


class FlowConfig(StrictModel):
    """Time-stepping parameters for a single trajectory."""

    dt: float = Field(gt=0.0)
    t_end: float = Field(ge=0.0)
    record_every: int = Field(default=10, ge=1)
    lattice: LatticeSpec
    lambda_probes: tuple[float, ...] = (10.0, 50.0)
    n_eigs: int = Field(default=8, ge=1)
    explosion_factor: float = Field(default=10.0, gt=0.0)
    symmetry_tol: float = Field(default=1e-10, gt=0.0)
    halving_check: bool = False
    halving_tol: float = Field(default=1e-8, gt=0.0)


# =============================================================================
# Experiment file schema
# =============================================================================


class ModeSpec(StrictModel):
    """One positive Fourier mode; the negative partner is filled by symmetry."""

    n: int = Field(ge=1)
    re: float = 0.0
    im: float = 0.0


class InitialData(StrictModel):
    kind: Literal["modes", "random"] = "modes"
    # Standard small state: u0 = 2a cos x with a = 0.05
    modes: list[ModeSpec] = Field(default_factory=lambda: [ModeSpec(n=1, re=0.05)])
    amplitude: float = Field(default=0.05, gt=0.0)
    decay_margin: float = Field(default=0.5, gt=0.0)


class FlowSettings(StrictModel):
    kind: Literal["bo", "h_kappa"] = "bo"
    kappa: float | None = Field(default=None, gt=0.0)  # None: default_kappa rule
    dt: float = Field(default=1e-3, gt=0.0)
    t_end: float = Field(default=1.0, ge=0.0)
    record_every: int = Field(default=10, ge=1)
    lambda_probes: list[float] = Field(default_factory=lambda: [10.0, 50.0])
    halving_check: bool = False


class ConvergeSettings(StrictModel):
    kappas: list[float] = Field(default_factory=lambda: [250.0, 500.0, 1000.0, 2000.0])
    t_end: float = Field(default=0.5, ge=0.0)
    max_workers: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _ascending(self) -> "ConvergeSettings":
        if len(self.kappas) < 2:
            raise ValueError("kappas needs at least two values")
        if any(k <= 0 for k in self.kappas):
            raise ValueError("kappas must be positive")
        if any(b <= a for a, b in zip(self.kappas, self.kappas[1:])):
            raise ValueError("kappas must be strictly ascending")
        return self


class TrapSettings(StrictModel):
    t_end: float = Field(default=2.0, ge=0.0)


class VerifySettings(StrictModel):
    """Sample sizes of the verify suite; shrink them for smoke runs."""

    samples: int = Field(default=200, ge=1)
    resolvent_samples: int = Field(default=50, ge=1)
    gradient_states: int = Field(default=10, ge=1)
    gradient_directions: int = Field(default=20, ge=1)
    bound_samples: int = Field(default=100, ge=1)
    intertwine_steps: int = Field(default=512, ge=16)
    flow_n_max: int = Field(default=32, ge=4)


class Tolerances(StrictModel):
    series: float = Field(default=1e-12, gt=0.0)
    constants: float = Field(default=1e-8, gt=0.0)
    resolvent: float = Field(default=1e-10, gt=0.0)
    neumann: float = Field(default=1e-12, gt=0.0)
    gauge: float = Field(default=1e-10, gt=0.0)
    gradient: float = Field(default=1e-6, gt=0.0)
    beta: float = Field(default=1e-10, gt=0.0)
    intertwine: float = Field(default=1e-8, gt=0.0)
    conservation: float = Field(default=1e-6, gt=0.0)
    trap: float = Field(default=1e-4, gt=0.0)


class ExperimentConfig(StrictModel):
    """Everything a CLI command needs, parsed from one JSON file."""

    lattice: LatticeSpec
    initial: InitialData = Field(default_factory=InitialData)
    flow: FlowSettings = Field(default_factory=FlowSettings)
    converge: ConvergeSettings = Field(default_factory=ConvergeSettings)
    trap: TrapSettings = Field(default_factory=TrapSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    seed: int = 0
    output_dir: Path | None = None

    def flow_config(self, **changes: Any) -> FlowConfig:
        """Build the FlowConfig of the ``flow`` section, optionally patched."""
        params: dict[str, Any] = {
            "dt": self.flow.dt,
            "t_end": self.flow.t_end,
            "record_every": self.flow.record_every,
            "lattice": self.lattice,
            "lambda_probes": tuple(self.flow.lambda_probes),
            "halving_check": self.flow.halving_check,
        }
        params.update(changes)
        return FlowConfig(**params)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form, output location excluded."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


class BolaxSettings(BaseSettings):
    """Process-level settings read from BOLAX_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="BOLAX_", extra="ignore")

    output_dir: Path = Path("results")
    log_level: str = "INFO"


# =============================================================================
# Parsing
# =============================================================================

# CLI flag name -> location in the experiment file
FLAG_PATHS: dict[str, tuple[str, ...]] = {
    "dt": ("flow", "dt"),
    "t_end": ("flow", "t_end"),
    "kappa": ("flow", "kappa"),
    "kind": ("flow", "kind"),
    "n_max": ("lattice", "n_max"),
    "rho": ("lattice", "rho"),
    "seed": ("seed",),
    "out": ("output_dir",),
}


def _apply_override(raw: dict[str, Any], path: tuple[str, ...], value: Any) -> None:
    node = raw
    for key in path[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot override {'.'.join(path)}: '{key}' is not an object")
        node = child
    node[path[-1]] = value


def _describe(error: dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error["loc"])
    if error["type"] == "extra_forbidden":
        return f"unknown key '{error['loc'][-1]}' (at {location})"
    return f"{location}: {error['msg']}"


def parse_config(path: str | Path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Read, override and validate an experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")

    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        if flag not in FLAG_PATHS:
            raise ConfigError(f"unknown override flag '{flag}'")
        _apply_override(raw, FLAG_PATHS[flag], value)

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        details = "; ".join(_describe(err) for err in exc.errors())
        raise ConfigError(f"{path}: {details}") from exc
