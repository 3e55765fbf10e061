"""
Scenario Configuration System

Declarative JSON scenarios validated with pydantic, plus a manager that loads a
directory of scenario files the same way component templates used to be
loaded.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError
from src.gaussian_dynamics import IntegratorSettings
from src.protocols import VARIANTS, ScenarioParams

logger = logging.getLogger(__name__)

DENSE_VARIANTS = ("qudit_register", "three_qudit", "oscillator")

GAUSSIAN_MEASURES = (
    "log_negativity", "purity", "entropy", "eof", "pairing", "page_curve",
    "inefficiency", "rms_error",
    "recovered_log_negativity", "recovered_purity", "recovered_eof", "recovered_inefficiency",
    "conditional_log_negativity", "conditional_eof", "conditional_page_curve",
)
DENSE_MEASURES = ("log_negativity", "purity", "trajectory_log_negativity")

SWEEPABLE = ("gamma", "eta", "M", "t_f", "omega", "delta_omega", "n", "mu", "kappa", "d", "n_tr")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsConfig(_Strict):
    """Physical parameters; rates in units of γ, times in units of 1/γ"""
    gamma: float = Field(1.0, gt=0)
    eta: float = 1.0
    M: int = Field(1, ge=1)
    t_f: Optional[float] = Field(10.0, gt=0)
    omega: float = 0.0
    delta_omega: float = 0.0
    n: int = Field(2, ge=2)
    mu: float = Field(1e-8, gt=0)
    kappa: float = Field(100.0, gt=0)
    d: int = Field(2, ge=2)
    n_tr: int = Field(8, ge=2)
    lattice: bool = False
    reference_variant: str = "feedforward"
    stop_rule: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.lattice and self.n % 2:
            raise ValueError(f"lattice size n must be even, got {self.n}")
        if self.t_f is None and not self.stop_rule:
            raise ValueError("t_f may only be omitted when stop_rule is enabled")
        if self.reference_variant not in VARIANTS:
            raise ValueError(f"reference_variant must be one of {VARIANTS}")
        return self


class AxisGrid(_Strict):
    """Secondary grid averaged over by the rms_error measure"""
    axis: str
    values: List[float] = Field(min_length=1)
    t_f_values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.axis not in SWEEPABLE:
            raise ValueError(f"average_over axis '{self.axis}' is not a parameter")
        if self.t_f_values is not None and len(self.t_f_values) != len(self.values):
            raise ValueError("t_f_values must align with values")
        return self


class SweepSpec(_Strict):
    axis: str
    values: List[float] = Field(min_length=1)
    average_over: Optional[AxisGrid] = None

    @field_validator("axis")
    @classmethod
    def _axis_is_parameter(cls, axis: str) -> str:
        if axis not in SWEEPABLE:
            raise ValueError(f"sweep axis '{axis}' is not a parameter; expected one of {SWEEPABLE}")
        return axis


class SeedSpec(_Strict):
    base: int = 1000
    count: int = Field(0, ge=0)
    batch: int = Field(500, ge=1)

    def batches(self) -> List[List[int]]:
        seeds = [self.base + k for k in range(self.count)]
        return [seeds[i:i + self.batch] for i in range(0, len(seeds), self.batch)]


class TimeGrid(_Strict):
    """Explicit times, or `num` evenly spaced points on [0, t_f], or the final time only"""
    times: Optional[List[float]] = None
    num: int = Field(101, ge=1)
    final_only: bool = False

    def resolve(self, t_f: float) -> List[float]:
        if self.final_only:
            return [float(t_f)]
        if self.times is not None:
            return sorted(float(t) for t in self.times if t <= t_f + 1e-12)
        if self.num == 1:
            return [float(t_f)]
        return [float(t) for t in np.linspace(0.0, t_f, self.num)]


class IntegratorConfig(_Strict):
    method: Literal["rk4", "expm"] = "rk4"
    max_step: float = Field(1e-3, gt=0)
    expm_chunk: float = Field(0.5, gt=0)
    sde_step: float = Field(1e-4, gt=0)
    dense_step: float = Field(1e-3, gt=0)

    def to_settings(self) -> IntegratorSettings:
        return IntegratorSettings(
            method=self.method,
            max_step=self.max_step,
            expm_chunk=self.expm_chunk,
            sde_step=self.sde_step,
        )


class PartitionConfig(_Strict):
    side_a: Optional[List[str]] = None


class ScenarioConfig(_Strict):
    """Declarative description of one experiment"""
    name: str
    description: str = ""
    engine: Literal["gaussian", "dense"] = "gaussian"
    variant: str
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    partition: PartitionConfig = Field(default_factory=PartitionConfig)
    sweep: Optional[SweepSpec] = None
    seeds: SeedSpec = Field(default_factory=SeedSpec)
    outputs: List[str] = Field(min_length=1)
    sample_times: TimeGrid = Field(default_factory=TimeGrid)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    preset: Optional[str] = None
    scale: Literal["desk", "full"] = "desk"

    @model_validator(mode="after")
    def _check_engine(self):
        if self.engine == "gaussian":
            variants, measures = VARIANTS, GAUSSIAN_MEASURES
        else:
            variants, measures = DENSE_VARIANTS, DENSE_MEASURES
        if self.variant not in variants:
            raise ValueError(f"variant '{self.variant}' is not available for the {self.engine} engine")
        unknown = [m for m in self.outputs if m not in measures]
        if unknown:
            raise ValueError(f"unknown outputs for the {self.engine} engine: {unknown}")
        if "rms_error" in self.outputs and (self.sweep is None or self.sweep.average_over is None):
            raise ValueError("rms_error needs sweep.average_over")
        if "trajectory_log_negativity" in self.outputs and self.seeds.count == 0:
            raise ValueError("trajectory_log_negativity needs seeds.count > 0")
        if self.engine == "dense":
            if self.params.lattice or self.params.stop_rule:
                raise ValueError("the dense engine runs fixed-duration two-mode or register models only")
            if self.variant == "oscillator" and "trajectory_log_negativity" in self.outputs:
                raise ValueError("trajectory_log_negativity needs a register model")
        if self.engine == "gaussian" and self.params.lattice:
            if self.variant not in ("conditional", "feedforward", "dephasing"):
                raise ValueError(f"variant '{self.variant}' is not available on a lattice")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def param_values(self, sweep_value: Optional[float] = None) -> Dict[str, Any]:
        values = self.params.model_dump()
        if self.sweep is not None and sweep_value is not None:
            values[self.sweep.axis] = sweep_value
        for key in ("M", "n", "d", "n_tr"):
            values[key] = int(round(values[key]))
        return values

    def to_params(self, sweep_value: Optional[float] = None, overrides: Optional[Dict[str, Any]] = None) -> ScenarioParams:
        """
        Physical parameters for one sweep point.

        Raises:
            ConfigError: When the combination is invalid
        """
        values = self.param_values(sweep_value)
        values.update(overrides or {})
        t_f = values["t_f"] if values["t_f"] is not None else 50.0
        variant = values["reference_variant"] if self.engine == "dense" else self.variant
        return ScenarioParams(
            gamma=values["gamma"],
            eta=values["eta"],
            M=values["M"],
            t_f=t_f,
            omega=values["omega"],
            delta_omega=values["delta_omega"],
            n=values["n"],
            mu=values["mu"],
            kappa=values["kappa"],
            variant=variant,
            lattice=values["lattice"],
        )


def parse_config(data: Union[Dict[str, Any], str]) -> ScenarioConfig:
    """
    Validate raw config data.

    Raises:
        ConfigError: With the pydantic error summary
    """
    try:
        if isinstance(data, str):
            return ScenarioConfig.model_validate_json(data)
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario config: {e}") from e


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a JSON scenario file"""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a single JSON object")
    return parse_config(data)


class ScenarioConfigManager:
    """Manages a directory of scenario configurations"""

    def __init__(self, config_dir: str = "scenario_configs/presets"):
        """
        Initialize the scenario config manager

        Args:
            config_dir: Directory containing scenario configuration files
        """
        self.config_dir = Path(config_dir)
        self.config_dir.mkdir(parents=True, exist_ok=True)
        self._configs: Dict[str, ScenarioConfig] = {}
        self._errors: Dict[str, str] = {}
        self._load_configs()

    def _load_configs(self):
        """Load all configuration files from the config directory"""
        logger.info(f"Loading scenario configurations from {self.config_dir}")

        for config_file in sorted(self.config_dir.glob("*.json")):
            try:
                with open(config_file, "r") as f:
                    config_data = json.load(f)

                # a file may hold one scenario or a list of them
                if isinstance(config_data, list):
                    for config in config_data:
                        self._add_config_from_dict(config, config_file.name)
                else:
                    self._add_config_from_dict(config_data, config_file.name)

            except Exception as e:
                self._errors[config_file.name] = str(e)
                logger.error(f"Error loading config file {config_file}: {e}")

    def _add_config_from_dict(self, config_data: Dict[str, Any], filename: str):
        """Add a configuration from dictionary data"""
        try:
            config = parse_config(config_data)
            self._configs[f"{filename}:{config.name}"] = config
            logger.info(f"Loaded config: {config.name} ({config.engine}/{config.variant})")
        except ConfigError as e:
            self._errors[f"{filename}:{config_data.get('name', '?')}"] = str(e)
            logger.error(f"Error parsing config in {filename}: {e}")

    @property
    def errors(self) -> Dict[str, str]:
        return dict(self._errors)

    def get_config(self, name: str) -> Optional[ScenarioConfig]:
        """Get a configuration by name (exact match first, then substring)"""
        for config in self._configs.values():
            if config.name == name:
                return config
        for config in self._configs.values():
            if name.lower() in config.name.lower():
                return config
        return None

    def list_configs(self) -> List[ScenarioConfig]:
        return list(self._configs.values())

    def save_config(self, config: ScenarioConfig, overwrite: bool = False) -> Optional[Path]:
        """Write a scenario into the config directory as <name>.json"""
        path = self.config_dir / f"{config.name}.json"
        if path.exists() and not overwrite:
            logger.info(f"Config file {path.name} already exists, skipping")
            return None
        with open(path, "w") as f:
            json.dump(config.model_dump(mode="json"), f, indent=2)
        self._configs[f"{path.name}:{config.name}"] = config
        logger.info(f"Saved config '{config.name}' to {path}")
        return path

    def export_config(self, config_name: str, output_file: str) -> bool:
        """Export a configuration to a file"""
        config = self.get_config(config_name)
        if not config:
            logger.error(f"Configuration '{config_name}' not found")
            return False

        try:
            with open(output_file, "w") as f:
                json.dump(config.model_dump(mode="json"), f, indent=2)
            logger.info(f"Exported config '{config_name}' to {output_file}")
            return True
        except OSError as e:
            logger.error(f"Error exporting config: {e}")
            return False

    def validate_config(self, config_name: str) -> bool:
        """Validate a configuration, including a dry build of its parameters"""
        config = self.get_config(config_name)
        if not config:
            logger.error(f"Configuration '{config_name}' not found")
            return False

        values = config.sweep.values if config.sweep else [None]
        try:
            for value in values:
                config.to_params(value)
        except ConfigError as e:
            logger.error(f"Config '{config_name}' has invalid parameters: {e}")
            return False

        logger.info(f"✅ Configuration '{config_name}' is valid")
        return True


def create_config_template(variant: str, output_file: str, engine: str = "gaussian") -> bool:
    """Create a template configuration file for a given variant"""
    template = ScenarioConfig(
        name=f"my-{variant.replace('_', '-')}",
        description=f"Template for the {variant} variant",
        engine=engine,
        variant=variant,
        outputs=["log_negativity", "purity"],
    )
    try:
        with open(output_file, "w") as f:
            json.dump(template.model_dump(mode="json"), f, indent=2)
        logger.info(f"Created template for '{variant}' at {output_file}")
        return True
    except OSError as e:
        logger.error(f"Error creating template: {e}")
        return False
