"""
Configuration settings for cooperative dual-evolution GAN experiments.
"""

import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.benchmark.data import GaussianRingSpec, NoiseSpec
from src.engine.errors import ConfigError

# Benchmark defaults: B=32, K=3, M=3, N=2, gamma=0.1, delta=1, Adam (0.0002, 0.5, 0.99)
TRAIN_DEFAULTS = {
    "T": 1000,
    "K": 3,
    "J": 1,
    "I": 2,
    "M": 3,
    "N": 2,
    "B": 32,
    "gamma": 0.1,
    "delta": 1.0,
    "adam_lr": 0.0002,
    "adam_beta1": 0.5,
    "adam_beta2": 0.99,
    "adam_eps": 1e-8,
    "gp_lambda": 0.0,
    "seed": 0,
    "d_select_order": "min",
    "g_mutations": ["minimax", "heuristic", "least_squares"],
    "d_mutations": ["minimax", "least_squares"],
    "fitness_weights": "heuristic",
}

# Network architectures
MODEL_CONFIG = {
    "architecture": "mlp3",
    "hidden_units": 128,
}

EVALUATION_CONFIG = {
    "eval_samples": 512,
    "threshold_sigmas": 3.0,
    "min_mode_fraction": 0.01,
    "kde_resolution": 200,
    "kde_bandwidth": 0.1,
}

OUTPUT_CONFIG = {
    "out_dir": "runs/toy",
    "checkpoint_interval": 1000,
    "metrics_interval": 100,
    "progress": True,
    "fitness_history_tail": 50,
}

# Logging Configuration
LOGGING_CONFIG = {
    "level": "INFO",
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "file": "cde_gan.log",
    "max_size": 10485760,  # 10MB
    "backup_count": 5
}

LOG_LEVEL_ENV = "CDEGAN_LOG_LEVEL"

GMutationName = Literal["minimax", "heuristic", "least_squares"]
DMutationName = Literal["minimax", "least_squares"]


class TrainConfig(BaseModel):
    """Every hyper-parameter of the training loop; single letters are aliases"""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    iterations: int = Field(default=TRAIN_DEFAULTS["T"], ge=0, alias="T")
    d_steps: int = Field(default=TRAIN_DEFAULTS["K"], ge=1, alias="K")
    g_parents: int = Field(default=TRAIN_DEFAULTS["J"], ge=1, alias="J")
    d_parents: int = Field(default=TRAIN_DEFAULTS["I"], ge=1, alias="I")
    g_offspring: int = Field(default=TRAIN_DEFAULTS["M"], ge=1, alias="M")
    d_offspring: int = Field(default=TRAIN_DEFAULTS["N"], ge=1, alias="N")
    batch_size: int = Field(default=TRAIN_DEFAULTS["B"], ge=1, alias="B")
    gamma: float = Field(default=TRAIN_DEFAULTS["gamma"], gt=0.0, le=1.0)
    delta: float = Field(default=TRAIN_DEFAULTS["delta"], ge=0.0)
    adam_lr: float = Field(default=TRAIN_DEFAULTS["adam_lr"], gt=0.0)
    adam_beta1: float = Field(default=TRAIN_DEFAULTS["adam_beta1"], ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=TRAIN_DEFAULTS["adam_beta2"], ge=0.0, lt=1.0)
    adam_eps: float = Field(default=TRAIN_DEFAULTS["adam_eps"], gt=0.0)
    gp_lambda: float = Field(default=TRAIN_DEFAULTS["gp_lambda"], ge=0.0)
    seed: int = TRAIN_DEFAULTS["seed"]
    d_select_order: Literal["min", "max"] = TRAIN_DEFAULTS["d_select_order"]
    g_mutations: List[GMutationName] = Field(default_factory=lambda: list(TRAIN_DEFAULTS["g_mutations"]), min_length=1)
    d_mutations: List[DMutationName] = Field(default_factory=lambda: list(TRAIN_DEFAULTS["d_mutations"]), min_length=1)
    fitness_weights: Literal["heuristic", "uniform"] = TRAIN_DEFAULTS["fitness_weights"]


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    architecture: Literal["mlp3", "mlp4"] = MODEL_CONFIG["architecture"]
    hidden_units: int = Field(default=MODEL_CONFIG["hidden_units"], ge=1)


class EvaluationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eval_samples: int = Field(default=EVALUATION_CONFIG["eval_samples"], ge=1)
    threshold_sigmas: float = Field(default=EVALUATION_CONFIG["threshold_sigmas"], gt=0.0)
    min_mode_fraction: float = Field(default=EVALUATION_CONFIG["min_mode_fraction"], ge=0.0, le=1.0)
    kde_resolution: int = Field(default=EVALUATION_CONFIG["kde_resolution"], ge=1)
    kde_bandwidth: float = Field(default=EVALUATION_CONFIG["kde_bandwidth"], gt=0.0)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out_dir: str = OUTPUT_CONFIG["out_dir"]
    checkpoint_interval: int = Field(default=OUTPUT_CONFIG["checkpoint_interval"], ge=1)
    metrics_interval: int = Field(default=OUTPUT_CONFIG["metrics_interval"], ge=1)
    progress: bool = OUTPUT_CONFIG["progress"]
    fitness_history_tail: int = Field(default=OUTPUT_CONFIG["fitness_history_tail"], ge=0)


class ExperimentConfig(BaseModel):
    """A complete, reproducible run description: everything besides this is output"""

    model_config = ConfigDict(extra="forbid")

    train: TrainConfig = Field(default_factory=TrainConfig)
    ring: GaussianRingSpec = Field(default_factory=GaussianRingSpec)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    model: ModelConfig = Field(default_factory=ModelConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def resolved(self) -> Dict[str, Any]:
        """Fully-resolved config as plain JSON types (field names, not aliases)"""
        return self.model_dump(mode="json")


SECTIONS: Dict[str, Type[BaseModel]] = {
    "train": TrainConfig,
    "ring": GaussianRingSpec,
    "noise": NoiseSpec,
    "model": ModelConfig,
    "evaluation": EvaluationConfig,
    "output": OutputConfig,
}


def _canonical_key(section: str, key: str) -> Optional[str]:
    """Field name for a key given by name or alias, None if the section has no such field"""
    for name, info in SECTIONS[section].model_fields.items():
        if key == name or key == info.alias:
            return name
    return None


def _read_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e

    try:
        if path.suffix == ".json":
            data = json.loads(text)
            # a run summary embeds the resolved config it was produced with
            if isinstance(data, dict) and "config" in data:
                data = data["config"]
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"Cannot parse config file {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a table of sections")
    return data


def _normalize(data: Dict[str, Any]) -> Dict[str, Any]:
    """Map alias keys (T, K, I, ...) onto field names; unknown keys are left for validation to report"""
    normalized: Dict[str, Any] = {}
    for section, values in data.items():
        if section not in SECTIONS or not isinstance(values, dict):
            normalized[section] = values
            continue
        normalized[section] = {}
        for key, value in values.items():
            normalized[section][_canonical_key(section, key) or key] = value
    return normalized


def parse_override(item: str) -> Tuple[str, Any]:
    """Split KEY=VAL and parse VAL as a TOML literal, falling back to a plain string"""
    if "=" not in item:
        raise ConfigError(f"Override must look like KEY=VAL, got {item!r}")
    key, raw = item.split("=", 1)
    key, raw = key.strip(), raw.strip()
    if not key:
        raise ConfigError(f"Override has an empty key: {item!r}")
    try:
        value = tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def resolve_override_key(key: str) -> Tuple[str, str]:
    """
    Find (section, field) for 'section.key' or a bare key/alias.

    Raises:
        ConfigError: Unknown or ambiguous key
    """
    if "." in key:
        section, field = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section in override: {section}")
        name = _canonical_key(section, field)
        if name is None:
            raise ConfigError(f"Unknown config key: {key}")
        return section, name

    matches = [(s, _canonical_key(s, key)) for s in SECTIONS if _canonical_key(s, key)]
    if not matches:
        raise ConfigError(f"Unknown config key: {key}")
    if len(matches) > 1:
        options = ", ".join(f"{s}.{n}" for s, n in matches)
        raise ConfigError(f"Ambiguous config key {key}; use one of: {options}")
    return matches[0]


def _describe_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        problems.append(f"{location}: {item['msg']}")
    return "Invalid configuration - " + "; ".join(problems)


def load_config(path: Optional[Path] = None, overrides: Optional[Sequence[str]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment configuration

    Args:
        path (Path, optional): TOML config, or a JSON run summary
        overrides (list, optional): KEY=VAL strings applied on top of the file

    Returns:
        ExperimentConfig: Validated configuration; absent keys take the defaults above
    """
    data = _normalize(_read_config_file(path)) if path else {}

    for item in overrides or []:
        key, value = parse_override(item)
        section, name = resolve_override_key(key)
        section_data = data.setdefault(section, {})
        if not isinstance(section_data, dict):
            raise ConfigError(f"Config section {section} must be a table")
        section_data[name] = value

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe_validation_error(e)) from e


def update_config(section: str, updates: Dict[str, Any]) -> None:
    """
    Update configuration settings

    Args:
        section (str): Configuration section to update
        updates (dict): New values to apply
    """
    config = globals().get(section.upper())
    if config is None:
        raise ValueError(f"Invalid configuration section: {section}")

    if isinstance(config, dict):
        config.update(updates)
    else:
        raise ValueError(f"Configuration section {section} is not updateable")


def log_level_from_env() -> str:
    """Verbosity is the only thing the environment may change"""
    return os.getenv(LOG_LEVEL_ENV, LOGGING_CONFIG["level"]).upper()
