"""
Configuration management for the MP-QKD key-rate toolkit

Process settings come from the environment (``.env`` honoured); experiment
settings come from a JSON file whose sections mirror the models in schemas.py.
"""
import os
import json
import logging
from pathlib import Path
from typing import Iterable, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from schemas import ExperimentConfig, ParameterVector
from utils.error_handlers import ConfigurationError, ParameterValidationError

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


class Settings:
    """Process settings with validation"""

    def __init__(self):
        """Initialize settings with validation"""
        self._validate_configuration()

    def _int_env(self, name: str, default: int) -> int:
        try:
            return int(os.getenv(name, str(default)))
        except ValueError:
            logger.warning(f"Invalid {name} value, using default {default}")
            return default

    def _float_env(self, name: str, default: float) -> float:
        try:
            return float(os.getenv(name, str(default)))
        except ValueError:
            logger.warning(f"Invalid {name} value, using default {default}")
            return default

    # Logging Configuration
    @property
    def LOG_LEVEL(self) -> str:
        level = os.getenv("LOG_LEVEL", "INFO").upper()
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if level not in valid_levels:
            logger.warning(f"Invalid LOG_LEVEL '{level}', using default INFO")
            return "INFO"
        return level

    @property
    def LOG_FILE(self) -> Optional[str]:
        return os.getenv("LOG_FILE")

    @property
    def ENABLE_JSON_LOGGING(self) -> bool:
        return os.getenv("ENABLE_JSON_LOGGING", "False").lower() == "true"

    # Compute Configuration
    @property
    def WORKERS(self) -> int:
        return self._int_env("MPQKD_WORKERS", 1)

    @property
    def DEFAULT_SEED(self) -> int:
        return self._int_env("MPQKD_SEED", 0)

    @property
    def ORACLE_SHARDS(self) -> int:
        return self._int_env("MPQKD_ORACLE_SHARDS", 1)

    @property
    def ORACLE_CHUNK(self) -> int:
        return self._int_env("MPQKD_ORACLE_CHUNK", 2_000_000)

    @property
    def Z_THRESHOLD(self) -> float:
        return self._float_env("MPQKD_Z_THRESHOLD", 4.0)

    def _validate_configuration(self):
        errors = []

        if self.WORKERS < 1:
            errors.append(f"MPQKD_WORKERS must be >= 1, got {self.WORKERS}")
        if self.DEFAULT_SEED < 0:
            errors.append(f"MPQKD_SEED must be >= 0, got {self.DEFAULT_SEED}")
        if self.ORACLE_SHARDS < 1:
            errors.append(f"MPQKD_ORACLE_SHARDS must be >= 1, got {self.ORACLE_SHARDS}")
        if self.ORACLE_CHUNK < 1000:
            errors.append(f"MPQKD_ORACLE_CHUNK must be >= 1000, got {self.ORACLE_CHUNK}")
        if self.Z_THRESHOLD <= 0:
            errors.append(f"MPQKD_Z_THRESHOLD must be positive, got {self.Z_THRESHOLD}")

        if errors:
            error_msg = "Configuration validation failed:\n" + "\n".join(f"- {error}" for error in errors)
            raise ConfigurationError(error_msg)

    def get_masked_config(self) -> dict:
        """Get configuration for logging"""
        return {
            "LOG_LEVEL": self.LOG_LEVEL,
            "LOG_FILE": self.LOG_FILE,
            "ENABLE_JSON_LOGGING": self.ENABLE_JSON_LOGGING,
            "MPQKD_WORKERS": self.WORKERS,
            "MPQKD_SEED": self.DEFAULT_SEED,
            "MPQKD_ORACLE_SHARDS": self.ORACLE_SHARDS,
            "MPQKD_ORACLE_CHUNK": self.ORACLE_CHUNK,
            "MPQKD_Z_THRESHOLD": self.Z_THRESHOLD,
        }


def load_experiment_config(path: Optional[str]) -> ExperimentConfig:
    """
    Load and validate an experiment configuration file

    Args:
        path: JSON file path; ``None`` yields the built-in defaults

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigurationError: file missing or not valid JSON
        pydantic.ValidationError: content violates a model invariant
    """
    if path is None:
        return ExperimentConfig()

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Config file not found: {path}", details={"path": str(path)})

    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config file is not valid JSON: {e}", details={"path": str(path)})

    if not isinstance(raw, dict):
        raise ConfigurationError("Config file must contain a JSON object", details={"path": str(path)})

    config = ExperimentConfig.model_validate(raw)
    logger.info(f"Loaded experiment config from {path}")
    return config


def dump_experiment_config(config: ExperimentConfig) -> str:
    """Serialize a config so that load_experiment_config reads it back unchanged"""
    return config.model_dump_json(indent=2, exclude_none=True)


def apply_parameter_overrides(config: ExperimentConfig, overrides: Iterable[str]) -> ExperimentConfig:
    """
    Apply ``name=value`` overrides to the source-parameter vector

    Setting ``p_mu_a`` or ``p_nu_a`` (``_b``) without ``p_o_a`` refills the
    vacuum probability so the simplex stays closed.
    """
    overrides = list(overrides or [])
    if not overrides:
        return config

    values = config.parameters.model_dump() if config.parameters else {}
    touched = set()
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"Override must look like name=value, got '{item}'")
        name, raw_value = (part.strip() for part in item.split("=", 1))
        if name not in ParameterVector.model_fields:
            raise ConfigurationError(f"Unknown parameter '{name}'")
        try:
            values[name] = float(raw_value)
        except ValueError:
            raise ConfigurationError(f"Override value for '{name}' is not a number: '{raw_value}'")
        touched.add(name)

    for party in ("a", "b"):
        if f"p_o_{party}" not in touched and touched & {f"p_mu_{party}", f"p_nu_{party}"}:
            values[f"p_o_{party}"] = 1.0 - values.get(f"p_mu_{party}", 0.0) - values.get(f"p_nu_{party}", 0.0)

    try:
        parameters = ParameterVector.model_validate(values)
    except ValidationError as e:
        messages = [err["msg"] for err in e.errors()]
        raise ParameterValidationError(
            "Parameter vector is infeasible: " + "; ".join(messages),
            details={"violations": messages},
        )
    return config.model_copy(update={"parameters": parameters})


# Global settings instance
try:
    settings = Settings()
    logger.debug("Configuration loaded successfully")
except ConfigurationError as e:
    logger.error(f"Configuration error: {e}")
    raise
