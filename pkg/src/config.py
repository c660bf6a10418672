"""Configuration management for shiftlab."""

import os
from pathlib import Path
from typing import Any, Dict

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError as PydanticValidationError

from .config_models import EncoderConfig, EvalConfig, GenConfig, ModelConfig, TrainConfig
from .errors import ConfigError

THREADS_ENV = "SHIFTLAB_THREADS"

_SECTIONS = {
    "generation": GenConfig,
    "encoder": EncoderConfig,
    "model": ModelConfig,
    "training": TrainConfig,
    "evaluation": EvalConfig,
}


class Config:
    """Configuration manager: YAML (or JSON) file plus environment variables."""

    def __init__(self, config_path: str | Path = "config.yaml"):
        """Initialize configuration from a YAML/JSON file and environment variables."""
        load_dotenv()

        self.config_path = Path(config_path)
        self._config: Dict[str, Any] = {}

        if self.config_path.exists():
            with open(self.config_path, "r") as f:
                try:
                    self._config = yaml.safe_load(f) or {}
                except yaml.YAMLError as e:
                    raise ConfigError(f"Cannot parse {self.config_path}: {e}") from e

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """Build a configuration from an in-memory dict (e.g. a checkpoint snapshot)."""
        config = cls.__new__(cls)
        config.config_path = Path("<snapshot>")
        config._config = dict(data)
        return config

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation (e.g., 'training.epochs')."""
        keys = key.split(".")
        value = self._config

        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default

        return value if value is not None else default

    def set(self, key: str, value: Any) -> None:
        """Override a value using dot notation, creating sections as needed."""
        *parents, last = key.split(".")
        node = self._config
        for k in parents:
            node = node.setdefault(k, {})
        node[last] = value

    def _section(self, name: str):
        try:
            return _SECTIONS[name](**self.get(name, {}))
        except PydanticValidationError as e:
            raise ConfigError(f"Invalid '{name}' configuration: {e}") from e

    @property
    def generation(self) -> GenConfig:
        return self._section("generation")

    @property
    def encoder(self) -> EncoderConfig:
        return self._section("encoder")

    @property
    def model(self) -> ModelConfig:
        return self._section("model")

    @property
    def training(self) -> TrainConfig:
        return self._section("training")

    @property
    def evaluation(self) -> EvalConfig:
        return self._section("evaluation")

    @property
    def threads(self) -> int:
        """Thread cap from SHIFTLAB_THREADS, defaulting to every core."""
        raw = os.getenv(THREADS_ENV, "")
        if not raw:
            return os.cpu_count() or 1
        try:
            threads = int(raw)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
        return threads

    def snapshot(self) -> Dict[str, Any]:
        """Every section fully resolved with defaults, suitable for embedding."""
        return {name: self._section(name).model_dump() for name in _SECTIONS}
