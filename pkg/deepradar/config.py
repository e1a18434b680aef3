"""
Configuration settings for the deep radar toolkit.

Runtime settings are loaded from environment variables (prefix ``DRS_``) and
an optional .env file. Domain configuration (oracle, architecture, training)
lives in pydantic models and can be read from line-oriented ``key = value``
files with dotted keys for nested models.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from deepradar.errors import ConfigError, DataIOError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class Settings(BaseSettings):
    """
    Process-level settings. Pydantic BaseSettings reads them from the
    environment first and falls back to a .env file in the working directory.
    """

    model_config = SettingsConfigDict(
        env_prefix="DRS_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # DRS_SEED: default seed when a command gets no --seed flag
    SEED: Optional[int] = None
    LOG_LEVEL: str = "INFO"
    # Threads used by the oracle when generating frames
    WORKERS: int = 1
    # Prometheus textfile written at the end of every CLI run
    METRICS_FILE: Optional[str] = None

    def resolve_seed(self, explicit: Optional[int], fallback: int = 0) -> int:
        """Explicit flag wins, then DRS_SEED, then the fallback."""
        if explicit is not None:
            return explicit
        if self.SEED is not None:
            return self.SEED
        return fallback


settings = Settings()


def load_key_value_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a ``key = value`` config file.

    Blank lines and ``#`` comments are skipped. Duplicate keys are rejected.

    Args:
        path: Path of the config file

    Returns:
        Mapping of raw (possibly dotted) keys to string values
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot read config file {path}: {e}") from e

    values: Dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{raw_line.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """Parse ``key=value`` command-line overrides."""
    values: Dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override '{pair}' is not of the form key=value")
        key, value = (part.strip() for part in pair.split("=", 1))
        values[key] = value
    return values


def nest_dotted(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Turn ``{"a.b": 1}`` into ``{"a": {"b": 1}}``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"config key '{key}' conflicts with scalar key '{part}'")
            node = child
        node[parts[-1]] = value
    return nested


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _with_nested_defaults(model: Type[BaseModel], data: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay partial nested sections onto the field's default model instead of replacing it."""
    for name, field in model.model_fields.items():
        value = data.get(name)
        if not isinstance(value, dict):
            continue
        default = field.get_default(call_default_factory=True)
        if isinstance(default, BaseModel):
            data[name] = _merge(default.model_dump(), value)
    return data


def build_config(model: Type[ModelT], *layers: Dict[str, Any]) -> ModelT:
    """
    Validate layered flat config dictionaries into a pydantic model.

    Later layers override earlier ones. Unknown keys raise ConfigError
    naming the dotted key.

    Args:
        model: Pydantic model class (should forbid extra fields)
        layers: Flat dictionaries with dotted keys

    Returns:
        Validated model instance
    """
    merged: Dict[str, Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        return model.model_validate(_with_nested_defaults(model, nest_dotted(merged)))
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        if first["type"] == "extra_forbidden":
            raise ConfigError(f"unknown config key '{key}'") from e
        if not key:
            raise ConfigError(f"invalid configuration: {first['msg']}") from e
        raise ConfigError(f"invalid value for '{key}': {first['msg']}") from e


def flatten_model(model: BaseModel) -> Dict[str, Any]:
    """Flatten a model dump into dotted keys (inverse of nest_dotted)."""
    flat: Dict[str, Any] = {}

    def walk(prefix: str, value: Any) -> None:
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        else:
            flat[prefix] = value

    walk("", model.model_dump(mode="json"))
    return flat


def canonical_json(payload: Any) -> str:
    """Deterministic JSON text used for hashing and headers."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(payload: Union[BaseModel, Dict[str, Any]], exclude: Optional[set] = None) -> str:
    """SHA-256 hex digest of a config's canonical JSON."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json", exclude=exclude)
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
