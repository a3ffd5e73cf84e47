import datetime
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import yaml
from dotenv import load_dotenv

from estimators.errors import ValidationError

PROJECT_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"
BASE_CONFIG = CONFIG_DIR / "base.yaml"


class ConfigError(ValidationError):
    """Missing, unreadable or inconsistent experiment configuration."""


def ensure_dir(path: str):
    """Create directory if it doesn't exist."""
    if not os.path.exists(path):
        os.makedirs(path, exist_ok=True)


def expand_env_vars_recursive(data: Any) -> Any:
    """
    Recursively expand environment variables in strings within nested data structures.
    Works with dicts, lists, and strings.
    """
    if isinstance(data, dict):
        return {key: expand_env_vars_recursive(value) for key, value in data.items()}
    elif isinstance(data, list):
        return [expand_env_vars_recursive(item) for item in data]
    elif isinstance(data, str):
        return os.path.expandvars(data)
    else:
        return data


def resolve_config_path(name_or_path: str) -> Path:
    """A path as given if it exists, otherwise the file of that name under config/."""
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    under_config = CONFIG_DIR / name_or_path
    if under_config.exists():
        return under_config
    raise FileNotFoundError(f"Config file not found: {name_or_path} (also looked in {CONFIG_DIR})")


def _read_mapping(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return doc


def load_config_files(base_config_path: str, override_config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load and merge the base config with an experiment config (JSON is valid YAML).

    Top-level keys of the override replace those of the base. `.env` is loaded
    first so that ${VAR} references in either file can be expanded.
    """
    load_dotenv()
    merged = _read_mapping(Path(base_config_path))
    if override_config_path is not None:
        merged = {**merged, **_read_mapping(Path(override_config_path))}
    return expand_env_vars_recursive(merged)


def load_config(config: Optional[str] = None, base: Optional[str] = None) -> Dict[str, Any]:
    base_path = Path(base) if base is not None else BASE_CONFIG
    override = resolve_config_path(config) if config is not None else None
    return load_config_files(str(base_path), None if override is None else str(override))


def timestamp() -> str:
    return datetime.datetime.now().strftime("%Y%m%d_%H%M%S")


def to_jsonable(value: Any) -> Any:
    """numpy scalars/arrays and nested containers to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    return value


def write_json(path: str, payload: Any):
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, ensure_ascii=False, indent=2)
