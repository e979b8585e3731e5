# -*- coding: utf-8 -*-
import os
from typing import Any, Dict, Iterable, Optional

import yaml
from pydantic import ValidationError

from .schema import RunConfig

CONFIG_ENV_VAR = "RELEMB_CONFIG"
DEFAULT_CONFIG_NAME = "relemb_config"


class ConfigLoader:
    def __init__(self, config_dir: str):
        """
        config_dir: path to the directory containing yaml files
        """
        self.config_dir = config_dir
        self._configs = self._load_all_configs()

    def _load_all_configs(self):
        """
        Load all YAML files inside the config directory
        Returns a dict with filenames (without extension) as keys
        """
        configs = {}
        for file in sorted(os.listdir(self.config_dir)):
            if file.endswith((".yml", ".yaml")):
                key = os.path.splitext(file)[0]  # filename without extension
                path = os.path.join(self.config_dir, file)
                configs[key] = read_yaml(path)
        return configs

    def get(self, name: str):
        """Get config data by name (filename without extension)"""
        return self._configs.get(name, {})

    def all(self):
        """Return all configs as a dict"""
        return self._configs

    def load_run_config(
        self,
        path: Optional[str] = None,
        overrides: Iterable[str] = (),
    ) -> RunConfig:
        """
        Resolve a RunConfig from the packaged defaults, an optional user file
        (argument, else the RELEMB_CONFIG environment variable) and
        ``section.key=value`` overrides, in increasing precedence.
        """
        from src.core.exceptions import ConfigError, MissingInputError

        data = _deep_copy(self.get(DEFAULT_CONFIG_NAME))
        path = path or os.environ.get(CONFIG_ENV_VAR)
        if path:
            if not os.path.exists(path):
                raise MissingInputError(path, role="config file")
            _deep_merge(data, read_yaml(path))
        for override in overrides:
            _apply_override(data, override)
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise ConfigError(f"invalid config at '{location}': {first['msg']}") from e


def read_yaml(path: str) -> Dict[str, Any]:
    from src.core.exceptions import ConfigError

    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data


def _apply_override(data: Dict[str, Any], override: str) -> None:
    from src.core.exceptions import ConfigError

    if "=" not in override:
        raise ConfigError(f"override '{override}' is not of the form section.key=value")
    key, raw = override.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override '{override}' has an empty key")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = yaml.safe_load(raw) if raw.strip() else None


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value


def _deep_copy(data: Dict[str, Any]) -> Dict[str, Any]:
    return {k: _deep_copy(v) if isinstance(v, dict) else v for k, v in data.items()}
