"""Configuration loader for run presets and run-config files."""

import copy
import json
import os
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from config.app_config import DEFAULT_PRESET, PRESETS_FILE
from config.run_config import RunConfig
from utils.resource_path import resource_path


class ConfigError(ValueError):
    """A run configuration failed schema validation."""


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge override into a copy of base, recursing into nested dictionaries.

    Args:
        base: Lower-priority mapping
        override: Higher-priority mapping

    Returns:
        New merged dictionary
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class RunConfigLoader:
    """Loads named presets and run-config files and builds a validated RunConfig."""

    def __init__(self, presets_file: str = PRESETS_FILE):
        """
        Initialize the configuration loader.

        Args:
            presets_file: Path to the JSON preset file, relative to the project root
        """
        self.presets_file = resource_path(presets_file)
        self.configurations: List[Dict[str, Any]] = []

    def load_configurations(self) -> List[Dict[str, Any]]:
        """
        Load presets from the preset file.

        Returns:
            List of preset dictionaries ({"name", "description", "config"})

        Raises:
            FileNotFoundError: If the preset file doesn't exist
            json.JSONDecodeError: If JSON is invalid
        """
        if not os.path.exists(self.presets_file):
            raise FileNotFoundError(f"Preset file not found: {self.presets_file}")

        with open(self.presets_file, 'r', encoding='utf-8') as f:
            data = json.load(f)

        self.configurations = data.get('configurations', [])
        return self.configurations

    def get_configuration_names(self) -> List[str]:
        """
        Get list of preset names.

        Returns:
            List of preset names
        """
        return [config.get('name', 'Unnamed') for config in self.configurations]

    def get_configuration_by_name(self, name: str) -> Optional[Dict[str, Any]]:
        """
        Get preset by name.

        Args:
            name: Preset name

        Returns:
            Preset dictionary or None if not found
        """
        for config in self.configurations:
            if config.get('name') == name:
                return config
        return None

    @staticmethod
    def read_config_file(path: str) -> Dict[str, Any]:
        """
        Read a UTF-8 JSON run-config file.

        Raises:
            FileNotFoundError: If the file doesn't exist
            ConfigError: If the top level is not a JSON object
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"Config file not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return data

    @staticmethod
    def validate(raw: Dict[str, Any]) -> RunConfig:
        """
        Validate a raw mapping against the run-config schema.

        Raises:
            ConfigError: On unknown keys, bad types or violated invariants
        """
        try:
            return RunConfig.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    def build(self, preset: Optional[str] = DEFAULT_PRESET, config_path: Optional[str] = None,
              overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Build the effective config: defaults <- preset <- file <- overrides.

        Args:
            preset: Preset name from the preset file, or None to skip presets
            config_path: Optional run-config JSON file
            overrides: Optional mapping from CLI flags

        Returns:
            Validated RunConfig

        Raises:
            ConfigError: If the preset is unknown or the merged config is invalid
        """
        raw = RunConfig().model_dump()
        if preset is not None:
            if not self.configurations:
                self.load_configurations()
            entry = self.get_configuration_by_name(preset)
            if entry is None:
                raise ConfigError(f"Unknown preset '{preset}'. "
                                  f"Available: {', '.join(self.get_configuration_names())}")
            raw = deep_merge(raw, entry.get('config', {}))
        if config_path is not None:
            raw = deep_merge(raw, self.read_config_file(config_path))
        if overrides:
            raw = deep_merge(raw, overrides)
        return self.validate(raw)
