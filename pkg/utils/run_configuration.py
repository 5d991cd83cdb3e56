"""
Run Configuration Management

This module provides the RunConfiguration class that merges a configuration
file with command-line flags and validates the result against a pydantic model.
Flags override file values, file values override model defaults.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Type, Union

import yaml
from pydantic import BaseModel

from data_model.run_config_models import RunConfigValidator

logger = logging.getLogger(__name__)


class ConfigFileError(ValueError):
    """A configuration file that cannot be parsed or does not hold a mapping."""


class RunConfiguration:
    """Layered configuration for one subcommand run."""

    def __init__(self, model_cls: Type[BaseModel]):
        """
        Initialize RunConfiguration.

        Args:
            model_cls: Pydantic model the merged values are validated against
        """
        self.model_cls = model_cls
        self.file_values: Dict[str, Any] = {}
        self.flag_values: Dict[str, Any] = {}
        self.config_path: Optional[Path] = None

    def load_config_file(self, config_path: Union[str, Path]) -> Dict[str, Any]:
        """Load values from a YAML or JSON configuration file."""
        self.config_path = Path(config_path)
        try:
            self.file_values = RunConfigValidator.load_file(self.config_path)
        except (yaml.YAMLError, json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigFileError(f"Configuration file {config_path} cannot be parsed: {e}") from e
        if not isinstance(self.file_values, dict):
            raise ConfigFileError(f"Configuration file {config_path} must hold a mapping")
        logger.info(f"Loaded run configuration from {self.config_path}")
        return self.file_values

    def apply_flags(self, flags: Dict[str, Any]) -> Dict[str, Any]:
        """Record command-line values; flags left unset (None) do not override anything."""
        self.flag_values = {key: value for key, value in flags.items() if value is not None}
        return self.flag_values

    def merged(self) -> Dict[str, Any]:
        values = dict(self.file_values)
        overridden = sorted(key for key in self.flag_values if key in values)
        if overridden:
            logger.debug(f"Command-line flags override file values for: {overridden}")
        values.update(self.flag_values)
        return values

    def validate(self) -> BaseModel:
        """
        Validate the merged values.

        Raises:
            ValidationError: If the merged configuration is invalid
        """
        return RunConfigValidator.validate_dict(self.merged(), self.model_cls)


def build_run_config(model_cls: Type[BaseModel], config_path: Optional[Union[str, Path]] = None,
                     flags: Optional[Dict[str, Any]] = None) -> BaseModel:
    """Convenience function: load an optional file, apply flags and validate."""
    configuration = RunConfiguration(model_cls)
    if config_path:
        configuration.load_config_file(config_path)
    configuration.apply_flags(flags or {})
    return configuration.validate()
