"""Data models for constraint specifications and run configurations."""

from .run_config_models import (
    ConstraintKind,
    ConstraintSpec,
    RunConfig,
    ConstrainedRunConfig,
    DecomposeConfig,
    MbssConfig,
    LinkedConfig,
    FeaturesConfig,
    PlsConfig,
    SynthConfig,
    RunConfigValidator,
    validate_configuration_file,
    validate_configuration_dict
)

__all__ = [
    'ConstraintKind',
    'ConstraintSpec',
    'RunConfig',
    'ConstrainedRunConfig',
    'DecomposeConfig',
    'MbssConfig',
    'LinkedConfig',
    'FeaturesConfig',
    'PlsConfig',
    'SynthConfig',
    'RunConfigValidator',
    'validate_configuration_file',
    'validate_configuration_dict'
]
