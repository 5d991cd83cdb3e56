#!/usr/bin/env python3
"""
Data models for constraint specifications and run configurations using Pydantic for validation.

This module defines the per-mode constraint specification consumed by the
factorization engines and one configuration model per command-line
subcommand, plus a validator that loads YAML or JSON configuration files.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ConstraintKind(str, Enum):
    """Factorization criterion applied to one mode."""
    UNCONSTRAINED = "unconstrained"
    ORTHOGONAL = "orthogonal"
    NONNEGATIVE = "nonnegative"
    SPARSE = "sparse"
    SMOOTH = "smooth"
    INDEPENDENT = "independent"


class ConstraintSpec(BaseModel):
    """Constraint family and solver controls for one two-way factorization."""

    model_config = ConfigDict(frozen=True)

    kind: ConstraintKind = Field(ConstraintKind.UNCONSTRAINED, description="Factorization criterion")
    penalty_weight: float = Field(0.0, ge=0.0, description="Penalty weight for sparse/smooth kinds")
    max_iters: int = Field(500, ge=1, description="Iteration cap for iterative engines")
    tol: float = Field(1e-8, gt=0.0, description="Relative objective change that stops iteration")
    seed: int = Field(0, ge=0, description="Seed for randomized restarts")


class RunConfig(BaseModel):
    """Fields shared by every subcommand."""

    model_config = ConfigDict(extra="forbid")

    output: str = Field(description="Output directory")
    seed: int = Field(0, ge=0, description="Seed for every random generator of the run")
    max_iters: int = Field(200, ge=1, description="Iteration cap")
    tol: float = Field(1e-8, gt=0.0, description="Relative objective change that stops iteration")


class ConstrainedRunConfig(RunConfig):
    """Run configuration carrying per-mode constraint kinds and penalty weights."""

    ranks: List[int] = Field(description="Per-mode ranks")
    constraints: List[ConstraintKind] = Field(
        default_factory=lambda: [ConstraintKind.ORTHOGONAL],
        description="Per-mode constraint kinds; a single entry applies to every mode")
    penalty_weights: List[float] = Field(
        default_factory=lambda: [0.0],
        description="Per-mode penalty weights; a single entry applies to every mode")

    @field_validator('ranks')
    @classmethod
    def validate_ranks(cls, v):
        if not v or any(r < 1 for r in v):
            raise ValueError(f"ranks must be a nonempty list of positive integers, got {v}")
        return v

    @field_validator('penalty_weights')
    @classmethod
    def validate_penalty_weights(cls, v):
        if any(w < 0 for w in v):
            raise ValueError(f"penalty weights must be nonnegative, got {v}")
        return v

    @model_validator(mode='after')
    def validate_per_mode_lengths(self):
        order = len(self.ranks)
        for name in ('constraints', 'penalty_weights'):
            values = getattr(self, name)
            if len(values) not in (1, order):
                raise ValueError(f"{name} must have 1 or {order} entries, got {len(values)}")
        return self

    def constraint_specs(self) -> List[ConstraintSpec]:
        """Expand the per-mode lists into one ConstraintSpec per mode."""
        order = len(self.ranks)
        kinds = self.constraints * order if len(self.constraints) == 1 else self.constraints
        weights = self.penalty_weights * order if len(self.penalty_weights) == 1 else self.penalty_weights
        return [
            ConstraintSpec(kind=kind, penalty_weight=weight, max_iters=self.max_iters,
                           tol=self.tol, seed=self.seed)
            for kind, weight in zip(kinds, weights)
        ]


class DecomposeConfig(RunConfig):
    """Configuration for the decompose subcommand."""

    input: str = Field(description="TNSR input tensor")
    algo: Literal['hosvd', 'hooi', 'cp', 'penalized', 'bod'] = Field('hooi', description="Decomposition algorithm")
    ranks: Optional[List[int]] = Field(None, description="Per-mode ranks (all algorithms except cp)")
    r: Optional[int] = Field(None, ge=1, description="CP rank")
    n_restarts: int = Field(3, ge=1, description="CP random restarts")
    constraints: List[ConstraintKind] = Field(
        default_factory=lambda: [ConstraintKind.UNCONSTRAINED], description="Penalized Tucker constraint kinds")
    alphas: List[float] = Field(default_factory=lambda: [0.0], description="Penalized Tucker penalty weights")

    @model_validator(mode='after')
    def validate_algorithm_fields(self):
        if self.algo == 'cp':
            if self.r is None:
                raise ValueError("algo 'cp' requires r")
        else:
            if not self.ranks or any(r < 1 for r in self.ranks):
                raise ValueError(f"algo '{self.algo}' requires positive ranks")
        if self.algo == 'penalized':
            order = len(self.ranks)
            if len(self.constraints) not in (1, order) or len(self.alphas) not in (1, order):
                raise ValueError(f"constraints and alphas must have 1 or {order} entries")
            if any(a < 0 for a in self.alphas):
                raise ValueError(f"alphas must be nonnegative, got {self.alphas}")
        return self

    def penalized_specs(self) -> List[ConstraintSpec]:
        order = len(self.ranks)
        kinds = self.constraints * order if len(self.constraints) == 1 else self.constraints
        return [ConstraintSpec(kind=kind, max_iters=self.max_iters, tol=self.tol, seed=self.seed) for kind in kinds]

    def penalized_alphas(self) -> List[float]:
        order = len(self.ranks)
        return self.alphas * order if len(self.alphas) == 1 else list(self.alphas)


class MbssConfig(ConstrainedRunConfig):
    """Configuration for the mbss subcommand."""

    input: str = Field(description="TNSR input tensor")
    pipeline: Literal['unfold', 'refine'] = Field('unfold', description="Multiway BSS pipeline")
    reduction_factor: int = Field(4, ge=1, description="Rows kept before each per-mode engine, as a multiple of the rank")
    max_workers: int = Field(1, ge=1, description="Concurrent per-mode engines")


class LinkedConfig(ConstrainedRunConfig):
    """Configuration for the linked subcommand."""

    inputs: List[str] = Field(min_length=1, description="One TNSR tensor per subject")
    model: Literal['linked', 'btd'] = Field('linked', description="Linked decomposition or averaged block model")
    common_counts: Optional[List[int]] = Field(None, description="Per-mode number of common components")
    threshold: float = Field(0.9, gt=0.0, le=1.0, description="Absolute correlation that makes components common")

    @model_validator(mode='after')
    def validate_common_counts(self):
        if self.model == 'linked':
            if self.common_counts is None:
                raise ValueError("model 'linked' requires common_counts")
            if len(self.common_counts) != len(self.ranks):
                raise ValueError("common_counts must have one entry per mode")
            for n, (count, rank) in enumerate(zip(self.common_counts, self.ranks)):
                if not 0 <= count <= rank:
                    raise ValueError(f"common count {count} for mode {n} must lie in [0, {rank}]")
        return self


class FeaturesConfig(RunConfig):
    """Configuration for the features subcommand."""

    train_manifest: str = Field(description="CSV corpus manifest (path,label) of training samples")
    test_manifest: Optional[str] = Field(None, description="CSV corpus manifest of test samples")
    test_fraction: Optional[float] = Field(None, gt=0.0, lt=1.0, description="Held-out fraction of the training manifest")
    ranks: List[int] = Field(description="Per-mode ranks of the sample modes")
    classifier: Literal['knn', 'centroid', 'both'] = Field('both', description="Classifier(s) to evaluate")
    k: int = Field(1, ge=1, description="KNN neighbor count")

    @model_validator(mode='after')
    def validate_split(self):
        if (self.test_manifest is None) == (self.test_fraction is None):
            raise ValueError("exactly one of test_manifest and test_fraction is required")
        if any(r < 1 for r in self.ranks):
            raise ValueError(f"ranks must be positive, got {self.ranks}")
        return self


class PlsConfig(RunConfig):
    """Configuration for the pls subcommand."""

    model: Literal['matrix', 'tensor'] = Field('matrix', description="Matrix PLS or tensor PLS")
    x: Optional[str] = Field(None, description="TNSR predictor data")
    y: Optional[str] = Field(None, description="TNSR response data")
    x_test: Optional[str] = Field(None, description="TNSR predictors to predict from; defaults to x")
    y_test: Optional[str] = Field(None, description="TNSR responses used to score predictions")
    model_dir: Optional[str] = Field(None, description="Saved model directory to predict with instead of fitting")
    components: Optional[int] = Field(None, ge=1, description="Number of PLS components (matrix model)")
    ranks_x: Optional[List[int]] = Field(None, description="Tucker ranks of x (tensor model)")
    ranks_y: Optional[List[int]] = Field(None, description="Tucker ranks of y (tensor model)")
    shared_modes: List[int] = Field(default_factory=lambda: [0], description="Modes whose factors x and y share")

    @model_validator(mode='after')
    def validate_model_fields(self):
        if self.model_dir is not None:
            if self.x_test is None:
                raise ValueError("model_dir requires x_test")
            return self
        if self.x is None or self.y is None:
            raise ValueError("x and y are required unless model_dir is given")
        if self.model == 'matrix' and self.components is None:
            raise ValueError("model 'matrix' requires components")
        if self.model == 'tensor' and (not self.ranks_x or not self.ranks_y):
            raise ValueError("model 'tensor' requires ranks_x and ranks_y")
        return self


class SynthConfig(BaseModel):
    """Configuration for the synth subcommand."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal['tucker', 'cp', 'ica', 'sparse', 'smooth', 'corpus', 'linked', 'pls', 'tensor-pls'] = Field(
        description="Generator to run")
    output: str = Field(description="Output directory")
    seed: int = Field(0, ge=0, description="Generator seed")
    dims: List[int] = Field(default_factory=lambda: [8, 7, 6], description="Tensor or sample dimensions")
    ranks: List[int] = Field(default_factory=lambda: [2, 2, 2], description="Multilinear ranks")
    rank: int = Field(2, ge=1, description="Rank for CP and two-way generators")
    noise: float = Field(0.0, ge=0.0, description="Gaussian noise standard deviation")
    nonnegative: bool = Field(False, description="Nonnegative Tucker factors and core")
    n_samples: int = Field(2000, ge=2, description="Samples per source (ica) or rows (pls)")
    n_sources: int = Field(2, ge=1, description="Independent sources (ica)")
    rows: int = Field(20, ge=1, description="Rows of two-way generators")
    cols: int = Field(50, ge=1, description="Columns of two-way generators (sparse, smooth)")
    n_classes: int = Field(3, ge=1, description="Classes (corpus)")
    per_class: int = Field(20, ge=1, description="Samples per class (corpus)")
    n_subjects: int = Field(3, ge=1, description="Subjects (linked)")
    n_common: int = Field(2, ge=0, description="Planted common components (linked)")
    n_test: int = Field(30, ge=0, description="Held-out rows or samples (pls, tensor-pls)")

    @field_validator('dims', 'ranks')
    @classmethod
    def validate_positive(cls, v):
        if not v or any(d < 1 for d in v):
            raise ValueError(f"must be a nonempty list of positive integers, got {v}")
        return v


ConfigModel = TypeVar('ConfigModel', bound=BaseModel)


class RunConfigValidator:
    """Validator class for run configurations."""

    @staticmethod
    def load_file(file_path: Union[str, Path]) -> Dict[str, Any]:
        """
        Load a YAML or JSON configuration file into a dictionary.

        Args:
            file_path: Path to the YAML or JSON configuration file

        Returns:
            Dictionary of configuration values

        Raises:
            FileNotFoundError: If the file doesn't exist
            json.JSONDecodeError: If the JSON is malformed
            yaml.YAMLError: If the YAML is malformed
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {file_path}")

        with open(file_path, 'r', encoding='utf-8') as f:
            if file_path.suffix.lower() in ['.yaml', '.yml']:
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
        return data or {}

    @staticmethod
    def validate_json_file(file_path: Union[str, Path], model_cls: Type[ConfigModel]) -> ConfigModel:
        """
        Validate a YAML or JSON configuration file against a configuration model.

        Args:
            file_path: Path to the YAML or JSON configuration file
            model_cls: Configuration model class

        Returns:
            Validated configuration

        Raises:
            ValidationError: If the configuration is invalid
        """
        return model_cls.model_validate(RunConfigValidator.load_file(file_path))

    @staticmethod
    def validate_dict(config_dict: Dict[str, Any], model_cls: Type[ConfigModel]) -> ConfigModel:
        """Validate a configuration dictionary against a configuration model."""
        return model_cls.model_validate(config_dict)


def validate_configuration_file(file_path: Union[str, Path], model_cls: Type[ConfigModel]) -> ConfigModel:
    """Convenience function to validate a configuration file."""
    return RunConfigValidator.validate_json_file(file_path, model_cls)


def validate_configuration_dict(config_dict: Dict[str, Any], model_cls: Type[ConfigModel]) -> ConfigModel:
    """Convenience function to validate a configuration dictionary."""
    return RunConfigValidator.validate_dict(config_dict, model_cls)
