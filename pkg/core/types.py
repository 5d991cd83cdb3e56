"""
Data structures and the error type shared by the decomposition engines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np

if TYPE_CHECKING:
    from core.tensor_core import DenseTensor
    from data_model.run_config_models import ConstraintSpec


class TensorError(Exception):
    """Raised when a tensor operation receives invalid input or fails numerically."""

    def __init__(self, message: str, error_type: str, mode: Optional[int] = None):
        self.message = message
        # "invalid-mode", "shape", "invalid-rank", "invalid-argument", "invalid-input",
        # "rank-deficient", "unsupported", "io"
        self.error_type = error_type
        self.mode = mode
        super().__init__(message)

    def with_mode(self, mode: int) -> "TensorError":
        """Return a copy of this error tagged with the mode it was raised for."""
        return TensorError(f"mode {mode}: {self.message}", self.error_type, mode=mode)


@dataclass
class FactorPair:
    """Two-way factorization y ~ a @ b.T with b holding the components."""
    a: np.ndarray
    b: np.ndarray
    iterations_run: int
    final_objective: float
    objective_trace: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.b.shape[1]


@dataclass
class TuckerModel:
    """Core tensor plus one factor matrix per mode."""
    core: "DenseTensor"
    factors: List[np.ndarray]
    fit_error: float
    trace: List[float] = field(default_factory=list)
    algorithm: str = ""
    seed: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)


@dataclass
class CPModel:
    """Weighted sum of rank-one terms; factor columns have unit norm."""
    weights: np.ndarray
    factors: List[np.ndarray]
    fit_error: float = 0.0
    trace: List[float] = field(default_factory=list)
    algorithm: str = "cp"
    seed: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.weights)


@dataclass
class BlockModel:
    """Average of per-mode Tucker-1 blocks; each block is (core, factor, mode)."""
    blocks: List[Tuple["DenseTensor", np.ndarray, int]]
    residual: float
    trace: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


@dataclass
class MwbssResult:
    """Outcome of a multiway BSS pipeline."""
    model: TuckerModel
    per_mode_constraint: List["ConstraintSpec"]
    diagnostics: List[FactorPair]
    pipeline: str = "unfold"
    warnings: List[str] = field(default_factory=list)
    stage1_fit_error: Optional[float] = None
    stage2_residuals: List[float] = field(default_factory=list)


@dataclass
class LabeledTensorSet:
    """Samples of identical shape with one class label each."""
    samples: List["DenseTensor"]
    labels: List[Any]

    def __post_init__(self):
        from core.tensor_core import as_tensor
        if not self.samples:
            raise TensorError("labeled set must contain at least one sample", "invalid-argument")
        self.samples = [as_tensor(s) for s in self.samples]
        dims = self.samples[0].dims
        for k, sample in enumerate(self.samples):
            if sample.dims != dims:
                raise TensorError(f"sample {k} has dims {sample.dims}, expected {dims}", "shape")
        if len(self.labels) != len(self.samples):
            raise TensorError(
                f"got {len(self.labels)} labels for {len(self.samples)} samples", "shape")
        self.labels = list(self.labels)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.samples[0].dims

    @property
    def classes(self) -> List[Any]:
        return sorted(set(self.labels))


@dataclass
class FeatureSet:
    """Learned mode bases and the per-sample core features."""
    bases: List[np.ndarray]
    features: List["DenseTensor"]
    labels: List[Any]
    fit_error: float = 0.0
    trace: List[float] = field(default_factory=list)

    def feature_matrix(self) -> np.ndarray:
        """Vectorized features, one row per sample."""
        return np.stack([f.data.ravel() for f in self.features])


@dataclass
class CommonComponents:
    """Common columns found across subjects for one mode."""
    indices: List[np.ndarray]
    basis: np.ndarray
    correlations: np.ndarray

    @property
    def count(self) -> int:
        return self.basis.shape[1]


@dataclass
class LinkedModel:
    """Per-subject Tucker models whose leading columns are shared across subjects."""
    subject_models: List[TuckerModel]
    common_counts: List[int]
    common_bases: List[np.ndarray]
    alignment: List[List[np.ndarray]]
    common_correlations: List[np.ndarray] = field(default_factory=list)
    individual_max_correlation: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


@dataclass
class AveragedBlockModel:
    """Sum of Tucker blocks fitted to the subject-averaged tensor."""
    blocks: List[TuckerModel]
    residual: float
    trace: List[float] = field(default_factory=list)


@dataclass
class PLSModel:
    """Latent-direction regression model Y ~ A diag(D) C^T with X ~ A B^T."""
    W: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray
    warnings: List[str] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return self.W.shape[1]


@dataclass
class TensorPLSModel:
    """Two Tucker models coupled through shared factor matrices."""
    x_model: TuckerModel
    y_model: TuckerModel
    shared_modes: List[int]
    x_mean: np.ndarray
    y_mean: np.ndarray
    linkage: np.ndarray
    trace_x: List[float] = field(default_factory=list)
    trace_y: List[float] = field(default_factory=list)
    trace_total: List[float] = field(default_factory=list)
    block_diagonal_energy: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
