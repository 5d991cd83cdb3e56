"""
Seeded generators of synthetic data with known ground truth.

Every generator draws from numpy's default_rng(seed), so a seed fully
determines the output.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.tensor_core import DenseTensor, tensor_from_factors
from core.tucker import check_ranks, cp_collinearity, cp_reconstruct
from core.types import CPModel, LabeledTensorSet, TensorError, TuckerModel

logger = logging.getLogger(__name__)

SOURCE_SHAPES = ("uniform", "sine", "square", "laplace")


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def _add_noise(rng: np.random.Generator, clean: np.ndarray, noise: float) -> np.ndarray:
    if noise < 0:
        raise TensorError(f"noise level must be nonnegative, got {noise}", "invalid-argument")
    return clean + noise * rng.standard_normal(clean.shape) if noise > 0 else clean


def _standardize(rows: np.ndarray) -> np.ndarray:
    centred = rows - rows.mean(axis=-1, keepdims=True)
    return centred / centred.std(axis=-1, keepdims=True)


def _decorrelate(sources: np.ndarray) -> np.ndarray:
    """Symmetric decorrelation to an exactly identity sample covariance."""
    sources = _standardize(sources)
    covariance = sources @ sources.T / sources.shape[1]
    values, vectors = np.linalg.eigh(covariance)
    return vectors @ np.diag(values ** -0.5) @ vectors.T @ sources


def source_signal(rng: np.random.Generator, shape: str, n_samples: int, frequency: int = 3) -> np.ndarray:
    """One standardized non-Gaussian signal."""
    grid = np.arange(n_samples) / n_samples
    if shape == "uniform":
        signal = rng.uniform(-1.0, 1.0, n_samples)
    elif shape == "sine":
        signal = np.sin(2 * np.pi * frequency * grid + rng.uniform(0, 2 * np.pi))
    elif shape == "square":
        signal = np.sign(np.sin(2 * np.pi * (frequency + 2) * grid + rng.uniform(0, 2 * np.pi)) + 1e-12)
    elif shape == "laplace":
        signal = rng.laplace(size=n_samples)
    else:
        raise TensorError(f"unknown source shape '{shape}'", "invalid-argument")
    return _standardize(signal)


def random_tucker(dims: Sequence[int], ranks: Sequence[int], seed: int = 0, noise: float = 0.0,
                  nonnegative: bool = False) -> Tuple[DenseTensor, TuckerModel]:
    """
    Tucker tensor with a standard normal core and orthonormal factors.

    With nonnegative=True core and factors are uniform on [0, 1) instead.

    Returns:
        (tensor, truth model)
    """
    dims = [int(d) for d in dims]
    ranks = check_ranks(dims, ranks)
    rng = np.random.default_rng(seed)
    if nonnegative:
        core = rng.uniform(0.0, 1.0, ranks)
        factors = [rng.uniform(0.0, 1.0, (d, r)) for d, r in zip(dims, ranks)]
    else:
        core = rng.standard_normal(ranks)
        factors = [_orthonormal(rng, d, r) for d, r in zip(dims, ranks)]
    clean = tensor_from_factors(core, factors)
    truth = TuckerModel(core=DenseTensor(core), factors=factors, fit_error=0.0, algorithm="synthetic", seed=seed)
    return DenseTensor(_add_noise(rng, clean, noise)), truth


def random_cp(dims: Sequence[int], rank: int, seed: int = 0, noise: float = 0.0,
              max_collinearity: float = 0.5, max_draws: int = 1000) -> Tuple[DenseTensor, CPModel]:
    """
    CP tensor with unit-norm factor columns whose within-mode |cosines| stay below max_collinearity.

    Weights are drawn from [1, 2) and sorted in descending order.
    """
    dims = [int(d) for d in dims]
    if rank < 1:
        raise TensorError(f"rank must be positive, got {rank}", "invalid-rank")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        factors = [rng.standard_normal((d, rank)) for d in dims]
        factors = [f / np.linalg.norm(f, axis=0) for f in factors]
        if all(cp_collinearity([f]) < max_collinearity for f in factors):
            break
    else:
        raise TensorError(f"no factors with collinearity below {max_collinearity} in {max_draws} draws",
                          "invalid-argument")
    weights = np.sort(rng.uniform(1.0, 2.0, rank))[::-1]
    truth = CPModel(weights=weights, factors=factors, algorithm="synthetic", seed=seed)
    clean = cp_reconstruct(truth).data
    return DenseTensor(_add_noise(rng, clean, noise)), truth


def ica_mixtures(n_sources: int, n_samples: int, seed: int = 0,
                 n_mixtures: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Linear mixtures of standardized, exactly decorrelated non-Gaussian sources.

    Source shapes cycle through uniform, sine, square and Laplace.

    Returns:
        (mixtures n_mixtures x n_samples, sources n_sources x n_samples, mixing n_mixtures x n_sources)
    """
    n_mixtures = n_sources if n_mixtures is None else n_mixtures
    if n_sources < 1 or n_mixtures < n_sources:
        raise TensorError(f"need 1 <= n_sources <= n_mixtures, got {n_sources} and {n_mixtures}",
                          "invalid-argument")
    rng = np.random.default_rng(seed)
    raw = np.vstack([source_signal(rng, SOURCE_SHAPES[k % len(SOURCE_SHAPES)], n_samples, frequency=3 + k)
                     for k in range(n_sources)])
    sources = _decorrelate(raw)
    while True:
        mixing = rng.standard_normal((n_mixtures, n_sources))
        if np.linalg.cond(mixing) < 10:
            break
    return mixing @ sources, sources, mixing


def planted_sparse(rows: int, cols: int, rank: int, density: float = 0.2, noise: float = 0.0,
                   seed: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    y = a0 b0^T (+ noise) with orthonormal a0 and a sparse b0.

    Column k of b0 has entries of magnitude in [1, 2) on its support, scaled by rank - k.
    """
    if not 0 < density <= 1:
        raise TensorError(f"density must lie in (0, 1], got {density}", "invalid-argument")
    rng = np.random.default_rng(seed)
    a0 = _orthonormal(rng, rows, rank)
    support = rng.random((cols, rank)) < density
    support[rng.integers(0, cols, rank), np.arange(rank)] = True
    values = rng.uniform(1.0, 2.0, (cols, rank)) * rng.choice([-1.0, 1.0], (cols, rank))
    b0 = np.where(support, values, 0.0) * np.arange(rank, 0, -1)
    return _add_noise(rng, a0 @ b0.T, noise), a0, b0


def planted_smooth(rows: int, cols: int, rank: int, noise: float = 0.1,
                   seed: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """y = a0 b0^T + noise with slowly varying unit-norm sinusoidal columns in b0."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, cols)
    b0 = np.column_stack([np.sin(np.pi * (k + 1) * grid + rng.uniform(0, np.pi)) for k in range(rank)])
    b0 /= np.linalg.norm(b0, axis=0)
    a0 = rng.standard_normal((rows, rank))
    return _add_noise(rng, a0 @ b0.T, noise), a0, b0


def class_corpus(n_classes: int, per_class: int, dims: Sequence[int], ranks: Sequence[int],
                 noise: float = 0.1, seed: int = 0, n_test: int = 0,
                 spread: float = 0.1) -> Tuple[LabeledTensorSet, Optional[LabeledTensorSet], TuckerModel]:
    """
    Labeled samples sharing orthonormal factors, with one core per class.

    Sample k belongs to class k % n_classes; its core is the class core plus
    spread-scaled jitter and the sample carries additive noise.

    Returns:
        (training set, test set of n_test samples or None, truth model whose core stacks the class cores)
    """
    dims = [int(d) for d in dims]
    ranks = check_ranks(dims, ranks)
    if n_classes < 1 or per_class < 1:
        raise TensorError("need at least one class and one sample per class", "invalid-argument")
    rng = np.random.default_rng(seed)
    factors = [_orthonormal(rng, d, r) for d, r in zip(dims, ranks)]
    class_cores = rng.standard_normal([n_classes] + ranks)

    def draw(count: int, offset: int = 0) -> LabeledTensorSet:
        samples, labels = [], []
        for k in range(count):
            label = (k + offset) % n_classes
            core = class_cores[label] + spread * rng.standard_normal(ranks)
            samples.append(DenseTensor(_add_noise(rng, tensor_from_factors(core, factors), noise)))
            labels.append(label)
        return LabeledTensorSet(samples=samples, labels=labels)

    train = draw(n_classes * per_class)
    test = draw(n_test) if n_test > 0 else None
    truth = TuckerModel(core=DenseTensor(class_cores), factors=[np.eye(n_classes)] + factors, fit_error=0.0,
                        algorithm="synthetic", seed=seed)
    return train, test, truth


def planted_common_factors(rows: int, n_subjects: int, n_common: int, n_individual: int, noise: float = 0.05,
                           seed: int = 0) -> Tuple[List[np.ndarray], np.ndarray, List[np.ndarray]]:
    """
    Per-subject factor matrices hiding n_common shared columns.

    Columns have unit-variance entries; every subject sees the common columns
    with its own noise, a random sign and a random position.

    Returns:
        (factor matrices, common columns rows x n_common, per-subject positions of the common columns)
    """
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((rows, n_common))
    factors, positions = [], []
    for _ in range(n_subjects):
        own = np.hstack([common + noise * rng.standard_normal(common.shape),
                         rng.standard_normal((rows, n_individual))])
        order = rng.permutation(n_common + n_individual)
        signs = rng.choice([-1.0, 1.0], n_common + n_individual)
        factors.append(own[:, order] * signs)
        positions.append(np.argsort(order)[:n_common])
    return factors, common, positions


def linked_subjects(dims: Sequence[int], ranks: Sequence[int], n_subjects: int, n_common: int,
                    common_mode: int = 0, noise: float = 0.0,
                    seed: int = 0) -> Tuple[List[DenseTensor], List[TuckerModel], np.ndarray]:
    """
    Subject tensors whose common_mode factors share n_common independent source columns.

    Common columns alternate between sine and uniform sources; each subject's
    individual columns are Laplace sources decorrelated from the common ones.
    Every other mode has independent orthonormal factors.

    Returns:
        (subject tensors, truth models, common sources dims[common_mode] x n_common)
    """
    dims = [int(d) for d in dims]
    ranks = check_ranks(dims, ranks)
    rows, rank = dims[common_mode], ranks[common_mode]
    if not 0 <= n_common <= rank:
        raise TensorError(f"common count {n_common} must lie in [0, {rank}]", "invalid-rank")
    rng = np.random.default_rng(seed)
    shapes = ("sine", "uniform")
    common = (_decorrelate(np.vstack([source_signal(rng, shapes[k % 2], rows, frequency=2 + k)
                                      for k in range(n_common)])).T
              if n_common else np.zeros((rows, 0)))
    subjects, truths = [], []
    for _ in range(n_subjects):
        individual = rng.laplace(size=(rows, rank - n_common))
        individual -= individual.mean(axis=0)
        if n_common:
            individual -= common @ (common.T @ individual) / rows
        if individual.shape[1]:
            individual = _decorrelate(individual.T).T
        factors = [_orthonormal(rng, d, r) for d, r in zip(dims, ranks)]
        factors[common_mode] = np.hstack([common, individual])
        core = rng.standard_normal(ranks)
        clean = tensor_from_factors(core, factors)
        subjects.append(DenseTensor(_add_noise(rng, clean, noise)))
        truths.append(TuckerModel(core=DenseTensor(core), factors=factors, fit_error=0.0, algorithm="synthetic",
                                  seed=seed))
    return subjects, truths, common


def pls_latent(n_samples: int = 100, n_predictors: int = 8, n_responses: int = 3, n_latent: int = 2,
               noise: float = 0.01, seed: int = 0,
               n_test: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    X = T P^T + E, Y = T Q^T + F with standard normal latent scores T.

    Returns:
        (x, y, x_test, y_test); the test arrays have n_test rows
    """
    rng = np.random.default_rng(seed)
    loadings_x = rng.standard_normal((n_predictors, n_latent))
    loadings_y = rng.standard_normal((n_responses, n_latent))

    def draw(rows: int):
        scores = rng.standard_normal((rows, n_latent))
        return (_add_noise(rng, scores @ loadings_x.T, noise), _add_noise(rng, scores @ loadings_y.T, noise))

    x, y = draw(n_samples)
    x_test, y_test = draw(n_test)
    return x, y, x_test, y_test


def coupled_tensor_pair(n_samples: int, dims_x: Sequence[int], dims_y: Sequence[int], ranks_x: Sequence[int],
                        ranks_y: Sequence[int], noise: float = 0.0, seed: int = 0,
                        n_test: int = 0) -> Tuple[DenseTensor, DenseTensor, DenseTensor, DenseTensor, np.ndarray]:
    """
    Predictor and response tensors sharing one sample-mode factor.

    dims_x/dims_y and ranks_x/ranks_y list the non-sample modes; the shared
    sample-mode rank is ranks_x[0] == ranks_y[0]. Training scores are centred
    exactly so the clean training tensors have zero mean along the sample mode.

    Returns:
        (x, y, x_test, y_test, centred training scores n_samples x rank)
    """
    ranks_x = [int(r) for r in ranks_x]
    ranks_y = [int(r) for r in ranks_y]
    if ranks_x[0] != ranks_y[0]:
        raise TensorError(f"sample-mode ranks differ: {ranks_x[0]} and {ranks_y[0]}", "shape", mode=0)
    check_ranks([n_samples] + list(dims_x), ranks_x)
    check_ranks([n_samples] + list(dims_y), ranks_y)
    rng = np.random.default_rng(seed)
    factors_x = [_orthonormal(rng, d, r) for d, r in zip(dims_x, ranks_x[1:])]
    factors_y = [_orthonormal(rng, d, r) for d, r in zip(dims_y, ranks_y[1:])]
    core_x = rng.standard_normal(ranks_x)
    core_y = rng.standard_normal(ranks_y)

    def draw(rows: int, centre: bool):
        scores = rng.standard_normal((rows, ranks_x[0]))
        if centre:
            scores -= scores.mean(axis=0)
        x = tensor_from_factors(core_x, [scores] + factors_x)
        y = tensor_from_factors(core_y, [scores] + factors_y)
        return DenseTensor(_add_noise(rng, x, noise)), DenseTensor(_add_noise(rng, y, noise)), scores

    x, y, scores = draw(n_samples, centre=True)
    x_test, y_test, _ = draw(max(n_test, 1), centre=False)
    return x, y, x_test, y_test, scores
