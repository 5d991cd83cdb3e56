"""
Feature extraction from sample collections by a concatenated Tucker decomposition,
projection of new samples, and lightweight classifiers.
"""

import logging
from collections import Counter
from typing import Any, List, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from core.tensor_core import (
    DenseTensor,
    TensorLike,
    as_array,
    has_orthonormal_columns,
    mode_product_array,
    pseudo_inverse,
)
from core.tucker import check_ranks, hooi
from core.types import FeatureSet, LabeledTensorSet, TensorError

logger = logging.getLogger(__name__)


def extract_train(data: LabeledTensorSet, ranks: Sequence[int], max_iters: int = 200,
                  tol: float = 1e-8) -> FeatureSet:
    """
    Learn mode bases from all training samples at once.

    The K samples are stacked along a trailing sample mode and decomposed by
    HOOI with the sample-mode factor fixed to the K x K identity, so the
    feature of sample k is exactly slice k of the core.

    Args:
        data: Training samples with labels
        ranks: Ranks of the sample modes
        max_iters: HOOI sweep cap
        tol: HOOI stopping tolerance

    Returns:
        FeatureSet with one basis per sample mode and one core per sample
    """
    k = len(data.samples)
    if k < 2:
        raise TensorError("feature extraction needs at least two training samples", "invalid-argument")
    ranks = check_ranks(data.dims, ranks)
    stacked = np.stack([s.data for s in data.samples], axis=-1)
    order = len(data.dims)
    model = hooi(stacked, ranks + [k], max_iters=max_iters, tol=tol, fixed_factors={order: np.eye(k)})
    core = as_array(model.core)
    features = [DenseTensor(core[..., i]) for i in range(k)]
    logger.info(f"extracted {k} features of dims {tuple(ranks)} with fit error {model.fit_error:.6e}")
    return FeatureSet(bases=model.factors[:order], features=features, labels=list(data.labels),
                      fit_error=model.fit_error, trace=model.trace)


def tucker2_features(samples: Sequence[TensorLike], ranks: Sequence[int], max_iters: int = 200,
                     tol: float = 1e-8, labels: Sequence[Any] = ()) -> FeatureSet:
    """
    Simultaneous two-way factorization X_k ~ U1 F_k U2^T by alternating eigen-updates.

    U1 spans the leading eigenvectors of sum_k X_k U2 U2^T X_k^T and U2 those of
    sum_k X_k^T U1 U1^T X_k; both start from the eigenvectors of the plain scatter matrices.
    """
    mats = [np.asarray(as_array(s), dtype=np.float64) for s in samples]
    if not mats or any(m.ndim != 2 for m in mats):
        raise TensorError("tucker2_features needs two-way samples", "shape")
    if any(m.shape != mats[0].shape for m in mats):
        raise TensorError("all samples must share their dims", "shape")
    r1, r2 = check_ranks(mats[0].shape, ranks)

    def leading_eigvecs(scatter: np.ndarray, r: int) -> np.ndarray:
        _, vectors = np.linalg.eigh(scatter)
        basis = vectors[:, ::-1][:, :r]
        signs = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(r)])
        return basis * np.where(signs == 0, 1.0, signs)

    def fit(u1, u2) -> float:
        num = sum(np.linalg.norm(m - u1 @ (u1.T @ m @ u2) @ u2.T) ** 2 for m in mats)
        den = sum(np.linalg.norm(m) ** 2 for m in mats)
        return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))

    u1 = leading_eigvecs(sum(m @ m.T for m in mats), r1)
    u2 = leading_eigvecs(sum(m.T @ m for m in mats), r2)
    error = fit(u1, u2)
    trace = [error]
    for _ in range(max_iters):
        u1 = leading_eigvecs(sum(m @ u2 @ u2.T @ m.T for m in mats), r1)
        u2 = leading_eigvecs(sum(m.T @ u1 @ u1.T @ m for m in mats), r2)
        previous, error = error, fit(u1, u2)
        trace.append(error)
        if error == 0 or abs(previous - error) / max(previous, 1e-300) < tol:
            break
    features = [DenseTensor(u1.T @ m @ u2) for m in mats]
    return FeatureSet(bases=[u1, u2], features=features, labels=list(labels), fit_error=error, trace=trace)


def project_test(x: TensorLike, bases: Sequence[np.ndarray]) -> DenseTensor:
    """
    Feature of a new sample: transposes of orthonormal bases, pseudo-inverses otherwise.
    """
    a = as_array(x)
    if len(bases) != a.ndim:
        raise TensorError(f"sample of order {a.ndim} needs {a.ndim} bases, got {len(bases)}", "shape")
    for n, u in enumerate(bases):
        if u.shape[0] != a.shape[n]:
            raise TensorError(f"basis {n} has {u.shape[0]} rows, sample mode has {a.shape[n]}", "shape", mode=n)
    orthonormal = all(has_orthonormal_columns(u) for u in bases)
    for n, u in enumerate(bases):
        a = mode_product_array(a, u.T if orthonormal else pseudo_inverse(u), n)
    return DenseTensor(a)


def _feature_rows(features: Sequence[TensorLike]) -> np.ndarray:
    return np.stack([np.asarray(as_array(f), dtype=np.float64).ravel() for f in features])


def classify_knn(train: FeatureSet, test_features: Sequence[TensorLike], k: int = 1) -> List[Any]:
    """
    Majority vote of the k nearest training features (Frobenius distance).

    Ties go to the class with the smallest mean neighbor distance, then to the lowest class id.
    """
    if not train.features:
        raise TensorError("training set is empty", "invalid-argument")
    if not 1 <= k <= len(train.features):
        raise TensorError(f"k must lie in [1, {len(train.features)}], got {k}", "invalid-argument")
    if not len(test_features):
        return []
    distances = cdist(_feature_rows(test_features), train.feature_matrix())
    predictions = []
    for row in distances:
        nearest = np.argsort(row, kind="stable")[:k]
        votes = Counter(train.labels[i] for i in nearest)
        top = max(votes.values())
        tied = [label for label, count in votes.items() if count == top]

        def mean_distance(label):
            return float(np.mean([row[i] for i in nearest if train.labels[i] == label]))

        predictions.append(min(sorted(tied), key=mean_distance))
    return predictions


def classify_centroid(train: FeatureSet, test_features: Sequence[TensorLike]) -> List[Any]:
    """
    Nearest class centroid after whitening every feature by its training standard deviation.

    Zero-variance features are dropped with a warning; ties go to the lowest class id.
    """
    if not train.features:
        raise TensorError("training set is empty", "invalid-argument")
    if not len(test_features):
        return []
    rows = train.feature_matrix()
    labels = np.asarray(train.labels, dtype=object)
    classes = sorted(set(train.labels))
    spread = rows.std(axis=0)
    keep = spread > 1e-12 * max(float(np.max(np.abs(rows))), 1.0)
    if not np.all(keep):
        logger.warning(f"dropping {int(np.sum(~keep))} zero-variance feature dimensions")
    scale = spread[keep]
    centroids = np.stack([rows[labels == c][:, keep].mean(axis=0) for c in classes]) / scale
    test = _feature_rows(test_features)[:, keep] / scale
    distances = cdist(test, centroids, "sqeuclidean")
    return [classes[i] for i in np.argmin(distances, axis=1)]
