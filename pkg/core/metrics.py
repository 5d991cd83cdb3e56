"""
Scoring functions used to check recovered factors against ground truth.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from core.types import TensorError

logger = logging.getLogger(__name__)


def amari_index(p: np.ndarray) -> float:
    """
    Permutation and scale invariant separation error of a square gain matrix.

    0 means p is a scaled permutation; the value is normalized to [0, 1].
    """
    p = np.abs(np.asarray(p, dtype=np.float64))
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise TensorError(f"amari index needs a square matrix, got shape {p.shape}", "shape")
    n = p.shape[0]
    if n == 1:
        return 0.0
    rows = np.sum(np.sum(p, axis=1) / np.max(p, axis=1) - 1.0)
    cols = np.sum(np.sum(p, axis=0) / np.max(p, axis=0) - 1.0)
    return float((rows + cols) / (2.0 * n * (n - 1)))


def _unit_columns(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=0)
    return m / np.where(norms > 0, norms, 1.0)


def column_correlations(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pearson correlations between the columns of a and b; constant columns correlate 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return _unit_columns(a - a.mean(axis=0)).T @ _unit_columns(b - b.mean(axis=0))


def align_columns(truth: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Permutation perm with estimate[:, perm[k]] best matching truth[:, k] by absolute cosine."""
    cosines = np.abs(_unit_columns(truth).T @ _unit_columns(estimate))
    rows, cols = linear_sum_assignment(-cosines)
    perm = np.empty(truth.shape[1], dtype=int)
    perm[rows] = cols
    return perm


def factor_congruence(truth: Sequence[np.ndarray], estimate: Sequence[np.ndarray]) -> Tuple[float, np.ndarray]:
    """
    Mean over components of the product over modes of absolute cosines,
    after the component permutation that maximizes the total.

    Returns:
        (mean congruence, permutation of the estimated components)
    """
    if len(truth) != len(estimate):
        raise TensorError("truth and estimate need the same number of modes", "shape")
    congruence = np.ones((truth[0].shape[1], estimate[0].shape[1]))
    for t, e in zip(truth, estimate):
        congruence *= np.abs(_unit_columns(t).T @ _unit_columns(e))
    rows, cols = linear_sum_assignment(-congruence)
    return float(np.mean(congruence[rows, cols])), cols[np.argsort(rows)]


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians, descending) between the column spaces of a and b."""
    return subspace_angles(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def r_squared(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Coefficient of determination pooled over all response columns."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise TensorError(f"shapes differ: {y_true.shape} vs {y_pred.shape}", "shape")
    y_true = y_true.reshape(y_true.shape[0], -1)
    y_pred = y_pred.reshape(y_pred.shape[0], -1)
    total = np.sum((y_true - y_true.mean(axis=0)) ** 2)
    residual = np.sum((y_true - y_pred) ** 2)
    return float(1.0 - residual / total) if total > 0 else float(residual == 0)


def silhouette_score(features: np.ndarray, labels: Sequence) -> float:
    """Mean silhouette of the rows of features under the given labels (singletons score 0)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise TensorError("silhouette needs at least two classes", "invalid-argument")
    distances = cdist(features, features)
    scores = np.zeros(len(labels))
    for i in range(len(labels)):
        same = labels == labels[i]
        if same.sum() <= 1:
            continue
        within = distances[i, same].sum() / (same.sum() - 1)
        between = min(distances[i, labels == c].mean() for c in classes if c != labels[i])
        scores[i] = (between - within) / max(within, between)
    return float(scores.mean())


def support_f1(truth: np.ndarray, estimate: np.ndarray, tol: float = 0.0) -> float:
    """F1 score of the estimated nonzero pattern after column alignment."""
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    aligned = estimate[:, align_columns(truth, estimate)]
    true_support = np.abs(truth) > tol
    found = np.abs(aligned) > tol
    hits = np.sum(true_support & found)
    denominator = 2 * hits + np.sum(found & ~true_support) + np.sum(true_support & ~found)
    return float(2 * hits / denominator) if denominator else 1.0


def max_cross_correlation(matrices: List[np.ndarray]) -> float:
    """Largest absolute Pearson correlation between columns of different matrices."""
    best = 0.0
    for i in range(len(matrices)):
        for j in range(i + 1, len(matrices)):
            if matrices[i].shape[1] and matrices[j].shape[1]:
                best = max(best, float(np.max(np.abs(column_correlations(matrices[i], matrices[j])))))
    return best
