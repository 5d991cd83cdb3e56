"""
Constrained two-way factorizations y ~ a @ b.T.

b holds the components (one per column) and a the basis / mixing matrix.
Every engine returns a FactorPair normalized the same way: b columns at unit
2-norm with the scale absorbed into a (ICA keeps unit-variance components),
columns ordered by descending a-column norm, and each b column's
largest-magnitude entry made positive.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solveh_banded
from scipy.optimize import nnls

from core.tensor_core import as_matrix, pseudo_inverse
from core.types import FactorPair, TensorError
from data_model.run_config_models import ConstraintKind, ConstraintSpec

logger = logging.getLogger(__name__)

_TINY = 1e-300
_ICA_RESTARTS = 3
_GAUSSIAN_KURTOSIS = 0.5


def _check_rank(y: np.ndarray, j: int) -> int:
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or not 1 <= j <= min(y.shape):
        raise TensorError(f"rank {j} must lie in [1, {min(y.shape)}] for a {y.shape} matrix", "invalid-rank")
    return int(j)


def _relative_change(previous: float, current: float) -> float:
    return abs(previous - current) / max(abs(previous), _TINY)


def fix_signs(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flip column pairs so each b column's largest-magnitude entry is positive."""
    a, b = a.copy(), b.copy()
    for k in range(b.shape[1]):
        if b[np.argmax(np.abs(b[:, k])), k] < 0:
            a[:, k] = -a[:, k]
            b[:, k] = -b[:, k]
    return a, b


def order_and_sign(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-np.linalg.norm(a, axis=0), kind="stable")
    return fix_signs(a[:, order], b[:, order])


def normalize_pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-norm b columns, scale into a, then order and sign."""
    norms = np.linalg.norm(b, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return order_and_sign(a * scale, b / scale)


def second_difference(n: int) -> np.ndarray:
    """(n-2) x n second-difference operator; empty when n < 3."""
    if n < 3:
        return np.zeros((0, n))
    op = np.zeros((n - 2, n))
    idx = np.arange(n - 2)
    op[idx, idx] = 1.0
    op[idx, idx + 1] = -2.0
    op[idx, idx + 2] = 1.0
    return op


def roughness(b: np.ndarray) -> np.ndarray:
    """Per-column squared norm of the second differences."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] < 3:
        return np.zeros(b.shape[1])
    return np.sum(np.diff(b, n=2, axis=0) ** 2, axis=0)


def smoothing_bands(n: int, weight: float, shift: float = 1.0) -> np.ndarray:
    """Upper banded storage of shift * I + weight * L^T L for the second difference L."""
    bands = np.zeros((3, n))
    bands[2] = shift
    if n >= 3:
        stencil = np.array([1.0, -2.0, 1.0])
        main = np.zeros(n)
        first = np.zeros(n - 1)
        second = np.zeros(n - 2)
        for o in range(3):
            main[o:o + n - 2] += stencil[o] ** 2
        for o in range(2):
            first[o:o + n - 2] += stencil[o] * stencil[o + 1]
        second += stencil[0] * stencil[2]
        bands[2] += weight * main
        bands[1, 1:] = weight * first
        bands[0, 2:] = weight * second
    return bands


def soft_threshold(x: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def svd_factor(y, j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Truncated singular value decomposition.

    Args:
        y: Matrix to factorize
        j: Number of singular triplets, 1 <= j <= min(rows, cols)

    Returns:
        (a, d, b) with orthonormal a and b columns and nonincreasing d

    Raises:
        TensorError: invalid-rank when j is out of range
    """
    y = as_matrix(y)
    j = _check_rank(y, j)
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    a, b = fix_signs(u[:, :j], vt[:j].T)
    return a, s[:j].copy(), b


def _svd_pair(y: np.ndarray, j: int) -> FactorPair:
    a, d, b = svd_factor(y, j)
    a = a * d
    objective = float(np.linalg.norm(y - a @ b.T) ** 2)
    return FactorPair(a=a, b=b, iterations_run=1, final_objective=objective, objective_trace=[objective])


def _nndsvda(y: np.ndarray, j: int) -> Tuple[np.ndarray, np.ndarray]:
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    a = np.zeros((y.shape[0], j))
    b = np.zeros((y.shape[1], j))
    a[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    b[:, 0] = np.sqrt(s[0]) * np.abs(vt[0])
    for k in range(1, j):
        x, z = u[:, k], vt[k]
        xp, xn = np.maximum(x, 0), np.maximum(-x, 0)
        zp, zn = np.maximum(z, 0), np.maximum(-z, 0)
        xpn, xnn = np.linalg.norm(xp), np.linalg.norm(xn)
        zpn, znn = np.linalg.norm(zp), np.linalg.norm(zn)
        if xpn * zpn >= xnn * znn:
            left, right, sigma = xp, zp, xpn * zpn
            left_norm, right_norm = xpn, zpn
        else:
            left, right, sigma = xn, zn, xnn * znn
            left_norm, right_norm = xnn, znn
        if sigma <= 0:
            continue
        scale = np.sqrt(s[k] * sigma)
        a[:, k] = scale * left / left_norm
        b[:, k] = scale * right / right_norm
    eps = np.finfo(np.float64).eps
    a[a < eps] = 0.0
    b[b < eps] = 0.0
    mean = y.mean()
    a[a == 0] = mean
    b[b == 0] = mean
    return a, b


def _hals_sweep(target: np.ndarray, gram: np.ndarray, factor: np.ndarray) -> None:
    """One in-place pass of nonnegative column updates minimizing tr(F G F^T) - 2 tr(F^T T)."""
    for k in range(factor.shape[1]):
        if gram[k, k] <= _TINY:
            continue
        factor[:, k] = np.maximum(factor[:, k] + (target[:, k] - factor @ gram[:, k]) / gram[k, k], 0.0)


def nmf_hals(y, j: int, spec: ConstraintSpec = ConstraintSpec(kind=ConstraintKind.NONNEGATIVE)) -> FactorPair:
    """
    Nonnegative factorization by hierarchical alternating least squares.

    Args:
        y: Entrywise nonnegative matrix
        j: Number of components
        spec: Iteration cap and stopping tolerance

    Returns:
        FactorPair with nonnegative a and b

    Raises:
        TensorError: invalid-input when y has negative entries
    """
    y = as_matrix(y)
    if np.any(y < 0):
        raise TensorError("nonnegative factorization requires a nonnegative matrix", "invalid-input")
    j = _check_rank(y, j)
    a, b = _nndsvda(y, j)
    objective = float(np.linalg.norm(y - a @ b.T) ** 2)
    trace = [objective]
    iterations = 0
    logger.debug(f"nmf_hals start: shape={y.shape}, rank={j}, objective={objective:.6e}")
    while iterations < spec.max_iters and objective > 0:
        iterations += 1
        _hals_sweep(y @ b, b.T @ b, a)
        _hals_sweep(y.T @ a, a.T @ a, b)
        previous, objective = objective, float(np.linalg.norm(y - a @ b.T) ** 2)
        trace.append(objective)
        if _relative_change(previous, objective) < spec.tol:
            break
    warnings = []
    if iterations >= spec.max_iters and objective > 0 and _relative_change(trace[-2], trace[-1]) >= spec.tol:
        warnings.append("not-converged")
        logger.warning(f"nmf_hals stopped at the iteration cap ({spec.max_iters}) before converging")
    a, b = normalize_pair(a, b)
    return FactorPair(a=a, b=b, iterations_run=iterations, final_objective=objective,
                      objective_trace=trace, warnings=warnings)


def _whiten(y: np.ndarray, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-centred data and the j x T whitened signals (unit covariance)."""
    centred = y - y.mean(axis=1, keepdims=True)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    if j > s.size or s[0] <= 0 or s[j - 1] <= 1e-10 * s[0]:
        raise TensorError(f"{j} components exceed the numerical rank of the centred data", "rank-deficient")
    return centred, np.sqrt(y.shape[1]) * vt[:j]


def _fastica_unit(z: np.ndarray, found: np.ndarray, w: np.ndarray, spec: ConstraintSpec) -> Tuple[np.ndarray, int, bool]:
    samples = z.shape[1]
    for iteration in range(1, spec.max_iters + 1):
        wz = w @ z
        g = np.tanh(wz)
        w_new = (z @ g) / samples - np.mean(1.0 - g ** 2) * w
        if found.size:
            w_new -= found.T @ (found @ w_new)
        w_new /= np.linalg.norm(w_new)
        converged = abs(abs(w_new @ w) - 1.0) < spec.tol
        w = w_new
        if converged:
            return w, iteration, True
    return w, spec.max_iters, False


def ica_deflation(y, j: int, spec: ConstraintSpec = ConstraintSpec(kind=ConstraintKind.INDEPENDENT)) -> FactorPair:
    """
    Independent components by deflationary fixed-point iteration on whitened data.

    Rows of y are mixtures, columns are samples. Components are extracted one at
    a time with a logcosh contrast, each orthogonalized against the previous ones.

    Args:
        y: rows x T matrix of mixtures
        j: Number of components to extract
        spec: Iteration cap, tolerance and seed for the random restarts

    Returns:
        FactorPair whose b columns are zero-mean unit-variance components

    Raises:
        TensorError: rank-deficient when j exceeds the numerical rank
    """
    y = as_matrix(y)
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or j < 1:
        raise TensorError(f"component count must be a positive integer, got {j}", "invalid-rank")
    centred, z = _whiten(y, int(j))
    rng = np.random.default_rng(spec.seed)
    unmixing = np.zeros((0, j))
    iterations = 0
    warnings = []
    for p in range(j):
        for attempt in range(_ICA_RESTARTS):
            w = rng.standard_normal(j)
            if unmixing.size:
                w -= unmixing.T @ (unmixing @ w)
            w /= np.linalg.norm(w)
            w, used, converged = _fastica_unit(z, unmixing, w, spec)
            iterations += used
            if converged:
                break
            logger.debug(f"ica component {p} did not converge on attempt {attempt + 1}")
        else:
            warnings.append("not-converged")
            logger.warning(f"ica component {p} did not converge after {_ICA_RESTARTS} restarts")
        unmixing = np.vstack([unmixing, w])

    b = (unmixing @ z).T
    a = centred @ b / y.shape[1]
    objective = float(np.linalg.norm(centred - a @ b.T) ** 2)

    kurtosis = np.mean(b ** 4, axis=0) - 3.0
    if np.sum(np.abs(kurtosis) < _GAUSSIAN_KURTOSIS) > 1:
        warnings.append("gaussian-sources")
        logger.warning("several extracted components look Gaussian; they are only identified up to rotation")

    a, b = order_and_sign(a, b)
    return FactorPair(a=a, b=b, iterations_run=iterations, final_objective=objective,
                      objective_trace=[objective], warnings=list(dict.fromkeys(warnings)))


def _penalized_columns(y: np.ndarray, j: int, spec: ConstraintSpec, solve_component) -> FactorPair:
    """
    Column-wise alternating minimization with unit-norm a columns.

    solve_component(r) returns the penalized minimizer b_k of
    ||R_k - a_k b_k^T||^2 + penalty(b_k) given r = R_k^T a_k, and penalty(b)
    is evaluated by the same callable's `penalty` attribute.
    """
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    a = u[:, :j].copy()
    b = vt[:j].T * s[:j]
    residual = y - a @ b.T
    objective = float(np.linalg.norm(residual) ** 2 + solve_component.penalty(b))
    trace = [objective]
    iterations = 0
    while iterations < spec.max_iters:
        iterations += 1
        for k in range(j):
            partial = residual + np.outer(a[:, k], b[:, k])
            b[:, k] = solve_component(partial.T @ a[:, k])
            direction = partial @ b[:, k]
            norm = np.linalg.norm(direction)
            if norm > 0:
                a[:, k] = direction / norm
            residual = partial - np.outer(a[:, k], b[:, k])
        previous, objective = objective, float(np.linalg.norm(residual) ** 2 + solve_component.penalty(b))
        trace.append(objective)
        if objective == 0 or _relative_change(previous, objective) < spec.tol:
            break
    a, b = normalize_pair(a, b)
    return FactorPair(a=a, b=b, iterations_run=iterations, final_objective=objective, objective_trace=trace)


class _SoftThreshold:
    def __init__(self, weight: float):
        self.weight = weight

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return soft_threshold(r, self.weight / 2.0)

    def penalty(self, b: np.ndarray) -> float:
        return self.weight * float(np.sum(np.abs(b)))


class _SmoothingSolve:
    def __init__(self, n: int, weight: float):
        self.weight = weight
        self.factor = cholesky_banded(smoothing_bands(n, weight))

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, False), r)

    def penalty(self, b: np.ndarray) -> float:
        return self.weight * float(np.sum(roughness(b)))


def sca_factor(y, j: int, spec: ConstraintSpec = ConstraintSpec(kind=ConstraintKind.SPARSE)) -> FactorPair:
    """
    Sparse component analysis: minimize ||y - a b^T||_F^2 + lambda ||b||_1.

    a columns are kept at unit norm while iterating; b updates are soft-thresholded.
    """
    y = as_matrix(y)
    j = _check_rank(y, j)
    return _penalized_columns(y, j, spec, _SoftThreshold(spec.penalty_weight))


def smoca_factor(y, j: int, spec: ConstraintSpec = ConstraintSpec(kind=ConstraintKind.SMOOTH)) -> FactorPair:
    """Smooth component analysis: minimize ||y - a b^T||_F^2 + lambda ||L b||_F^2."""
    y = as_matrix(y)
    j = _check_rank(y, j)
    return _penalized_columns(y, j, spec, _SmoothingSolve(y.shape[1], spec.penalty_weight))


def smooth_column_solve(c: np.ndarray, diagonal: float, weight: float) -> np.ndarray:
    """Solve (diagonal * I + weight * L^T L) u = c."""
    return solveh_banded(smoothing_bands(c.shape[0], weight, shift=diagonal), c)


def bss_factor(y, j: int, spec: ConstraintSpec) -> FactorPair:
    """Dispatch to the engine matching spec.kind; orthogonal and unconstrained use the truncated SVD."""
    kind = ConstraintKind(spec.kind)
    if kind in (ConstraintKind.ORTHOGONAL, ConstraintKind.UNCONSTRAINED):
        return _svd_pair(as_matrix(y), _check_rank(as_matrix(y), j))
    if kind == ConstraintKind.NONNEGATIVE:
        return nmf_hals(y, j, spec)
    if kind == ConstraintKind.SPARSE:
        return sca_factor(y, j, spec)
    if kind == ConstraintKind.SMOOTH:
        return smoca_factor(y, j, spec)
    return ica_deflation(y, j, spec)


def group_factorize(ys: Sequence, j: int, spec: ConstraintSpec, share_b: bool = False) -> List[FactorPair]:
    """
    Simultaneous factorizations y_n ~ a_n b_n^T.

    Args:
        ys: Matrices to factorize
        j: Number of components
        spec: Constraint applied to every factorization
        share_b: Fit one b on the row-stacked matrices, then each a_n by least squares
                 (nonnegative least squares for the nonnegative kind)

    Returns:
        One FactorPair per input; under share_b all pairs reference the same b

    Raises:
        TensorError: shape when share_b and the column counts differ
    """
    ys = [as_matrix(y) for y in ys]
    if not ys:
        raise TensorError("group factorization needs at least one matrix", "invalid-argument")
    if not share_b:
        return [bss_factor(y, j, spec) for y in ys]

    columns = {y.shape[1] for y in ys}
    if len(columns) != 1:
        raise TensorError(f"shared components need equal column counts, got {sorted(columns)}", "shape")
    joint = bss_factor(np.vstack(ys), j, spec)
    b = joint.b
    nonnegative = ConstraintKind(spec.kind) == ConstraintKind.NONNEGATIVE
    projector = pseudo_inverse(b.T @ b) if not nonnegative else None
    pairs = []
    for y in ys:
        if nonnegative:
            a = np.vstack([nnls(b, row)[0] for row in y])
        else:
            a = y @ b @ projector
        objective = float(np.linalg.norm(y - a @ b.T) ** 2)
        pairs.append(FactorPair(a=a, b=b, iterations_run=joint.iterations_run, final_objective=objective,
                                objective_trace=[objective], warnings=list(joint.warnings)))
    return pairs
