"""
Partial least squares regression: matrix PLS by successive covariance-maximizing
directions, and a Tucker-based tensor PLS whose models share factors on coupled modes.
"""

import logging
from typing import Dict, List, Sequence

import numpy as np
from scipy.linalg import solve

from core.tensor_core import (
    DenseTensor,
    TensorLike,
    as_array,
    as_matrix,
    fold_array,
    mode_product_array,
    pseudo_inverse,
    unfold_array,
)
from core.tucker import check_ranks, core_project, leading_left_vectors
from core.types import PLSModel, TensorError, TensorPLSModel, TuckerModel

logger = logging.getLogger(__name__)

_DEFLATION_FLOOR = 1e-12


def pls_fit(x, y, j: int) -> PLSModel:
    """
    Fit j latent directions of X that best explain Y.

    Each direction w is the dominant left singular vector of the deflated X^T Y
    (unit norm, largest-magnitude entry positive); the score a = X w is removed
    from X before the next direction is sought, so scores are mutually orthogonal.

    Args:
        x: I x N predictors
        y: I x M responses (a vector is treated as one column)
        j: Number of directions requested

    Returns:
        PLSModel; fewer than j components are returned, with a
        "reduced-components" warning, when the cross-covariance is exhausted
    """
    x = as_matrix(x, "predictors")
    y = np.array(as_array(y), dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    y = as_matrix(y, "responses")
    if x.shape[0] != y.shape[0]:
        raise TensorError(f"predictors have {x.shape[0]} rows, responses have {y.shape[0]}", "shape")
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or not 1 <= j <= x.shape[1]:
        raise TensorError(f"component count {j} must lie in [1, {x.shape[1]}]", "invalid-rank")

    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xd = x - x_mean
    yc = y - y_mean
    initial = np.linalg.norm(xd.T @ yc)
    columns: Dict[str, List[np.ndarray]] = {"w": [], "a": [], "b": [], "c": []}
    scales = []
    warnings = []
    for k in range(j):
        cross = xd.T @ yc
        if initial == 0 or np.linalg.norm(cross) <= _DEFLATION_FLOOR * initial:
            break
        w = leading_left_vectors(cross, 1)[:, 0]
        a = xd @ w
        aa = float(a @ a)
        if aa <= _DEFLATION_FLOOR * max(float(np.sum(x * x)), 1.0):
            break
        p = xd.T @ a / aa
        q = yc.T @ a / aa
        d = float(np.linalg.norm(q))
        columns["w"].append(w)
        columns["a"].append(a)
        columns["b"].append(p)
        columns["c"].append(q / d if d > 0 else q)
        scales.append(d)
        xd = xd - np.outer(a, p)
        logger.debug(f"pls component {k}: score norm {np.sqrt(aa):.6e}, response scale {d:.6e}")

    if len(scales) < j:
        warnings.append("reduced-components")
        logger.warning(f"pls_fit: only {len(scales)} of {j} components could be extracted")
    if not scales:
        raise TensorError("predictors carry no covariance with the responses", "rank-deficient")

    def stack(name, rows):
        return np.column_stack(columns[name]) if columns[name] else np.zeros((rows, 0))

    return PLSModel(W=stack("w", x.shape[1]), A=stack("a", x.shape[0]), B=stack("b", x.shape[1]),
                    C=stack("c", y.shape[1]), D=np.array(scales), x_mean=x_mean, y_mean=y_mean,
                    warnings=warnings)


def pls_regression_matrix(m: PLSModel) -> np.ndarray:
    """N x M coefficients mapping centred predictors to centred responses."""
    rotation = m.W @ solve(m.B.T @ m.W, np.eye(m.n_components))
    return rotation @ (m.D[:, None] * m.C.T)


def pls_predict(m: PLSModel, x_new) -> np.ndarray:
    """Predicted responses for new predictor rows."""
    x_new = np.array(as_array(x_new), dtype=np.float64)
    if x_new.ndim == 1:
        x_new = x_new[None, :]
    if x_new.ndim != 2 or x_new.shape[1] != m.x_mean.shape[0]:
        raise TensorError(f"predictors need {m.x_mean.shape[0]} columns, got shape {x_new.shape}", "shape")
    return (x_new - m.x_mean) @ pls_regression_matrix(m) + m.y_mean


def _project_except(a: np.ndarray, factors: Sequence[np.ndarray], skip: int) -> np.ndarray:
    for k, u in enumerate(factors):
        if k != skip:
            a = mode_product_array(a, u.T, k)
    return a


def _reconstruct(core: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    for k, u in enumerate(factors):
        core = mode_product_array(core, u, k)
    return core


def _block_diagonal_energy(core: np.ndarray, blocks: int) -> float:
    """Share of core energy whose indices fall in the same diagonal block on every mode."""
    total = float(np.sum(core ** 2))
    if total == 0:
        return 0.0
    ids = np.meshgrid(*[np.arange(d) * blocks // d for d in core.shape], indexing="ij")
    mask = np.all([ids[0] == other for other in ids[1:]], axis=0) if len(ids) > 1 else np.ones(core.shape, bool)
    return float(np.sum(core[mask] ** 2) / total)


def tensor_pls_fit(x: TensorLike, y: TensorLike, ranks_x: Sequence[int], ranks_y: Sequence[int],
                   shared_modes: Sequence[int] = (0,), max_iters: int = 200, tol: float = 1e-8) -> TensorPLSModel:
    """
    Coupled Tucker models of predictor and response tensors.

    Mode 0 indexes samples and is centred. On every shared mode both models use
    one orthonormal factor, the dominant left singular subspace of the two
    projected unfoldings placed side by side; the other factors follow HOOI
    updates of their own tensor. Cores come from core_project, and the
    least-squares linkage maps the x core's mode-0 unfolding onto the y core's.

    Raises:
        TensorError: shape when a shared mode's dims or ranks differ between x and y,
                     invalid-argument when mode 0 is not shared
    """
    xa = as_array(x)
    ya = as_array(y)
    ranks_x = check_ranks(xa.shape, ranks_x)
    ranks_y = check_ranks(ya.shape, ranks_y)
    shared = sorted({int(n) for n in shared_modes})
    if 0 not in shared:
        raise TensorError("the sample mode 0 must be shared", "invalid-argument")
    for n in shared:
        if n >= min(xa.ndim, ya.ndim):
            raise TensorError(f"shared mode {n} is missing from one of the tensors", "shape", mode=n)
        if xa.shape[n] != ya.shape[n]:
            raise TensorError(f"shared mode {n} has dims {xa.shape[n]} and {ya.shape[n]}", "shape", mode=n)
        if ranks_x[n] != ranks_y[n]:
            raise TensorError(f"shared mode {n} has ranks {ranks_x[n]} and {ranks_y[n]}", "shape", mode=n)

    x_mean = xa.mean(axis=0)
    y_mean = ya.mean(axis=0)
    xc = xa - x_mean
    yc = ya - y_mean
    x_norm = max(np.linalg.norm(xc.ravel()), 1e-300)
    y_norm = max(np.linalg.norm(yc.ravel()), 1e-300)

    fx = [leading_left_vectors(unfold_array(xc, n), r) for n, r in enumerate(ranks_x)]
    fy = [leading_left_vectors(unfold_array(yc, n), r) for n, r in enumerate(ranks_y)]
    for n in shared:
        fx[n] = fy[n] = leading_left_vectors(np.hstack([unfold_array(xc, n), unfold_array(yc, n)]), ranks_x[n])

    def errors():
        gx = as_array(core_project(xc, fx))
        gy = as_array(core_project(yc, fy))
        ex = float(np.linalg.norm((xc - _reconstruct(gx, fx)).ravel()))
        ey = float(np.linalg.norm((yc - _reconstruct(gy, fy)).ravel()))
        return gx, gy, ex, ey

    gx, gy, ex, ey = errors()
    trace_x, trace_y, trace_total = [ex / x_norm], [ey / y_norm], [ex ** 2 + ey ** 2]
    sweeps = 0
    while sweeps < max_iters and trace_total[-1] > 0:
        sweeps += 1
        for n in range(max(xa.ndim, ya.ndim)):
            if n in shared:
                joint = np.hstack([unfold_array(_project_except(xc, fx, n), n),
                                   unfold_array(_project_except(yc, fy, n), n)])
                fx[n] = fy[n] = leading_left_vectors(joint, ranks_x[n])
                continue
            if n < xa.ndim:
                fx[n] = leading_left_vectors(unfold_array(_project_except(xc, fx, n), n), ranks_x[n])
            if n < ya.ndim:
                fy[n] = leading_left_vectors(unfold_array(_project_except(yc, fy, n), n), ranks_y[n])
        gx, gy, ex, ey = errors()
        trace_x.append(ex / x_norm)
        trace_y.append(ey / y_norm)
        trace_total.append(ex ** 2 + ey ** 2)
        logger.debug(f"tensor_pls sweep {sweeps}: x fit {trace_x[-1]:.12e}, y fit {trace_y[-1]:.12e}")
        previous = trace_total[-2]
        if abs(previous - trace_total[-1]) / max(previous, 1e-300) < tol:
            break

    linkage = pseudo_inverse(unfold_array(gx, 0)) @ unfold_array(gy, 0)
    x_model = TuckerModel(core=DenseTensor(gx), factors=fx, fit_error=trace_x[-1], trace=trace_x,
                          algorithm="tensor-pls")
    y_model = TuckerModel(core=DenseTensor(gy), factors=fy, fit_error=trace_y[-1], trace=trace_y,
                          algorithm="tensor-pls")
    energy = {"x": _block_diagonal_energy(gx, ranks_x[0]), "y": _block_diagonal_energy(gy, ranks_y[0])}
    logger.info(f"tensor_pls_fit finished after {sweeps} sweeps: x fit {trace_x[-1]:.6e}, y fit {trace_y[-1]:.6e}")
    return TensorPLSModel(x_model=x_model, y_model=y_model, shared_modes=shared, x_mean=x_mean, y_mean=y_mean,
                          linkage=linkage, trace_x=trace_x, trace_y=trace_y, trace_total=trace_total,
                          block_diagonal_energy=energy)


def tensor_pls_predict(m: TensorPLSModel, x_new: TensorLike) -> DenseTensor:
    """
    Predict a response tensor for new samples along mode 0.

    x_new is centred, projected on every non-sample x factor, mapped through the
    linkage on its mode-0 unfolding and rebuilt with the y factors of modes >= 1.
    """
    a = as_array(x_new)
    if a.shape[1:] != m.x_mean.shape:
        raise TensorError(f"new predictors need dims (*, {', '.join(map(str, m.x_mean.shape))}), got {a.shape}",
                          "shape")
    latent = a - m.x_mean
    for k in range(1, a.ndim):
        latent = mode_product_array(latent, m.x_model.factors[k].T, k)
    y_core_dims = [a.shape[0]] + list(m.y_model.core.dims[1:])
    mapped = fold_array(unfold_array(latent, 0) @ m.linkage, 0, y_core_dims)
    for k in range(1, mapped.ndim):
        mapped = mode_product_array(mapped, m.y_model.factors[k], k)
    return DenseTensor(mapped + m.y_mean)
