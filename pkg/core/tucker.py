"""
Tucker-N, Tucker-1, CP, penalized Tucker and block-oriented decompositions.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from core.factor2d import fix_signs, nmf_hals, smooth_column_solve, soft_threshold
from core.tensor_core import (
    DenseTensor,
    TensorLike,
    as_array,
    check_mode,
    has_orthonormal_columns,
    khatri_rao,
    pseudo_inverse,
    tensor_from_factors,
    fold_array,
    mode_product_array,
    unfold_array,
)
from core.types import BlockModel, CPModel, TensorError, TuckerModel
from data_model.run_config_models import ConstraintKind, ConstraintSpec

logger = logging.getLogger(__name__)

_TINY = 1e-300
_CONDITION_LIMIT = 1e12
_COLLINEARITY_LIMIT = 0.999


def check_ranks(dims: Sequence[int], ranks: Sequence[int]) -> List[int]:
    """Validate one rank per mode with 1 <= ranks[n] <= dims[n]."""
    ranks = list(ranks)
    if len(ranks) != len(dims):
        raise TensorError(f"expected {len(dims)} ranks, got {len(ranks)}", "invalid-rank")
    for n, (r, d) in enumerate(zip(ranks, dims)):
        if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or not 1 <= r <= d:
            raise TensorError(f"rank {r} for mode {n} must lie in [1, {d}]", "invalid-rank", mode=n)
    return [int(r) for r in ranks]


def _relative_change(previous: float, current: float) -> float:
    return abs(previous - current) / max(abs(previous), _TINY)


def leading_left_vectors(m: np.ndarray, r: int) -> np.ndarray:
    """Leading r left singular vectors, each column's largest-magnitude entry positive."""
    u, _, _ = np.linalg.svd(m, full_matrices=r > min(m.shape))
    basis = u[:, :r]
    signs = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(r)])
    return basis * np.where(signs == 0, 1.0, signs)


def _fit(a: np.ndarray, reconstruction: np.ndarray) -> float:
    error = np.linalg.norm((a - reconstruction).ravel())
    norm = np.linalg.norm(a.ravel())
    return float(error / norm) if norm > 0 else float(error)


def _project_all_but(a: np.ndarray, factors: List[np.ndarray], skip: int) -> np.ndarray:
    for k, u in enumerate(factors):
        if k != skip:
            a = mode_product_array(a, u.T, k)
    return a


def _transpose_core(a: np.ndarray, factors: List[np.ndarray]) -> np.ndarray:
    for k, u in enumerate(factors):
        a = mode_product_array(a, u.T, k)
    return a


def tucker_reconstruct(m: TuckerModel) -> DenseTensor:
    return DenseTensor(tensor_from_factors(m.core, m.factors))


def fit_error(t: TensorLike, m: TuckerModel) -> float:
    """Relative Frobenius error ||t - reconstruct(m)|| / ||t||; absolute error for a zero t."""
    a = as_array(t)
    reconstruction = tensor_from_factors(m.core, m.factors)
    if reconstruction.shape != a.shape:
        raise TensorError(f"model reconstructs dims {reconstruction.shape}, tensor has {a.shape}", "shape")
    return _fit(a, reconstruction)


def hosvd(t: TensorLike, ranks: Sequence[int]) -> TuckerModel:
    """
    Higher-order SVD.

    Args:
        t: Tensor to decompose
        ranks: Per-mode ranks, 1 <= ranks[n] <= dims[n]

    Returns:
        TuckerModel with orthonormal factors and core t x_n factors[n]^T

    Raises:
        TensorError: invalid-rank when a rank is out of range
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    factors = [leading_left_vectors(unfold_array(a, n), r) for n, r in enumerate(ranks)]
    core = _transpose_core(a, factors)
    error = _fit(a, tensor_from_factors(core, factors))
    return TuckerModel(core=DenseTensor(core), factors=factors, fit_error=error, trace=[error], algorithm="hosvd")


def hooi(t: TensorLike, ranks: Sequence[int], max_iters: int = 200, tol: float = 1e-8,
         fixed_factors: Optional[Dict[int, np.ndarray]] = None) -> TuckerModel:
    """
    Higher-order orthogonal iteration starting from the HOSVD.

    Args:
        t: Tensor to decompose
        ranks: Per-mode ranks
        max_iters: Sweep cap
        tol: Relative fit-error change that stops the sweeps
        fixed_factors: Mode -> orthonormal factor held constant

    Returns:
        TuckerModel whose trace holds the fit error before and after every sweep
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    fixed = {}
    for mode, u in (fixed_factors or {}).items():
        mode = check_mode(mode, a.ndim)
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (a.shape[mode], ranks[mode]) or not has_orthonormal_columns(u):
            raise TensorError(f"fixed factor for mode {mode} must be an orthonormal "
                              f"{a.shape[mode]}x{ranks[mode]} matrix", "invalid-argument", mode=mode)
        fixed[mode] = u

    factors = [fixed[n] if n in fixed else leading_left_vectors(unfold_array(a, n), r)
               for n, r in enumerate(ranks)]
    core = _transpose_core(a, factors)
    error = _fit(a, tensor_from_factors(core, factors))
    trace = [error]
    free_modes = [n for n in range(a.ndim) if n not in fixed]
    sweeps = 0
    while sweeps < max_iters and error > 0 and free_modes:
        sweeps += 1
        for n in free_modes:
            factors[n] = leading_left_vectors(unfold_array(_project_all_but(a, factors, n), n), ranks[n])
        core = _transpose_core(a, factors)
        previous, error = error, _fit(a, tensor_from_factors(core, factors))
        trace.append(error)
        logger.debug(f"hooi sweep {sweeps}: fit error {error:.12e}")
        if _relative_change(previous, error) < tol:
            break
    logger.info(f"hooi finished after {sweeps} sweeps with fit error {error:.6e}")
    return TuckerModel(core=DenseTensor(core), factors=factors, fit_error=error, trace=trace, algorithm="hooi")


def core_project(t: TensorLike, factors: Sequence[np.ndarray]) -> DenseTensor:
    """Core recovery t x_1 pinv(U1) ... x_N pinv(UN)."""
    a = as_array(t)
    if len(factors) != a.ndim:
        raise TensorError(f"expected {a.ndim} factors, got {len(factors)}", "shape")
    for n, u in enumerate(factors):
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2 or u.shape[0] != a.shape[n]:
            raise TensorError(f"factor {n} has shape {u.shape}, needs {a.shape[n]} rows", "shape", mode=n)
        a = mode_product_array(a, pseudo_inverse(u), n)
    return DenseTensor(a)


def tucker1(t: TensorLike, mode: int, j: int) -> Tuple[DenseTensor, np.ndarray]:
    """
    Tucker-1 compression in one mode.

    Returns:
        (core, factor) with factor the leading j left singular vectors of the
        mode unfolding and core = t x_mode factor^T
    """
    a = as_array(t)
    mode = check_mode(mode, a.ndim)
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or not 1 <= j <= a.shape[mode]:
        raise TensorError(f"rank {j} for mode {mode} must lie in [1, {a.shape[mode]}]", "invalid-rank", mode=mode)
    factor = leading_left_vectors(unfold_array(a, mode), int(j))
    return DenseTensor(mode_product_array(a, factor.T, mode)), factor


def tucker1_models(t: TensorLike, ranks: Sequence[int]) -> List[Tuple[DenseTensor, np.ndarray]]:
    """All N Tucker-1 compressions."""
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    return [tucker1(a, n, r) for n, r in enumerate(ranks)]


def cp_reconstruct(m: CPModel) -> DenseTensor:
    dims = [f.shape[0] for f in m.factors]
    if len(m.factors) == 1:
        return DenseTensor(m.factors[0] @ m.weights)
    unfolded = (m.factors[0] * m.weights) @ khatri_rao(m.factors[1:]).T
    return DenseTensor(fold_array(unfolded, 0, dims))


def _cp_fit(a: np.ndarray, factors: List[np.ndarray]) -> float:
    unfolded = factors[0] @ khatri_rao(factors[1:]).T
    error = np.linalg.norm(unfold_array(a, 0) - unfolded)
    norm = np.linalg.norm(a.ravel())
    return float(error / norm) if norm > 0 else float(error)


def _cp_mode_update(a: np.ndarray, factors: List[np.ndarray], n: int) -> Tuple[np.ndarray, bool]:
    r = factors[0].shape[1]
    others = [f for k, f in enumerate(factors) if k != n]
    gram = np.ones((r, r))
    for f in others:
        gram *= f.T @ f
    mttkrp = unfold_array(a, n) @ khatri_rao(others)
    regularized = False
    if np.linalg.cond(gram) > _CONDITION_LIMIT:
        gram = gram + np.eye(r) * max(np.trace(gram) / r, 1.0) * 1e-10
        regularized = True
    try:
        update = solve(gram, mttkrp.T, assume_a="pos").T
    except LinAlgError:
        update = mttkrp @ pseudo_inverse(gram)
        regularized = True
    return update, regularized


def _cp_run(a: np.ndarray, r: int, rng: np.random.Generator, max_iters: int, tol: float):
    factors = [rng.standard_normal((d, r)) for d in a.shape]
    error = _cp_fit(a, factors)
    trace = [error]
    regularized = False
    sweeps = 0
    while sweeps < max_iters and error > 0:
        sweeps += 1
        for n in range(a.ndim):
            factors[n], flagged = _cp_mode_update(a, factors, n)
            regularized = regularized or flagged
        previous, error = error, _cp_fit(a, factors)
        trace.append(error)
        if _relative_change(previous, error) < tol:
            break
    return factors, error, trace, regularized


def _normalize_cp(factors: List[np.ndarray]) -> Tuple[np.ndarray, List[np.ndarray]]:
    r = factors[0].shape[1]
    weights = np.ones(r)
    unit = []
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        weights *= norms
        unit.append(f / np.where(norms > 0, norms, 1.0))
    order = np.argsort(-weights, kind="stable")
    weights = weights[order]
    unit = [f[:, order] for f in unit]
    for n in range(len(unit) - 1):
        unit[-1], unit[n] = fix_signs(unit[-1], unit[n])
    return weights, unit


def cp_collinearity(factors: List[np.ndarray]) -> float:
    """Largest product over modes of absolute cosines between two distinct components."""
    r = factors[0].shape[1]
    if r < 2:
        return 0.0
    congruence = np.ones((r, r))
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        unit = f / np.where(norms > 0, norms, 1.0)
        congruence *= np.abs(unit.T @ unit)
    np.fill_diagonal(congruence, 0.0)
    return float(congruence.max())


def cp_als(t: TensorLike, r: int, max_iters: int = 200, tol: float = 1e-8, seed: int = 0,
           n_restarts: int = 3) -> CPModel:
    """
    CP decomposition by alternating least squares with Khatri-Rao normal equations.

    Args:
        t: Tensor to decompose
        r: Number of rank-one terms
        max_iters: Sweep cap per restart
        tol: Relative fit-error change that stops the sweeps
        seed: Seed of the random initializations
        n_restarts: Random starts; the best final fit wins, ties go to the first

    Returns:
        CPModel with unit-norm factor columns and weights sorted descending
    """
    a = as_array(t)
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 1:
        raise TensorError(f"CP rank must be a positive integer, got {r}", "invalid-rank")
    if a.ndim < 2:
        raise TensorError("CP decomposition needs a tensor of order at least 2", "invalid-argument")
    rng = np.random.default_rng(seed)
    best = None
    for restart in range(max(int(n_restarts), 1)):
        run = _cp_run(a, int(r), rng, max_iters, tol)
        logger.debug(f"cp_als restart {restart}: fit error {run[1]:.6e} after {len(run[2]) - 1} sweeps")
        if best is None or run[1] < best[1]:
            best = run
    factors, error, trace, regularized = best

    warnings = []
    if regularized:
        warnings.append("regularized-normal-equations")
        logger.warning("cp_als regularized rank-deficient normal equations")
    weights, unit = _normalize_cp(factors)
    if cp_collinearity(unit) > _COLLINEARITY_LIMIT:
        warnings.append("degenerate-cp")
        logger.warning("cp_als components are nearly collinear in every mode (possible degeneracy)")
    logger.info(f"cp_als finished with fit error {error:.6e}")
    return CPModel(weights=weights, factors=unit, fit_error=error, trace=trace, seed=seed, warnings=warnings)


def cp_to_tucker(m: CPModel) -> TuckerModel:
    """Tucker model with a super-diagonal R x .. x R core holding the CP weights."""
    r = m.rank
    core = np.zeros((r,) * len(m.factors))
    for k in range(r):
        core[(k,) * len(m.factors)] = m.weights[k]
    return TuckerModel(core=DenseTensor(core), factors=[f.copy() for f in m.factors],
                       fit_error=m.fit_error, trace=list(m.trace), algorithm="cp", seed=m.seed,
                       warnings=list(m.warnings))


def _penalty(kind: ConstraintKind, alpha: float, u: np.ndarray) -> float:
    if kind == ConstraintKind.SPARSE:
        return alpha * float(np.sum(np.abs(u)))
    if kind == ConstraintKind.SMOOTH:
        return alpha * float(np.sum(np.diff(u, n=2, axis=0) ** 2)) if u.shape[0] >= 3 else 0.0
    return 0.0


def _penalized_update(kind: ConstraintKind, alpha: float, u: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Minimize tr(U Q U^T) - 2 tr(U^T P) + alpha * C(U) over U for one mode."""
    if kind == ConstraintKind.UNCONSTRAINED:
        return p @ pseudo_inverse(q)
    if kind == ConstraintKind.ORTHOGONAL:
        left, _, right = np.linalg.svd(p, full_matrices=False)
        return left @ right
    u = u.copy()
    for k in range(u.shape[1]):
        if q[k, k] <= _TINY:
            continue
        rest = p[:, k] - u @ q[:, k] + u[:, k] * q[k, k]
        if kind == ConstraintKind.NONNEGATIVE:
            u[:, k] = np.maximum(rest / q[k, k], 0.0)
        elif kind == ConstraintKind.SPARSE:
            u[:, k] = soft_threshold(rest, alpha / 2.0) / q[k, k]
        else:
            u[:, k] = smooth_column_solve(rest, q[k, k], alpha)
    return u


def penalized_tucker(t: TensorLike, ranks: Sequence[int], specs: Sequence[ConstraintSpec],
                     alphas: Sequence[float], max_iters: int = 200, tol: float = 1e-8) -> TuckerModel:
    """
    Penalized Tucker fit ||t - G x {U}||^2 + sum_n alpha_n C_n(U_n) by block-coordinate descent.

    Each sweep updates every factor against its penalized least-squares
    subproblem (pseudo-inverse solve, orthogonal Procrustes, nonnegative
    column updates, soft-thresholding or a smoothing solve) and then the core
    by core_project.

    Raises:
        TensorError: unsupported for the independent kind; use mwbss_refine instead
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    if len(specs) != a.ndim or len(alphas) != a.ndim:
        raise TensorError(f"expected {a.ndim} constraint specs and penalty weights", "invalid-argument")
    kinds = [ConstraintKind(spec.kind) for spec in specs]
    for n, (kind, alpha) in enumerate(zip(kinds, alphas)):
        if kind == ConstraintKind.INDEPENDENT:
            raise TensorError("independence constraints are not supported by penalized_tucker; "
                              "use the two-stage mwbss_refine pipeline", "unsupported", mode=n)
        if alpha < 0:
            raise TensorError(f"penalty weight {alpha} for mode {n} must be nonnegative", "invalid-argument", mode=n)

    start = hooi(a, ranks, max_iters=max_iters, tol=tol)
    factors = [u.copy() for u in start.factors]
    for n, kind in enumerate(kinds):
        if kind != ConstraintKind.NONNEGATIVE:
            continue
        if np.all(a >= 0):
            factors[n] = nmf_hals(unfold_array(a, n).T, ranks[n],
                                  ConstraintSpec(kind=kind, max_iters=specs[n].max_iters, tol=specs[n].tol)).b
        else:
            factors[n] = np.abs(factors[n])
    core = as_array(core_project(a, factors))

    def objective() -> float:
        residual = np.linalg.norm((a - tensor_from_factors(core, factors)).ravel()) ** 2
        return float(residual + sum(_penalty(k, al, u) for k, al, u in zip(kinds, alphas, factors)))

    value = objective()
    trace = [value]
    sweeps = 0
    while sweeps < max_iters:
        sweeps += 1
        for n, (kind, alpha) in enumerate(zip(kinds, alphas)):
            partial = core
            for k, u in enumerate(factors):
                if k != n:
                    partial = mode_product_array(partial, u, k)
            m = unfold_array(partial, n)
            p = unfold_array(a, n) @ m.T
            q = m @ m.T
            factors[n] = _penalized_update(kind, alpha, factors[n], p, q)
        core = as_array(core_project(a, factors))
        previous, value = value, objective()
        trace.append(value)
        logger.debug(f"penalized_tucker sweep {sweeps}: objective {value:.12e}")
        if value == 0 or _relative_change(previous, value) < tol:
            break
    error = _fit(a, tensor_from_factors(core, factors))
    logger.info(f"penalized_tucker finished after {sweeps} sweeps with fit error {error:.6e}")
    return TuckerModel(core=DenseTensor(core), factors=factors, fit_error=error, trace=trace, algorithm="penalized")


def _average(blocks: List[np.ndarray]) -> np.ndarray:
    return sum(blocks) / len(blocks)


def bod_decompose(t: TensorLike, ranks: Sequence[int], max_iters: int = 200, tol: float = 1e-8) -> BlockModel:
    """
    Block-oriented decomposition t ~ (1/N) sum_n G_n x_n U_n.

    Each block is refit in turn as the best mode-n Tucker-1 approximation of
    N * t minus the other blocks, which minimizes the residual exactly.

    Returns:
        BlockModel with (core, factor, mode) blocks and the relative residual trace
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    order = a.ndim
    norm = np.linalg.norm(a.ravel())

    def residual_of(blocks):
        value = np.linalg.norm((a - _average(blocks)).ravel())
        return float(value / norm) if norm > 0 else float(value)

    parts = []
    for n, r in enumerate(ranks):
        core, factor = tucker1(a, n, r)
        parts.append((as_array(core), factor))
    blocks = [mode_product_array(core, factor, n) for n, (core, factor) in enumerate(parts)]
    residual = residual_of(blocks)
    trace = [residual]
    sweeps = 0
    while sweeps < max_iters and residual > 0:
        sweeps += 1
        for n, r in enumerate(ranks):
            target = order * a - (sum(blocks) - blocks[n])
            core, factor = tucker1(target, n, r)
            parts[n] = (as_array(core), factor)
            blocks[n] = mode_product_array(parts[n][0], factor, n)
        previous, residual = residual, residual_of(blocks)
        trace.append(residual)
        if _relative_change(previous, residual) < tol:
            break
    logger.info(f"bod_decompose finished after {sweeps} sweeps with relative residual {residual:.6e}")
    return BlockModel(blocks=[(DenseTensor(core), factor, n) for n, (core, factor) in enumerate(parts)],
                      residual=residual, trace=trace)


def block_reconstruct(m: BlockModel) -> DenseTensor:
    """(1/N) sum_n core_n x_n factor_n."""
    blocks = [mode_product_array(as_array(core), factor, mode) for core, factor, mode in m.blocks]
    return DenseTensor(_average(blocks))
