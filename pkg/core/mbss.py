"""
Multiway blind source separation pipelines.

Components live in the mode dimension: for mode n the engine factorizes
unfold(t, n).T ~ A_n B_n^T and B_n becomes the mode factor U_n.
"""

import logging
from typing import List, Sequence

import numpy as np
from joblib import Parallel, delayed

from core.factor2d import bss_factor, fix_signs
from core.tensor_core import DenseTensor, TensorLike, as_array, mode_product_array, pseudo_inverse, unfold_array
from core.tucker import check_ranks, core_project, fit_error, hooi
from core.types import FactorPair, MwbssResult, TensorError, TuckerModel
from data_model.run_config_models import ConstraintKind, ConstraintSpec

logger = logging.getLogger(__name__)


def _check_specs(order: int, specs: Sequence[ConstraintSpec]) -> List[ConstraintSpec]:
    specs = list(specs)
    if len(specs) != order:
        raise TensorError(f"expected one constraint spec per mode ({order}), got {len(specs)}", "invalid-argument")
    return specs


def factor_from_unfolding(unfolding: np.ndarray, rank: int, spec: ConstraintSpec,
                          reduction_factor: int = 4) -> FactorPair:
    """
    Factorize unfolding.T so that the returned b (I_n x rank) holds the mode components.

    Long unfoldings are first reduced to reduction_factor * rank rows of the
    transposed matrix by a truncated SVD; the nonnegative engine sees the raw data.
    """
    samples = unfolding.T
    keep = reduction_factor * rank
    if ConstraintKind(spec.kind) != ConstraintKind.NONNEGATIVE and samples.shape[0] > keep:
        _, s, vt = np.linalg.svd(samples, full_matrices=False)
        samples = s[:keep, None] * vt[:keep]
    return bss_factor(samples, rank, spec)


def estimate_mode_factor(t: TensorLike, mode: int, rank: int, spec: ConstraintSpec,
                         reduction_factor: int = 4) -> FactorPair:
    """Constrained factor of one mode; engine errors are re-raised with the mode attached."""
    try:
        return factor_from_unfolding(unfold_array(as_array(t), mode), rank, spec, reduction_factor)
    except TensorError as e:
        raise e.with_mode(mode) from e


def _tag(mode: int, warnings: Sequence[str]) -> List[str]:
    return [f"mode {mode}: {w}" for w in warnings]


def mwbss_unfold(t: TensorLike, ranks: Sequence[int], specs: Sequence[ConstraintSpec],
                 reduction_factor: int = 4, max_workers: int = 1) -> MwbssResult:
    """
    Unfolding-based multiway BSS.

    Args:
        t: Data tensor
        ranks: Per-mode ranks
        specs: Per-mode constraint specs
        reduction_factor: Rows kept before each engine, as a multiple of the rank
        max_workers: Per-mode engines run concurrently when greater than 1

    Returns:
        MwbssResult whose core is recovered by core_project
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    specs = _check_specs(a.ndim, specs)
    jobs = [(a, n, ranks[n], specs[n], reduction_factor) for n in range(a.ndim)]
    if max_workers > 1:
        pairs = Parallel(n_jobs=max_workers, prefer="threads")(delayed(estimate_mode_factor)(*job) for job in jobs)
    else:
        pairs = [estimate_mode_factor(*job) for job in jobs]

    factors = [pair.b for pair in pairs]
    core = core_project(a, factors)
    model = TuckerModel(core=core, factors=factors, fit_error=0.0, algorithm="mwbss-unfold")
    model.fit_error = fit_error(a, model)
    model.trace = [model.fit_error]
    warnings = [w for n, pair in enumerate(pairs) for w in _tag(n, pair.warnings)]
    model.warnings = list(warnings)
    for n, pair in enumerate(pairs):
        logger.info(f"mode {n} ({ConstraintKind(specs[n].kind).value}): "
                    f"{pair.iterations_run} iterations, objective {pair.final_objective:.6e}")
    return MwbssResult(model=model, per_mode_constraint=specs, diagnostics=pairs,
                       pipeline="unfold", warnings=warnings)


def _refine_mode(factor: np.ndarray, spec: ConstraintSpec, mode: int):
    """
    Square BSS of one stage-1 factor; returns (pair, components, mixing, warnings).

    A nonnegative spec on a factor with negative entries refines the sign-fixed
    factor clipped at zero, which can raise the fit error well above stage 1.
    """
    rank = factor.shape[1]
    warnings = []
    samples = factor.T
    kind = ConstraintKind(spec.kind)
    if kind == ConstraintKind.NONNEGATIVE and np.any(samples < 0):
        _, signed = fix_signs(np.eye(rank), factor)
        samples = np.maximum(signed, 0.0).T
        warnings.append("clipped-negative-factor")
        logger.warning(f"mode {mode}: negative stage-1 factor entries clipped before nonnegative refinement; "
                       "the refined fit error can be much higher than the stage-1 fit")
    try:
        pair = bss_factor(samples, rank, spec)
    except TensorError as e:
        if e.error_type != "rank-deficient":
            raise e.with_mode(mode) from e
        warnings.append("rank-deficient-fallback")
        logger.warning(f"mode {mode}: {e.message}; falling back to the orthogonal refinement")
        pair = bss_factor(samples, rank, ConstraintSpec(kind=ConstraintKind.ORTHOGONAL))
    components = pair.b
    mixing = (pseudo_inverse(components) @ factor).T
    return pair, components, mixing, warnings


def mwbss_refine(t: TensorLike, ranks: Sequence[int], specs: Sequence[ConstraintSpec],
                 max_iters: int = 200, tol: float = 1e-8) -> MwbssResult:
    """
    Two-stage multiway BSS: HOOI, then a square constrained factorization of every factor.

    Stage 2 writes U_n ~ B_n A_n^T with A_n fitted by least squares, returns
    B_n as the mode factor and folds A_n^T into the core. The refined fit
    error never exceeds the stage-1 error by more than
    ||G|| * sum_n ||U_n - B_n A_n^T|| / ||t||.
    """
    a = as_array(t)
    ranks = check_ranks(a.shape, ranks)
    specs = _check_specs(a.ndim, specs)
    stage1 = hooi(a, ranks, max_iters=max_iters, tol=tol)
    core = as_array(stage1.core)
    factors = []
    pairs = []
    residuals = []
    warnings = [f"stage 1: {w}" for w in stage1.warnings]
    for n, (factor, spec) in enumerate(zip(stage1.factors, specs)):
        pair, components, mixing, mode_warnings = _refine_mode(factor, spec, n)
        pair.warnings = list(pair.warnings) + mode_warnings
        pairs.append(pair)
        factors.append(components)
        residuals.append(float(np.linalg.norm(factor - components @ mixing.T)))
        core = mode_product_array(core, mixing.T, n)
        warnings.extend(_tag(n, pair.warnings))

    model = TuckerModel(core=DenseTensor(core), factors=factors, fit_error=0.0, algorithm="mwbss-refine")
    model.fit_error = fit_error(a, model)
    model.trace = list(stage1.trace) + [model.fit_error]
    model.warnings = list(warnings)

    norm = np.linalg.norm(a.ravel())
    if norm > 0:
        bound = stage1.fit_error + np.linalg.norm(as_array(stage1.core).ravel()) * sum(residuals) / norm
        if model.fit_error > bound * (1 + 1e-9) + 1e-12:
            logger.warning(f"refined fit error {model.fit_error:.6e} exceeds the stage-2 bound {bound:.6e}")
    logger.info(f"mwbss_refine: stage-1 fit {stage1.fit_error:.6e}, refined fit {model.fit_error:.6e}")
    return MwbssResult(model=model, per_mode_constraint=specs, diagnostics=pairs, pipeline="refine",
                       warnings=warnings, stage1_fit_error=stage1.fit_error, stage2_residuals=residuals)
