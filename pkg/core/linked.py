"""
Linked multiway BSS across subjects.

Every subject s is modelled as X_s ~ G_s x_1 U_(1,s) ... x_N U_(N,s) where the
leading R_n columns of U_(n,s) form a basis shared by all subjects and the
remaining columns are individual.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from core.mbss import estimate_mode_factor, factor_from_unfolding
from core.metrics import column_correlations, max_cross_correlation
from core.tensor_core import DenseTensor, TensorLike, as_array, mode_product_array, unfold_array
from core.tucker import check_ranks, core_project, fit_error, hosvd, leading_left_vectors
from core.types import AveragedBlockModel, CommonComponents, LinkedModel, TensorError, TuckerModel
from data_model.run_config_models import ConstraintSpec

logger = logging.getLogger(__name__)


def _check_subjects(xs: Sequence[TensorLike]) -> List[np.ndarray]:
    arrays = [as_array(x) for x in xs]
    if not arrays:
        raise TensorError("at least one subject tensor is required", "invalid-argument")
    for s, a in enumerate(arrays):
        if a.shape != arrays[0].shape:
            raise TensorError(f"subject {s} has dims {a.shape}, subject 0 has {arrays[0].shape}", "shape")
    return arrays


def _unit(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=0)
    return m / np.where(norms > 0, norms, 1.0)


def identify_common(factor_lists: Sequence[np.ndarray], threshold: float = 0.9) -> CommonComponents:
    """
    Greedy clustering of one mode's factor columns across subjects.

    A cluster takes one column from every subject; it is accepted when every
    pairwise absolute Pearson correlation reaches the threshold. Clusters come
    out ordered by mean within-cluster correlation (descending), ties broken by
    the first subject's column index.

    Args:
        factor_lists: One factor matrix per subject, all with the same rows
        threshold: Minimum pairwise absolute correlation, in (0, 1]

    Returns:
        CommonComponents; count is 0 when no cluster qualifies
    """
    mats = [np.asarray(m, dtype=np.float64) for m in factor_lists]
    if not mats:
        raise TensorError("identify_common needs at least one factor matrix", "invalid-argument")
    if any(m.ndim != 2 or m.shape[0] != mats[0].shape[0] for m in mats):
        raise TensorError("factor matrices must share their row count", "shape")
    if not 0 < threshold <= 1:
        raise TensorError(f"threshold must lie in (0, 1], got {threshold}", "invalid-argument")

    subjects = len(mats)
    corr = {(s, q): np.abs(column_correlations(mats[s], mats[q]))
            for s in range(subjects) for q in range(s + 1, subjects)}
    used = [set() for _ in range(subjects)]
    clusters: List[Tuple[float, int, List[int]]] = []
    while True:
        best: Optional[Tuple[float, int, List[int]]] = None
        for i in range(mats[0].shape[1]):
            if i in used[0]:
                continue
            members = [i]
            for q in range(1, subjects):
                free = [c for c in range(mats[q].shape[1]) if c not in used[q]]
                if not free:
                    break
                members.append(max(free, key=lambda c: (corr[(0, q)][i, c], -c)))
            if len(members) != subjects:
                continue
            pairwise = [corr[(s, q)][members[s], members[q]]
                        for s in range(subjects) for q in range(s + 1, subjects)]
            if pairwise and min(pairwise) < threshold:
                continue
            score = float(np.mean(pairwise)) if pairwise else 1.0
            if best is None or score > best[0]:
                best = (score, i, members)
        if best is None:
            break
        clusters.append(best)
        for s, c in enumerate(best[2]):
            used[s].add(c)

    clusters.sort(key=lambda cluster: (-cluster[0], cluster[1]))
    rows = mats[0].shape[0]
    basis = np.zeros((rows, len(clusters)))
    for k, (_, _, members) in enumerate(clusters):
        reference = _unit(mats[0][:, [members[0]]])[:, 0]
        total = np.zeros(rows)
        for s, c in enumerate(members):
            column = _unit(mats[s][:, [c]])[:, 0]
            total += column if column @ reference >= 0 else -column
        column = total / max(np.linalg.norm(total), 1e-300)
        pivot = column[np.argmax(np.abs(column))]
        basis[:, k] = column if pivot >= 0 else -column
    indices = [np.array([members[s] for _, _, members in clusters], dtype=int) for s in range(subjects)]
    correlations = np.array([score for score, _, _ in clusters])
    return CommonComponents(indices=indices, basis=basis, correlations=correlations)


def _per_subject_factors(arrays: List[np.ndarray], mode: int, rank: int, spec: ConstraintSpec,
                         reduction_factor: int, max_workers: int) -> List[np.ndarray]:
    jobs = [(a, mode, rank, spec, reduction_factor) for a in arrays]
    if max_workers > 1:
        pairs = Parallel(n_jobs=max_workers, prefer="threads")(delayed(estimate_mode_factor)(*job) for job in jobs)
        return [pair.b for pair in pairs]
    return [estimate_mode_factor(*job).b for job in jobs]


def linked_decompose(xs: Sequence[TensorLike], ranks: Sequence[int], common_counts: Sequence[int],
                     specs: Sequence[ConstraintSpec], threshold: float = 0.9, reduction_factor: int = 4,
                     max_workers: int = 1) -> LinkedModel:
    """
    Joint decomposition of subject tensors with common and individual factor columns.

    Per mode n with R_n common columns out of J_n:
      - R_n = J_n: one factor estimated from the subjects' unfoldings placed side by side
        and referenced by every subject model
      - 0 < R_n < J_n: per-subject factors, partitioned by identify_common; every
        subject factor becomes [U_C | own remaining columns]
      - R_n = 0: independent per-subject factors

    Returns:
        LinkedModel with per-subject cores recovered by core_project
    """
    arrays = _check_subjects(xs)
    dims = arrays[0].shape
    ranks = check_ranks(dims, ranks)
    specs = list(specs)
    counts = [int(r) for r in common_counts]
    if len(specs) != len(dims):
        raise TensorError(f"expected one constraint spec per mode ({len(dims)}), got {len(specs)}",
                          "invalid-argument")
    if len(counts) != len(dims):
        raise TensorError(f"expected {len(dims)} common counts, got {len(counts)}", "invalid-rank")
    for n, (r, j) in enumerate(zip(counts, ranks)):
        if not 0 <= r <= j:
            raise TensorError(f"common count {r} for mode {n} must lie in [0, {j}]", "invalid-rank", mode=n)

    subjects = len(arrays)
    factors: List[List[np.ndarray]] = [[] for _ in range(subjects)]
    alignment: List[List[np.ndarray]] = [[] for _ in range(subjects)]
    common_bases: List[np.ndarray] = []
    common_correlations: List[np.ndarray] = []
    individual_max: List[float] = []
    warnings: List[str] = []

    for n in range(len(dims)):
        r, j, spec = counts[n], ranks[n], specs[n]
        if r == j:
            joint = np.hstack([unfold_array(a, n) for a in arrays])
            try:
                shared = factor_from_unfolding(joint, j, spec, reduction_factor).b
            except TensorError as e:
                raise e.with_mode(n) from e
            for s in range(subjects):
                factors[s].append(shared)
                alignment[s].append(np.arange(j))
            common_bases.append(shared)
            common_correlations.append(np.ones(j))
            individual_max.append(0.0)
            logger.info(f"mode {n}: {j} components shared by all {subjects} subjects")
            continue

        own = _per_subject_factors(arrays, n, j, spec, reduction_factor, max_workers)
        if r == 0:
            for s in range(subjects):
                factors[s].append(own[s])
                alignment[s].append(np.arange(j))
            common_bases.append(np.zeros((dims[n], 0)))
            common_correlations.append(np.zeros(0))
            individual_max.append(max_cross_correlation(own))
            continue

        common = identify_common(own, threshold)
        used = min(common.count, r)
        if used < r:
            message = f"mode {n}: found {common.count} common components, {r} requested"
            warnings.append(message)
            logger.warning(message)
        basis = common.basis[:, :used]
        individual = []
        for s in range(subjects):
            chosen = common.indices[s][:used]
            rest = np.array([c for c in range(j) if c not in set(chosen.tolist())], dtype=int)
            factors[s].append(np.hstack([basis, own[s][:, rest]]))
            alignment[s].append(np.concatenate([chosen, rest]))
            individual.append(own[s][:, rest])
        common_bases.append(basis)
        common_correlations.append(common.correlations[:used])
        individual_max.append(max_cross_correlation(individual))
        logger.info(f"mode {n}: {used} common components, mean correlations {np.round(common.correlations[:used], 4)}")

    models = []
    for s, a in enumerate(arrays):
        core = core_project(a, factors[s])
        model = TuckerModel(core=core, factors=factors[s], fit_error=0.0, algorithm="linked")
        model.fit_error = fit_error(a, model)
        model.trace = [model.fit_error]
        models.append(model)
    return LinkedModel(subject_models=models, common_counts=counts, common_bases=common_bases,
                       alignment=alignment, common_correlations=common_correlations,
                       individual_max_correlation=individual_max, warnings=warnings)


def _block_ranks(ranks, subjects: int) -> List[List[int]]:
    ranks = list(ranks)
    if ranks and all(isinstance(r, (int, np.integer)) and not isinstance(r, bool) for r in ranks):
        return [list(ranks)] * subjects
    if len(ranks) != subjects:
        raise TensorError(f"expected one rank list per subject ({subjects}), got {len(ranks)}", "invalid-rank")
    return [list(r) for r in ranks]


def btd_average(xs: Sequence[TensorLike], ranks, max_iters: int = 200, tol: float = 1e-8) -> AveragedBlockModel:
    """
    Fit the subject-averaged tensor by a sum of one Tucker block per subject.

    The 1/S of the average is absorbed into the cores. Blocks start from
    successive HOSVDs of the running residual; every sweep replaces each block's
    core by the projection of its target, applies one HOOI sweep, and recomputes
    the core. A single subject therefore reproduces hooi.

    Args:
        xs: Subject tensors sharing their dims
        ranks: One rank list for every block, or one rank list per subject
        max_iters: Sweep cap
        tol: Relative residual change that stops the sweeps
    """
    arrays = _check_subjects(xs)
    mean = sum(arrays) / len(arrays)
    block_ranks = [check_ranks(mean.shape, r) for r in _block_ranks(ranks, len(arrays))]
    norm = np.linalg.norm(mean.ravel())

    def reconstruct(core, factors):
        out = core
        for k, u in enumerate(factors):
            out = mode_product_array(out, u, k)
        return out

    def project(target, factors, skip=None):
        out = target
        for k, u in enumerate(factors):
            if k != skip:
                out = mode_product_array(out, u.T, k)
        return out

    def residual_of(parts):
        value = np.linalg.norm((mean - sum(parts)).ravel())
        return float(value / norm) if norm > 0 else float(value)

    blocks = []
    parts = []
    remainder = mean
    for r in block_ranks:
        start = hosvd(remainder, r)
        factors = [u.copy() for u in start.factors]
        core = as_array(start.core)
        blocks.append((core, factors))
        parts.append(reconstruct(core, factors))
        remainder = remainder - parts[-1]
    residual = residual_of(parts)
    trace = [residual]
    sweeps = 0
    while sweeps < max_iters and residual > 0:
        sweeps += 1
        for b, r in enumerate(block_ranks):
            target = mean - (sum(parts) - parts[b])
            _, factors = blocks[b]
            for n in range(mean.ndim):
                factors[n] = leading_left_vectors(unfold_array(project(target, factors, skip=n), n), r[n])
            core = project(target, factors)
            blocks[b] = (core, factors)
            parts[b] = reconstruct(core, factors)
        previous, residual = residual, residual_of(parts)
        trace.append(residual)
        logger.debug(f"btd_average sweep {sweeps}: relative residual {residual:.12e}")
        if abs(previous - residual) / max(abs(previous), 1e-300) < tol:
            break
    logger.info(f"btd_average finished after {sweeps} sweeps with relative residual {residual:.6e}")
    models = [TuckerModel(core=DenseTensor(core), factors=factors, fit_error=residual, trace=list(trace),
                          algorithm="btd-average") for core, factors in blocks]
    return AveragedBlockModel(blocks=models, residual=residual, trace=trace)
