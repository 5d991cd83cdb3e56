"""
One function per subcommand.

Every command takes a validated configuration model, writes its artifacts
under config.output and returns (exit_code, results).
"""

import logging
import os
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from core.features import classify_centroid, classify_knn, extract_train, project_test
from core.linked import btd_average, linked_decompose
from core.mbss import mwbss_refine, mwbss_unfold
from core.metrics import r_squared
from core.mpls import pls_fit, pls_predict, tensor_pls_fit, tensor_pls_predict
from core.synthetic import (
    class_corpus,
    coupled_tensor_pair,
    ica_mixtures,
    linked_subjects,
    planted_smooth,
    planted_sparse,
    pls_latent,
    random_cp,
    random_tucker,
)
from core.tensor_core import DenseTensor, as_array
from core.tucker import bod_decompose, check_ranks, cp_als, hooi, hosvd, penalized_tucker
from core.types import LabeledTensorSet, TensorError
from data_model.run_config_models import (
    DecomposeConfig,
    FeaturesConfig,
    LinkedConfig,
    MbssConfig,
    PlsConfig,
    SynthConfig,
)
from tensor_io.tensor_io import (
    load_pls_model,
    load_tensor_pls_model,
    read_corpus_manifest,
    read_tensor,
    save_averaged_block_model,
    save_block_model,
    save_cp_model,
    save_linked_model,
    save_pls_model,
    save_tensor_pls_model,
    save_tucker_model,
    write_corpus_manifest,
    write_manifest,
    write_tensor,
)
from utils.report_writer import classification_tables, trace_frame, write_csv, write_text_report

logger = logging.getLogger(__name__)

Results = Dict[str, Any]


def _expect_order(t: DenseTensor, order: int, what: str) -> None:
    if t.order != order:
        raise TensorError(f"{what} needs {order} modes, the input tensor has {t.order}", "invalid-rank")


def cmd_decompose(config: DecomposeConfig) -> Tuple[int, Results]:
    """Run hosvd, hooi, cp, penalized or bod on one tensor."""
    t = read_tensor(config.input)
    if config.algo != 'cp':
        check_ranks(t.dims, config.ranks)
    model_dir = os.path.join(config.output, "model")
    logger.info(f"decompose: {config.algo} on {config.input} with dims {t.dims}")

    warnings: List[str] = []
    if config.algo == 'hosvd':
        model = hosvd(t, config.ranks)
        save_tucker_model(model_dir, model)
        fit, trace = model.fit_error, model.trace
    elif config.algo == 'hooi':
        model = hooi(t, config.ranks, max_iters=config.max_iters, tol=config.tol)
        save_tucker_model(model_dir, model)
        fit, trace = model.fit_error, model.trace
    elif config.algo == 'penalized':
        model = penalized_tucker(t, config.ranks, config.penalized_specs(), config.penalized_alphas(),
                                 max_iters=config.max_iters, tol=config.tol)
        save_tucker_model(model_dir, model, extra={
            "constraints": [spec.kind.value for spec in config.penalized_specs()],
            "alphas": config.penalized_alphas(),
        })
        fit, trace = model.fit_error, model.trace
    elif config.algo == 'cp':
        model = cp_als(t, config.r, max_iters=config.max_iters, tol=config.tol, seed=config.seed,
                       n_restarts=config.n_restarts)
        save_cp_model(model_dir, model)
        fit, trace, warnings = model.fit_error, model.trace, model.warnings
    else:
        model = bod_decompose(t, config.ranks, max_iters=config.max_iters, tol=config.tol)
        save_block_model(model_dir, model)
        fit, trace = model.residual, model.trace
    warnings = list(warnings or getattr(model, "warnings", []))

    write_csv(os.path.join(config.output, "trace.csv"), trace_frame({"objective": trace}))
    results = {
        "command": "decompose",
        "algorithm": config.algo,
        "dims": list(t.dims),
        "ranks": list(config.ranks) if config.ranks else [config.r],
        "fit_error": fit,
        "iterations": max(len(trace) - 1, 0),
        "warnings": warnings,
        "output": config.output,
    }
    write_text_report(config.output, "decompose_report", results)
    return 0, results


def cmd_mbss(config: MbssConfig) -> Tuple[int, Results]:
    """Multiway BSS with per-mode constraints."""
    t = read_tensor(config.input)
    check_ranks(t.dims, config.ranks)
    specs = config.constraint_specs()
    if config.pipeline == 'unfold':
        result = mwbss_unfold(t, config.ranks, specs, reduction_factor=config.reduction_factor,
                              max_workers=config.max_workers)
    else:
        result = mwbss_refine(t, config.ranks, specs, max_iters=config.max_iters, tol=config.tol)
    kinds = [spec.kind.value for spec in specs]
    save_tucker_model(os.path.join(config.output, "model"), result.model,
                      extra={"pipeline": result.pipeline, "constraints": kinds})

    diagnostics = pd.DataFrame({
        "mode": range(len(specs)),
        "constraint": kinds,
        "rank": list(config.ranks),
        "iterations": [pair.iterations_run for pair in result.diagnostics],
        "objective": [pair.final_objective for pair in result.diagnostics],
        "warnings": [";".join(pair.warnings) for pair in result.diagnostics],
    })
    write_csv(os.path.join(config.output, "diagnostics.csv"), diagnostics)
    write_csv(os.path.join(config.output, "trace.csv"),
              trace_frame({f"mode_{n}": pair.objective_trace for n, pair in enumerate(result.diagnostics)}))
    results = {
        "command": "mbss",
        "pipeline": result.pipeline,
        "dims": list(t.dims),
        "ranks": list(config.ranks),
        "constraints": kinds,
        "fit_error": result.model.fit_error,
        "stage1_fit_error": result.stage1_fit_error,
        "modes": diagnostics.to_dict(orient="records"),
        "warnings": result.warnings,
        "output": config.output,
    }
    write_text_report(config.output, "mbss_report", results)
    return 0, results


def cmd_linked(config: LinkedConfig) -> Tuple[int, Results]:
    """Linked decomposition or averaged block model of several subject tensors."""
    xs = [read_tensor(path) for path in config.inputs]
    check_ranks(xs[0].dims, config.ranks)
    results: Results = {"command": "linked", "model": config.model, "subjects": len(xs),
                        "dims": list(xs[0].dims), "ranks": list(config.ranks), "output": config.output}
    if config.model == 'linked':
        model = linked_decompose(xs, config.ranks, config.common_counts, config.constraint_specs(),
                                 threshold=config.threshold)
        save_linked_model(os.path.join(config.output, "model"), model)
        results.update({
            "common_counts": model.common_counts,
            "subject_fit_errors": [m.fit_error for m in model.subject_models],
            "common_correlations": [np.round(c, 6).tolist() for c in model.common_correlations],
            "individual_max_correlation": model.individual_max_correlation,
            "warnings": model.warnings,
        })
    else:
        model = btd_average(xs, config.ranks, max_iters=config.max_iters, tol=config.tol)
        save_averaged_block_model(os.path.join(config.output, "model"), model)
        write_csv(os.path.join(config.output, "trace.csv"), trace_frame({"residual": model.trace}))
        results.update({"residual": model.residual, "iterations": len(model.trace) - 1, "warnings": []})
    write_text_report(config.output, "linked_report", results)
    return 0, results


def _split(data: LabeledTensorSet, fraction: float, seed: int) -> Tuple[LabeledTensorSet, LabeledTensorSet]:
    count = len(data.samples)
    n_test = min(max(int(round(count * fraction)), 1), count - 2)
    if n_test < 1:
        raise TensorError(f"cannot hold out a test split from {count} samples", "invalid-argument")
    order = np.random.default_rng(seed).permutation(count)
    test_ids, train_ids = sorted(order[:n_test]), sorted(order[n_test:])

    def pick(ids) -> LabeledTensorSet:
        return LabeledTensorSet(samples=[data.samples[i] for i in ids], labels=[data.labels[i] for i in ids])

    return pick(train_ids), pick(test_ids)


def cmd_features(config: FeaturesConfig) -> Tuple[int, Results]:
    """Feature extraction, test projection and classification report."""
    train = read_corpus_manifest(config.train_manifest)
    if config.test_manifest:
        test = read_corpus_manifest(config.test_manifest)
    else:
        train, test = _split(train, config.test_fraction, config.seed)
    check_ranks(train.dims, config.ranks)
    if test.dims != train.dims:
        raise TensorError(f"test samples have dims {test.dims}, training samples {train.dims}", "shape")
    if config.classifier in ('knn', 'both') and config.k > len(train.samples):
        raise TensorError(f"k={config.k} exceeds the {len(train.samples)} training samples", "invalid-argument")

    features = extract_train(train, config.ranks, max_iters=config.max_iters, tol=config.tol)
    for n, basis in enumerate(features.bases):
        write_tensor(os.path.join(config.output, f"basis_{n}.tnsr"), basis)
    test_features = [project_test(x, features.bases) for x in test.samples]

    predictions = {}
    if config.classifier in ('knn', 'both'):
        predictions['knn'] = classify_knn(features, test_features, k=config.k)
    if config.classifier in ('centroid', 'both'):
        predictions['centroid'] = classify_centroid(features, test_features)

    table = pd.DataFrame({"sample": range(len(test.labels)), "true": test.labels})
    accuracies = {}
    per_class_rows = []
    for name, labels in predictions.items():
        table[name] = labels
        accuracy, per_class, confusion = classification_tables(test.labels, labels)
        accuracies[name] = accuracy
        per_class.insert(0, "classifier", name)
        per_class_rows.append(per_class)
        write_csv(os.path.join(config.output, f"confusion_{name}.csv"), confusion, index=True)
    write_csv(os.path.join(config.output, "predictions.csv"), table)
    write_csv(os.path.join(config.output, "per_class.csv"), pd.concat(per_class_rows, ignore_index=True))

    results = {
        "command": "features",
        "train_samples": len(train.samples),
        "test_samples": len(test.samples),
        "classes": train.classes,
        "sample_dims": list(train.dims),
        "ranks": list(config.ranks),
        "fit_error": features.fit_error,
        "accuracy": accuracies,
        "output": config.output,
    }
    write_text_report(config.output, "features_report", results)
    return 0, results


def _prediction_scores(truth: np.ndarray, predicted: np.ndarray) -> Dict[str, float]:
    truth = np.asarray(truth, dtype=np.float64).reshape(predicted.shape)
    norm = np.linalg.norm(truth.ravel())
    residual = float(np.linalg.norm((truth - predicted).ravel()))
    return {"residual": residual / norm if norm > 0 else residual, "r_squared": r_squared(truth, predicted)}


def cmd_pls(config: PlsConfig) -> Tuple[int, Results]:
    """
    Fit matrix or tensor PLS and write predictions for x_test (or the training x).

    With model_dir set, the saved model is loaded and only x_test is predicted.
    """
    results: Results = {"command": "pls", "model": config.model, "output": config.output}
    if config.model_dir:
        x = y = None
        x_new = read_tensor(config.x_test)
        y_truth = read_tensor(config.y_test) if config.y_test else None
        results["model_dir"] = config.model_dir
    else:
        x = read_tensor(config.x)
        y = read_tensor(config.y)
        x_new = read_tensor(config.x_test) if config.x_test else x
        y_truth = read_tensor(config.y_test) if config.y_test else (None if config.x_test else y)

    if config.model == 'matrix':
        if config.model_dir:
            model = load_pls_model(config.model_dir)
        else:
            _expect_order(x, 2, "matrix PLS")
            model = pls_fit(x, y, config.components)
            save_pls_model(os.path.join(config.output, "model"), model)
        predicted = pls_predict(model, x_new.data)
        results.update({"components": model.n_components, "warnings": model.warnings})
    else:
        if config.model_dir:
            model = load_tensor_pls_model(config.model_dir)
        else:
            model = tensor_pls_fit(x, y, config.ranks_x, config.ranks_y, shared_modes=config.shared_modes,
                                   max_iters=config.max_iters, tol=config.tol)
            save_tensor_pls_model(os.path.join(config.output, "model"), model)
            write_csv(os.path.join(config.output, "trace.csv"),
                      trace_frame({"x_fit": model.trace_x, "y_fit": model.trace_y, "total": model.trace_total}))
        predicted = as_array(tensor_pls_predict(model, x_new))
        results.update({"x_fit_error": model.x_model.fit_error, "y_fit_error": model.y_model.fit_error,
                        "block_diagonal_energy": model.block_diagonal_energy, "warnings": model.warnings})

    write_tensor(os.path.join(config.output, "predictions.tnsr"), predicted)
    if y_truth is not None:
        results.update(_prediction_scores(y_truth.data, predicted))
    write_text_report(config.output, "pls_report", results)
    return 0, results


def cmd_synth(config: SynthConfig) -> Tuple[int, Results]:
    """Generate synthetic data plus its ground truth."""
    out = config.output
    os.makedirs(out, exist_ok=True)
    files: List[str] = []

    def save(name: str, value) -> None:
        write_tensor(os.path.join(out, name), value)
        files.append(name)

    if config.kind == 'tucker':
        t, truth = random_tucker(config.dims, config.ranks, seed=config.seed, noise=config.noise,
                                 nonnegative=config.nonnegative)
        save("tensor.tnsr", t)
        save_tucker_model(os.path.join(out, "truth"), truth)
    elif config.kind == 'cp':
        t, truth = random_cp(config.dims, config.rank, seed=config.seed, noise=config.noise)
        save("tensor.tnsr", t)
        save_cp_model(os.path.join(out, "truth"), truth)
    elif config.kind == 'ica':
        mixtures, sources, mixing = ica_mixtures(config.n_sources, config.n_samples, seed=config.seed)
        save("mixtures.tnsr", mixtures)
        save("sources.tnsr", sources)
        save("mixing.tnsr", mixing)
    elif config.kind in ('sparse', 'smooth'):
        generator = planted_sparse if config.kind == 'sparse' else planted_smooth
        y, a0, b0 = generator(config.rows, config.cols, config.rank, noise=config.noise, seed=config.seed)
        save("matrix.tnsr", y)
        save("a.tnsr", a0)
        save("b.tnsr", b0)
    elif config.kind == 'corpus':
        train, test, truth = class_corpus(config.n_classes, config.per_class, config.dims, config.ranks,
                                          noise=config.noise, seed=config.seed, n_test=config.n_test)
        os.makedirs(os.path.join(out, "samples"), exist_ok=True)
        for split, data in (("train", train), ("test", test)):
            if data is None:
                continue
            entries = []
            for k, (sample, label) in enumerate(zip(data.samples, data.labels)):
                name = os.path.join("samples", f"{split}_{k:04d}.tnsr")
                write_tensor(os.path.join(out, name), sample)
                entries.append((name, label))
            write_corpus_manifest(os.path.join(out, f"{split}.csv"), entries)
            files.append(f"{split}.csv")
        save_tucker_model(os.path.join(out, "truth"), truth)
    elif config.kind == 'linked':
        subjects, truths, common = linked_subjects(config.dims, config.ranks, config.n_subjects, config.n_common,
                                                   noise=config.noise, seed=config.seed)
        for s, (x, truth) in enumerate(zip(subjects, truths)):
            save(f"subject_{s}.tnsr", x)
            save_tucker_model(os.path.join(out, "truth", f"subject_{s}"), truth)
        if common.shape[1]:
            save("common.tnsr", common)
    elif config.kind == 'pls':
        if len(config.dims) < 2:
            raise TensorError("pls synthesis reads predictors and responses from dims[0] and dims[1]",
                              "invalid-argument")
        x, y, x_test, y_test = pls_latent(config.n_samples, config.dims[0], config.dims[1], config.rank,
                                          noise=config.noise, seed=config.seed, n_test=config.n_test)
        save("x.tnsr", x)
        save("y.tnsr", y)
        if config.n_test:
            save("x_test.tnsr", x_test)
            save("y_test.tnsr", y_test)
    else:
        ranks = [config.rank] + list(config.ranks)
        x, y, x_test, y_test, scores = coupled_tensor_pair(config.n_samples, config.dims, config.dims, ranks, ranks,
                                                           noise=config.noise, seed=config.seed,
                                                           n_test=config.n_test)
        save("x.tnsr", x)
        save("y.tnsr", y)
        save("scores.tnsr", scores)
        if config.n_test:
            save("x_test.tnsr", x_test)
            save("y_test.tnsr", y_test)

    write_manifest(os.path.join(out, "manifest.txt"), {
        "kind": config.kind,
        "seed": config.seed,
        "generator": "numpy.random.default_rng (PCG64)",
        "noise": config.noise,
        "files": files,
    })
    results = {"command": "synth", "kind": config.kind, "seed": config.seed, "files": files, "output": out}
    write_text_report(out, "synth_report", results)
    return 0, results
