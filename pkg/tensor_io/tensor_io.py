"""
File formats: TNSR binary tensors, key=value manifests, model directories and
labeled corpus manifests.

TNSR layout: b"TNSR", version byte 0x01, little-endian uint32 order N, N
little-endian uint32 dims, then prod(dims) little-endian float64 values with
the last index fastest.
"""

import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.tensor_core import DenseTensor, TensorLike, as_array
from core.types import (
    AveragedBlockModel,
    BlockModel,
    CPModel,
    LabeledTensorSet,
    LinkedModel,
    PLSModel,
    TensorError,
    TensorPLSModel,
    TuckerModel,
)

logger = logging.getLogger(__name__)

MAGIC = b"TNSR"
VERSION = 1
MANIFEST_NAME = "manifest.txt"
_HEADER = 4 + 1 + 4


def write_tensor(path: str, t: TensorLike) -> None:
    """Write a tensor (or matrix, or vector) in the TNSR format."""
    a = np.ascontiguousarray(as_array(t), dtype="<f8")
    if a.ndim < 1 or a.size == 0:
        raise TensorError(f"cannot write an empty tensor to {path}", "io")
    header = np.array([a.ndim] + list(a.shape), dtype="<u4")
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(bytes([VERSION]))
            f.write(header.tobytes())
            f.write(a.tobytes(order="C"))
    except OSError as e:
        raise TensorError(f"cannot write {path}: {e}", "io") from e


def read_tensor(path: str) -> DenseTensor:
    """
    Read a TNSR file.

    Raises:
        FileNotFoundError: When the file does not exist
        TensorError: io for a bad magic, an unknown version, truncated or trailing data
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Tensor file not found: {path}")
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER or raw[:4] != MAGIC:
        raise TensorError(f"{path} is not a TNSR file", "io")
    if raw[4] != VERSION:
        raise TensorError(f"{path} has unsupported TNSR version {raw[4]}", "io")
    order = int(np.frombuffer(raw, dtype="<u4", count=1, offset=5)[0])
    values_at = _HEADER + 4 * order
    if order < 1 or len(raw) < values_at:
        raise TensorError(f"{path} has a truncated or invalid header", "io")
    dims = [int(d) for d in np.frombuffer(raw, dtype="<u4", count=order, offset=_HEADER)]
    count = int(np.prod(dims))
    if count == 0 or len(raw) != values_at + 8 * count:
        raise TensorError(f"{path} holds {len(raw) - values_at} value bytes, dims {dims} need {8 * count}", "io")
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=values_at)
    return DenseTensor(values.reshape(dims).astype(np.float64))


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, np.ndarray):
        return _format_value(value.tolist())
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value).replace("\n", " ")


def write_manifest(path: str, entries: Dict[str, Any]) -> None:
    """Write UTF-8 key=value lines (LF endings) in insertion order; floats use repr."""
    lines = [f"{key}={_format_value(value)}\n" for key, value in entries.items()]
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(lines)
    except OSError as e:
        raise TensorError(f"cannot write {path}: {e}", "io") from e


def read_manifest(path: str) -> Dict[str, str]:
    """Read key=value lines; blank lines and lines starting with '#' are skipped."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Manifest not found: {path}")
    entries = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "=" not in line:
                raise TensorError(f"{path}:{number}: expected key=value", "io")
            key, value = line.split("=", 1)
            entries[key.strip()] = value
    return entries


def parse_ints(value: str) -> List[int]:
    return [int(v) for v in value.split(",") if v]


def parse_floats(value: str) -> List[float]:
    return [float(v) for v in value.split(",") if v]


def _optional_int(value: Optional[str]) -> Optional[int]:
    return None if value in (None, "", "none") else int(value)


def _require(entries: Dict[str, str], key: str, path: str) -> str:
    if key not in entries:
        raise TensorError(f"{path} is missing the '{key}' entry", "io")
    return entries[key]


def save_tucker_model(directory: str, model: TuckerModel, extra: Optional[Dict[str, Any]] = None) -> None:
    """core.tnsr, factor_<n>.tnsr and a manifest with order, ranks, fit_error, algorithm, seed."""
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, "core.tnsr"), model.core)
    for n, factor in enumerate(model.factors):
        write_tensor(os.path.join(directory, f"factor_{n}.tnsr"), factor)
    entries = {
        "type": "tucker",
        "order": model.order,
        "dims": [f.shape[0] for f in model.factors],
        "ranks": list(model.ranks),
        "fit_error": model.fit_error,
        "algorithm": model.algorithm,
        "seed": model.seed,
        "trace": model.trace,
        "warnings": ";".join(model.warnings),
    }
    entries.update(extra or {})
    write_manifest(os.path.join(directory, MANIFEST_NAME), entries)


def load_tucker_model(directory: str) -> TuckerModel:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    entries = read_manifest(manifest_path)
    order = int(_require(entries, "order", manifest_path))
    factors = [read_tensor(os.path.join(directory, f"factor_{n}.tnsr")).data.copy() for n in range(order)]
    core = read_tensor(os.path.join(directory, "core.tnsr"))
    warnings = [w for w in entries.get("warnings", "").split(";") if w]
    return TuckerModel(core=core, factors=factors, fit_error=float(_require(entries, "fit_error", manifest_path)),
                       trace=parse_floats(entries.get("trace", "")), algorithm=entries.get("algorithm", ""),
                       seed=_optional_int(entries.get("seed")), warnings=warnings)


def save_cp_model(directory: str, model: CPModel, extra: Optional[Dict[str, Any]] = None) -> None:
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, "weights.tnsr"), model.weights)
    for n, factor in enumerate(model.factors):
        write_tensor(os.path.join(directory, f"factor_{n}.tnsr"), factor)
    entries = {
        "type": "cp",
        "order": len(model.factors),
        "dims": [f.shape[0] for f in model.factors],
        "rank": model.rank,
        "fit_error": model.fit_error,
        "algorithm": model.algorithm,
        "seed": model.seed,
        "trace": model.trace,
        "warnings": ";".join(model.warnings),
    }
    entries.update(extra or {})
    write_manifest(os.path.join(directory, MANIFEST_NAME), entries)


def load_cp_model(directory: str) -> CPModel:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    entries = read_manifest(manifest_path)
    order = int(_require(entries, "order", manifest_path))
    factors = [read_tensor(os.path.join(directory, f"factor_{n}.tnsr")).data.copy() for n in range(order)]
    weights = read_tensor(os.path.join(directory, "weights.tnsr")).data.copy()
    warnings = [w for w in entries.get("warnings", "").split(";") if w]
    return CPModel(weights=weights, factors=factors, fit_error=float(_require(entries, "fit_error", manifest_path)),
                   trace=parse_floats(entries.get("trace", "")), algorithm=entries.get("algorithm", "cp"),
                   seed=_optional_int(entries.get("seed")), warnings=warnings)


def save_block_model(directory: str, model: BlockModel) -> None:
    """block_<n>_core.tnsr / block_<n>_factor.tnsr per Tucker-1 block plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    for n, (core, factor, mode) in enumerate(model.blocks):
        write_tensor(os.path.join(directory, f"block_{n}_core.tnsr"), core)
        write_tensor(os.path.join(directory, f"block_{n}_factor.tnsr"), factor)
    write_manifest(os.path.join(directory, MANIFEST_NAME), {
        "type": "bod",
        "blocks": len(model.blocks),
        "modes": [mode for _, _, mode in model.blocks],
        "ranks": [factor.shape[1] for _, factor, _ in model.blocks],
        "residual": model.residual,
        "trace": model.trace,
        "warnings": ";".join(model.warnings),
    })


def save_averaged_block_model(directory: str, model: AveragedBlockModel) -> None:
    """One Tucker model directory per block plus a manifest with the residual trace."""
    os.makedirs(directory, exist_ok=True)
    for s, block in enumerate(model.blocks):
        save_tucker_model(os.path.join(directory, f"block_{s}"), block)
    write_manifest(os.path.join(directory, MANIFEST_NAME), {
        "type": "btd-average",
        "blocks": len(model.blocks),
        "residual": model.residual,
        "trace": model.trace,
    })


def save_linked_model(directory: str, model: LinkedModel) -> None:
    """subject_<s>/ model directories, common_<n>.tnsr bases and a manifest of common components."""
    os.makedirs(directory, exist_ok=True)
    for s, subject in enumerate(model.subject_models):
        save_tucker_model(os.path.join(directory, f"subject_{s}"), subject,
                          extra={f"alignment_{n}": perm for n, perm in enumerate(model.alignment[s])})
    entries: Dict[str, Any] = {
        "type": "linked",
        "subjects": len(model.subject_models),
        "common_counts": model.common_counts,
        "individual_max_correlation": model.individual_max_correlation,
    }
    for n, basis in enumerate(model.common_bases):
        if basis.shape[1]:
            write_tensor(os.path.join(directory, f"common_{n}.tnsr"), basis)
        entries[f"common_correlations_{n}"] = model.common_correlations[n] if n < len(model.common_correlations) else []
    entries["warnings"] = ";".join(model.warnings)
    write_manifest(os.path.join(directory, MANIFEST_NAME), entries)


def save_pls_model(directory: str, model: PLSModel) -> None:
    os.makedirs(directory, exist_ok=True)
    for name in ("W", "A", "B", "C", "D"):
        write_tensor(os.path.join(directory, f"{name}.tnsr"), getattr(model, name))
    write_tensor(os.path.join(directory, "x_mean.tnsr"), model.x_mean)
    write_tensor(os.path.join(directory, "y_mean.tnsr"), model.y_mean)
    write_manifest(os.path.join(directory, MANIFEST_NAME), {
        "type": "pls",
        "components": model.n_components,
        "predictors": model.W.shape[0],
        "responses": model.C.shape[0],
        "warnings": ";".join(model.warnings),
    })


def load_pls_model(directory: str) -> PLSModel:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    entries = read_manifest(manifest_path)
    if entries.get("type") != "pls":
        raise TensorError(f"{manifest_path} does not describe a PLS model", "io")
    arrays = {name: read_tensor(os.path.join(directory, f"{name}.tnsr")).data.copy()
              for name in ("W", "A", "B", "C", "D", "x_mean", "y_mean")}
    warnings = [w for w in entries.get("warnings", "").split(";") if w]
    return PLSModel(warnings=warnings, **arrays)


def save_tensor_pls_model(directory: str, model: TensorPLSModel) -> None:
    os.makedirs(directory, exist_ok=True)
    save_tucker_model(os.path.join(directory, "x_model"), model.x_model)
    save_tucker_model(os.path.join(directory, "y_model"), model.y_model)
    write_tensor(os.path.join(directory, "linkage.tnsr"), model.linkage)
    write_tensor(os.path.join(directory, "x_mean.tnsr"), model.x_mean)
    write_tensor(os.path.join(directory, "y_mean.tnsr"), model.y_mean)
    write_manifest(os.path.join(directory, MANIFEST_NAME), {
        "type": "tensor-pls",
        "shared_modes": model.shared_modes,
        "trace_x": model.trace_x,
        "trace_y": model.trace_y,
        "trace_total": model.trace_total,
        "block_diagonal_energy_x": model.block_diagonal_energy.get("x"),
        "block_diagonal_energy_y": model.block_diagonal_energy.get("y"),
        "warnings": ";".join(model.warnings),
    })


def load_tensor_pls_model(directory: str) -> TensorPLSModel:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    entries = read_manifest(manifest_path)
    if entries.get("type") != "tensor-pls":
        raise TensorError(f"{manifest_path} does not describe a tensor PLS model", "io")
    x_model = load_tucker_model(os.path.join(directory, "x_model"))
    y_model = load_tucker_model(os.path.join(directory, "y_model"))
    shared = parse_ints(entries.get("shared_modes", "0"))
    for n in shared:
        y_model.factors[n] = x_model.factors[n]
    energy = {key: float(entries[f"block_diagonal_energy_{key}"]) for key in ("x", "y")
              if entries.get(f"block_diagonal_energy_{key}", "none") != "none"}
    return TensorPLSModel(
        x_model=x_model, y_model=y_model, shared_modes=shared,
        x_mean=read_tensor(os.path.join(directory, "x_mean.tnsr")).data.copy(),
        y_mean=read_tensor(os.path.join(directory, "y_mean.tnsr")).data.copy(),
        linkage=read_tensor(os.path.join(directory, "linkage.tnsr")).data.copy(),
        trace_x=parse_floats(entries.get("trace_x", "")), trace_y=parse_floats(entries.get("trace_y", "")),
        trace_total=parse_floats(entries.get("trace_total", "")), block_diagonal_energy=energy,
        warnings=[w for w in entries.get("warnings", "").split(";") if w])


def write_corpus_manifest(path: str, entries: Sequence[Tuple[str, Any]]) -> None:
    """CSV with columns path,label; paths are stored as given."""
    frame = pd.DataFrame(list(entries), columns=["path", "label"])
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise TensorError(f"cannot write {path}: {e}", "io") from e


def read_corpus_manifest(path: str) -> LabeledTensorSet:
    """
    Load every tensor listed in a path,label CSV.

    Relative tensor paths are resolved against the manifest's directory.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Corpus manifest not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TensorError(f"cannot parse corpus manifest {path}: {e}", "io") from e
    missing = {"path", "label"} - set(frame.columns)
    if missing:
        raise TensorError(f"corpus manifest {path} lacks columns {sorted(missing)}", "io")
    base = os.path.dirname(os.path.abspath(path))
    samples = []
    for entry in frame["path"].astype(str):
        samples.append(read_tensor(entry if os.path.isabs(entry) else os.path.join(base, entry)))
    labels = frame["label"].tolist()
    logger.info(f"loaded {len(samples)} samples with {len(set(labels))} classes from {path}")
    return LabeledTensorSet(samples=samples, labels=labels)
