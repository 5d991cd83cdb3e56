"""
Dense tensor type and the multilinear algebra primitives.

Storage is last-index-fastest (numpy C order). Unfoldings are defined by the
index formula in which earlier modes vary fastest along the columns, so that

    unfold(G x_1 U1 ... x_N UN, n) = Un @ unfold(G, n) @ kron(UN, .., U(n+1), U(n-1), .., U1).T
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import khatri_rao as _khatri_rao_pair

from core.types import TensorError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable order-N array of 64-bit floats."""
    data: np.ndarray

    def __post_init__(self):
        array = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if array.ndim < 1:
            raise TensorError("tensor order must be at least 1", "shape")
        if any(d < 1 for d in array.shape):
            raise TensorError(f"every dimension must be positive, got {array.shape}", "shape")
        array.setflags(write=False)
        object.__setattr__(self, "data", array)

    @classmethod
    def from_flat(cls, dims: Sequence[int], values: Iterable[float]) -> "DenseTensor":
        """Build a tensor from last-index-fastest flat values."""
        dims = tuple(int(d) for d in dims)
        if not isinstance(values, np.ndarray):
            values = list(values)
        flat = np.asarray(values, dtype=np.float64).ravel()
        if flat.size != int(np.prod(dims)):
            raise TensorError(f"{flat.size} values cannot fill dims {dims}", "shape")
        return cls(flat.reshape(dims))

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(int(d) for d in dims)))

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def __getitem__(self, index):
        return self.data[index]

    def __repr__(self) -> str:
        return f"DenseTensor(dims={self.dims})"


TensorLike = Union[DenseTensor, np.ndarray, Sequence]


def as_tensor(t: TensorLike) -> DenseTensor:
    """Wrap array-likes; DenseTensor instances are returned unchanged."""
    return t if isinstance(t, DenseTensor) else DenseTensor(np.asarray(t, dtype=np.float64))


def as_array(t: TensorLike) -> np.ndarray:
    """Read-only ndarray view of a tensor or a float64 copy of an array-like."""
    return t.data if isinstance(t, DenseTensor) else np.asarray(t, dtype=np.float64)


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate a two-way array."""
    m = np.asarray(m.data if isinstance(m, DenseTensor) else m, dtype=np.float64)
    if m.ndim != 2:
        raise TensorError(f"{name} must be two-way, got {m.ndim} dimensions", "shape")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise TensorError(f"{name} must be nonempty, got shape {m.shape}", "shape")
    return m


def check_mode(mode: int, order: int) -> int:
    if isinstance(mode, bool) or not isinstance(mode, (int, np.integer)) or not 0 <= mode < order:
        raise TensorError(f"mode {mode} out of range for order-{order} tensor", "invalid-mode")
    return int(mode)


def unfold_array(a: np.ndarray, mode: int) -> np.ndarray:
    return np.reshape(np.moveaxis(a, mode, 0), (a.shape[mode], -1), order="F")


def fold_array(m: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    rest = [d for k, d in enumerate(dims) if k != mode]
    return np.moveaxis(np.reshape(m, [dims[mode]] + rest, order="F"), 0, mode)


def unfold(t: TensorLike, mode: int) -> np.ndarray:
    """
    Mode-n matricization.

    Args:
        t: Tensor to unfold
        mode: Row mode

    Returns:
        I_n x prod(other dims) matrix; earlier modes vary fastest along columns

    Raises:
        TensorError: invalid-mode when mode is out of range
    """
    a = as_array(t)
    mode = check_mode(mode, a.ndim)
    return unfold_array(a, mode)


def fold(m, mode: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of unfold."""
    m = np.asarray(m, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    mode = check_mode(mode, len(dims))
    expected = (dims[mode], int(np.prod(dims)) // dims[mode])
    if m.ndim != 2 or m.shape != expected:
        raise TensorError(f"cannot fold shape {m.shape} into dims {dims} along mode {mode}", "shape")
    return DenseTensor(fold_array(m, mode, dims))


def mode_product_array(a: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    dims = list(a.shape)
    dims[mode] = u.shape[0]
    return fold_array(u @ unfold_array(a, mode), mode, dims)


def mode_product(t: TensorLike, u, mode: int) -> DenseTensor:
    """
    Mode-n product t x_n u.

    Raises:
        TensorError: shape when u.cols differs from dims[mode]
    """
    a = as_array(t)
    mode = check_mode(mode, a.ndim)
    u = as_matrix(u, "factor")
    if u.shape[1] != a.shape[mode]:
        raise TensorError(
            f"factor has {u.shape[1]} columns but mode {mode} has dimension {a.shape[mode]}", "shape")
    return DenseTensor(mode_product_array(a, u, mode))


def multi_mode_product(t: TensorLike, factors: Sequence[Tuple[np.ndarray, int]]) -> DenseTensor:
    """Apply one mode product per (matrix, mode) pair; at most one factor per mode."""
    a = as_array(t)
    seen = set()
    checked = []
    for u, mode in factors:
        mode = check_mode(mode, a.ndim)
        if mode in seen:
            raise TensorError(f"mode {mode} appears more than once", "invalid-argument")
        seen.add(mode)
        checked.append((as_matrix(u, "factor"), mode))
    for u, mode in checked:
        if u.shape[1] != a.shape[mode]:
            raise TensorError(
                f"factor has {u.shape[1]} columns but mode {mode} has dimension {a.shape[mode]}",
                "shape")
        a = mode_product_array(a, u, mode)
    return DenseTensor(a)


def outer_product(vectors: Sequence) -> DenseTensor:
    """Rank-one tensor with entry (i_1..i_N) = prod_n v_n[i_n]."""
    if len(vectors) < 2:
        raise TensorError("outer product needs at least two vectors", "invalid-argument")
    arrays = []
    for v in vectors:
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.size == 0:
            raise TensorError("outer product vectors must be nonempty", "invalid-argument")
        arrays.append(v)
    return DenseTensor(reduce(np.multiply.outer, arrays))


def kronecker(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "left operand"), as_matrix(b, "right operand"))


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """
    Column-wise Kronecker product of matrices listed in mode order.

    The first matrix varies fastest, i.e. the result equals
    khatri_rao_pair(M_last, ..., M_first) and matches the unfolding convention.
    """
    if not matrices:
        raise TensorError("khatri_rao needs at least one matrix", "invalid-argument")
    mats = [as_matrix(m) for m in matrices]
    cols = mats[0].shape[1]
    if any(m.shape[1] != cols for m in mats):
        raise TensorError("khatri_rao operands must share their column count", "shape")
    return reduce(lambda acc, m: _khatri_rao_pair(m, acc), mats[1:], mats[0])


def frobenius_norm(t: TensorLike) -> float:
    return float(np.linalg.norm(as_array(t).ravel()))


def pseudo_inverse(m, tol: Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse through the singular value decomposition.

    Args:
        m: Matrix to invert
        tol: Singular values at or below tol are treated as zero; defaults to
             max(rows, cols) * eps * largest singular value

    Returns:
        cols x rows pseudo-inverse
    """
    m = as_matrix(m)
    if tol is not None and tol < 0:
        raise TensorError(f"tolerance must be nonnegative, got {tol}", "invalid-argument")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if tol is None:
        tol = max(m.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    keep = s > tol
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def has_orthonormal_columns(m: np.ndarray, tol: float = 1e-8) -> bool:
    m = np.asarray(m, dtype=np.float64)
    return bool(np.max(np.abs(m.T @ m - np.eye(m.shape[1]))) <= tol)


def tensor_from_factors(core: TensorLike, factors: List[np.ndarray]) -> np.ndarray:
    """core x_1 factors[0] ... x_N factors[N-1] as a plain array."""
    a = as_array(core)
    for mode, u in enumerate(factors):
        a = mode_product_array(a, u, mode)
    return a
