"""Dense tensor algebra on numpy arrays.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Whenever a group
of modes is flattened into a single index (unfolding rows or columns, file
storage) the *first listed mode varies fastest*, i.e. column-major ("F")
ordering. Modes are 0-based axis numbers throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ContractionError, NumericalError, PartitionError, ShapeError

__all__ = [
    "ModePartition",
    "unfold",
    "fold",
    "contract",
    "frobenius_norm",
    "l1_norm",
    "spd_solve",
    "svd",
]


@dataclass(frozen=True)
class ModePartition:
    """Split of a tensor's modes into row modes and column modes."""

    row_modes: tuple[int, ...]
    col_modes: tuple[int, ...]

    def __init__(self, row_modes: Sequence[int], col_modes: Sequence[int]):
        object.__setattr__(self, "row_modes", tuple(int(m) for m in row_modes))
        object.__setattr__(self, "col_modes", tuple(int(m) for m in col_modes))

    @property
    def order(self) -> int:
        return len(self.row_modes) + len(self.col_modes)

    def check(self, ndim: int) -> None:
        modes = self.row_modes + self.col_modes
        if sorted(modes) != list(range(ndim)):
            raise PartitionError(
                f"partition {self.row_modes}|{self.col_modes} does not cover modes 0..{ndim - 1} exactly once"
            )


def _as_partition(p: ModePartition | tuple) -> ModePartition:
    if isinstance(p, ModePartition):
        return p
    rows, cols = p
    return ModePartition(rows, cols)


def unfold(t: np.ndarray, p: ModePartition | tuple) -> np.ndarray:
    """Matricize ``t`` with ``p.row_modes`` as rows and ``p.col_modes`` as columns.

    Within each side the first listed mode varies fastest.

    Examples
    --------
    >>> x = np.arange(24.0).reshape(2, 3, 4, order="F")
    >>> unfold(x, ([0], [1, 2])).shape
    (2, 12)
    """
    t = np.asarray(t, dtype=float)
    p = _as_partition(p)
    p.check(t.ndim)
    nrows = int(np.prod([t.shape[m] for m in p.row_modes], dtype=np.int64))
    ncols = int(np.prod([t.shape[m] for m in p.col_modes], dtype=np.int64))
    return np.transpose(t, p.row_modes + p.col_modes).reshape(nrows, ncols, order="F")


def fold(m: np.ndarray, p: ModePartition | tuple, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild a tensor of ``shape`` from its unfolding."""
    m = np.asarray(m, dtype=float)
    p = _as_partition(p)
    shape = tuple(int(s) for s in shape)
    p.check(len(shape))
    row_ext = [shape[k] for k in p.row_modes]
    col_ext = [shape[k] for k in p.col_modes]
    expected = (int(np.prod(row_ext, dtype=np.int64)), int(np.prod(col_ext, dtype=np.int64)))
    if m.ndim != 2 or m.shape != expected:
        raise ShapeError(f"matrix of shape {m.shape} cannot fold to {shape} (expected {expected})")
    permuted = m.reshape(row_ext + col_ext, order="F")
    return np.transpose(permuted, np.argsort(p.row_modes + p.col_modes))


def contract(
    x: np.ndarray,
    y: np.ndarray,
    x_modes: Sequence[int],
    y_modes: Sequence[int],
) -> np.ndarray:
    """Contract ``x`` and ``y`` over the paired modes ``x_modes[k] <-> y_modes[k]``.

    The result carries the free modes of ``x`` (in order) followed by the free
    modes of ``y`` (in order). Evaluated as a direct index sum with einsum, so
    it is independent of the unfolding machinery.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_modes = [int(m) for m in x_modes]
    y_modes = [int(m) for m in y_modes]
    if len(x_modes) != len(y_modes):
        raise ContractionError("x_modes and y_modes must pair up one to one")
    if len(set(x_modes)) != len(x_modes) or len(set(y_modes)) != len(y_modes):
        raise ContractionError("repeated contraction mode")
    for a, b in zip(x_modes, y_modes):
        if not (0 <= a < x.ndim and 0 <= b < y.ndim):
            raise ContractionError(f"mode pair ({a}, {b}) out of range")
        if x.shape[a] != y.shape[b]:
            raise ContractionError(
                f"mode {a} of x has extent {x.shape[a]} but mode {b} of y has {y.shape[b]}"
            )
    x_labels = list(range(x.ndim))
    y_labels = list(range(x.ndim, x.ndim + y.ndim))
    for a, b in zip(x_modes, y_modes):
        y_labels[b] = x_labels[a]
    out = [l for k, l in enumerate(x_labels) if k not in x_modes]
    out += [l for k, l in enumerate(y_labels) if k not in y_modes]
    return np.einsum(x, x_labels, y, y_labels, out, optimize=True)


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(t, dtype=float)))))


def l1_norm(t: np.ndarray) -> float:
    return float(np.sum(np.abs(np.asarray(t, dtype=float))))


def spd_solve(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``lhs @ S = rhs`` for symmetric positive definite ``lhs`` via Cholesky."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.ndim != 2 or lhs.shape[0] != lhs.shape[1]:
        raise ShapeError(f"lhs must be square, got {lhs.shape}")
    if rhs.shape[0] != lhs.shape[0]:
        raise ShapeError(f"rhs has {rhs.shape[0]} rows, lhs has {lhs.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(lhs, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, rhs)


def svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``m = U @ diag(s) @ V.T`` with nonincreasing ``s``.

    Note that ``V`` (not ``V.T``) is returned, so singular vectors are columns
    of both ``U`` and ``V``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ShapeError(f"svd expects a matrix, got ndim={m.ndim}")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return u, s, vt.T
