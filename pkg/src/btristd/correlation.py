"""SVD-based correlation analysis between pairs of modes of a 4D tensor.

For a mode pair ``(i, j)`` the tensor is cut into a sequence of
``I_i x I_j`` matrices, one per value of the remaining two modes (the first
remaining mode varying fastest). Two statistics are computed:

* energy ratio of each slice, ``s1**2 / sum(s**2)``;
* direction consistency of each adjacent slice pair, ``|<u1(k), u1(k+1)>|``
  where ``u1`` is the leading singular vector (left by default).
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

DEGENERATE_GAP = 1e-10

ALL_PAIRS = tuple(itertools.combinations(range(4), 2))


def _check_pair(ndim: int, pair) -> tuple[int, int]:
    i, j = (int(p) for p in pair)
    if not (0 <= i < j < ndim):
        raise ParameterError(f"invalid mode pair {pair!r} for an order-{ndim} tensor")
    return i, j


def slice_sequence(t: np.ndarray, pair) -> np.ndarray:
    """Stack of slices, shape ``(n_slices, I_i, I_j)``."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 4:
        raise ShapeError(f"expected an order-4 tensor, got ndim={t.ndim}")
    i, j = _check_pair(4, pair)
    rest = [m for m in range(4) if m not in (i, j)]
    permuted = np.transpose(t, (i, j, *rest))
    n = t.shape[rest[0]] * t.shape[rest[1]]
    # first remaining mode fastest -> Fortran reshape of the trailing modes
    flat = permuted.reshape(t.shape[i], t.shape[j], n, order="F")
    return np.moveaxis(flat, 2, 0)


def energy_ratio(m: np.ndarray) -> float:
    """Share of the squared Frobenius energy carried by the leading singular value.

    Returns 0.0 for an all-zero matrix.
    """
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    total = float(np.sum(s ** 2))
    if total == 0.0:
        return 0.0
    return float(s[0] ** 2 / total)


def _leading(m: np.ndarray, side: str) -> tuple[np.ndarray, bool]:
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    vec = u[:, 0] if side == "left" else vt[0]
    unstable = s.size > 1 and (s[0] - s[1]) <= DEGENERATE_GAP * max(s[0], 1.0)
    return vec, bool(unstable)


def direction_consistency(m1: np.ndarray, m2: np.ndarray, side: str = "left") -> float:
    """``|cos|`` of the angle between the leading singular vectors of two slices."""
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    if np.shape(m1) != np.shape(m2):
        raise ShapeError(f"slice shapes differ: {np.shape(m1)} vs {np.shape(m2)}")
    u1, _ = _leading(m1, side)
    u2, _ = _leading(m2, side)
    return float(min(abs(np.dot(u1, u2)), 1.0))


@dataclass
class PairStats:
    pair: tuple[int, int]
    energy_ratios: np.ndarray
    direction_cos: np.ndarray
    degenerate: np.ndarray = field(repr=False)  # per slice: all-zero
    unstable: np.ndarray = field(repr=False)  # per slice: s1 ~ s2

    @property
    def mean_energy(self) -> float:
        keep = ~self.degenerate
        return float(self.energy_ratios[keep].mean()) if keep.any() else 0.0

    @property
    def mean_cos(self) -> float:
        keep = ~(self.degenerate[:-1] | self.degenerate[1:])
        return float(self.direction_cos[keep].mean()) if keep.any() else 0.0


@dataclass
class CorrelationReport:
    pairs: dict[tuple[int, int], PairStats]

    def __getitem__(self, pair) -> PairStats:
        return self.pairs[tuple(pair)]

    def summary(self) -> dict[tuple[int, int], tuple[float, float]]:
        return {p: (st.mean_energy, st.mean_cos) for p, st in self.pairs.items()}


def pair_stats(t: np.ndarray, pair, side: str = "left") -> PairStats:
    slices = slice_sequence(t, pair)
    u, s, vt = np.linalg.svd(slices, full_matrices=False)
    energy = np.sum(s ** 2, axis=1)
    degenerate = energy == 0.0
    ratios = np.divide(s[:, 0] ** 2, energy, out=np.zeros_like(energy), where=~degenerate)
    lead = u[:, :, 0] if side == "left" else vt[:, 0, :]
    cos = np.minimum(np.abs(np.sum(lead[:-1] * lead[1:], axis=1)), 1.0)
    cos[degenerate[:-1] | degenerate[1:]] = 0.0
    if s.shape[1] > 1:
        unstable = (s[:, 0] - s[:, 1]) <= DEGENERATE_GAP * np.maximum(s[:, 0], 1.0)
    else:
        unstable = np.zeros(len(slices), dtype=bool)
    return PairStats(tuple(int(p) for p in pair), ratios, cos, degenerate, unstable & ~degenerate)


def analyze(t: np.ndarray, side: str = "left") -> CorrelationReport:
    """Statistics for all six mode pairs of an order-4 tensor."""
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    t = np.asarray(t, dtype=float)
    if t.ndim != 4:
        raise ShapeError(f"expected an order-4 tensor, got ndim={t.ndim}")
    return CorrelationReport({p: pair_stats(t, p, side) for p in ALL_PAIRS})


def write_report_csv(path, report: CorrelationReport) -> None:
    """Rows ``pair, slice_index, energy_ratio, direction_cos`` (pair as 1-based "i-j").

    ``direction_cos`` of slice k compares slices k and k+1; it is empty on the
    last slice.
    """
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["pair", "slice_index", "energy_ratio", "direction_cos"])
        for pair, st in report.pairs.items():
            label = f"{pair[0] + 1}-{pair[1] + 1}"
            for k, er in enumerate(st.energy_ratios):
                cos = repr(float(st.direction_cos[k])) if k < len(st.direction_cos) else ""
                wr.writerow([label, k, repr(float(er)), cos])
