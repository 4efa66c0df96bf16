"""Sliding-window construction of the 4D patch tensor and its inverse.

A frame sequence is an array of shape ``(n_frames, height, width)`` with
values in [0, 1]. A temporal window of ``nt`` frames is cut into ``Np``
square patches of side ``nw``; the resulting tensor has shape
``(nw, nw, nt, Np)`` with entry ``(i, j, t, p)`` equal to pixel
``(row_p + i, col_p + j)`` of frame ``start + t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError, RangeError, ShapeError

__all__ = [
    "PatchConfig",
    "PatchProvenance",
    "PatchTensor4D",
    "grid_positions",
    "build_tensor",
    "reconstruct",
    "window_starts",
]


@dataclass(frozen=True)
class PatchConfig:
    nw: int = 60
    stride: int | None = None  # None means stride == nw (non-overlapping)
    nt: int = 15

    def __post_init__(self):
        if self.nw < 1 or self.nt < 1:
            raise ParameterError(f"nw and nt must be positive, got nw={self.nw}, nt={self.nt}")
        if self.stride is not None and not 1 <= self.stride <= self.nw:
            raise ParameterError(f"stride must lie in [1, nw={self.nw}], got {self.stride}")

    @property
    def step(self) -> int:
        return self.nw if self.stride is None else self.stride


@dataclass(frozen=True)
class PatchProvenance:
    """Where each patch came from: top-left corners, first frame, frame size."""

    positions: np.ndarray  # (Np, 2) int, (row, col)
    start: int
    frame_shape: tuple[int, int]


@dataclass
class PatchTensor4D:
    tensor: np.ndarray
    provenance: PatchProvenance

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tensor.shape


def _axis_positions(n: int, nw: int, step: int) -> list[int]:
    pos = list(range(0, n - nw + 1, step))
    if pos[-1] + nw < n:
        pos.append(n - nw)
    return pos


def grid_positions(height: int, width: int, cfg: PatchConfig) -> np.ndarray:
    """Top-left corners of all windows, row position varying fastest.

    Windows sit at multiples of the stride plus one extra window clamped to
    the bottom/right border whenever the stride grid would leave pixels
    uncovered.
    """
    if cfg.nw > min(height, width):
        raise ParameterError(f"patch size {cfg.nw} exceeds frame size {height}x{width}")
    rows = _axis_positions(height, cfg.nw, cfg.step)
    cols = _axis_positions(width, cfg.nw, cfg.step)
    return np.array([(r, c) for c in cols for r in rows], dtype=np.int64)


def window_starts(n_frames: int, nt: int) -> list[int]:
    """First frames of consecutive ``nt``-frame windows; the last one is right-aligned."""
    if nt > n_frames:
        raise RangeError(f"temporal size {nt} exceeds sequence length {n_frames}")
    starts = list(range(0, n_frames - nt + 1, nt))
    if starts[-1] + nt < n_frames:
        starts.append(n_frames - nt)
    return starts


def _as_sequence(frames) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        seq = frames.astype(float, copy=False)
    else:
        shapes = {np.shape(f) for f in frames}
        if len(shapes) > 1:
            raise InputError(f"frames differ in size: {sorted(shapes)}")
        seq = np.asarray(frames, dtype=float)
    if seq.ndim != 3:
        raise InputError(f"expected a stack of 2D frames, got shape {seq.shape}")
    return seq


def build_tensor(frames, cfg: PatchConfig, window_start: int = 0) -> PatchTensor4D:
    seq = _as_sequence(frames)
    n_frames, height, width = seq.shape
    if window_start < 0 or window_start + cfg.nt > n_frames:
        raise RangeError(
            f"window [{window_start}, {window_start + cfg.nt}) exceeds sequence of {n_frames} frames"
        )
    pos = grid_positions(height, width, cfg)
    nw = cfg.nw
    block = seq[window_start:window_start + cfg.nt]  # (nt, H, W)
    out = np.empty((nw, nw, cfg.nt, len(pos)))
    for p, (r, c) in enumerate(pos):
        out[:, :, :, p] = block[:, r:r + nw, c:c + nw].transpose(1, 2, 0)
    prov = PatchProvenance(pos, int(window_start), (height, width))
    return PatchTensor4D(out, prov)


def reconstruct(t: PatchTensor4D, overlap: str = "mean") -> np.ndarray:
    """Fold a patch tensor back into ``nt`` frames of the original size.

    Each output pixel aggregates every tensor entry that maps onto it, by
    mean (default) or median. Pixels covered by no patch are zero, which
    cannot happen for tensors produced by :func:`build_tensor`.
    """
    if overlap not in ("mean", "median"):
        raise ParameterError(f"overlap must be 'mean' or 'median', got {overlap!r}")
    x = np.asarray(t.tensor, dtype=float)
    prov = t.provenance
    if x.ndim != 4 or x.shape[0] != x.shape[1] or x.shape[3] != len(prov.positions):
        raise ShapeError(f"tensor shape {x.shape} inconsistent with {len(prov.positions)} patches")
    nw, _, nt, _ = x.shape
    height, width = prov.frame_shape
    if overlap == "mean":
        # Running mean in patch order: m += (x - m) / k. Unlike sum-then-divide
        # it returns v exactly when every copy of a pixel equals v.
        mean = np.zeros((nt, height, width))
        cnt = np.zeros((height, width))
        for p, (r, c) in enumerate(prov.positions):
            cnt[r:r + nw, c:c + nw] += 1
            region = mean[:, r:r + nw, c:c + nw]
            region += (x[:, :, :, p].transpose(2, 0, 1) - region) / cnt[r:r + nw, c:c + nw]
        return mean
    return _median_reconstruct(x, prov)


def _median_reconstruct(x: np.ndarray, prov: PatchProvenance) -> np.ndarray:
    # Memory grows with the maximum coverage count per pixel.
    nw, _, nt, _ = x.shape
    height, width = prov.frame_shape
    cnt = np.zeros((height, width), dtype=np.int64)
    for r, c in prov.positions:
        cnt[r:r + nw, c:c + nw] += 1
    depth = max(int(cnt.max()), 1)
    out = np.zeros((nt, height, width))
    rr, cc = np.meshgrid(np.arange(nw), np.arange(nw), indexing="ij")
    for ti in range(nt):
        stack = np.full((depth, height, width), np.nan)
        fill = np.zeros((height, width), dtype=np.int64)
        for p, (r, c) in enumerate(prov.positions):
            layer = fill[r:r + nw, c:c + nw]
            stack[layer, rr + r, cc + c] = x[:, :, ti, p]
            fill[r:r + nw, c:c + nw] += 1
        covered = cnt > 0
        med = np.zeros((height, width))
        med[covered] = np.nanmedian(stack[:, covered], axis=0)
        out[ti] = med
    return out
