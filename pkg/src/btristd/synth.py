"""Synthetic infrared-like sequences with planted moving targets.

Backgrounds come in three flavours:

``"smooth"``
    A slowly drifting cloud-like field: an offset and a linear gradient plus a
    handful of broad Gaussian bumps that pan across the frame and change
    brightness slowly over time.
``"btr"``
    Each temporal window of ``nt`` frames is an exact low-rank BTR tensor,
    laid out on a non-overlapping ``nw`` grid.
``"constant"``
    Every pixel equals ``spec.level``.

Targets are isotropic Gaussian blobs with ``sigma = radius / 2`` that move
with constant velocity. After adding Gaussian noise the frames are clipped to
[0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .btr_solver import BTRFactors, btr_compose
from .errors import ParameterError, SceneError
from .evaluation import Target
from .patch_tensor import PatchConfig, PatchProvenance, PatchTensor4D, grid_positions, reconstruct

BACKGROUNDS = ("smooth", "btr", "constant")


@dataclass(frozen=True)
class TargetSpec:
    row: float
    col: float
    v_row: float = 0.0
    v_col: float = 0.0
    amplitude: float = 0.4
    radius: float = 2.0

    def position(self, frame: int) -> tuple[float, float]:
        return self.row + self.v_row * frame, self.col + self.v_col * frame


@dataclass(frozen=True)
class SynthSpec:
    height: int = 256
    width: int = 256
    n_frames: int = 100
    background: str = "smooth"
    noise: float = 0.02
    targets: Sequence[TargetSpec] = field(default_factory=tuple)
    seed: int = 0
    level: float = 0.3  # constant background value
    ranks: tuple[int, int, int] = (6, 3, 30)  # "btr" background
    nw: int = 60  # "btr" background patch side
    nt: int = 15  # "btr" background window length

    def validate(self) -> None:
        if self.height < 1 or self.width < 1 or self.n_frames < 1:
            raise ParameterError(f"bad scene size {self.height}x{self.width}x{self.n_frames}")
        if self.background not in BACKGROUNDS:
            raise ParameterError(f"background must be one of {BACKGROUNDS}, got {self.background!r}")
        if self.noise < 0:
            raise ParameterError(f"noise must be nonnegative, got {self.noise}")
        if self.background == "btr" and (self.height % self.nw or self.width % self.nw
                                         or self.n_frames % self.nt):
            raise ParameterError("btr background needs frame size divisible by nw "
                                 "and frame count divisible by nt")
        for k, tg in enumerate(self.targets):
            if tg.radius <= 0:
                raise ParameterError(f"target {k}: radius must be positive")
            for f in (0, self.n_frames - 1):
                r, c = tg.position(f)
                if not (0 <= r <= self.height - 1 and 0 <= c <= self.width - 1):
                    raise SceneError(f"target {k} leaves the frame (at frame {f}: {r:.2f}, {c:.2f})")


def default_spec(seed: int = 0, n_targets: int = 1, amplitude: float = 0.4, radius: float = 2.0,
                 speed: float = 0.5, **overrides) -> SynthSpec:
    """Smooth 256x256x100 scene with ``n_targets`` slow straight-line targets.

    Start points and headings are drawn from ``seed``; each track is clamped
    so it stays at least 10 pixels away from the border.
    """
    rng = np.random.default_rng([seed, 1])
    h = overrides.get("height", 256)
    w = overrides.get("width", 256)
    n = overrides.get("n_frames", 100)
    targets = []
    for _ in range(n_targets):
        angle = rng.uniform(0, 2 * np.pi)
        vr, vc = speed * np.sin(angle), speed * np.cos(angle)
        r0, c0 = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
        r0 = float(np.clip(r0, 10 - min(0, vr * (n - 1)), h - 11 - max(0, vr * (n - 1))))
        c0 = float(np.clip(c0, 10 - min(0, vc * (n - 1)), w - 11 - max(0, vc * (n - 1))))
        targets.append(TargetSpec(r0, c0, float(vr), float(vc), amplitude, radius))
    kw = dict(targets=tuple(targets), seed=seed)
    kw.update(overrides)
    return SynthSpec(**kw)


def smooth_background(height: int, width: int, n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Drifting smooth field with values roughly in [0.1, 0.55]."""
    rows = np.arange(height)[:, None] / height
    cols = np.arange(width)[None, :] / width
    base = 0.25 + rng.uniform(-0.05, 0.05) * rows + rng.uniform(-0.05, 0.05) * cols
    n_bumps = 6
    centers = rng.uniform(-0.1, 1.1, size=(n_bumps, 2))
    widths = rng.uniform(0.15, 0.35, size=n_bumps)
    heights = rng.uniform(0.03, 0.1, size=n_bumps) * rng.choice([-1.0, 1.0], size=n_bumps)
    pan = rng.uniform(-1, 1, size=2) * 2e-3  # fraction of the frame per frame
    pulse = rng.uniform(0.005, 0.02, size=n_bumps)  # relative brightness change per frame
    phase = rng.uniform(0, 2 * np.pi, size=n_bumps)
    out = np.empty((n_frames, height, width))
    for f in range(n_frames):
        frame = base.copy()
        for b in range(n_bumps):
            cr, cc = centers[b] + pan * f
            amp = heights[b] * (1 + 0.3 * np.sin(phase[b] + pulse[b] * 2 * np.pi * f))
            frame += amp * np.exp(-((rows - cr) ** 2 + (cols - cc) ** 2) / (2 * widths[b] ** 2))
        out[f] = frame
    return out


def _block_ring(rng: np.random.Generator, rank: int, dims: Sequence[int], hub: int) -> list[np.ndarray]:
    # Bond index 0 carries a constant rank-one ring routed through middle
    # index 0 of the hub core; bond indices 1.. carry a zero-mean Gaussian ring
    # routed through the remaining middle indices of the hub.
    cores = []
    for k, d in enumerate(dims):
        g = np.zeros((rank, d, rank))
        if rank > 1:
            g[1:, :, 1:] = rng.standard_normal((rank - 1, d, rank - 1)) / np.sqrt(rank - 1)
        if k == hub:
            g[1:, 0, 1:] = 0.0
            g[0, 0, 0] = 1.0
        else:
            g[0, :, 0] = 1.0
        cores.append(g)
    return cores


def planted_btr(shape: Sequence[int], ranks: Sequence[int], rng: np.random.Generator,
                offset: float = 0.5, contrast: float = 0.5) -> tuple[np.ndarray, BTRFactors]:
    """Exact BTR tensor ``offset + contrast * W / max|W|`` and its factors.

    ``W`` is a zero-mean random BTR of ranks ``(R1-1, R-1, R2-1)``; together
    with the constant part the result has BTR ranks exactly ``ranks``. Needs
    ``R >= 2`` for a nonconstant result.
    """
    nw1, nw2, nt, np_ = (int(s) for s in shape)
    r1, r, r2 = (int(x) for x in ranks)
    left = _block_ring(rng, r1, (nw1, nw2, r), hub=2)
    right = _block_ring(rng, r2, (r, nt, np_), hub=0)
    f = BTRFactors(tuple(left), tuple(right))
    w = btr_compose(f) - 1.0
    m = float(np.max(np.abs(w)))
    # the two blocks are decoupled, so each can be rescaled independently
    left[2][0, 0, 0] = offset
    if m > 0:
        left[0][1:, :, 1:] *= contrast / m
    f = BTRFactors(tuple(left), tuple(right))
    return btr_compose(f), f


def btr_background(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    cfg = PatchConfig(nw=spec.nw, nt=spec.nt)
    pos = grid_positions(spec.height, spec.width, cfg)
    out = np.empty((spec.n_frames, spec.height, spec.width))
    for start in range(0, spec.n_frames, spec.nt):
        t, _ = planted_btr((spec.nw, spec.nw, spec.nt, len(pos)), spec.ranks, rng, 0.3, 0.2)
        prov = PatchProvenance(pos, start, (spec.height, spec.width))
        out[start:start + spec.nt] = reconstruct(PatchTensor4D(t, prov))
    return out


def render_blob(shape: tuple[int, int], row: float, col: float, amplitude: float,
                radius: float) -> np.ndarray:
    sigma = radius / 2.0
    rr = np.arange(shape[0])[:, None] - row
    cc = np.arange(shape[1])[None, :] - col
    return amplitude * np.exp(-(rr ** 2 + cc ** 2) / (2 * sigma ** 2))


def synth_sequence(spec: SynthSpec) -> tuple[np.ndarray, dict[int, list[Target]]]:
    """Frames ``(n_frames, height, width)`` in [0, 1] and per-frame centroids."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    h, w, n = spec.height, spec.width, spec.n_frames
    if spec.background == "smooth":
        frames = smooth_background(h, w, n, rng)
    elif spec.background == "btr":
        frames = btr_background(spec, rng)
    else:
        frames = np.full((n, h, w), float(spec.level))
    gt: dict[int, list[Target]] = {}
    for f in range(n):
        for tg in spec.targets:
            r, c = tg.position(f)
            frames[f] += render_blob((h, w), r, c, tg.amplitude, tg.radius)
            gt.setdefault(f, []).append(Target(r, c))
    if spec.noise > 0:
        frames += rng.normal(0.0, spec.noise, size=frames.shape)
    np.clip(frames, 0.0, 1.0, out=frames)
    return frames, gt
