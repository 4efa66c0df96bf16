"""Threshold-sweep scoring of target maps: 3-D ROC and its AUC family.

For a threshold ``tau`` a pixel is *hot* when its normalized score is
``>= tau``. A ground-truth target is detected when any hot pixel falls inside
its neighborhood (its box if one is given, otherwise the square of Chebyshev
radius ``hit_radius`` around the centroid). Hot pixels outside every target
neighborhood are false pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import FormatError, ParameterError, UndefinedPdError

SNPR_CAP = 1e9
DEFAULT_HIT_RADIUS = 3


@dataclass(frozen=True)
class Target:
    row: float
    col: float
    box_h: Optional[int] = None
    box_w: Optional[int] = None

    def __post_init__(self):
        if (self.box_h is None) != (self.box_w is None):
            raise ParameterError("box_h and box_w must be given together")
        if self.box_h is not None and (self.box_h < 1 or self.box_w < 1):
            raise ParameterError(f"box must be nonempty, got {self.box_h}x{self.box_w}")

    def window(self, shape: tuple[int, int], hit_radius: int = DEFAULT_HIT_RADIUS) -> tuple[slice, slice]:
        """Neighborhood as a pair of slices clipped to the frame."""
        r, c = int(round(self.row)), int(round(self.col))
        if self.box_h is not None:
            r0, c0 = r - self.box_h // 2, c - self.box_w // 2
            r1, c1 = r0 + self.box_h, c0 + self.box_w
        else:
            r0, c0 = r - hit_radius, c - hit_radius
            r1, c1 = r + hit_radius + 1, c + hit_radius + 1
        h, w = shape
        return slice(max(r0, 0), min(r1, h)), slice(max(c0, 0), min(c1, w))


# frame index -> targets in that frame
GroundTruth = Mapping[int, Sequence[Target]]


def neighborhood_mask(shape: tuple[int, int], targets: Iterable[Target],
                      hit_radius: int = DEFAULT_HIT_RADIUS) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for tg in targets:
        mask[tg.window(shape, hit_radius)] = True
    return mask


def detect_at_threshold(score: np.ndarray, tau: float, targets: Sequence[Target],
                        hit_radius: int = DEFAULT_HIT_RADIUS) -> tuple[int, int]:
    """(detected targets, false pixels) for one frame at one threshold."""
    score = np.asarray(score, dtype=float)
    hot = score >= tau
    detected = sum(1 for tg in targets if hot[tg.window(score.shape, hit_radius)].any())
    false_pixels = int(np.count_nonzero(hot & ~neighborhood_mask(score.shape, targets, hit_radius)))
    return detected, false_pixels


def normalize_scores(maps: np.ndarray) -> np.ndarray:
    """Min-max normalize a whole sequence of maps jointly to [0, 1].

    A constant sequence maps to all zeros.
    """
    maps = np.asarray(maps, dtype=float)
    lo, hi = float(maps.min()), float(maps.max())
    if hi <= lo:
        return np.zeros_like(maps)
    return (maps - lo) / (hi - lo)


@dataclass
class RocCurve:
    thresholds: np.ndarray
    pd: np.ndarray
    pf: np.ndarray
    auc_df: float = 0.0
    auc_dtau: float = 0.0
    auc_ftau: float = 0.0
    auc_snpr: float = 0.0
    auc_tdbs: float = 0.0
    auc_odp: float = 0.0
    snpr_capped: bool = False

    def summary(self) -> dict[str, float]:
        return {
            "auc_df": self.auc_df,
            "auc_dtau": self.auc_dtau,
            "auc_ftau": self.auc_ftau,
            "auc_snpr": self.auc_snpr,
            "auc_tdbs": self.auc_tdbs,
            "auc_odp": self.auc_odp,
        }


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def auc_pd_pf(pd: np.ndarray, pf: np.ndarray) -> float:
    """Area under Pd(Pf), anchored at (0, 0) and (1, 1), points sorted by (Pf, Pd)."""
    pts = np.column_stack([np.r_[0.0, pf, 1.0], np.r_[0.0, pd, 1.0]])
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    return _trapezoid(pts[:, 1], pts[:, 0])


def auc_family(auc_dtau: float, auc_ftau: float) -> tuple[float, float, float, bool]:
    """Derived scores (snpr, tdbs, odp, snpr_capped) from the two threshold-domain AUCs.

    ``snpr`` is the ratio ``auc_dtau / auc_ftau``; when ``auc_ftau`` is zero it
    is reported as :data:`SNPR_CAP` with the flag set.
    """
    if auc_ftau < 0:
        raise ParameterError(f"auc_ftau must be nonnegative, got {auc_ftau}")
    if auc_ftau == 0:
        snpr, capped = SNPR_CAP, True
    else:
        snpr, capped = auc_dtau / auc_ftau, False
        if snpr > SNPR_CAP:
            snpr, capped = SNPR_CAP, True
    return snpr, auc_dtau - auc_ftau, auc_dtau + (1.0 - auc_ftau), capped


def roc_sweep(scores: np.ndarray, gt: GroundTruth, n_thresholds: int = 100,
              hit_radius: int = DEFAULT_HIT_RADIUS) -> RocCurve:
    """Sweep ``n_thresholds`` evenly spaced thresholds over [0, 1].

    ``scores`` is a normalized ``(n_frames, height, width)`` stack. Pd pools
    targets over all frames, Pf pools false pixels over all frames and
    divides by the total pixel count.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 2:
        scores = scores[None]
    if n_thresholds < 2:
        raise ParameterError(f"need at least two thresholds, got {n_thresholds}")
    if scores.size and (scores.min() < 0 or scores.max() > 1):
        raise ParameterError("scores must be normalized to [0, 1]")
    n_frames, h, w = scores.shape
    n_targets = sum(len(gt.get(f, ())) for f in range(n_frames))
    if n_targets == 0:
        raise UndefinedPdError("ground truth contains no targets in the scored frames")
    taus = np.linspace(0.0, 1.0, n_thresholds)

    # A target is detected at tau iff its neighborhood max >= tau; false pixels
    # at tau are background scores >= tau. Counting via sorted arrays gives the
    # same numbers as detect_at_threshold frame by frame.
    peaks = []
    background = []
    for f in range(n_frames):
        targets = gt.get(f, ())
        for tg in targets:
            peaks.append(scores[f][tg.window((h, w), hit_radius)].max())
        background.append(scores[f][~neighborhood_mask((h, w), targets, hit_radius)])
    peaks = np.sort(np.asarray(peaks))
    background = np.sort(np.concatenate(background))
    detected = peaks.size - np.searchsorted(peaks, taus, side="left")
    false_px = background.size - np.searchsorted(background, taus, side="left")
    pd = detected / n_targets
    pf = false_px / float(n_frames * h * w)

    curve = RocCurve(taus, pd, pf)
    curve.auc_df = auc_pd_pf(pd, pf)
    curve.auc_dtau = _trapezoid(pd, taus)
    curve.auc_ftau = _trapezoid(pf, taus)
    curve.auc_snpr, curve.auc_tdbs, curve.auc_odp, curve.snpr_capped = auc_family(
        curve.auc_dtau, curve.auc_ftau)
    return curve


def read_ground_truth(path) -> dict[int, list[Target]]:
    """Parse ``frame row col [box_h box_w]`` lines (0-based, whitespace separated)."""
    gt: dict[int, list[Target]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (3, 5):
                raise FormatError(f"{path}:{lineno}: expected 3 or 5 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                row, col = float(parts[1]), float(parts[2])
                box = (int(parts[3]), int(parts[4])) if len(parts) == 5 else (None, None)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            gt.setdefault(frame, []).append(Target(row, col, *box))
    return gt


def write_ground_truth(path, gt: GroundTruth) -> None:
    with open(path, "w") as fh:
        for frame in sorted(gt):
            for tg in gt[frame]:
                fields = [str(frame), f"{tg.row:g}", f"{tg.col:g}"]
                if tg.box_h is not None:
                    fields += [str(tg.box_h), str(tg.box_w)]
                fh.write(" ".join(fields) + "\n")


METRIC_COLUMNS = ["row", "threshold", "pd", "pf", "auc_df", "auc_dtau", "auc_ftau",
                  "auc_snpr", "auc_tdbs", "auc_odp"]


def write_metrics_csv(path, curve: RocCurve) -> None:
    """One ``threshold`` row per sweep point, then a ``summary`` row with the six AUCs."""
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(METRIC_COLUMNS)
        for tau, pd, pf in zip(curve.thresholds, curve.pd, curve.pf):
            wr.writerow(["threshold", repr(float(tau)), repr(float(pd)), repr(float(pf))] + [""] * 6)
        wr.writerow(["summary", "", "", ""] + [repr(float(v)) for v in curve.summary().values()])


def read_metrics_summary(path) -> dict[str, float]:
    import csv

    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["row"] == "summary":
                return {k: float(row[k]) for k in METRIC_COLUMNS[4:]}
    raise FormatError(f"{path}: no summary row")
