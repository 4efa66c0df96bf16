"""Command-line front end.

Subcommands
-----------
synth         generate a synthetic sequence and its ground truth
detect        background/target separation of a PGM sequence
analyze-corr  mode-pair correlation report of one patch tensor
eval          ROC sweep and AUC family of saved target maps
pipeline      synth, then detect, then eval (plus the correlation report)

Outputs are written to a staging directory next to the requested output
directory and moved into place only when the command succeeds, so a failed
run leaves nothing half-written behind.
"""

from __future__ import annotations

import argparse
import csv
import logging
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import io as fio
from .config import RunConfig, parse_ranks, read_config_file
from .correlation import analyze, write_report_csv
from .errors import BTRError, InputError, ParameterError
from .evaluation import read_ground_truth, roc_sweep, write_ground_truth, write_metrics_csv
from .patch_tensor import build_tensor
from .pipeline import detect_sequence
from .synth import BACKGROUNDS, default_spec, synth_sequence

log = logging.getLogger("btristd")

SCORES_FILE = "scores.btrt"
GT_FILE = "gt.txt"

# flags that map onto RunConfig fields: (flag, type, help)
_RUN_FLAGS = [
    ("--nw", int, "patch side (default 60)"),
    ("--stride", int, "patch stride (default: equal to --nw)"),
    ("--nt", int, "frames per temporal window (default 15)"),
    ("--ranks", parse_ranks, "BTR ranks R1,R,R2 (default 6,3,30)"),
    ("--alpha", float, "weight of the BTR fit term (default 1)"),
    ("--lambda1", float, "sparsity weight (default 0.1)"),
    ("--H", float, "derive the sparsity weight as H/sqrt(nw*nw*nt)"),
    ("--beta1", float, "weight of the spatial ring coupling (default 1)"),
    ("--beta2", float, "weight of the temporal ring coupling (default 1)"),
    ("--beta3", float, "weight of the data fit term (default 2)"),
    ("--rho", float, "proximal weight (default 0.01)"),
    ("--max-iter", int, "maximum solver sweeps (default 20)"),
    ("--tol", float, "stop when the relative target change drops below this (default 1e-3)"),
    ("--thresholds", int, "number of ROC thresholds (default 100)"),
    ("--hit-radius", int, "detection neighborhood radius in pixels (default 3)"),
    ("--overlap", str, "how overlapping patches are merged: mean or median (default mean)"),
    ("--jobs", int, "temporal windows solved in parallel (default 1)"),
    ("--seed", int, "random seed (default 0)"),
    ("--init", str, "solver start: svd or ones (default svd)"),
]


class _Staging:
    """Collects a command's outputs and publishes them into ``out`` on success."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.partial-", dir=self.out.parent))

    def __enter__(self) -> Path:
        return self.dir

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.out.mkdir(parents=True, exist_ok=True)
            for item in sorted(self.dir.iterdir()):
                dest = self.out / item.name
                if dest.is_dir():
                    shutil.rmtree(dest)
                elif dest.exists():
                    dest.unlink()
                shutil.move(str(item), str(dest))
        shutil.rmtree(self.dir, ignore_errors=True)
        return False


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver, patch and evaluation settings")
    g.add_argument("--config", metavar="PATH", help="flat 'key = value' file; flags override it")
    for flag, typ, text in _RUN_FLAGS:
        g.add_argument(flag, type=typ, default=None, dest=flag.lstrip("-").replace("-", "_"), help=text)


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic scene")
    g.add_argument("--height", type=int, default=256)
    g.add_argument("--width", type=int, default=256)
    g.add_argument("--frames", type=int, default=100)
    g.add_argument("--background", choices=BACKGROUNDS, default="smooth")
    g.add_argument("--noise", type=float, default=0.02)
    g.add_argument("--targets", type=int, default=1, help="number of targets")
    g.add_argument("--amplitude", type=float, default=0.4)
    g.add_argument("--radius", type=float, default=2.0)
    g.add_argument("--speed", type=float, default=0.5, help="pixels per frame")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btristd", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_synth_flags(p)

    p = sub.add_parser("detect", help="separate background and targets")
    p.add_argument("--input", "-i", help="directory of PGM frames")
    p.add_argument("--output", "-o")
    _add_run_flags(p)

    p = sub.add_parser("analyze-corr", help="mode-pair correlation report")
    p.add_argument("--input", "-i", help="directory of PGM frames")
    p.add_argument("--output", "-o")
    p.add_argument("--window-start", type=int, default=0)
    p.add_argument("--side", choices=("left", "right"), default="left")
    _add_run_flags(p)

    p = sub.add_parser("eval", help="ROC sweep of saved target maps")
    p.add_argument("--input", "-i", help="directory of target PGMs or a scores tensor file")
    p.add_argument("--ground-truth", "-g")
    p.add_argument("--output", "-o")
    _add_run_flags(p)

    p = sub.add_parser("pipeline", help="synth -> detect -> eval")
    p.add_argument("--output", "-o")
    _add_run_flags(p)
    _add_synth_flags(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values, then command-line flags on top."""
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for flag, _, _ in _RUN_FLAGS:
        key = flag.lstrip("-").replace("-", "_")
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    for key in ("input", "ground_truth", "output"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig.from_mapping(values)


def _require(cfg: RunConfig, *names: str) -> None:
    for n in names:
        if getattr(cfg, n) is None:
            raise ParameterError(f"missing required setting --{n.replace('_', '-')}")


# -- commands -----------------------------------------------------------------

def _synth_spec(args, seed: int):
    return default_spec(seed, n_targets=args.targets, amplitude=args.amplitude, radius=args.radius,
                        speed=args.speed, height=args.height, width=args.width,
                        n_frames=args.frames, background=args.background, noise=args.noise)


def cmd_synth(args) -> int:
    frames, gt = synth_sequence(_synth_spec(args, args.seed))
    with _Staging(Path(args.output)) as stage:
        fio.save_frames(frames, stage / "frames", bits=16)
        write_ground_truth(stage / GT_FILE, gt)
    print(f"wrote {len(frames)} frames and {sum(map(len, gt.values()))} target positions to {args.output}")
    return 0


def _detect_into(stage: Path, frames: np.ndarray, cfg: RunConfig) -> np.ndarray:
    res = detect_sequence(frames, cfg.patch_config(), cfg.solver_params(), cfg.overlap, cfg.jobs)
    scores = res.scores()
    fio.save_frames(np.clip(res.background, 0.0, 1.0), stage / "background", bits=16)
    fio.save_frames(scores, stage / "target", bits=16)
    fio.write_tensor(stage / SCORES_FILE, scores)
    with open(stage / "timing.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["window", "start", "frames", "iterations", "solve_seconds"])
        for k, w in enumerate(res.windows):
            wr.writerow([k, w.start, cfg.nt, w.iterations, f"{w.seconds:.6f}"])
        wr.writerow(["total", "", len(frames), sum(w.iterations for w in res.windows),
                     f"{sum(w.seconds for w in res.windows):.6f}"])
    return scores


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "input", "output")
    frames = fio.load_frames(cfg.input)
    with _Staging(Path(cfg.output)) as stage:
        _detect_into(stage, frames, cfg)
    print(f"separated {len(frames)} frames into {cfg.output}")
    return 0


def cmd_analyze_corr(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "input", "output")
    frames = fio.load_frames(cfg.input)
    pt = build_tensor(frames, cfg.patch_config(), args.window_start)
    report = analyze(pt.tensor, args.side)
    with _Staging(Path(cfg.output)) as stage:
        write_report_csv(stage / "corr.csv", report)
    for (i, j), (e, c) in report.summary().items():
        print(f"pair {i + 1}-{j + 1}: mean energy ratio {e:.6f}, mean |cos| {c:.6f}")
    return 0


def _load_scores(path: Path) -> np.ndarray:
    if path.is_dir():
        return fio.load_frames(path)
    scores = fio.read_tensor(path)
    if scores.ndim != 3:
        raise InputError(f"{path}: expected an (n_frames, height, width) tensor, got {scores.shape}")
    return scores


def _eval_into(stage: Path, scores: np.ndarray, gt, cfg: RunConfig):
    curve = roc_sweep(scores, gt, cfg.thresholds, cfg.hit_radius)
    write_metrics_csv(stage / "metrics.csv", curve)
    return curve


def _print_curve(curve) -> None:
    for k, v in curve.summary().items():
        print(f"{k} = {v:.6f}")
    if curve.snpr_capped:
        print("(auc_snpr capped: auc_ftau is zero)")


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "input", "ground_truth", "output")
    scores = _load_scores(Path(cfg.input))
    gt = read_ground_truth(cfg.ground_truth)
    with _Staging(Path(cfg.output)) as stage:
        curve = _eval_into(stage, scores, gt, cfg)
    _print_curve(curve)
    return 0


def cmd_pipeline(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "output")
    frames, gt = synth_sequence(_synth_spec(args, cfg.seed))
    with _Staging(Path(cfg.output)) as stage:
        fio.save_frames(frames, stage / "frames", bits=16)
        write_ground_truth(stage / GT_FILE, gt)
        # detect on what was written, so the run matches `synth` + `detect`
        frames = fio.load_frames(stage / "frames")
        _detect_into(stage, frames, cfg)
        pt = build_tensor(frames, cfg.patch_config(), 0)
        write_report_csv(stage / "corr.csv", analyze(pt.tensor))
        curve = _eval_into(stage, fio.load_frames(stage / "target"), gt, cfg)
    _print_curve(curve)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "detect": cmd_detect,
    "analyze-corr": cmd_analyze_corr,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (BTRError, OSError) as exc:
        print(f"btristd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
