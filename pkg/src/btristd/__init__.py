"""Low-rank plus sparse separation of 4D patch tensors with a bilateral tensor-ring background model."""

from .btr_solver import BTRFactors, SolverParams, SolverState, btr_compose, solve, tr_compose
from .correlation import CorrelationReport, analyze
from .evaluation import RocCurve, Target, roc_sweep
from .patch_tensor import PatchConfig, PatchTensor4D, build_tensor, reconstruct
from .pipeline import DetectionResult, detect_sequence
from .synth import SynthSpec, TargetSpec, synth_sequence

__version__ = "0.1.0"

__all__ = [
    "BTRFactors", "SolverParams", "SolverState", "btr_compose", "solve", "tr_compose",
    "CorrelationReport", "analyze", "RocCurve", "Target", "roc_sweep",
    "PatchConfig", "PatchTensor4D", "build_tensor", "reconstruct",
    "DetectionResult", "detect_sequence", "SynthSpec", "TargetSpec", "synth_sequence",
]
