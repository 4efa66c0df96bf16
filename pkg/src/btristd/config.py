"""Run configuration: one flat record shared by the config file and the CLI.

The file format is ``key = value`` per line with ``#`` comments. Keys are the
CLI flag names without the leading dashes; dashes and underscores are
interchangeable (``max-iter`` and ``max_iter`` are the same key). Values given
on the command line override the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Any, Mapping, Optional

from .btr_solver import SolverParams
from .errors import FormatError, ParameterError
from .patch_tensor import PatchConfig


@dataclass
class RunConfig:
    # solver
    alpha: float = 1.0
    lambda1: float = 0.1
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 2.0
    rho: float = 0.01
    max_iter: int = 20
    tol: float = 1e-3
    ranks: tuple[int, int, int] = (6, 3, 30)
    H: Optional[float] = None  # when set, lambda1 is derived from H
    init: str = "svd"
    seed: int = 0
    # patch tensor
    nw: int = 60
    stride: Optional[int] = None
    nt: int = 15
    # evaluation
    thresholds: int = 100
    hit_radius: int = 3
    # paths
    input: Optional[str] = None
    ground_truth: Optional[str] = None
    output: Optional[str] = None
    # modes
    overlap: str = "mean"
    jobs: int = 1

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        self.validate()

    def validate(self) -> None:
        self.solver_params()  # raises ParameterError on bad solver fields
        self.patch_config()
        if self.thresholds < 2:
            raise ParameterError(f"thresholds must be >= 2, got {self.thresholds}")
        if self.hit_radius < 0:
            raise ParameterError(f"hit_radius must be >= 0, got {self.hit_radius}")
        if self.overlap not in ("mean", "median"):
            raise ParameterError(f"overlap must be 'mean' or 'median', got {self.overlap!r}")
        if self.jobs < 1:
            raise ParameterError(f"jobs must be >= 1, got {self.jobs}")

    def solver_params(self) -> SolverParams:
        names = {f.name for f in fields(SolverParams)}
        return SolverParams(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def patch_config(self) -> PatchConfig:
        return PatchConfig(nw=self.nw, stride=self.stride, nt=self.nt)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """Build from loosely typed values (strings from a file or CLI are coerced)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for raw_key, value in values.items():
            key = normalize_key(raw_key)
            if key not in known:
                raise ParameterError(f"unknown configuration key {raw_key!r}")
            kwargs[key] = _coerce(key, value)
        return cls(**kwargs)


def normalize_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    return "H" if key.lower() == "h" else key


_INT_KEYS = {"max_iter", "seed", "nw", "stride", "nt", "thresholds", "hit_radius", "jobs"}
_FLOAT_KEYS = {"alpha", "lambda1", "beta1", "beta2", "beta3", "rho", "tol", "H"}


def parse_ranks(value) -> tuple[int, int, int]:
    if isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
    else:
        parts = list(value)
    try:
        ranks = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ParameterError(f"ranks must be 'R1,R,R2' integers, got {value!r}") from exc
    if len(ranks) != 3:
        raise ParameterError(f"ranks must have three entries R1,R,R2, got {value!r}")
    return ranks


def _coerce(key: str, value):
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() in ("none", ""):
        return None
    try:
        if key == "ranks":
            return parse_ranks(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad value for {key}: {value!r}") from exc
    return value.strip() if isinstance(value, str) else value


def read_config_file(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file into raw strings."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise FormatError(f"{path}:{lineno}: empty key")
            out[normalize_key(key)] = value
    return out


def write_config_file(path, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        for f in fields(cfg):
            value = getattr(cfg, f.name)
            if value is None:
                continue
            if f.name == "ranks":
                value = ",".join(str(r) for r in value)
            fh.write(f"{f.name.replace('_', '-')} = {value}\n")
