"""Run configuration: flat key=value files, CLI overrides, oracle construction.

Config keys are exactly the :class:`~cpmc.solvers.SolverConfig` field names
plus the oracle, dimension and output keys.  Values given on the command
line override values from the file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .model import load_cpd1
from .oracles import (
    CPSyntheticOracle,
    DenseArrayOracle,
    GaussianSineOracle,
    InverseRadiusOracle,
    TensorOracle,
)
from .solvers import SolverConfig

__all__ = ["RunSpec", "parse_config_file", "build_runspec", "make_oracle", "ConfigError"]

ORACLE_KINDS = ("f38", "f39", "cpd", "dense")

# The two analytic benchmarks are six-dimensional.
_BENCH_D = 6


class ConfigError(ValueError):
    """Unusable run configuration (unknown key, bad value, missing file)."""


@dataclass
class RunSpec:
    """One experiment: oracle selection, dimensions, solver settings, outputs."""

    oracle: str = "f38"
    oracle_path: str | None = None
    d: int = 6
    N: int = 100
    solver: SolverConfig | None = None
    cores_out: str = "cores.cpd"
    csv_out: str = "convergence.csv"
    slice_out: str = "slice"
    plot: bool = True

    def __post_init__(self):
        if self.solver is None:
            self.solver = SolverConfig()

    def validate(self) -> None:
        if self.oracle not in ORACLE_KINDS:
            raise ConfigError(f"oracle must be one of {ORACLE_KINDS}, got {self.oracle!r}")
        if self.oracle in ("f38", "f39"):
            if self.d != _BENCH_D:
                raise ConfigError(f"oracle {self.oracle} requires d={_BENCH_D}, got d={self.d}")
            if self.N < 1:
                raise ConfigError("N must be at least 1")
        if self.oracle in ("cpd", "dense"):
            if not self.oracle_path:
                raise ConfigError(f"oracle {self.oracle} requires oracle_path")
            if not Path(self.oracle_path).exists():
                raise ConfigError(f"oracle_path does not exist: {self.oracle_path}")
        try:
            self.solver.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_SOLVER_FIELDS = {f.name: f.type for f in fields(SolverConfig)}

_SPEC_FIELDS = {
    "oracle": str,
    "oracle_path": str,
    "d": int,
    "N": int,
    "cores_out": str,
    "csv_out": str,
    "slice_out": str,
    "plot": bool,
}

_INT_KEYS = {"r", "L_ens", "L_ens_t", "max_sweeps", "master_seed", "d", "N"}
_FLOAT_KEYS = {"eta", "sigma", "eps2", "tau", "pivot_tol"}
_BOOL_KEYS = {"plot"}


def parse_config_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    text = Path(path).read_text()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            lowered = value.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc
    return value


def build_runspec(file_values: dict | None = None, overrides: dict | None = None) -> RunSpec:
    """Merge config-file values and CLI overrides into a validated RunSpec."""
    spec = RunSpec()
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            merged[key] = value
    for key, value in merged.items():
        value = _coerce(key, value)
        if key in _SOLVER_FIELDS:
            setattr(spec.solver, key, value)
        elif key in _SPEC_FIELDS:
            setattr(spec, key, value)
        else:
            known = sorted(set(_SOLVER_FIELDS) | set(_SPEC_FIELDS))
            raise ConfigError(f"unknown config key {key!r}; known keys: {', '.join(known)}")
    spec.validate()
    return spec


def make_oracle(spec: RunSpec) -> TensorOracle:
    """Construct the target tensor oracle selected by the RunSpec."""
    if spec.oracle == "f38":
        return InverseRadiusOracle(spec.N)
    if spec.oracle == "f39":
        return GaussianSineOracle(spec.N, rad_mode=spec.solver.f39_rad)
    if spec.oracle == "cpd":
        model = load_cpd1(spec.oracle_path)
        return CPSyntheticOracle(model)
    if spec.oracle == "dense":
        values = np.load(spec.oracle_path)
        return DenseArrayOracle(values)
    raise ConfigError(f"unknown oracle kind {spec.oracle!r}")
