"""CP model container, pointwise evaluation, and the CPD1 text format.

A rank-r canonical model of a d-way tensor stores one core matrix per
coordinate.  Core ``s`` has shape ``(r, N_s)``: row ``alpha`` holds the
values of layer ``alpha`` at the ``N_s`` grid nodes of coordinate ``s``.
The model value at a node multi-index ``(i_1, ..., i_d)`` is the sum over
layers of the product of one core column per coordinate.

Node indices are 1-based in the public API, in the CPD1 file format and in
all CLI output; array storage and the bulk evaluation helpers are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CPModel",
    "as_index0",
    "eval_cp",
    "residual_at",
    "factor_products",
    "cp_values0",
    "save_cpd1",
    "load_cpd1",
]

# Bulk evaluation processes points in fixed-size blocks so that the result
# is independent of the caller's batch size.
_CHUNK = 1 << 16


@dataclass(eq=False)
class CPModel:
    """Canonical decomposition state: one ``(r, N_s)`` core per coordinate."""

    cores: list[np.ndarray]

    def __post_init__(self):
        if len(self.cores) < 2:
            raise ValueError("a CP model needs at least two coordinates")
        self.cores = [np.ascontiguousarray(np.asarray(c, dtype=np.float64)) for c in self.cores]
        r = self.cores[0].shape[0]
        if r < 1:
            raise ValueError("rank must be at least 1")
        for s, core in enumerate(self.cores):
            if core.ndim != 2 or core.shape[0] != r:
                raise ValueError(
                    f"core {s + 1}: expected shape (r={r}, N_s), got {core.shape}"
                )
            if core.shape[1] < 1:
                raise ValueError(f"core {s + 1}: needs at least one node")
            if not np.isfinite(core).all():
                raise ValueError(f"core {s + 1} contains non-finite entries")

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def r(self) -> int:
        return self.cores[0].shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(core.shape[1] for core in self.cores)

    def copy(self) -> "CPModel":
        return CPModel([core.copy() for core in self.cores])


def as_index0(dims, p) -> np.ndarray:
    """Validate a 1-based multi-index against ``dims``, return it 0-based."""
    idx = np.asarray(p, dtype=np.int64)
    if idx.shape != (len(dims),):
        raise IndexError(f"multi-index has {idx.size} components, expected {len(dims)}")
    for s, n in enumerate(dims):
        if not 1 <= idx[s] <= n:
            raise IndexError(
                f"component {s + 1} of multi-index is {idx[s]}, valid range is 1..{n}"
            )
    return idx - 1


def eval_cp(model: CPModel, p) -> float:
    """Model value at the 1-based multi-index ``p``."""
    idx0 = as_index0(model.dims, p)
    prod = np.ones(model.r)
    for s, core in enumerate(model.cores):
        prod *= core[:, idx0[s]]
    return float(prod.sum())


def residual_at(model: CPModel, oracle, p) -> float:
    """Pointwise residual: model value minus the exact tensor value at ``p``."""
    if model.dims != tuple(oracle.dims):
        raise IndexError(
            f"model dims {model.dims} do not match oracle dims {tuple(oracle.dims)}"
        )
    return eval_cp(model, p) - oracle.value_at(p)


def factor_products(cores, points0: np.ndarray, skip0: int | None = None) -> np.ndarray:
    """Per-layer products of core columns at many nodes.

    Returns the ``(r, L)`` array whose entry ``(alpha, e)`` is the product
    over coordinates ``s`` (excluding ``skip0``, if given) of
    ``cores[s][alpha, points0[e, s]]``.  ``points0`` is ``(L, d)``, 0-based.
    """
    r = cores[0].shape[0]
    out = np.ones((r, points0.shape[0]))
    for s, core in enumerate(cores):
        if s == skip0:
            continue
        out *= core[:, points0[:, s]]
    return out


def cp_values0(cores, points0: np.ndarray) -> np.ndarray:
    """Model values at an ``(L, d)`` array of 0-based node indices."""
    n = points0.shape[0]
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        block = points0[start : start + _CHUNK]
        out[start : start + block.shape[0]] = factor_products(cores, block).sum(axis=0)
    return out


def save_cpd1(model: CPModel, path) -> None:
    """Write a model to ``path`` in the CPD1 text format.

    Line 1 is ``CPD1 <d> <r>``, line 2 the node counts, then for each
    coordinate the r core rows.  Values are written with 17 significant
    digits, enough to round-trip float64 exactly.
    """
    lines = [f"CPD1 {model.d} {model.r}", " ".join(str(n) for n in model.dims)]
    for core in model.cores:
        for row in core:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cpd1(path) -> CPModel:
    """Read a CPD1 core file written by :func:`save_cpd1`."""
    text = Path(path).read_text()
    tokens_by_line = [line.split() for line in text.splitlines() if line.strip()]
    if not tokens_by_line or tokens_by_line[0][:1] != ["CPD1"]:
        raise ValueError(f"{path}: not a CPD1 file (missing magic header)")
    header = tokens_by_line[0]
    if len(header) != 3:
        raise ValueError(f"{path}: malformed CPD1 header {' '.join(header)!r}")
    d, r = int(header[1]), int(header[2])
    if len(tokens_by_line) < 2:
        raise ValueError(f"{path}: missing dimension line")
    dims = [int(t) for t in tokens_by_line[1]]
    if len(dims) != d:
        raise ValueError(f"{path}: expected {d} node counts, found {len(dims)}")
    rows = tokens_by_line[2:]
    if len(rows) != d * r:
        raise ValueError(f"{path}: expected {d * r} core rows, found {len(rows)}")
    cores = []
    pos = 0
    for s, n in enumerate(dims):
        core = np.empty((r, n))
        for alpha in range(r):
            row = rows[pos]
            pos += 1
            if len(row) != n:
                raise ValueError(
                    f"{path}: core {s + 1} row {alpha + 1} has {len(row)} values, expected {n}"
                )
            core[alpha] = [float(t) for t in row]
        cores.append(core)
    return CPModel(cores)
