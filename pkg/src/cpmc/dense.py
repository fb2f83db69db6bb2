"""Brute-force reference discrepancies and gradients over the full node grid.

Everything here sums over every node of the tensor, so it is only usable
when the grid is desk-scale (product of node counts below the dense cap).
It exists as the exact reference the Monte-Carlo estimators are tested
against, and backs the CLI self-test battery.

Conventions: the global discrepancy is half the mean squared residual over
all nodes; the local discrepancy of coordinate ``c`` at node ``i`` is the
same statistic restricted to the hyperplane of nodes whose coordinate-``c``
index equals ``i``.  Coordinates ``c`` and nodes ``i`` are 1-based here, as
everywhere in the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CPModel
from .oracles import DENSE_CAP, TensorOracle

__all__ = [
    "DenseReport",
    "full_cp_tensor",
    "full_oracle_tensor",
    "dense_global_discrepancy",
    "dense_local_discrepancy",
    "dense_local_gradient",
    "dense_local_gradient_grid",
    "dense_global_gradient",
    "dense_report",
]

_RANK_LETTER = "z"
_AXIS_LETTERS = "abcdefghijklmnop"


def _check_cap(dims, cap: int) -> None:
    size = math.prod(dims)
    if size > cap:
        raise ValueError(
            f"dense reference refused: grid has {size} nodes, cap is {cap}"
        )
    if len(dims) > len(_AXIS_LETTERS):
        raise ValueError(f"dense reference supports at most {len(_AXIS_LETTERS)} coordinates")


def full_cp_tensor(model: CPModel, cap: int = DENSE_CAP) -> np.ndarray:
    """Materialize the model as a dense array (desk-scale grids only)."""
    _check_cap(model.dims, cap)
    letters = _AXIS_LETTERS[: model.d]
    subscripts = ",".join(_RANK_LETTER + l for l in letters) + "->" + letters
    return np.einsum(subscripts, *model.cores, optimize=True)


def full_oracle_tensor(oracle: TensorOracle, cap: int = DENSE_CAP) -> np.ndarray:
    """Evaluate the oracle at every node and return the dense array."""
    _check_cap(oracle.dims, cap)
    size = math.prod(oracle.dims)
    out = np.empty(size)
    chunk = 1 << 16
    for start in range(0, size, chunk):
        flat = np.arange(start, min(start + chunk, size), dtype=np.int64)
        points0 = np.stack(np.unravel_index(flat, oracle.dims), axis=1)
        out[start : start + flat.size] = oracle.values0(points0)
    return out.reshape(oracle.dims)


def _residual_tensor(model: CPModel, oracle: TensorOracle, cap: int) -> np.ndarray:
    if model.dims != tuple(oracle.dims):
        raise ValueError(f"model dims {model.dims} do not match oracle dims {oracle.dims}")
    return full_cp_tensor(model, cap) - full_oracle_tensor(oracle, cap)


def dense_global_discrepancy(model: CPModel, oracle: TensorOracle, cap: int = DENSE_CAP) -> float:
    """Half mean squared residual over every node of the grid."""
    resid = _residual_tensor(model, oracle, cap)
    return float((resid * resid).sum() / (2.0 * resid.size))


def dense_local_discrepancy(
    model: CPModel, oracle: TensorOracle, c: int, i: int, cap: int = DENSE_CAP
) -> float:
    """Half mean squared residual over the hyperplane ``index_c = i``."""
    resid = _residual_tensor(model, oracle, cap)
    _check_coord(model.dims, c, i)
    plane = np.take(resid, i - 1, axis=c - 1)
    return float((plane * plane).sum() / (2.0 * plane.size))


def dense_local_gradient_grid(
    model: CPModel, oracle: TensorOracle, c: int, cap: int = DENSE_CAP
) -> np.ndarray:
    """Derivatives of every local discrepancy of coordinate ``c``.

    Returns the ``(r, N_c)`` array whose column ``i`` is the gradient of the
    local discrepancy at node ``i+1`` with respect to the core column
    ``c``: the hyperplane sum of residual times the product of the other
    coordinates' core columns, divided by the hyperplane node count.
    """
    resid = _residual_tensor(model, oracle, cap)
    c0 = c - 1
    letters = _AXIS_LETTERS[: model.d]
    operands = [resid]
    subs = [letters]
    for s, core in enumerate(model.cores):
        if s == c0:
            continue
        operands.append(core)
        subs.append(_RANK_LETTER + letters[s])
    subscripts = ",".join(subs) + "->" + _RANK_LETTER + letters[c0]
    raw = np.einsum(subscripts, *operands, optimize=True)
    plane_size = resid.size // model.dims[c0]
    return raw / plane_size


def dense_local_gradient(
    model: CPModel, oracle: TensorOracle, c: int, i: int, cap: int = DENSE_CAP
) -> np.ndarray:
    """Gradient of the local discrepancy ``(c, i)`` with respect to its core column."""
    _check_coord(model.dims, c, i)
    return dense_local_gradient_grid(model, oracle, c, cap)[:, i - 1]


def dense_global_gradient(
    model: CPModel, oracle: TensorOracle, cap: int = DENSE_CAP
) -> list[np.ndarray]:
    """Gradient of the global discrepancy, one ``(r, N_s)`` array per coordinate.

    Each component equals the corresponding local-discrepancy derivative
    divided by the node count of its coordinate; the division is the only
    difference, so the scaling identity between the two holds exactly.
    """
    return [
        dense_local_gradient_grid(model, oracle, c, cap) / model.dims[c - 1]
        for c in range(1, model.d + 1)
    ]


@dataclass
class DenseReport:
    """Exact global/local discrepancies and the global gradient of one model.

    ``eps_local`` is a ``(d, max(N_s))`` matrix padded with NaN for
    coordinates with fewer nodes.
    """

    eps_global: float
    eps_local: np.ndarray
    grad: list[np.ndarray]


def dense_report(model: CPModel, oracle: TensorOracle, cap: int = DENSE_CAP) -> DenseReport:
    """Compute every dense statistic in one pass over the residual tensor."""
    resid = _residual_tensor(model, oracle, cap)
    sq = resid * resid
    eps_global = float(sq.sum() / (2.0 * resid.size))
    dims = model.dims
    eps_local = np.full((model.d, max(dims)), np.nan)
    for c0 in range(model.d):
        axes = tuple(s for s in range(model.d) if s != c0)
        plane_size = resid.size // dims[c0]
        eps_local[c0, : dims[c0]] = sq.sum(axis=axes) / (2.0 * plane_size)
    grad = dense_global_gradient(model, oracle, cap)
    return DenseReport(eps_global, eps_local, grad)


def _check_coord(dims, c: int, i: int) -> None:
    if not 1 <= c <= len(dims):
        raise IndexError(f"coordinate {c} out of range 1..{len(dims)}")
    if not 1 <= i <= dims[c - 1]:
        raise IndexError(f"node {i} out of range 1..{dims[c - 1]} for coordinate {c}")
