"""Exact-tensor oracles: analytic benchmark functions, dense arrays, synthetic targets.

An oracle evaluates the target tensor at arbitrary node multi-indices:
``value_at`` takes a single 1-based multi-index, ``values0`` an ``(L, d)``
array of 0-based indices (the bulk path used by the Monte-Carlo estimators).

Grid rule: node ``i`` (1-based) of every coordinate sits at coordinate value
``x = i``.  The unit grid keeps the inverse-radius benchmark finite (no node
at the origin) and makes the Gaussian-plus-sines benchmark use raw indices.
"""

from __future__ import annotations

import numpy as np

from .model import CPModel, as_index0, cp_values0

__all__ = [
    "DENSE_CAP",
    "TensorOracle",
    "InverseRadiusOracle",
    "GaussianSineOracle",
    "DenseArrayOracle",
    "RankOneOracle",
    "CPSyntheticOracle",
    "inverse_radius_at",
    "gaussian_sines_at",
]

# Largest node count for which a dense target array may be materialized.
DENSE_CAP = 10_000_000

# Both analytic benchmarks are six-dimensional.
_BENCH_ORDER = 6

# The Gaussian bump of the gaussian-plus-sines benchmark is anchored at
# node 50 of every coordinate regardless of N.
_BUMP_NODE = 50


class TensorOracle:
    """Base class: lazily evaluable exact tensor on a rectangular node grid."""

    kind = "abstract"

    def __init__(self, dims):
        dims = tuple(int(n) for n in dims)
        if len(dims) < 2 or any(n < 1 for n in dims):
            raise ValueError(f"invalid oracle dims {dims}")
        self.dims = dims

    @property
    def d(self) -> int:
        return len(self.dims)

    def value_at(self, p) -> float:
        """Exact tensor value at a 1-based multi-index."""
        idx0 = as_index0(self.dims, p)
        return float(self.values0(idx0[None, :])[0])

    def values0(self, points0: np.ndarray) -> np.ndarray:
        """Values at an ``(L, d)`` array of 0-based node indices."""
        raise NotImplementedError


class InverseRadiusOracle(TensorOracle):
    """Six-dimensional inverse distance from the origin, coordinates scaled by 1/5.

    ``f(x) = 1 / sqrt(sum_s (x_s / 5)^2)`` with ``x_s = i_s`` on the unit grid.
    """

    kind = "f38"

    def __init__(self, N: int):
        super().__init__((N,) * _BENCH_ORDER)

    def values0(self, points0):
        x = points0 + 1.0
        return 5.0 / np.sqrt((x * x).sum(axis=1))


class GaussianSineOracle(TensorOracle):
    """Six-dimensional Gaussian bump plus one sine per coordinate.

    ``f = 5 exp(-rad^2) + sum_s sin(x_s / 5)`` where by default
    ``rad = 0.001 * sum_s (i_s - 50)`` (a signed linear sum).  ``rad_mode``
    selects the radial term: ``"linear"`` is the default form, ``"squared"``
    replaces each deviation by its square,
    ``rad = 0.001 * sum_s (i_s - 50)^2``.
    """

    kind = "f39"

    def __init__(self, N: int, rad_mode: str = "linear"):
        super().__init__((N,) * _BENCH_ORDER)
        if rad_mode not in ("linear", "squared"):
            raise ValueError(f"rad_mode must be 'linear' or 'squared', got {rad_mode!r}")
        self.rad_mode = rad_mode

    def values0(self, points0):
        nodes = points0 + 1.0
        dev = nodes - _BUMP_NODE
        if self.rad_mode == "linear":
            rad = 0.001 * dev.sum(axis=1)
        else:
            rad = 0.001 * (dev * dev).sum(axis=1)
        return 5.0 * np.exp(-rad * rad) + np.sin(nodes / 5.0).sum(axis=1)


class DenseArrayOracle(TensorOracle):
    """Target tensor stored as a dense array; only for desk-scale grids."""

    kind = "dense-array"

    def __init__(self, values: np.ndarray, cap: int = DENSE_CAP):
        values = np.asarray(values, dtype=np.float64)
        if values.size > cap:
            raise ValueError(
                f"dense oracle refused: {values.size} entries exceed the cap of {cap}"
            )
        if not np.isfinite(values).all():
            raise ValueError("dense oracle values must be finite")
        super().__init__(values.shape)
        self.values = values

    def values0(self, points0):
        return self.values[tuple(points0.T)]


class RankOneOracle(TensorOracle):
    """Product of one vector per coordinate: ``f(p) = prod_s v_s[p_s]``."""

    kind = "rank-one-product"

    def __init__(self, vectors):
        self.vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        super().__init__(tuple(v.size for v in self.vectors))

    def values0(self, points0):
        out = np.ones(points0.shape[0])
        for s, v in enumerate(self.vectors):
            out *= v[points0[:, s]]
        return out


class CPSyntheticOracle(TensorOracle):
    """Target defined by a frozen CP model (copied at construction)."""

    kind = "cp-synthetic"

    def __init__(self, model: CPModel):
        self.model = model.copy()
        super().__init__(self.model.dims)

    def values0(self, points0):
        return cp_values0(self.model.cores, points0)


def inverse_radius_at(p, N: int) -> float:
    """Inverse-radius benchmark value at a 1-based multi-index."""
    return InverseRadiusOracle(N).value_at(p)


def gaussian_sines_at(p, N: int, rad_mode: str = "linear") -> float:
    """Gaussian-plus-sines benchmark value at a 1-based multi-index."""
    return GaussianSineOracle(N, rad_mode).value_at(p)
