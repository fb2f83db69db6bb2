"""Monte-Carlo estimators of the hyperplane discrepancies and their derivatives.

The global discrepancy and each local (hyperplane) discrepancy are averages
over node grids far too large to enumerate, so they are estimated on random
ensembles: a global ensemble draws unconstrained uniform multi-indices, a
hyperplane ensemble pins one coordinate to one node and draws the rest.

Sampling is deterministic given a seed path.  The stream for an ensemble is
derived by hashing ``(master_seed, purpose tag, sweep, c, i)`` through
``numpy.random.SeedSequence``, so results do not depend on the order in
which ensembles are drawn, and identical seed paths give bit-identical
ensembles.  Uniform integers come from ``Generator.integers``, which uses
rejection sampling internally (no modulo bias).

For one node update the gradient, the Gauss-Newton matrix, the local
discrepancy and the least-squares right-hand side are all computed from the
same ensemble; this preserves the exact quadratic-model identities the
solvers rely on (Newton lands on the quadratic minimum, Newton equals the
ALS update).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CPModel, cp_values0, factor_products

__all__ = [
    "HyperplaneEnsemble",
    "GlobalEnsemble",
    "LocalSystem",
    "sample_hyperplane_ensemble",
    "sample_global_ensemble",
    "global_discrepancy",
    "local_discrepancy",
    "local_system",
    "local_system_and_rhs",
    "als_rhs",
    "init_stream",
]

# Purpose tags keep the random-start, hyperplane and global streams disjoint.
_TAG_INIT = 0
_TAG_HYPERPLANE = 1
_TAG_GLOBAL = 2


def _stream(master_seed: int, tag: int, *path: int) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("master_seed must be a non-negative integer")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(tag, *path))
    return np.random.default_rng(ss)


def init_stream(master_seed: int) -> np.random.Generator:
    """Generator for the random-start initialization of the cores."""
    return _stream(master_seed, _TAG_INIT)


@dataclass(eq=False)
class HyperplaneEnsemble:
    """Random multi-indices pinned to node ``i`` of coordinate ``c`` (both 1-based).

    ``points0`` is ``(L_ens, d)`` with 0-based node indices; column ``c-1``
    is constant.  ``seed_path`` is the ``(master_seed, sweep, c, i)`` tuple
    that generated the ensemble.
    """

    c: int
    i: int
    points0: np.ndarray
    seed_path: tuple[int, int, int, int]

    def __len__(self) -> int:
        return self.points0.shape[0]


@dataclass(eq=False)
class GlobalEnsemble:
    """Unconstrained uniform multi-indices; ``seed_path`` is ``(master_seed, sweep)``."""

    points0: np.ndarray
    seed_path: tuple[int, int]

    def __len__(self) -> int:
        return self.points0.shape[0]


def sample_hyperplane_ensemble(dims, c: int, i: int, L_ens: int, seed_path) -> HyperplaneEnsemble:
    """Draw ``L_ens`` uniform points on the hyperplane ``index_c = i``.

    ``seed_path`` is the ``(master_seed, sweep)`` prefix; the stored path
    appends ``(c, i)``.  Points are drawn with replacement, each free
    component uniform over its node range.
    """
    d = len(dims)
    if not 1 <= c <= d:
        raise IndexError(f"coordinate {c} out of range 1..{d}")
    if not 1 <= i <= dims[c - 1]:
        raise IndexError(f"node {i} out of range 1..{dims[c - 1]} for coordinate {c}")
    if L_ens < 1:
        raise ValueError("L_ens must be at least 1")
    master_seed, sweep = seed_path
    rng = _stream(master_seed, _TAG_HYPERPLANE, sweep, c, i)
    points0 = np.empty((L_ens, d), dtype=np.int64)
    for s in range(d):
        if s == c - 1:
            points0[:, s] = i - 1
        else:
            points0[:, s] = rng.integers(0, dims[s], size=L_ens)
    return HyperplaneEnsemble(c, i, points0, (master_seed, sweep, c, i))


def sample_global_ensemble(dims, L_ens_t: int, seed_path) -> GlobalEnsemble:
    """Draw ``L_ens_t`` unconstrained uniform multi-indices."""
    if L_ens_t < 1:
        raise ValueError("L_ens_t must be at least 1")
    master_seed, sweep = seed_path
    rng = _stream(master_seed, _TAG_GLOBAL, sweep)
    d = len(dims)
    points0 = np.empty((L_ens_t, d), dtype=np.int64)
    for s in range(d):
        points0[:, s] = rng.integers(0, dims[s], size=L_ens_t)
    return GlobalEnsemble(points0, (master_seed, sweep))


@dataclass(eq=False)
class LocalSystem:
    """Gradient, Gauss-Newton matrix and value of one local discrepancy.

    ``hess`` is exactly the Gauss-Newton matrix: the model is linear in the
    core column being updated, so the residual's second derivatives vanish.
    With regularization ``eta > 0`` the gradient gains ``eta * q`` and the
    matrix ``eta * I``, making it positive definite.
    """

    grad: np.ndarray
    hess: np.ndarray
    eps: float
    ensemble_id: tuple[int, int, int, int]


def _sq_sum(values: np.ndarray) -> float:
    # numpy's pairwise reduction is independent of BLAS thread count,
    # unlike the dot product on long vectors; keeps runs bit-reproducible
    return float(np.sum(values * values))


def global_discrepancy(model: CPModel, oracle, ensemble: GlobalEnsemble) -> float:
    """Monte-Carlo estimate of the global discrepancy (the stopping statistic)."""
    values = cp_values0(model.cores, ensemble.points0)
    resid = values - oracle.values0(ensemble.points0)
    return _sq_sum(resid) / (2.0 * len(ensemble))


def _local_parts(model: CPModel, oracle, ensemble: HyperplaneEnsemble):
    c0 = ensemble.c - 1
    i0 = ensemble.i - 1
    products = factor_products(model.cores, ensemble.points0, skip0=c0)
    column = model.cores[c0][:, i0]
    exact = oracle.values0(ensemble.points0)
    resid = column @ products - exact
    return products, column, exact, resid


def local_discrepancy(model: CPModel, oracle, ensemble: HyperplaneEnsemble, eta: float = 0.0) -> float:
    """Monte-Carlo estimate of one local discrepancy, plus the Tikhonov term."""
    _, column, _, resid = _local_parts(model, oracle, ensemble)
    penalty = 0.5 * eta * float(column @ column)
    return _sq_sum(resid) / (2.0 * len(ensemble)) + penalty


def local_system_and_rhs(
    model: CPModel, oracle, ensemble: HyperplaneEnsemble, eta: float = 0.0
) -> tuple[LocalSystem, np.ndarray]:
    """Local system and the ALS right-hand side from one shared ensemble.

    The right-hand side is the ensemble average of the factor products times
    the exact tensor values; dividing by the ensemble size matches the
    gradient/matrix normalization, so ``hess @ q - rhs = grad`` holds (with
    ``eta = 0``) up to roundoff.
    """
    L = len(ensemble)
    products, column, exact, resid = _local_parts(model, oracle, ensemble)
    # row-wise sums instead of gemv: same cost at these shapes, and the
    # reduction order does not depend on the BLAS thread count
    grad = np.sum(products * resid, axis=1) / L + eta * column
    hess = products @ products.T / L
    hess = 0.5 * (hess + hess.T)  # enforce exact symmetry of the Gram matrix
    hess[np.diag_indices_from(hess)] += eta
    eps = _sq_sum(resid) / (2.0 * L) + 0.5 * eta * float(column @ column)
    rhs = np.sum(products * exact, axis=1) / L
    system = LocalSystem(grad, hess, eps, ensemble.seed_path)
    return system, rhs


def local_system(model: CPModel, oracle, ensemble: HyperplaneEnsemble, eta: float = 0.0) -> LocalSystem:
    """Gradient, Gauss-Newton matrix and discrepancy of one local functional."""
    system, _ = local_system_and_rhs(model, oracle, ensemble, eta)
    return system


def als_rhs(model: CPModel, oracle, ensemble: HyperplaneEnsemble) -> np.ndarray:
    """Ensemble average of factor products times exact tensor values."""
    products = factor_products(model.cores, ensemble.points0, skip0=ensemble.c - 1)
    exact = oracle.values0(ensemble.points0)
    return np.sum(products * exact, axis=1) / len(ensemble)
