"""Core-update sweeps: Newton, steepest descent and ALS on the local grid.

One sweep visits every coordinate in ascending order and, for each
coordinate, updates all of its core columns.  Coordinates are Gauss-Seidel
(later coordinates see earlier updates within the sweep); nodes within a
coordinate are Jacobi (all node updates read the same pre-coordinate
snapshot), which makes them order-independent: each node touches only its
own column and reads only other coordinates' cores.

Each node update draws a fresh hyperplane ensemble keyed by
``(master_seed, sweep, c, i)``, builds the regularized local system, and
applies the method's correction:

* Newton:            ``q <- q - H^-1 g``
* ALS:               ``q <- H^-1 rhs``
* steepest descent:  ``q <- q - tau g`` with ``tau`` from an exact line
  search on the local quadratic model (``tau = g.g / g.Hg``) or a fixed
  constant.

Runs stop on the Monte-Carlo global discrepancy: the gradient norm is not
monotone enough to serve as a stopping criterion, and the global
discrepancy itself may transiently increase between sweeps without
invalidating the run.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .linalg import PIVOT_TOL, SingularMatrixError, gauss_jordan_invert, solve_local
from .mc import (
    global_discrepancy,
    init_stream,
    local_system_and_rhs,
    sample_global_ensemble,
    sample_hyperplane_ensemble,
)
from .model import CPModel

__all__ = [
    "DEFAULT_MASTER_SEED",
    "SolverConfig",
    "ConvergenceRecord",
    "SweepStats",
    "init_random_start",
    "newton_sweep",
    "als_sweep",
    "sd_sweep",
    "measure_grid",
    "run",
]

log = logging.getLogger(__name__)

# Documented default so that runs are reproducible out of the box.
DEFAULT_MASTER_SEED = 1729

METHODS = ("newton", "als", "steepest-descent")
TAU_MODES = ("auto-quadratic", "fixed")


@dataclass
class SolverConfig:
    """Everything a run needs besides the oracle.

    Field names double as the keys of the flat ``key=value`` run
    configuration files, hence the uppercase ensemble sizes.
    """

    method: str = "newton"
    r: int = 20
    L_ens: int = 1000
    L_ens_t: int = 100_000
    eta: float = 1e-5
    sigma: float = 0.1
    eps2: float = 1e-6
    max_sweeps: int = 50
    tau_mode: str = "auto-quadratic"
    tau: float = 0.1
    master_seed: int = DEFAULT_MASTER_SEED
    f39_rad: str = "linear"
    pivot_tol: float = PIVOT_TOL

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.tau_mode not in TAU_MODES:
            raise ValueError(f"tau_mode must be one of {TAU_MODES}, got {self.tau_mode!r}")
        if self.f39_rad not in ("linear", "squared"):
            raise ValueError(f"f39_rad must be 'linear' or 'squared', got {self.f39_rad!r}")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.L_ens < 1 or self.L_ens_t < 1:
            raise ValueError("ensemble sizes must be at least 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.eps2 <= 0:
            raise ValueError("eps2 must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.pivot_tol <= 0:
            raise ValueError("pivot_tol must be positive")


@dataclass
class ConvergenceRecord:
    """Per-sweep convergence statistics.

    ``eps_mc`` is the fresh-ensemble global estimate used for stopping;
    ``eps_grid_mean`` averages the local discrepancies seen during the
    sweep (pre-update values); ``grad_norm`` is the root-mean-square of all
    local gradient components seen during the sweep.
    """

    sweep: int
    eps_mc: float
    eps_grid_mean: float
    grad_norm: float
    wall_seconds: float


@dataclass
class SweepStats:
    """Aggregates collected while a sweep visits the node grid."""

    eps_sum: float = 0.0
    nodes: int = 0
    grad_sq_sum: float = 0.0
    grad_components: int = 0
    skipped_singular: int = 0
    tau_fallbacks: int = 0

    def observe(self, system) -> None:
        self.eps_sum += system.eps
        self.nodes += 1
        self.grad_sq_sum += float(system.grad @ system.grad)
        self.grad_components += system.grad.size

    @property
    def eps_grid_mean(self) -> float:
        return self.eps_sum / self.nodes if self.nodes else 0.0

    @property
    def grad_norm(self) -> float:
        if not self.grad_components:
            return 0.0
        return float(np.sqrt(self.grad_sq_sum / self.grad_components))


def init_random_start(dims, r: int, sigma: float, master_seed: int) -> CPModel:
    """Cores drawn as 1 plus centered normal noise of standard deviation sigma.

    A uniform start (all entries equal) makes every layer's gradient
    identical and stalls the optimization, so the symmetry must be broken;
    the noise scale trades off stall (too small) against instability (too
    large).
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = init_stream(master_seed)
    cores = [1.0 + sigma * rng.standard_normal((r, n)) for n in dims]
    return CPModel(cores)


def _newton_update(column, system, rhs, cfg, stats):
    return column - solve_local(system, cfg.pivot_tol)


def _als_update(column, system, rhs, cfg, stats):
    return gauss_jordan_invert(system.hess, cfg.pivot_tol) @ rhs


def _sd_update(column, system, rhs, cfg, stats):
    grad = system.grad
    if cfg.tau_mode == "fixed":
        return column - cfg.tau * grad
    curvature = float(grad @ system.hess @ grad)
    if curvature > 0.0:
        tau = float(grad @ grad) / curvature
    else:
        # Cannot happen with eta > 0 (the matrix is positive definite).
        stats.tau_fallbacks += 1
        log.warning(
            "non-positive curvature on hyperplane (c=%d, i=%d); using fixed tau=%g",
            system.ensemble_id[2], system.ensemble_id[3], cfg.tau,
        )
        tau = cfg.tau
    return column - tau * grad


_UPDATES = {
    "newton": _newton_update,
    "als": _als_update,
    "steepest-descent": _sd_update,
}


def _sweep(model: CPModel, oracle, cfg: SolverConfig, sweep_no: int, update):
    dims = model.dims
    stats = SweepStats()
    for c in range(1, model.d + 1):
        c0 = c - 1
        new_core = model.cores[c0].copy()
        for i in range(1, dims[c0] + 1):
            ensemble = sample_hyperplane_ensemble(
                dims, c, i, cfg.L_ens, (cfg.master_seed, sweep_no)
            )
            system, rhs = local_system_and_rhs(model, oracle, ensemble, cfg.eta)
            stats.observe(system)
            column = model.cores[c0][:, i - 1]
            try:
                new_core[:, i - 1] = update(column, system, rhs, cfg, stats)
            except SingularMatrixError as err:
                stats.skipped_singular += 1
                log.warning(
                    "sweep %d: singular local matrix at (c=%d, i=%d), node skipped: %s",
                    sweep_no, c, i, err,
                )
        model.cores[c0] = new_core
    return model, stats


def newton_sweep(model: CPModel, oracle, cfg: SolverConfig, sweep_no: int):
    """One Newton pass over the node grid; updates ``model`` in place."""
    return _sweep(model, oracle, cfg, sweep_no, _newton_update)


def als_sweep(model: CPModel, oracle, cfg: SolverConfig, sweep_no: int):
    """One ALS pass: each column is replaced by the local least-squares solution."""
    return _sweep(model, oracle, cfg, sweep_no, _als_update)


def sd_sweep(model: CPModel, oracle, cfg: SolverConfig, sweep_no: int):
    """One steepest-descent pass with per-node step length."""
    return _sweep(model, oracle, cfg, sweep_no, _sd_update)


def sweep_for(method: str):
    try:
        return _UPDATES[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None


def measure_grid(model: CPModel, oracle, cfg: SolverConfig, sweep_no: int = 0) -> SweepStats:
    """Local discrepancies and gradients over the grid without updating.

    Used for the sweep-0 row of comparison logs; draws the ensembles of the
    given sweep number, which the solvers never reuse (their sweeps count
    from 1).
    """
    dims = model.dims
    stats = SweepStats()
    for c in range(1, model.d + 1):
        for i in range(1, dims[c - 1] + 1):
            ensemble = sample_hyperplane_ensemble(
                dims, c, i, cfg.L_ens, (cfg.master_seed, sweep_no)
            )
            system, _ = local_system_and_rhs(model, oracle, ensemble, cfg.eta)
            stats.observe(system)
    return stats


def _near_zero_fraction(model: CPModel, rel_tol: float = 1e-8) -> float:
    scale = max(float(np.abs(core).max()) for core in model.cores)
    if scale == 0.0:
        return 1.0
    small = sum(int((np.abs(core) <= rel_tol * scale).sum()) for core in model.cores)
    total = sum(core.size for core in model.cores)
    return small / total


def run(oracle, cfg: SolverConfig) -> tuple[CPModel, list[ConvergenceRecord]]:
    """Random start, then sweeps until the global estimate reaches ``eps2``.

    After every sweep the global discrepancy is estimated on a fresh
    ensemble of ``L_ens_t`` points and appended to the history.  Hitting
    ``max_sweeps`` without reaching ``eps2`` is a normal return; the caller
    can tell from the last record.
    """
    cfg.validate()
    update = sweep_for(cfg.method)
    dims = oracle.dims
    model = init_random_start(dims, cfg.r, cfg.sigma, cfg.master_seed)
    records: list[ConvergenceRecord] = []
    for sweep_no in range(1, cfg.max_sweeps + 1):
        start = time.perf_counter()
        model, stats = _sweep(model, oracle, cfg, sweep_no, update)
        wall = time.perf_counter() - start
        ensemble = sample_global_ensemble(dims, cfg.L_ens_t, (cfg.master_seed, sweep_no))
        eps_mc = global_discrepancy(model, oracle, ensemble)
        record = ConvergenceRecord(sweep_no, eps_mc, stats.eps_grid_mean, stats.grad_norm, wall)
        records.append(record)
        log.info(
            "sweep %d: eps_mc=%.6e grid_mean=%.6e grad_rms=%.6e (%.2f s)%s",
            sweep_no, eps_mc, record.eps_grid_mean, record.grad_norm, wall,
            f" [{stats.skipped_singular} nodes skipped]" if stats.skipped_singular else "",
        )
        if eps_mc <= cfg.eps2:
            break
    log.info("near-zero core entries: %.2f%%", 100.0 * _near_zero_fraction(model))
    return model, records
