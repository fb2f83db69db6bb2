"""Small-instance property battery behind the ``selftest`` CLI command.

Every check runs at dense-feasible sizes (order 3, a handful of nodes per
coordinate, rank 1..3) so the Monte-Carlo estimators can be held against
the exact dense reference.  All randomness is fixed-seeded; the battery is
deterministic and completes in well under a minute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dense, mc
from .linalg import SingularMatrixError, gauss_jordan_invert
from .model import CPModel
from .oracles import CPSyntheticOracle, DenseArrayOracle
from .solvers import SolverConfig, als_sweep, newton_sweep, run

__all__ = ["CheckResult", "run_selftest", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _random_model(dims, r, seed, sigma=0.3):
    rng = np.random.default_rng(seed)
    return CPModel([1.0 + sigma * rng.standard_normal((r, n)) for n in dims])


def _random_dense_oracle(dims, seed):
    rng = np.random.default_rng(seed)
    return DenseArrayOracle(rng.uniform(0.5, 1.5, size=dims))


def _rel_err(approx, exact):
    scale = max(np.abs(exact).max(), 1e-30)
    return float(np.abs(approx - exact).max() / scale)


def check_mc_unbiased(_):
    """Ensemble means of the MC discrepancies sit within 3 sigma of dense values."""
    dims, r = (4, 6, 4), 2
    model = _random_model(dims, r, seed=11)
    oracle = _random_dense_oracle(dims, seed=12)
    n_resample, L = 200, 1000

    exact_global = dense.dense_global_discrepancy(model, oracle)
    estimates = np.array([
        mc.global_discrepancy(
            model, oracle, mc.sample_global_ensemble(dims, L, (777, k))
        )
        for k in range(n_resample)
    ])
    gap = abs(estimates.mean() - exact_global)
    bound = 3.0 * estimates.std(ddof=1) / np.sqrt(n_resample)
    if gap > bound:
        return False, f"global estimator biased: |mean-exact|={gap:.3e} > 3se={bound:.3e}"

    c, i = 2, 3
    exact_local = dense.dense_local_discrepancy(model, oracle, c, i)
    estimates = np.array([
        mc.local_discrepancy(
            model, oracle, mc.sample_hyperplane_ensemble(dims, c, i, L, (778, k)), eta=0.0
        )
        for k in range(n_resample)
    ])
    gap = abs(estimates.mean() - exact_local)
    bound = 3.0 * estimates.std(ddof=1) / np.sqrt(n_resample)
    if gap > bound:
        return False, f"local estimator biased: |mean-exact|={gap:.3e} > 3se={bound:.3e}"
    return True, "global and local estimator means within 3 sigma of dense values"


def check_fd_gradient(corrupt_gradient_sign):
    """Analytic local gradient matches finite differences on a frozen ensemble."""
    dims, r = (4, 4, 4), 2
    model = _random_model(dims, r, seed=21)
    oracle = _random_dense_oracle(dims, seed=22)
    c, i, eta, h = 1, 2, 1e-4, 1e-6
    ens = mc.sample_hyperplane_ensemble(dims, c, i, 500, (779, 1))
    system = mc.local_system(model, oracle, ens, eta)
    grad = -system.grad if corrupt_gradient_sign else system.grad

    fd = np.empty(r)
    for alpha in range(r):
        plus = model.copy()
        plus.cores[c - 1][alpha, i - 1] += h
        minus = model.copy()
        minus.cores[c - 1][alpha, i - 1] -= h
        upper = mc.local_discrepancy(plus, oracle, ens, eta)
        lower = mc.local_discrepancy(minus, oracle, ens, eta)
        fd[alpha] = (upper - lower) / (2.0 * h)
    err = _rel_err(grad, fd)
    if err >= 1e-6:
        return False, f"gradient vs finite differences rel err {err:.3e} >= 1e-6"
    return True, f"gradient FD rel err {err:.1e}"


def check_fd_hessian(_):
    """Gauss-Newton matrix matches finite differences of the gradient."""
    dims, r = (4, 4, 4), 3
    model = _random_model(dims, r, seed=31)
    oracle = _random_dense_oracle(dims, seed=32)
    c, i, eta, h = 3, 1, 1e-5, 1e-6
    ens = mc.sample_hyperplane_ensemble(dims, c, i, 400, (780, 1))
    system = mc.local_system(model, oracle, ens, eta)

    fd = np.empty((r, r))
    for gamma in range(r):
        plus = model.copy()
        plus.cores[c - 1][gamma, i - 1] += h
        minus = model.copy()
        minus.cores[c - 1][gamma, i - 1] -= h
        gp = mc.local_system(plus, oracle, ens, eta).grad
        gm = mc.local_system(minus, oracle, ens, eta).grad
        fd[:, gamma] = (gp - gm) / (2.0 * h)
    err = _rel_err(system.hess, fd)
    if err >= 1e-5:
        return False, f"matrix vs finite differences rel err {err:.3e} >= 1e-5"
    return True, f"matrix FD rel err {err:.1e}"


def check_global_local_identities(_):
    """Global discrepancy is the node mean of locals; gradients scale by 1/N_c."""
    dims, r = (4, 6, 4), 2
    model = _random_model(dims, r, seed=41)
    oracle = _random_dense_oracle(dims, seed=42)
    report = dense.dense_report(model, oracle)
    for c0 in range(len(dims)):
        mean_local = float(np.nanmean(report.eps_local[c0, : dims[c0]]))
        rel = abs(mean_local - report.eps_global) / report.eps_global
        if rel >= 1e-12:
            return False, f"coordinate {c0 + 1}: mean of locals off by rel {rel:.3e}"
    for c in range(1, len(dims) + 1):
        local = dense.dense_local_gradient_grid(model, oracle, c)
        if not np.array_equal(report.grad[c - 1], local / dims[c - 1]):
            return False, f"coordinate {c}: gradient scaling identity not exact"
    return True, "mean-of-locals and gradient-scaling identities hold"


def check_converged_run_stationarity(_):
    """A tightly converged run is stationary for the dense global functional."""
    dims = (4, 4, 4)
    target = _random_model(dims, 2, seed=51, sigma=0.2)
    oracle = CPSyntheticOracle(target)
    # one spare layer keeps the random start out of local minima
    cfg = SolverConfig(
        method="newton", r=3, L_ens=800, L_ens_t=5000, eta=1e-10,
        sigma=0.1, eps2=1e-12, max_sweeps=30, master_seed=52,
    )
    model, records = run(oracle, cfg)
    if records[-1].eps_mc > cfg.eps2:
        return False, f"run did not converge: eps_mc={records[-1].eps_mc:.3e}"
    worst_local = 0.0
    for c in range(1, len(dims) + 1):
        grid = dense.dense_local_gradient_grid(model, oracle, c)
        worst_local = max(worst_local, float(np.linalg.norm(grid, axis=0).max()))
    if worst_local >= 1e-5:
        return False, f"max dense local gradient norm {worst_local:.3e} >= 1e-5"
    global_norm = max(
        float(np.linalg.norm(g, axis=0).max()) for g in dense.dense_global_gradient(model, oracle)
    )
    if global_norm >= 1e-5:
        return False, f"dense global gradient norm {global_norm:.3e} >= 1e-5"
    return True, f"local grads {worst_local:.1e}, global grad {global_norm:.1e}"


def check_newton_als_equivalence(_):
    """Newton and ALS produce the same sweep under shared ensembles and eta."""
    dims, r = (4, 6, 4), 3
    base = _random_model(dims, r, seed=61, sigma=0.5)
    oracle = _random_dense_oracle(dims, seed=62)
    cfg = SolverConfig(method="newton", r=r, L_ens=600, eta=1e-5, master_seed=63)
    m_newton, _ = newton_sweep(base.copy(), oracle, cfg, sweep_no=1)
    m_als, _ = als_sweep(base.copy(), oracle, cfg, sweep_no=1)
    diff = max(
        float(np.abs(a - b).max()) for a, b in zip(m_newton.cores, m_als.cores)
    )
    if diff > 1e-10:
        return False, f"Newton and ALS sweeps differ by {diff:.3e} > 1e-10"
    return True, f"max column difference {diff:.1e}"


def check_quadratic_landing(_):
    """After a Newton step the same-ensemble gradient is zero to roundoff."""
    dims, r = (4, 4, 6), 2
    model = _random_model(dims, r, seed=71, sigma=0.4)
    oracle = _random_dense_oracle(dims, seed=72)
    c, i, eta = 2, 3, 1e-5
    ens = mc.sample_hyperplane_ensemble(dims, c, i, 500, (781, 1))
    system = mc.local_system(model, oracle, ens, eta)
    step = gauss_jordan_invert(system.hess) @ system.grad
    model.cores[c - 1][:, i - 1] -= step
    after = mc.local_system(model, oracle, ens, eta)
    norm = float(np.abs(after.grad).max())
    if norm > 1e-10:
        return False, f"post-step gradient {norm:.3e} > 1e-10"
    return True, f"post-step gradient {norm:.1e}"


def check_exact_recovery(_):
    """A representable synthetic target is recovered to dense eps < 1e-8."""
    dims, r0 = (4, 6, 4), 2
    target = _random_model(dims, r0, seed=81, sigma=0.2)
    oracle = CPSyntheticOracle(target)
    cfg = SolverConfig(
        method="newton", r=3, L_ens=1000, L_ens_t=5000, eta=1e-8,
        sigma=0.1, eps2=1e-13, max_sweeps=10, master_seed=82,
    )
    model, records = run(oracle, cfg)
    eps_dense = dense.dense_global_discrepancy(model, oracle)
    if eps_dense >= 1e-8:
        return False, f"dense discrepancy {eps_dense:.3e} >= 1e-8 after {len(records)} sweeps"
    return True, f"dense discrepancy {eps_dense:.1e} after {len(records)} sweeps"


def check_hessian_psd(_):
    """Every sampled Gauss-Newton matrix is symmetric PSD; eta shifts its spectrum."""
    dims, r, eta = (6, 4, 4), 3, 1e-4
    model = _random_model(dims, r, seed=91)
    oracle = _random_dense_oracle(dims, seed=92)
    for k, (c, i) in enumerate([(1, 1), (2, 3), (3, 4), (1, 6)]):
        ens = mc.sample_hyperplane_ensemble(dims, c, i, 300, (782, k))
        bare = mc.local_system(model, oracle, ens, 0.0).hess
        asym = float(np.abs(bare - bare.T).max())
        if asym > 1e-12:
            return False, f"(c={c}, i={i}): asymmetry {asym:.3e} > 1e-12"
        min_eig = float(np.linalg.eigvalsh(bare).min())
        if min_eig < -1e-12:
            return False, f"(c={c}, i={i}): negative eigenvalue {min_eig:.3e}"
        reg = mc.local_system(model, oracle, ens, eta).hess
        # Cholesky success certifies positive definiteness of H - (eta - slack) I,
        # i.e. the regularized spectrum sits at or above eta.
        slack = 1e-9 * eta
        try:
            np.linalg.cholesky(reg - (eta - slack) * np.eye(r))
        except np.linalg.LinAlgError:
            return False, f"(c={c}, i={i}): regularized matrix spectrum below eta"
    return True, "symmetric PSD, regularized spectrum at or above eta"


def check_gauss_jordan(_):
    """Inverse residual is small on an SPD rank-sized matrix; singular input raises."""
    rng = np.random.default_rng(101)
    b = rng.standard_normal((20, 20))
    spd = b @ b.T + 20.0 * np.eye(20)
    inv = gauss_jordan_invert(spd)
    resid = float(np.abs(spd @ inv - np.eye(20)).max())
    if resid >= 1e-9:
        return False, f"A A^-1 residual {resid:.3e} >= 1e-9"
    singular = np.ones((3, 3))
    try:
        gauss_jordan_invert(singular)
    except SingularMatrixError:
        pass
    else:
        return False, "singular matrix did not raise"
    return True, f"inverse residual {resid:.1e}, singular input raises"


CHECKS = [
    ("mc-unbiased-vs-dense", check_mc_unbiased),
    ("local-gradient-finite-differences", check_fd_gradient),
    ("gauss-newton-matrix-finite-differences", check_fd_hessian),
    ("global-local-identities", check_global_local_identities),
    ("stationarity-of-converged-run", check_converged_run_stationarity),
    ("newton-als-equivalence", check_newton_als_equivalence),
    ("quadratic-landing", check_quadratic_landing),
    ("exact-recovery", check_exact_recovery),
    ("hessian-symmetric-psd", check_hessian_psd),
    ("gauss-jordan-inverse", check_gauss_jordan),
]


def run_selftest(corrupt_gradient_sign: bool = False) -> list[CheckResult]:
    """Run the battery; the corruption flag exists to prove suite sensitivity."""
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            ok, detail = fn(corrupt_gradient_sign)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        results.append(CheckResult(name, ok, f"{detail} [{elapsed:.2f} s]"))
    return results
