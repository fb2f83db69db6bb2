"""Solver tests: random start, sweep semantics, method equivalences, full runs."""

import numpy as np
import pytest

from cpmc import (
    CPModel,
    CPSyntheticOracle,
    DenseArrayOracle,
    SolverConfig,
    als_sweep,
    dense_global_discrepancy,
    init_random_start,
    local_system,
    newton_sweep,
    run,
    sd_sweep,
    sample_hyperplane_ensemble,
)
from cpmc.solvers import measure_grid


def make_oracle(dims, seed):
    rng = np.random.default_rng(seed)
    return DenseArrayOracle(rng.uniform(0.5, 1.5, size=dims))


class TestRandomStart:
    def test_zero_dispersion_gives_ones(self):
        model = init_random_start((3, 4), 2, sigma=0.0, master_seed=1)
        for core in model.cores:
            assert np.array_equal(core, np.ones_like(core))

    def test_sample_statistics(self):
        # 1e5 entries: mean within 1 +/- 0.01, std within 0.1 +/- 0.01
        model = init_random_start((50_000, 50_000), 1, sigma=0.1, master_seed=2)
        entries = np.concatenate([core.ravel() for core in model.cores])
        assert entries.size == 100_000
        assert abs(entries.mean() - 1.0) < 0.01
        assert abs(entries.std() - 0.1) < 0.01

    def test_deterministic(self):
        a = init_random_start((4, 5, 6), 3, sigma=0.1, master_seed=3)
        b = init_random_start((4, 5, 6), 3, sigma=0.1, master_seed=3)
        for x, y in zip(a.cores, b.cores):
            assert np.array_equal(x, y)
        c = init_random_start((4, 5, 6), 3, sigma=0.1, master_seed=4)
        assert not np.array_equal(a.cores[0], c.cores[0])


class TestConfigValidation:
    def test_defaults_are_valid(self):
        SolverConfig().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"method": "bogus"},
            {"r": 0},
            {"L_ens": 0},
            {"L_ens_t": 0},
            {"eta": -1.0},
            {"sigma": -0.1},
            {"eps2": 0.0},
            {"max_sweeps": 0},
            {"tau_mode": "exact"},
            {"tau": 0.0},
            {"master_seed": -1},
            {"f39_rad": "cubic"},
            {"pivot_tol": 0.0},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs).validate()


class TestSweeps:
    def test_quadratic_landing_after_newton_sweep(self):
        # re-drawing the sweep ensembles shows zero gradient at every node
        dims, r = (4, 4, 4), 2
        oracle = make_oracle(dims, seed=11)
        cfg = SolverConfig(method="newton", r=r, L_ens=400, eta=1e-5, master_seed=12)
        model = init_random_start(dims, r, cfg.sigma, cfg.master_seed)
        # only the last coordinate's columns still see their sweep ensembles
        # unchanged afterwards, so check coordinate d
        model, _ = newton_sweep(model, oracle, cfg, sweep_no=1)
        c = len(dims)
        for i in range(1, dims[c - 1] + 1):
            ens = sample_hyperplane_ensemble(dims, c, i, cfg.L_ens, (cfg.master_seed, 1))
            system = local_system(model, oracle, ens, cfg.eta)
            assert np.abs(system.grad).max() < 1e-10

    def test_exact_fit_zero_eta_is_stationary(self):
        dims, r = (4, 4, 4), 2
        target = init_random_start(dims, r, 0.2, master_seed=13)
        oracle = CPSyntheticOracle(target)
        cfg = SolverConfig(method="newton", r=r, L_ens=300, eta=0.0, master_seed=13)
        model = target.copy()
        before = [core.copy() for core in model.cores]
        model, stats = newton_sweep(model, oracle, cfg, sweep_no=1)
        assert stats.skipped_singular == 0
        for core, prev in zip(model.cores, before):
            assert np.abs(core - prev).max() < 1e-10

    def test_newton_als_equivalence(self):
        dims, r = (4, 6, 4), 3
        oracle = make_oracle(dims, seed=14)
        cfg = SolverConfig(method="newton", r=r, L_ens=500, eta=1e-5, master_seed=15)
        base = init_random_start(dims, r, 0.5, master_seed=16)
        newton_model, _ = newton_sweep(base.copy(), oracle, cfg, sweep_no=1)
        als_model, _ = als_sweep(base.copy(), oracle, cfg, sweep_no=1)
        for a, b in zip(newton_model.cores, als_model.cores):
            assert np.abs(a - b).max() <= 1e-10

    def test_als_zero_oracle_zeroes_columns(self):
        dims, r = (4, 4, 4), 2
        oracle = DenseArrayOracle(np.zeros(dims))
        cfg = SolverConfig(method="als", r=r, L_ens=200, eta=1e-4, master_seed=17)
        model = init_random_start(dims, r, 0.1, master_seed=17)
        model, _ = als_sweep(model, oracle, cfg, sweep_no=1)
        for core in model.cores:
            assert np.abs(core).max() == 0.0

    def test_sd_exact_fit_no_movement(self):
        dims, r = (4, 4, 4), 2
        target = init_random_start(dims, r, 0.2, master_seed=18)
        oracle = CPSyntheticOracle(target)
        cfg = SolverConfig(method="steepest-descent", r=r, L_ens=300, eta=0.0, master_seed=18)
        model = target.copy()
        before = [core.copy() for core in model.cores]
        model, _ = sd_sweep(model, oracle, cfg, sweep_no=1)
        for core, prev in zip(model.cores, before):
            assert np.abs(core - prev).max() < 1e-12

    def test_sd_rank_one_step_equals_newton(self):
        dims, r = (4, 4, 4), 1
        oracle = make_oracle(dims, seed=19)
        cfg = SolverConfig(method="steepest-descent", r=r, L_ens=300, eta=1e-5, master_seed=20)
        base = init_random_start(dims, r, 0.1, master_seed=21)
        sd_model, _ = sd_sweep(base.copy(), oracle, cfg, sweep_no=1)
        newton_model, _ = newton_sweep(base.copy(), oracle, cfg, sweep_no=1)
        for a, b in zip(sd_model.cores, newton_model.cores):
            assert np.abs(a - b).max() < 1e-12

    def test_sd_auto_step_never_increases_quadratic_model(self):
        dims, r = (4, 4, 4), 3
        oracle = make_oracle(dims, seed=22)
        model = init_random_start(dims, r, 0.3, master_seed=23)
        for c, i in [(1, 1), (2, 3), (3, 4)]:
            ens = sample_hyperplane_ensemble(dims, c, i, 400, (24, 1))
            system = local_system(model, oracle, ens, eta=1e-5)
            grad = system.grad
            tau = float(grad @ grad) / float(grad @ system.hess @ grad)
            delta = -tau * grad
            change = float(grad @ delta) + 0.5 * float(delta @ system.hess @ delta)
            assert change <= 0.0

    def test_sd_fixed_tau(self):
        dims, r = (4, 4, 4), 2
        oracle = make_oracle(dims, seed=25)
        cfg = SolverConfig(
            method="steepest-descent", r=r, L_ens=300, eta=1e-5,
            tau_mode="fixed", tau=0.05, master_seed=26,
        )
        base = init_random_start(dims, r, 0.1, master_seed=26)
        stepped, _ = sd_sweep(base.copy(), oracle, cfg, sweep_no=1)
        # first coordinate's columns moved by exactly tau times their gradient
        c = 1
        for i in range(1, dims[0] + 1):
            ens = sample_hyperplane_ensemble(dims, c, i, cfg.L_ens, (cfg.master_seed, 1))
            system = local_system(base, oracle, ens, cfg.eta)
            expected = base.cores[0][:, i - 1] - cfg.tau * system.grad
            assert np.abs(stepped.cores[0][:, i - 1] - expected).max() < 1e-15

    def test_singular_nodes_skipped_not_fatal(self):
        # zero cores with eta = 0 degenerate every local matrix
        dims, r = (3, 3, 3), 2
        oracle = make_oracle(dims, seed=27)
        cfg = SolverConfig(method="newton", r=r, L_ens=100, eta=0.0, master_seed=28)
        model = CPModel([np.zeros((r, n)) for n in dims])
        model, stats = newton_sweep(model, oracle, cfg, sweep_no=1)
        assert stats.skipped_singular == sum(dims)
        for core in model.cores:
            assert np.array_equal(core, np.zeros_like(core))

    def test_jacobi_within_coordinate(self):
        # node updates of one coordinate must not see each other: updating
        # with a permuted node order gives identical results
        dims, r = (5, 4, 4), 2
        oracle = make_oracle(dims, seed=29)
        cfg = SolverConfig(method="newton", r=r, L_ens=300, eta=1e-5, master_seed=30)
        model = init_random_start(dims, r, 0.1, cfg.master_seed)
        swept, _ = newton_sweep(model.copy(), oracle, cfg, sweep_no=1)

        manual = model.copy()
        from cpmc.linalg import gauss_jordan_invert
        from cpmc.mc import local_system_and_rhs

        for c in range(1, 4):
            c0 = c - 1
            new_core = manual.cores[c0].copy()
            for i in reversed(range(1, dims[c0] + 1)):  # reversed node order
                ens = sample_hyperplane_ensemble(dims, c, i, cfg.L_ens, (cfg.master_seed, 1))
                system, _ = local_system_and_rhs(manual, oracle, ens, cfg.eta)
                new_core[:, i - 1] = (
                    manual.cores[c0][:, i - 1] - gauss_jordan_invert(system.hess) @ system.grad
                )
            manual.cores[c0] = new_core
        for a, b in zip(swept.cores, manual.cores):
            assert np.array_equal(a, b)


class TestRun:
    def test_synthetic_equal_to_init_stops_immediately(self):
        dims, r = (4, 4, 4), 2
        cfg = SolverConfig(method="newton", r=r, L_ens=300, L_ens_t=2000,
                           eta=1e-5, sigma=0.1, eps2=1e-6, max_sweeps=10, master_seed=31)
        target = init_random_start(dims, r, cfg.sigma, cfg.master_seed)
        oracle = CPSyntheticOracle(target)
        model, records = run(oracle, cfg)
        assert len(records) == 1
        assert records[-1].eps_mc <= cfg.eps2

    def test_rank_one_recovery(self):
        dims = (4, 4, 4)
        rng = np.random.default_rng(32)
        target = CPModel([1 + 0.2 * rng.standard_normal((1, n)) for n in dims])
        oracle = CPSyntheticOracle(target)
        cfg = SolverConfig(method="als", r=1, L_ens=800, L_ens_t=2000,
                           eta=1e-8, sigma=0.1, eps2=1e-14, max_sweeps=5, master_seed=33)
        model, records = run(oracle, cfg)
        assert dense_global_discrepancy(model, oracle) < 1e-10

    def test_rank_three_recovery(self):
        # exactly parameterized recovery only succeeds from a good start
        # basin, so the target uses well-separated factors and the seed is
        # chosen to land in one; over-parameterized recovery is exercised
        # separately by the self-test battery
        dims = (6, 6, 6)
        rng = np.random.default_rng(34)
        target = CPModel([rng.standard_normal((3, n)) for n in dims])
        oracle = CPSyntheticOracle(target)
        cfg = SolverConfig(method="newton", r=3, L_ens=2000, L_ens_t=5000,
                           eta=1e-9, sigma=1.0, eps2=1e-12, max_sweeps=30, master_seed=36)
        model, records = run(oracle, cfg)
        assert dense_global_discrepancy(model, oracle) < 1e-8

    def test_all_methods_converge_on_tiny_instance(self):
        # shared-start comparison target: every scheme must solve it
        from dataclasses import replace

        dims = (4, 4, 4)
        rng = np.random.default_rng(70)
        target = CPModel([1 + 0.2 * rng.standard_normal((2, n)) for n in dims])
        oracle = CPSyntheticOracle(target)
        base = SolverConfig(r=3, L_ens=500, L_ens_t=2000, eta=1e-8, sigma=0.1,
                            eps2=1e-8, max_sweeps=150, master_seed=71)
        for method in ("newton", "als", "steepest-descent"):
            model, _ = run(oracle, replace(base, method=method))
            assert dense_global_discrepancy(model, oracle) < 1e-6

    def test_run_is_deterministic(self):
        dims = (4, 4, 4)
        oracle = make_oracle(dims, seed=36)
        cfg = SolverConfig(method="newton", r=2, L_ens=200, L_ens_t=1000,
                           eta=1e-5, sigma=0.1, eps2=1e-10, max_sweeps=4, master_seed=37)
        model_a, records_a = run(oracle, cfg)
        model_b, records_b = run(oracle, cfg)
        assert records_a == records_b or all(
            (ra.sweep, ra.eps_mc, ra.eps_grid_mean, ra.grad_norm)
            == (rb.sweep, rb.eps_mc, rb.eps_grid_mean, rb.grad_norm)
            for ra, rb in zip(records_a, records_b)
        )
        for a, b in zip(model_a.cores, model_b.cores):
            assert np.array_equal(a, b)

    def test_non_convergence_is_normal_return(self):
        dims = (4, 4, 4)
        oracle = make_oracle(dims, seed=38)
        cfg = SolverConfig(method="steepest-descent", r=2, L_ens=100, L_ens_t=500,
                           eta=1e-5, sigma=0.1, eps2=1e-30, max_sweeps=3, master_seed=39)
        model, records = run(oracle, cfg)
        assert len(records) == cfg.max_sweeps
        assert records[-1].eps_mc > cfg.eps2
        assert all(rec.eps_mc >= 0 and rec.eps_grid_mean >= 0 and rec.grad_norm >= 0
                   for rec in records)

    def test_measure_grid_deterministic_and_positive(self):
        dims = (4, 4, 4)
        oracle = make_oracle(dims, seed=40)
        cfg = SolverConfig(r=2, L_ens=200, master_seed=41)
        model = init_random_start(dims, cfg.r, 0.1, cfg.master_seed)
        a = measure_grid(model, oracle, cfg, sweep_no=0)
        b = measure_grid(model, oracle, cfg, sweep_no=0)
        assert a.eps_grid_mean == b.eps_grid_mean
        assert a.grad_norm == b.grad_norm
        assert a.eps_grid_mean > 0.0
        assert a.nodes == sum(dims)
