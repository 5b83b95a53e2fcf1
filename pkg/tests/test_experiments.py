import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlasso.experiments import (
    InfeasibleDesignError,
    ReplicationResult,
    SimulationConfig,
    estimation_error,
    gen_beta_star,
    gen_dataset,
    lambda_grids,
    level_counts,
    run_setting,
    summarize,
    write_results,
    write_summary,
)

from oracles import type7_quantile

TABLE_TWO_THIRDS = [339, 226, 151, 100, 67, 45, 30, 20, 13, 9]
TABLE_NEARLY_BALANCED = [125, 118, 112, 107, 101, 96, 92, 87, 83, 79]


class TestLevelCounts:
    def test_table_rows(self):
        assert level_counts(2 / 3, 10, 1000).tolist() == TABLE_TWO_THIRDS
        assert level_counts(0.95, 10, 1000).tolist() == TABLE_NEARLY_BALANCED

    def test_balanced(self):
        assert level_counts(1.0, 10, 1000).tolist() == [100] * 10

    @given(st.floats(0.3, 1.0), st.integers(1, 12), st.integers(0, 2000))
    def test_sums_to_n(self, t, L, extra):
        n = L + extra
        try:
            counts = level_counts(t, L, n)
        except InfeasibleDesignError:
            return
        assert counts.sum() == n
        assert np.all(counts >= 1)
        assert np.all(np.diff(counts) <= 0)

    def test_infeasible(self):
        with pytest.raises(InfeasibleDesignError):
            level_counts(0.1, 10, 50)
        with pytest.raises(InfeasibleDesignError):
            level_counts(1.0, 10, 5)

    def test_bad_t(self):
        with pytest.raises(ValueError):
            level_counts(0.0, 3, 10)


class TestBetaStar:
    def test_setting_one(self):
        rng = np.random.default_rng(0)
        beta = gen_beta_star(1, 3, 10, 10, rng)
        for j, b in enumerate(beta):
            if j < 3:
                assert abs(b.sum()) <= 1e-14
                assert np.linalg.norm(b) == pytest.approx(1.0, abs=1e-14)
            else:
                np.testing.assert_array_equal(b, 0)

    def test_setting_two(self):
        rng = np.random.default_rng(1)
        for b in gen_beta_star(2, 5, 10, 10, rng)[:5]:
            assert np.count_nonzero(b) == 3
            assert np.linalg.norm(b) == pytest.approx(1.0, abs=1e-14)


class TestDataset:
    def cfg(self, **kw):
        return SimulationConfig(**{"p": 4, "L": 5, "n_train": 120, "n_val": 40, **kw})

    def test_counts_honored(self):
        cfg = self.cfg()
        counts = level_counts(cfg.t, cfg.L, cfg.n_train)
        rng = np.random.default_rng(3)
        train, val = gen_dataset(cfg, counts, gen_beta_star(1, 1, 4, 5, rng), rng)
        for v in train.variables:
            np.testing.assert_array_equal(v.counts(), counts)
        for v in val.variables:
            np.testing.assert_array_equal(v.counts(), level_counts(cfg.t, cfg.L, cfg.n_val))

    def test_noise_free(self):
        cfg = self.cfg(sigma=0.0)
        counts = level_counts(cfg.t, cfg.L, cfg.n_train)
        rng = np.random.default_rng(4)
        beta = gen_beta_star(1, 2, 4, 5, rng)
        train, _ = gen_dataset(cfg, counts, beta, rng)
        expected = sum(b[v.codes - 1] for v, b in zip(train.variables, beta))
        np.testing.assert_array_equal(train.y, expected)

    def test_pure_noise_variance(self):
        cfg = SimulationConfig(p=2, L=3, n_train=20_000, n_val=10, sigma=0.2)
        counts = level_counts(cfg.t, cfg.L, cfg.n_train)
        rng = np.random.default_rng(5)
        train, _ = gen_dataset(cfg, counts, [np.zeros(3), np.zeros(3)], rng)
        n = train.y.size
        se = cfg.sigma**2 * np.sqrt(2 / (n - 1))
        assert abs(train.y.var(ddof=1) - cfg.sigma**2) <= 3 * se


class TestGrids:
    def test_example_entry(self):
        grid = lambda_grids(1000, 10, 10, 0.2)
        i = list(grid.kappa).index(0.0)
        # 0.2 * (sqrt(0.01) + sqrt(ln(10) / 1000)), evaluated independently.
        assert grid.group_unscaled[i] == pytest.approx(0.029597051824376164, rel=1e-14)
        assert grid.group_scaled[i] == pytest.approx(0.029597051824376164 / np.sqrt(1000), rel=1e-14)
        assert grid.lasso_unscaled[i] == pytest.approx(0.2 * np.sqrt(np.log(100) / 1000), rel=1e-14)

    def test_lengths(self):
        grid = lambda_grids(1000, 10, 10, 0.2)
        assert len(grid.kappa) == 19 and len(grid.tau) == 11
        assert grid.kappa[0] == -4.0 and grid.kappa[-1] == 5.0
        np.testing.assert_allclose(grid.tau, np.linspace(0, 1, 11), atol=1e-15)
        np.testing.assert_allclose(grid.lasso_scaled * np.sqrt(1000), grid.lasso_unscaled, rtol=1e-14)


class TestSummaries:
    def make(self, errors, method="m"):
        return [ReplicationResult(method, r, 0.0, 1.0, 0.1, e) for r, e in enumerate(errors)]

    def test_single(self):
        (row,) = summarize(self.make([0.3]))
        assert row["min"] == row["q1"] == row["median"] == row["q3"] == row["max"] == 0.3

    def test_constant(self):
        (row,) = summarize(self.make([0.5] * 7))
        assert row["q3"] - row["q1"] == 0

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=40))
    def test_against_sorting(self, errors):
        (row,) = summarize(self.make(errors))
        for key, q in zip(("min", "q1", "median", "q3", "max"), (0, 0.25, 0.5, 0.75, 1)):
            assert row[key] == pytest.approx(type7_quantile(errors, q), rel=1e-12, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_estimation_error_centers_truth(self):
        truth = [np.array([1.0, 2.0, 3.0])]
        assert estimation_error([np.array([-1.0, 0.0, 1.0])], truth) == 0.0


class TestConfig:
    def test_from_mapping(self):
        cfg = SimulationConfig.from_mapping({"setting": "2", "t": "2/3", "n": "500", "methods": "svd, scaling"})
        assert cfg.t == 2 / 3 and cfg.n_train == 500
        assert cfg.method_names == ("svd", "scaling")

    @pytest.mark.parametrize(
        "values",
        [{"setting": "3"}, {"s": "11"}, {"t": "1.5"}, {"reps": "0"}, {"bogus": "1"},
         {"setting": "1", "methods": "svd"}],
    )
    def test_invalid(self, values):
        with pytest.raises(ValueError):
            SimulationConfig.from_mapping(values)


SMALL = dict(p=3, L=4, n_train=80, n_val=40, reps=2, seed=11)


class TestRunSetting:
    @pytest.mark.parametrize("setting", [1, 2])
    def test_smoke(self, setting):
        cfg = SimulationConfig(setting=setting, s=1, **{**SMALL, "reps": 1})
        results = run_setting(cfg)
        assert [r.method for r in results] == list(cfg.method_names)
        for r in results:
            assert np.isfinite(r.est_error) and r.est_error >= 0
            assert r.max_kkt <= 1e-6

    def test_deterministic(self):
        cfg = SimulationConfig(setting=1, s=2, **SMALL)
        a, b = io.StringIO(), io.StringIO()
        write_results(run_setting(cfg), a)
        write_results(run_setting(cfg), b)
        assert a.getvalue() == b.getvalue()

    def test_parallel_matches_serial(self):
        cfg = SimulationConfig(setting=1, s=1, **SMALL)
        assert run_setting(cfg) == run_setting(cfg, jobs=2)

    def test_csv_layout(self):
        cfg = SimulationConfig(setting=1, s=1, **{**SMALL, "reps": 1})
        res = run_setting(cfg)
        out = io.StringIO()
        write_summary(summarize(res), out)
        lines = out.getvalue().splitlines()
        assert lines[0] == "method,count,min,q1,median,q3,max"
        assert len(lines) == 3
