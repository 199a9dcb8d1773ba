import math

import numpy as np
import pytest
from scipy.stats import norm

from hierkendall.backtest import (
    EmpiricalMargin,
    NormalMargin,
    christoffersen_tests,
    evaluate_hits,
    forecast_var,
    kupiec_uc,
    rolling_backtest,
    window_margins,
)
from hierkendall.copulas import GaussianCopula, IndependenceCopula
from hierkendall.errors import DataError
from hierkendall.estimation import NodeSpec, build_model
from hierkendall.hierarchical import HierarchicalModel, inner, leaf, model_sample


class StdNormalMargin:
    def quantile(self, u):
        return norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))


def bivariate_gaussian_model(rho):
    return HierarchicalModel(
        root=inner("nest", [leaf("a", [0], IndependenceCopula(1)),
                            leaf("b", [1], IndependenceCopula(1))],
                   GaussianCopula(np.array([[1.0, rho], [rho, 1.0]]))),
        n_vars=2)


class TestKupiec:
    def test_expected_count_gives_lr_zero(self):
        hits = np.zeros(500, dtype=bool)
        hits[:5] = True
        lr, p = kupiec_uc(hits, 0.01)
        assert lr == 0.0
        assert p == 1.0

    def test_gross_overshoot_rejects(self):
        hits = np.zeros(500, dtype=bool)
        hits[:103] = True
        _, p = kupiec_uc(hits, 0.01)
        assert p < 0.005
        assert f"{p:.2f}" == "0.00"

    def test_zero_exceedances(self):
        lr, p = kupiec_uc(np.zeros(100, dtype=bool), 0.01)
        assert lr == pytest.approx(-2.0 * 100.0 * math.log(0.99), abs=1e-12)
        # chi-square(1) tail cross-checked through the normal tail identity
        assert p == pytest.approx(2.0 * norm.sf(math.sqrt(lr)), abs=1e-12)
        assert p == pytest.approx(0.1563, abs=5e-4)

    def test_all_exceedances(self):
        lr, p = kupiec_uc(np.ones(50, dtype=bool), 0.05)
        assert np.isfinite(lr) and lr > 0 and p < 1e-10

    def test_lr_nonnegative_random_series(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            hits = rng.random(100) < 0.05
            lr, p = kupiec_uc(hits, 0.05)
            assert lr >= 0.0
            assert 0.0 <= p <= 1.0


class TestChristoffersen:
    def test_alternating_series_detected(self):
        hits = (np.arange(100) % 2).astype(bool)
        ic = christoffersen_tests(hits, 0.5)
        # exact transition counts: n00=0, n01=50, n10=49, n11=0
        pi = 50.0 / 99.0
        ll_iid = 49.0 * math.log(1.0 - pi) + 50.0 * math.log(pi)
        expected = -2.0 * ll_iid  # Markov likelihood is exactly 1
        assert ic.lr_ind == pytest.approx(expected, rel=1e-12)
        assert ic.p_ind < 0.001

    def test_matched_transition_rates_give_zero(self):
        # n01/(n00+n01) == n11/(n10+n11) == unconditional rate
        hits = np.array([0, 1, 0, 1, 1, 0, 1, 1] * 10, dtype=bool)
        ic = christoffersen_tests(hits, 0.5)
        n01 = np.sum(~hits[:-1] & hits[1:])
        n00 = np.sum(~hits[:-1] & ~hits[1:])
        n11 = np.sum(hits[:-1] & hits[1:])
        n10 = np.sum(hits[:-1] & ~hits[1:])
        if n01 / (n00 + n01) == pytest.approx(n11 / (n10 + n11)):
            assert ic.lr_ind == pytest.approx(0.0, abs=1e-9)

    def test_degenerate_all_zero(self):
        ic = christoffersen_tests(np.zeros(50, dtype=bool), 0.05)
        assert ic.degenerate
        assert math.isnan(ic.p_ind)

    def test_degenerate_all_one(self):
        ic = christoffersen_tests(np.ones(50, dtype=bool), 0.05)
        assert ic.degenerate

    def test_additivity(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            hits = rng.random(200) < 0.06
            if not hits.any() or hits.all():
                continue
            lr_uc, _ = kupiec_uc(hits, 0.05)
            ic = christoffersen_tests(hits, 0.05)
            assert ic.lr_cc == pytest.approx(lr_uc + ic.lr_ind, abs=1e-12)
            assert ic.lr_ind >= -1e-12

    def test_size_calibration_quick(self):
        rng = np.random.default_rng(2)
        rejections = 0
        for _ in range(300):
            hits = rng.random(500) < 0.05
            _, p = kupiec_uc(hits, 0.05)
            rejections += p < 0.05
        assert 0.02 <= rejections / 300 <= 0.09


class TestForecastVar:
    def test_independent_gaussian_analytic(self):
        m = bivariate_gaussian_model(0.0)
        v = forecast_var(m, [StdNormalMargin(), StdNormalMargin()], [0.5, 0.5],
                         0.95, 100_000, np.random.default_rng(11))
        assert v == pytest.approx(norm.ppf(0.05) * math.sqrt(0.5), abs=0.03)

    def test_comonotone_no_diversification(self):
        m = bivariate_gaussian_model(1.0 - 1e-9)
        v = forecast_var(m, [StdNormalMargin(), StdNormalMargin()], [0.5, 0.5],
                         0.95, 100_000, np.random.default_rng(11))
        assert v == pytest.approx(norm.ppf(0.05), abs=0.03)

    def test_single_asset_margin_quantile(self):
        m = HierarchicalModel(
            root=inner("nest", [leaf("a", [0], IndependenceCopula(1))],
                       IndependenceCopula(1)),
            n_vars=1)
        v = forecast_var(m, [StdNormalMargin()], [1.0], 0.95, 200_000,
                         np.random.default_rng(12))
        assert v == pytest.approx(norm.ppf(0.05), abs=0.03)

    def test_level_monotonicity(self):
        m = bivariate_gaussian_model(0.4)
        margins = [StdNormalMargin(), StdNormalMargin()]
        vals = [forecast_var(m, margins, [0.5, 0.5], lvl, 50_000,
                             np.random.default_rng(13)) for lvl in (0.99, 0.95, 0.90)]
        assert vals[0] <= vals[1] <= vals[2]


class TestMargins:
    def test_empirical_margin_quantile(self):
        m = EmpiricalMargin(np.arange(1, 101, dtype=float))
        assert m.quantile(0.5) == pytest.approx(50.5)

    def test_normal_margin(self):
        vals = np.random.default_rng(3).normal(2.0, 3.0, size=20_000)
        m = NormalMargin(vals)
        assert m.quantile(0.5) == pytest.approx(2.0, abs=0.1)

    def test_window_margins_shape(self):
        win = np.random.default_rng(4).normal(size=(100, 3))
        ms = window_margins(win, "empirical")
        assert len(ms) == 3


class TestRolling:
    def test_small_pipeline(self):
        sim_spec = NodeSpec("nest", "frank", children=(
            NodeSpec("c1", "clayton", columns=(0, 1), params={"tau": 0.4}),
            NodeSpec("c2", "gumbel", columns=(2, 3), params={"tau": 0.4}),
        ), params={"tau": 0.4})
        true = build_model(sim_spec, 4)
        u = model_sample(true, 360, np.random.default_rng(30), method="exact")
        data = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        fit_spec = NodeSpec("nest", "frank", children=(
            NodeSpec("c1", "clayton", columns=(0, 1)),
            NodeSpec("c2", "gumbel", columns=(2, 3)),
        ))
        report = rolling_backtest(data, fit_spec, level=0.9, window=300,
                                  horizon=60, refit_every=30, mc=4000, seed=5)
        assert report.horizon == 60
        assert report.hits.size == 60
        assert 0.0 <= report.p_uc <= 1.0
        assert report.var_series.shape == (60,)

    def test_window_too_long_rejected(self):
        data = np.random.default_rng(6).normal(size=(50, 2))
        fit_spec = NodeSpec("nest", "independence", children=(
            NodeSpec("a", "independence", columns=(0,)),
            NodeSpec("b", "independence", columns=(1,)),
        ))
        with pytest.raises(DataError):
            rolling_backtest(data, fit_spec, level=0.95, window=50)

    def test_evaluate_hits_report_fields(self):
        hits = np.zeros(500, dtype=bool)
        hits[::100] = True
        rep = evaluate_hits(hits, 0.99)
        assert rep.n_exceed == 5
        assert rep.p_uc == 1.0
        assert not rep.degenerate
        assert rep.lr_cc == pytest.approx(rep.lr_uc + rep.lr_ind, abs=1e-12)
