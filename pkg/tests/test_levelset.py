import numpy as np
import pytest
from scipy.stats import kendalltau, ks_2samp

from hierkendall.copulas import (
    ArchimedeanCopula,
    GaussianCopula,
    copula_cdf,
)
from hierkendall.errors import DomainError, ParameterError, RejectionCapError
from hierkendall.generators import (
    ArchimedeanGenerator,
    independence_generator,
    theta_from_tau,
)
from hierkendall.kendall import closed_form_kendall, kendall_inverse
from hierkendall.levelset import (
    EpsilonRule,
    conditional_levelset_cdf,
    sample_levelset_conditional,
    sample_levelset_conditional_batch,
    sample_levelset_projected,
    sample_levelset_projected_batch,
    sample_levelset_rejection,
    sample_levelset_rejection_batch,
)

CLAYTON2 = ArchimedeanGenerator("clayton", 2.0)
INDEP = independence_generator()


class _StubUniform:
    """Deterministic stand-in feeding fixed uniforms for hand traces."""

    def __init__(self, vals):
        self.vals = np.asarray(vals, dtype=float)

    def random(self, shape=None):
        return self.vals.reshape(shape) if shape is not None else float(self.vals)


class _StubExponential:
    def __init__(self, vals):
        self.vals = np.asarray(vals, dtype=float)

    def standard_exponential(self, shape):
        return self.vals.reshape(shape)


class TestConditionalCdf:
    def test_hand_values(self):
        u = 0.2773500981126146
        assert conditional_levelset_cdf(CLAYTON2, 2, [], 0.2, u) == pytest.approx(0.5)
        assert conditional_levelset_cdf(CLAYTON2, 3, [], 0.2, u) == pytest.approx(0.25)

    def test_one_at_upper_end(self):
        assert conditional_levelset_cdf(CLAYTON2, 4, [], 0.2, 1.0) == 1.0

    def test_zero_at_support_edge(self):
        # the lower endpoint is the quantile curve at the level itself
        assert conditional_levelset_cdf(CLAYTON2, 2, [], 0.2, 0.2) == pytest.approx(
            0.0, abs=1e-12)

    def test_monotone_in_u(self):
        grid = np.linspace(0.21, 0.999, 50)
        vals = conditional_levelset_cdf(CLAYTON2, 3, [], 0.2, grid)
        assert np.all(np.diff(vals) > 0)

    def test_support_violation(self):
        with pytest.raises(DomainError):
            conditional_levelset_cdf(CLAYTON2, 2, [], 0.2, 0.1)


class TestConditionalSampler:
    def test_clayton_hand_trace(self):
        u = sample_levelset_conditional_batch(CLAYTON2, 2, np.array([0.2]),
                                              _StubUniform([0.5]))
        np.testing.assert_allclose(u[0], [0.2773500981126146] * 2, atol=1e-12)

    def test_independence_hand_trace(self):
        u = sample_levelset_conditional_batch(INDEP, 2, np.array([0.25]),
                                              _StubUniform([0.5]))
        np.testing.assert_allclose(u[0], [0.5, 0.5], atol=1e-12)

    def test_boundary_draws_hit_level_curve_corners(self):
        # v -> 1 sends (u1, u2) to (1, z); v -> 0 sends it to (z, 1)
        u = sample_levelset_conditional_batch(CLAYTON2, 2, np.array([0.2]),
                                              _StubUniform([1.0 - 1e-12]))
        assert u[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert u[0, 1] == pytest.approx(0.2, abs=1e-9)
        u = sample_levelset_conditional_batch(CLAYTON2, 2, np.array([0.2]),
                                              _StubUniform([1e-12]))
        assert u[0, 0] == pytest.approx(0.2, abs=1e-9)
        assert u[0, 1] == pytest.approx(1.0, abs=1e-9)

    def test_exactness_random_configs(self):
        rng = np.random.default_rng(17)
        for _ in range(2000):
            fam = rng.choice(["clayton", "gumbel", "frank"])
            g = theta_from_tau(fam, rng.uniform(0.05, 0.9))
            d = int(rng.integers(2, 6))
            z = rng.uniform(0.01, 0.99)
            s = sample_levelset_conditional(g, d, z, rng)
            achieved = copula_cdf(ArchimedeanCopula(g, d), s.u)
            assert abs(achieved - z) < 1e-9
            assert abs(s.z_achieved - z) < 1e-9

    def test_consumes_d_minus_one_uniforms(self):
        vals = _StubUniform([0.3, 0.6, 0.9])
        u = sample_levelset_conditional_batch(CLAYTON2, 4, np.array([0.3]), vals)
        assert u.shape == (1, 4)
        assert copula_cdf(ArchimedeanCopula(CLAYTON2, 4), u[0]) == pytest.approx(
            0.3, abs=1e-9)


class TestProjectedSampler:
    def test_clayton_hand_trace(self):
        u = sample_levelset_projected_batch(CLAYTON2, 2, np.array([0.2]),
                                            _StubExponential([1.0, 1.0]))
        np.testing.assert_allclose(u[0], [0.2773500981126146] * 2, atol=1e-12)

    def test_simplex_corner(self):
        u = sample_levelset_projected_batch(CLAYTON2, 3, np.array([0.37]),
                                            _StubExponential([1.0, 1e-300, 1e-300]))
        np.testing.assert_allclose(u[0], [0.37, 1.0, 1.0], atol=1e-9)

    def test_exactness(self):
        rng = np.random.default_rng(18)
        g = theta_from_tau("gumbel", 0.6)
        z = np.full(500, 0.3)
        u = sample_levelset_projected_batch(g, 4, z, rng)
        achieved = copula_cdf(ArchimedeanCopula(g, 4), u)
        assert np.max(np.abs(achieved - 0.3)) < 1e-9

    def test_equivalent_to_conditional(self):
        g = theta_from_tau("clayton", 0.5)
        z = np.full(10_000, 0.3)
        a = sample_levelset_conditional_batch(g, 3, z, np.random.default_rng(1))
        b = sample_levelset_projected_batch(g, 3, z, np.random.default_rng(2))
        for j in range(3):
            assert ks_2samp(a[:, j], b[:, j]).pvalue > 0.01


class TestCompositionIdentity:
    def test_levels_plus_conditional_reproduce_copula(self):
        # draw v ~ U, z = K^-1(v), then level-set sampling == plain sampling
        for fam in ("clayton", "gumbel", "frank"):
            g = theta_from_tau(fam, 0.5)
            K = closed_form_kendall(g, 2)
            rng = np.random.default_rng(21)
            z = kendall_inverse(K, rng.random(10_000))
            u = sample_levelset_conditional_batch(g, 2, z, rng)
            tau = kendalltau(u[:, 0], u[:, 1]).statistic
            assert tau == pytest.approx(0.5, abs=0.02), fam


class TestRejection:
    def test_band_membership_absolute(self):
        c = ArchimedeanCopula(CLAYTON2, 2)
        rule = EpsilonRule("abs", 0.01)
        s = sample_levelset_rejection(c, 0.2, rule, np.random.default_rng(3))
        assert abs(s.z_achieved - 0.2) < 0.01
        assert s.attempts >= 1
        assert s.method == "rejection"

    def test_relative_rule_bounds_relative_error(self):
        c = ArchimedeanCopula(CLAYTON2, 2)
        rule = EpsilonRule("rel", 0.01)
        rng = np.random.default_rng(4)
        errs = [abs(sample_levelset_rejection(c, 0.2, rule, rng).z_achieved - 0.2) / 0.2
                for _ in range(200)]
        assert max(errs) <= 0.01

    def test_cap_exhaustion(self):
        c = ArchimedeanCopula(CLAYTON2, 2)
        rule = EpsilonRule("abs", 1e-9)
        with pytest.raises(RejectionCapError):
            sample_levelset_rejection(c, 0.2, rule, np.random.default_rng(5),
                                      max_attempts=2000)

    def test_works_for_elliptical(self):
        c = GaussianCopula(np.array([[1.0, 0.5], [0.5, 1.0]]))
        s = sample_levelset_rejection(c, 0.3, EpsilonRule("abs", 0.01),
                                      np.random.default_rng(6))
        assert abs(s.z_achieved - 0.3) < 0.01

    def test_batch_fills_all_targets_within_band(self):
        c = ArchimedeanCopula(CLAYTON2, 2)
        rule = EpsilonRule("rel", 0.05)
        rng = np.random.default_rng(7)
        targets = rng.uniform(0.1, 0.9, size=60)
        out, attempts = sample_levelset_rejection_batch(c, targets, rule, rng)
        achieved = copula_cdf(c, out)
        assert np.all(np.abs(achieved - targets) < 0.05 * targets)
        assert attempts >= 60

    def test_epsilon_rule_validation(self):
        with pytest.raises(ParameterError):
            EpsilonRule("weird", 0.1)
        with pytest.raises(ParameterError):
            EpsilonRule("abs", -1.0)

    def test_batch_assigns_candidate_to_nearest_target(self, monkeypatch):
        # candidate stream with known C(u) values: the first candidate lies
        # inside both targets' bands and must go to the nearer one
        import hierkendall.levelset as ls

        stream = [0.305, 0.310, 0.500, 0.301]

        def fake_sample(c, n, rng):
            out = np.array(stream[:n], dtype=float)[:, None]
            del stream[:n]
            return np.repeat(out, 2, axis=1)

        monkeypatch.setattr(ls, "copula_sample", fake_sample)
        monkeypatch.setattr(ls, "copula_cdf", lambda c, u: u[:, 0].copy())
        monkeypatch.setattr(ls, "_REJECTION_CHUNK", 1)
        c = ArchimedeanCopula(CLAYTON2, 2)
        targets = np.array([0.30, 0.32, 0.50])
        out, attempts = ls.sample_levelset_rejection_batch(
            c, targets, EpsilonRule("abs", 0.012), np.random.default_rng(0))
        # 0.305 is within 0.012 of both 0.30 (d=.005) and 0.32 (d=.015 - no);
        # nearest match wins per candidate, each target filled exactly once
        assert out[0, 0] == pytest.approx(0.305)   # 0.30 <- 0.305
        assert out[1, 0] == pytest.approx(0.310)   # 0.32 <- 0.310
        assert out[2, 0] == pytest.approx(0.500)   # 0.50 <- 0.500
        assert attempts == 3


class TestLevelValidation:
    def test_z_domain(self):
        with pytest.raises(DomainError):
            sample_levelset_conditional(CLAYTON2, 2, 0.0, np.random.default_rng(0))
        with pytest.raises(DomainError):
            sample_levelset_projected(CLAYTON2, 2, 1.0, np.random.default_rng(0))
