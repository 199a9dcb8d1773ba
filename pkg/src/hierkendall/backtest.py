"""Portfolio VaR forecasting and exceedance backtesting.

The forecaster plugs copula-model simulations into per-variable marginal
quantile functions, forms weighted portfolio returns, and reads off the
alpha-quantile. Backtests on the resulting hit series:

* Kupiec proportion-of-failures likelihood ratio (unconditional
  coverage, chi-square with 1 df),
* first-order Markov likelihood ratio (independence of hits, chi-square
  with 1 df),
* their sum (conditional coverage, chi-square with 2 df).

GARCH-style marginal filtering is out of scope: feed standardized
residuals or plain returns; marginal quantiles come from the rolling
window (empirically or via fitted normal/Student-t margins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, ParameterError
from .estimation import FitOptions, NodeSpec, fit_two_step, pseudo_observations
from .hierarchical import HierarchicalModel, model_sample
from .levelset import DEFAULT_EPSILON_RULE, DEFAULT_MAX_ATTEMPTS, EpsilonRule
from .rngutil import STREAM_FORECAST, substream

# ---------------------------------------------------------------------------
# marginal models
# ---------------------------------------------------------------------------


class EmpiricalMargin:
    """Quantile function of a data window (linear-interpolated ECDF inverse)."""

    def __init__(self, values):
        self.values = np.sort(np.asarray(values, dtype=float))
        if self.values.size < 2:
            raise DataError("empirical margin needs at least two observations")

    def quantile(self, u):
        return np.quantile(self.values, np.clip(u, 0.0, 1.0))


class NormalMargin:
    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.mu = float(np.mean(values))
        self.sigma = float(np.std(values, ddof=1))

    def quantile(self, u):
        return self.mu + self.sigma * stats.norm.ppf(u)


class StudentTMargin:
    def __init__(self, values):
        df, loc, scale = stats.t.fit(np.asarray(values, dtype=float))
        self.df, self.loc, self.scale = float(df), float(loc), float(scale)

    def quantile(self, u):
        return self.loc + self.scale * stats.t.ppf(u, df=self.df)


MARGIN_KINDS = {"empirical": EmpiricalMargin, "normal": NormalMargin,
                "student_t": StudentTMargin}


def window_margins(window, kind: str = "empirical") -> list:
    """One fitted margin per column of the window."""
    if kind not in MARGIN_KINDS:
        raise ParameterError(f"unknown margin kind {kind!r}")
    window = np.asarray(window, dtype=float)
    return [MARGIN_KINDS[kind](window[:, j]) for j in range(window.shape[1])]


# ---------------------------------------------------------------------------
# VaR forecasting
# ---------------------------------------------------------------------------

def forecast_var(model: HierarchicalModel, margins, weights, level: float,
                 mc: int, rng, method: str = "auto",
                 eps_rule: EpsilonRule = DEFAULT_EPSILON_RULE,
                 max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> float:
    """alpha-quantile (alpha = 1 - level) of the simulated portfolio return.

    ``margins`` is one quantile-function object per variable; ``weights``
    must sum to one.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size != model.n_vars:
        raise ParameterError("one weight per model variable required")
    if abs(weights.sum() - 1.0) > 1e-8:
        raise ParameterError("weights must sum to 1")
    if len(margins) != model.n_vars:
        raise ParameterError("one margin per model variable required")
    if not 0.0 < level < 1.0:
        raise ParameterError("level must be in (0,1)")
    if mc < 1:
        raise ParameterError("mc must be >= 1")
    u = model_sample(model, mc, rng, method=method, eps_rule=eps_rule,
                     max_attempts=max_attempts)
    returns = np.zeros(mc)
    for j, margin in enumerate(margins):
        returns += weights[j] * margin.quantile(u[:, j])
    return float(np.quantile(returns, 1.0 - level))


# ---------------------------------------------------------------------------
# coverage tests
# ---------------------------------------------------------------------------

def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y)


def kupiec_uc(hits, alpha: float):
    """Kupiec proportion-of-failures LR test of unconditional coverage.

    Returns (LR, p) with p from the chi-square(1) upper tail; x = 0 and
    x = T use the 0*log(0) = 0 convention.
    """
    hits = np.asarray(hits, dtype=bool)
    t = hits.size
    if t < 1:
        raise DataError("hit series must be nonempty")
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must be in (0,1)")
    x = int(hits.sum())
    phat = x / t
    ll0 = _xlogy(t - x, 1.0 - alpha) + _xlogy(x, alpha)
    ll1 = _xlogy(t - x, 1.0 - phat if x < t else 1.0) + _xlogy(x, phat if x > 0 else 1.0)
    lr = max(-2.0 * (ll0 - ll1), 0.0) + 0.0
    return lr, float(stats.chi2.sf(lr, df=1))


@dataclass
class IndependenceCoverage:
    lr_ind: float
    p_ind: float
    lr_cc: float
    p_cc: float
    degenerate: bool = False


def christoffersen_tests(hits, alpha: float) -> IndependenceCoverage:
    """First-order Markov independence LR and the joint conditional-coverage LR.

    lr_cc = lr_uc + lr_ind with p-values from chi-square(1) and (2). An
    all-zero or all-one hit series leaves the Markov chain unidentified:
    the result is flagged degenerate with NaN p_ind.
    """
    hits = np.asarray(hits, dtype=bool)
    t = hits.size
    if t < 2:
        raise DataError("need at least two observations for transition counts")
    lr_uc, _ = kupiec_uc(hits, alpha)
    if hits.all() or not hits.any():
        return IndependenceCoverage(math.nan, math.nan, math.nan, math.nan,
                                    degenerate=True)
    a, b = hits[:-1], hits[1:]
    n00 = int(np.sum(~a & ~b))
    n01 = int(np.sum(~a & b))
    n10 = int(np.sum(a & ~b))
    n11 = int(np.sum(a & b))
    pi01 = n01 / (n00 + n01) if n00 + n01 > 0 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 > 0 else 0.0
    pi = (n01 + n11) / (t - 1)
    ll_markov = (_xlogy(n00, 1.0 - pi01 if pi01 < 1 else 1.0)
                 + _xlogy(n01, pi01 if pi01 > 0 else 1.0)
                 + _xlogy(n10, 1.0 - pi11 if pi11 < 1 else 1.0)
                 + _xlogy(n11, pi11 if pi11 > 0 else 1.0))
    ll_iid = (_xlogy(n00 + n10, 1.0 - pi if pi < 1 else 1.0)
              + _xlogy(n01 + n11, pi if pi > 0 else 1.0))
    lr_ind = max(-2.0 * (ll_iid - ll_markov), 0.0)
    lr_cc = lr_uc + lr_ind
    return IndependenceCoverage(
        lr_ind=lr_ind, p_ind=float(stats.chi2.sf(lr_ind, df=1)),
        lr_cc=lr_cc, p_cc=float(stats.chi2.sf(lr_cc, df=2)))


# ---------------------------------------------------------------------------
# rolling backtest
# ---------------------------------------------------------------------------

@dataclass
class BacktestReport:
    level: float
    hits: np.ndarray = field(repr=False)
    n_exceed: int
    lr_uc: float
    lr_ind: float
    lr_cc: float
    p_uc: float
    p_ind: float
    p_cc: float
    window: int
    horizon: int
    degenerate: bool
    var_series: np.ndarray = field(repr=False, default=None)
    realized: np.ndarray = field(repr=False, default=None)


def evaluate_hits(hits, level: float, window: int = 0) -> BacktestReport:
    """Assemble a BacktestReport from a finished hit series."""
    hits = np.asarray(hits, dtype=bool)
    alpha = 1.0 - level
    lr_uc, p_uc = kupiec_uc(hits, alpha)
    ic = christoffersen_tests(hits, alpha)
    return BacktestReport(
        level=level, hits=hits, n_exceed=int(hits.sum()), lr_uc=lr_uc,
        lr_ind=ic.lr_ind, lr_cc=ic.lr_cc, p_uc=p_uc, p_ind=ic.p_ind,
        p_cc=ic.p_cc, window=window, horizon=hits.size, degenerate=ic.degenerate)


def rolling_backtest(data, fit_spec: NodeSpec, level: float, window: int,
                     horizon: int | None = None, weights=None,
                     refit_every: int = 25, mc: int = 10_000,
                     margin_kind: str = "empirical", seed: int = 0,
                     fit_options: FitOptions | None = None,
                     method: str = "auto",
                     eps_rule: EpsilonRule = DEFAULT_EPSILON_RULE,
                     max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> BacktestReport:
    """Moving-window VaR backtest of a hierarchical Kendall copula model.

    For each forecast day the model is (re)fitted on the trailing window's
    pseudo-observations every ``refit_every`` days, margins are refitted on
    the raw window daily, and the portfolio VaR forecast is compared with
    the realized weighted return.
    """
    data = np.asarray(data, dtype=float)
    t_total, n_vars = data.shape
    if window < 10:
        raise ParameterError("window too short")
    max_horizon = t_total - window
    if max_horizon < 1:
        raise DataError(f"data has {t_total} rows; window {window} leaves no "
                        "forecast days")
    horizon = max_horizon if horizon is None else min(horizon, max_horizon)
    weights = (np.full(n_vars, 1.0 / n_vars) if weights is None
               else np.asarray(weights, dtype=float))
    fit_options = fit_options or FitOptions()
    hits = np.zeros(horizon, dtype=bool)
    var_series = np.zeros(horizon)
    realized = np.zeros(horizon)
    model = None
    for t in range(horizon):
        win = data[t:t + window]
        if model is None or t % refit_every == 0:
            u = pseudo_observations(win)
            model = fit_two_step(fit_spec, u, fit_options).model
        margins = window_margins(win, margin_kind)
        rng = substream(seed, STREAM_FORECAST, t)
        var_series[t] = forecast_var(model, margins, weights, level, mc, rng,
                                     method=method, eps_rule=eps_rule,
                                     max_attempts=max_attempts)
        realized[t] = float(weights @ data[t + window])
        hits[t] = realized[t] < var_series[t]
    report = evaluate_hits(hits, level, window)
    report.var_series = var_series
    report.realized = realized
    return report
