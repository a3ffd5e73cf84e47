import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd
import pytest

from data.load_data import ReturnPanel
from estimators.errors import NumericError, ValidationError
from experiments.backtest import (
    EW,
    RISK_COLUMNS,
    TRADING_DAYS,
    annualized_risk,
    mvp_weights,
    rebalance_dates,
    rolling_backtest,
)
from experiments.pipelines import PipelineSpec, pipeline_preset


def _covariance(d, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(d, 2))
    return 1e-4 * (B @ B.T + np.diag(rng.uniform(0.5, 3.0, size=d)))


def _panel(d=5, start="2018-01-01", end="2020-12-31", seed=0):
    dates = pd.bdate_range(start, end)
    sigma = _covariance(d, seed)
    R = np.random.default_rng(seed + 1).multivariate_normal(np.zeros(d), sigma, size=len(dates))
    return ReturnPanel(dates, [f"T{j}" for j in range(d)], R), sigma


def test_mvp_weights():
    np.testing.assert_allclose(mvp_weights(np.eye(4)), np.full(4, 0.25))
    np.testing.assert_allclose(mvp_weights(np.diag([1.0, 0.5])), [2 / 3, 1 / 3])
    sigma = _covariance(6, 1)
    w = mvp_weights(np.linalg.inv(sigma))
    assert w.sum() == pytest.approx(1.0)
    # no other fully invested portfolio has lower variance
    for other in (np.full(6, 1 / 6), np.eye(6)[0]):
        assert w @ sigma @ w <= other @ sigma @ other
    with pytest.raises(NumericError):
        mvp_weights(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    with pytest.raises(ValidationError):
        mvp_weights(np.ones((2, 3)))


def test_rebalance_dates():
    dates = pd.bdate_range("2020-01-01", "2020-06-30")
    expected = [pd.Timestamp(t) for t in ("2020-03-02", "2020-04-01", "2020-05-01", "2020-06-01")]
    assert rebalance_dates(dates, 2) == expected
    assert rebalance_dates(dates, 12) == []
    with pytest.raises(ValidationError):
        rebalance_dates(dates, 2, rebalance="weekly")
    with pytest.raises(ValidationError):
        rebalance_dates(dates, 0)


def test_annualized_risk():
    index = pd.DatetimeIndex(["2020-03-02", "2020-03-03", "2020-03-04", "2021-01-04"])
    returns = pd.DataFrame({"A": [0.01, 0.03, np.nan, 0.02], "B": [0.0, 0.0, 0.0, 0.0]}, index=index)
    risks = annualized_risk(returns)
    assert list(risks.columns) == RISK_COLUMNS
    assert list(zip(risks["year"], risks["pipeline"])) == [(2020, "A"), (2020, "B")]
    assert risks.loc[0, "annualized_risk"] == pytest.approx(np.sqrt(TRADING_DAYS) * np.sqrt(2e-4))
    assert risks.loc[1, "annualized_risk"] == 0.0


def test_rolling_backtest():
    panel, sigma = _panel()
    oracle_inverse = np.linalg.inv(sigma)
    spec = PipelineSpec.from_dict({"preset": "POET-SS", "factor_count": "GR"})
    report = rolling_backtest(panel, [spec], window_months=12, oracles={"oracle": lambda train: oracle_inverse})

    assert list(report.returns.columns) == ["POET-SS", "oracle", EW]
    assert report.returns.index[0] == pd.Timestamp("2019-01-01")
    assert not report.gaps
    risks, weights = report.to_frames()
    assert set(risks["year"]) == {2019, 2020}
    assert set(risks["pipeline"]) == {"POET-SS", "oracle", EW}
    assert (risks["annualized_risk"] > 0).all()

    for entry in weights:
        assert sum(entry["weights"].values()) == pytest.approx(1.0)
    n_rebalances = len(rebalance_dates(panel.dates, 12))
    assert len(weights) == 3 * n_rebalances

    w = mvp_weights(oracle_inverse)
    day = pd.Timestamp("2019-06-10")
    row = panel.dates.get_loc(day)
    assert report.returns.loc[day, "oracle"] == pytest.approx(panel.returns[row] @ w)
    assert report.returns.loc[day, EW] == pytest.approx(panel.returns[row].mean())

    oracle_turnover = report.turnover[report.turnover["pipeline"] == "oracle"]["turnover"]
    assert len(oracle_turnover) == n_rebalances - 1
    np.testing.assert_allclose(oracle_turnover, 0.0, atol=1e-12)


def test_training_windows_end_before_rebalance():
    dates = pd.bdate_range("2019-01-01", "2020-06-30")
    R = np.tile(np.arange(len(dates), dtype=float)[:, None], (1, 3))
    panel = ReturnPanel(dates, ["A", "B", "C"], R)
    seen = []

    def oracle(train):
        seen.append((int(train[0, 0]), int(train[-1, 0])))
        return np.eye(3)

    rolling_backtest(panel, [], window_months=6, oracles={"day_index": oracle}, include_ew=False)
    starts = rebalance_dates(dates, 6)
    assert len(seen) == len(starts)
    for (first, last), t in zip(seen, starts):
        assert dates[last] < t
        assert dates[first] >= t - pd.DateOffset(months=6)
        assert last == dates.get_loc(t) - 1


def test_failed_fit_leaves_a_gap():
    panel, sigma = _panel(end="2019-12-31")
    calls = []

    def flaky(train):
        calls.append(1)
        if len(calls) == 2:
            raise NumericError("singular")
        return np.linalg.inv(sigma)

    report = rolling_backtest(panel, [], window_months=12, oracles={"flaky": flaky})
    starts = rebalance_dates(panel.dates, 12)
    assert report.gaps == [{"date": str(starts[1].date()), "pipeline": "flaky", "reason": "singular"}]
    hold = (report.returns.index >= starts[1]) & (report.returns.index < starts[2])
    assert report.returns.loc[hold, "flaky"].isna().all()
    assert report.returns.loc[hold, EW].notna().all()
    flaky_turnover = report.turnover[report.turnover["pipeline"] == "flaky"]
    assert len(flaky_turnover) == len(starts) - 3


@pytest.mark.parametrize(
    "pipelines, oracles, window",
    [
        ([pipeline_preset("POET-SS")], None, 12),
        ([], {EW: lambda train: np.eye(5)}, 12),
        ([], None, 60),
    ],
)
def test_rolling_backtest_errors(pipelines, oracles, window):
    panel, _ = _panel()
    with pytest.raises(ValidationError):
        rolling_backtest(panel, pipelines, window_months=window, oracles=oracles)


def test_weights_ignore_returns_after_the_rebalance():
    panel, _ = _panel()
    starts = rebalance_dates(panel.dates, 12)
    t = starts[len(starts) // 2]
    R = panel.returns.copy()
    later = panel.dates >= t
    R[later] = np.random.default_rng(99).normal(scale=0.05, size=(int(later.sum()), R.shape[1]))
    perturbed = ReturnPanel(panel.dates, panel.tickers, R)

    spec = PipelineSpec.from_dict({"preset": "POET-SS", "factor_count": "GR"})
    sample_inverse = {"sample": lambda train: np.linalg.inv(np.cov(train, rowvar=False))}
    before = rolling_backtest(panel, [spec], window_months=12, oracles=sample_inverse)
    after = rolling_backtest(perturbed, [spec], window_months=12, oracles=sample_inverse)

    def upto(report):
        return [e for e in report.weights if pd.Timestamp(e["date"]) <= t]

    assert [e["date"] for e in upto(before)] == [e["date"] for e in upto(after)]
    assert any(e["date"] == str(t.date()) for e in upto(before))
    for old, new in zip(upto(before), upto(after)):
        assert old["pipeline"] == new["pipeline"]
        assert old["weights"] == new["weights"]
    nxt = str(starts[len(starts) // 2 + 1].date())

    def sample_at(report):
        return next(e["weights"] for e in report.weights if e["date"] == nxt and e["pipeline"] == "sample")

    assert sample_at(before) != sample_at(after)


def test_true_mvp_beats_equal_weight():
    d = 20
    dates = pd.bdate_range("2012-01-02", periods=2000)
    wins = 0
    for seed in range(100):
        sigma = _covariance(d, seed)
        R = np.random.default_rng(1000 + seed).multivariate_normal(np.zeros(d), sigma, size=len(dates))
        panel = ReturnPanel(dates, [f"T{j}" for j in range(d)], R)
        truth = np.linalg.inv(sigma)
        report = rolling_backtest(panel, [], window_months=12, oracles={"true": lambda train: truth})
        risks = report.risks.pivot(index="year", columns="pipeline", values="annualized_risk")
        wins += int(risks["true"].mean() < risks[EW].mean())
    assert wins >= 95
