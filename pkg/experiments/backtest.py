"""
Rolling-window minimum-variance portfolio backtest.

At the first trading day of every month each pipeline is fitted on the
daily returns of the preceding window, the global minimum-variance weights
are formed from the inverse of its estimate, and those weights are held
until the next rebalance.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from data.load_data import ReturnPanel
from estimators.errors import EstimationError, NumericError, ValidationError
from experiments.pipelines import PipelineSpec, fit_pipeline

logger = logging.getLogger(__name__)

TRADING_DAYS = 252
EW = "EW"
RISK_COLUMNS = ["year", "pipeline", "annualized_risk"]

Oracle = Callable[[np.ndarray], np.ndarray]


def mvp_weights(sigma_inv: np.ndarray) -> np.ndarray:
    """Sigma^{-1} 1 / (1' Sigma^{-1} 1)."""
    sigma_inv = np.asarray(sigma_inv, dtype=float)
    if sigma_inv.ndim != 2 or sigma_inv.shape[0] != sigma_inv.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {sigma_inv.shape}")
    raw = sigma_inv @ np.ones(sigma_inv.shape[0])
    total = float(raw.sum())
    if not np.isfinite(total) or abs(total) <= 1e-12 * max(1.0, float(np.abs(raw).sum())):
        raise NumericError("1' Sigma^{-1} 1 is zero or not finite")
    return raw / total


@dataclass
class BacktestReport:
    risks: pd.DataFrame
    returns: pd.DataFrame
    weights: List[dict] = field(default_factory=list)
    turnover: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=["date", "pipeline", "turnover"]))
    gaps: List[dict] = field(default_factory=list)

    def to_frames(self) -> Tuple[pd.DataFrame, List[dict]]:
        """(year, pipeline, annualized_risk) table and the JSON-ready weight history."""
        return self.risks.copy(), list(self.weights)


def rebalance_dates(dates: pd.DatetimeIndex, window_months: int, rebalance: str = "monthly") -> List[pd.Timestamp]:
    """First trading day of each month with a full window of history behind it."""
    if rebalance != "monthly":
        raise ValidationError(f"Unsupported rebalance frequency {rebalance!r}; only 'monthly' is available")
    if window_months < 1:
        raise ValidationError(f"window must be at least one month, got {window_months}")
    months = pd.Series(dates, index=dates).groupby(dates.to_period("M")).first()
    earliest = dates[0] + pd.DateOffset(months=window_months)
    return [t for t in months if t >= earliest]


def annualized_risk(returns: pd.DataFrame) -> pd.DataFrame:
    """sqrt(252) * sd (ddof=1) of daily portfolio returns per calendar year."""
    rows = []
    for name in returns.columns:
        series = returns[name].dropna()
        for year, chunk in series.groupby(series.index.year):
            if chunk.shape[0] < 2:
                continue
            rows.append({"year": int(year), "pipeline": name, "annualized_risk": float(np.sqrt(TRADING_DAYS) * chunk.std(ddof=1))})
    return pd.DataFrame(rows, columns=RISK_COLUMNS)


def rolling_backtest(
    panel: ReturnPanel,
    pipelines: List[PipelineSpec],
    window_months: int = 120,
    rebalance: str = "monthly",
    oracles: Optional[Dict[str, Oracle]] = None,
    threads: int = 1,
    include_ew: bool = True,
) -> BacktestReport:
    """
    Out-of-sample evaluation of the MVP built from each pipeline.

    ``oracles`` maps extra names to callables receiving the training block
    and returning an inverse covariance. A fit that fails at a date leaves a
    gap for that pipeline until the next rebalance.
    """
    oracles = dict(oracles or {})
    for spec in pipelines:
        if spec.factor_count == "Known":
            raise ValidationError(f"{spec.name}: backtest pipelines must select the factor count (ER or GR)")
    names = [p.name for p in pipelines] + list(oracles)
    if include_ew:
        names.append(EW)
    if len(set(names)) != len(names):
        raise ValidationError(f"strategy names must be unique: {names}")

    dates = pd.DatetimeIndex(panel.dates)
    R = np.asarray(panel.returns, dtype=float)
    d = R.shape[1]
    starts = rebalance_dates(dates, window_months, rebalance)
    if not starts:
        raise ValidationError(f"the panel does not cover a {window_months}-month window plus one rebalance")
    ends = starts[1:] + [None]

    def period(k: int):
        t, t_next = starts[k], ends[k]
        train = R[(dates >= t - pd.DateOffset(months=window_months)) & (dates < t)]
        hold = (dates >= t) if t_next is None else ((dates >= t) & (dates < t_next))
        weights: Dict[str, np.ndarray] = {}
        gaps: List[dict] = []
        for spec in pipelines:
            try:
                weights[spec.name] = mvp_weights(fit_pipeline(train, spec).inverse())
            except (EstimationError, np.linalg.LinAlgError) as e:
                logger.warning("backtest: %s skipped at %s: %s", spec.name, t.date(), e)
                gaps.append({"date": str(t.date()), "pipeline": spec.name, "reason": str(e)})
        for name, oracle in oracles.items():
            try:
                weights[name] = mvp_weights(oracle(train))
            except (EstimationError, np.linalg.LinAlgError) as e:
                logger.warning("backtest: %s skipped at %s: %s", name, t.date(), e)
                gaps.append({"date": str(t.date()), "pipeline": name, "reason": str(e)})
        if include_ew:
            weights[EW] = np.full(d, 1.0 / d)
        return t, hold, weights, gaps

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        periods = list(pool.map(period, range(len(starts))))

    returns = pd.DataFrame(np.nan, index=dates, columns=names)
    history: List[dict] = []
    turnover_rows: List[dict] = []
    all_gaps: List[dict] = []
    previous: Dict[str, np.ndarray] = {}
    first = starts[0]
    for t, hold, weights, gaps in periods:
        all_gaps.extend(gaps)
        for name in names:
            if name not in weights:
                previous.pop(name, None)
                continue
            w = weights[name]
            returns.loc[hold, name] = R[hold] @ w
            history.append({"date": str(t.date()), "pipeline": name, "weights": dict(zip(panel.tickers, w.tolist()))})
            if name in previous:
                turnover_rows.append({"date": str(t.date()), "pipeline": name, "turnover": float(np.abs(w - previous[name]).sum())})
            previous[name] = w

    returns = returns.loc[returns.index >= first]
    return BacktestReport(
        risks=annualized_risk(returns),
        returns=returns,
        weights=history,
        turnover=pd.DataFrame(turnover_rows, columns=["date", "pipeline", "turnover"]),
        gaps=all_gaps,
    )
